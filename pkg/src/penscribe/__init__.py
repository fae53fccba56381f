"""penscribe: a simulated 3-axis lead-screw handwriting machine.

Text goes in; a flow-controlled stream of step targets drives an emulated
motion controller against a physical axis model, and the recorded pen-tip
trace comes back out with accuracy and speed measurements.
"""

from .config import HostConfig, Settings, load_settings
from .machine import AxisParams, MachineConfig, StepPosition
from .session import JobResult, VirtualMachine, home_machine, run_job

__version__ = "0.1.0"

__all__ = [
    "AxisParams",
    "HostConfig",
    "JobResult",
    "MachineConfig",
    "Settings",
    "StepPosition",
    "VirtualMachine",
    "home_machine",
    "load_settings",
    "run_job",
    "__version__",
]
