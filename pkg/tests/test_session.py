import pytest

from penscribe.config import Settings, load_settings
from penscribe.firmware import Mode
from penscribe.session import MachineFault, VirtualMachine, home_machine, run_job


def fast_settings(**extra) -> Settings:
    over = {"flex_gain_mm_per_mm": "0.005"}
    over.update({k: str(v) for k, v in extra.items()})
    return load_settings(None, over)


class TestHomeMachine:
    def test_homes_to_origin(self):
        vm = VirtualMachine(fast_settings())
        took = home_machine(vm)
        assert took > 0
        assert vm.firmware.homed
        assert vm.tip_mm()[:2] == (0.0, 0.0)

    def test_disconnected_switch_raises(self):
        vm = VirtualMachine(fast_settings(), switch_connected=(True, False, True))
        with pytest.raises(MachineFault):
            home_machine(vm)


class TestRunJob:
    def test_small_job_completes_clean(self):
        r = run_job("hi", fast_settings())
        assert r.status == "ok"
        assert r.stream.points_done == r.stream.points_total > 0
        assert r.max_deviation_mm is not None and r.max_deviation_mm < 0.3
        assert r.max_depth_error_mm is not None
        assert r.svg.startswith(b"<?xml")
        assert len(r.plan.lines) == 1

    def test_machine_idle_pen_lifted_after_job(self):
        settings = fast_settings()
        vm = VirtualMachine(settings)
        run_job("on", settings, vm=vm)
        assert vm.firmware.mode is Mode.IDLE
        assert not vm.machine.pen_down()
        assert len(vm.firmware.queue) == 0

    def test_empty_text_homes_and_reports(self):
        r = run_job("", fast_settings())
        assert r.status == "ok"
        assert r.stream.points_total == 0
        assert r.max_deviation_mm is None

    def test_report_fields(self):
        r = run_job("ab", fast_settings())
        d = r.report_dict()
        for key in (
            "text", "lines", "points_total", "points_done", "status",
            "duration_s", "max_deviation_mm", "writing_speed_mm_min",
        ):
            assert key in d
        assert d["points_done"] <= d["points_total"]

    def test_abort_mid_job_lifts_pen(self):
        settings = fast_settings()
        vm = VirtualMachine(settings)
        seen = {"dones": 0}

        def on_feedback(fb, t):
            from penscribe.protocol import MoveDone

            if isinstance(fb, MoveDone):
                seen["dones"] += 1

        r = run_job(
            "hello hello hello",
            settings,
            vm=vm,
            on_feedback=on_feedback,
            should_abort=lambda: seen["dones"] >= 5,
        )
        assert r.status == "aborted"
        assert 0 < r.stream.points_done < r.stream.points_total
        assert vm.firmware.mode is Mode.IDLE
        assert not vm.machine.pen_down()

    def test_phase_sequence(self):
        phases = []
        run_job("a", fast_settings(), on_phase=phases.append)
        assert phases == ["homing", "writing", "done"]

    def test_two_jobs_back_to_back_share_machine(self):
        settings = fast_settings()
        vm = VirtualMachine(settings)
        r1 = run_job("ab", settings, vm=vm)
        r2 = run_job("cd", settings, vm=vm)
        assert r1.status == "ok" and r2.status == "ok"
