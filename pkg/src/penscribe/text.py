"""Line segmentation for job text.

Greedy word fill: words (whitespace-separated, so newlines and tabs act as
separators too) are packed onto lines joined by single spaces, never
exceeding the limit except that a word longer than a whole line is
hard-split into limit-sized chunks. No characters are reordered or
dropped, and re-segmenting the joined output is idempotent.
"""

from __future__ import annotations


def segment_text(text: str, chars_per_line: int) -> list[str]:
    if chars_per_line < 1:
        raise ValueError(f"chars_per_line must be >= 1, got {chars_per_line}")
    lines: list[str] = []
    current = ""
    for word in text.split():
        while len(word) > chars_per_line:
            if current:
                lines.append(current)
                current = ""
            lines.append(word[:chars_per_line])
            word = word[chars_per_line:]
        if not current:
            current = word
        elif len(current) + 1 + len(word) <= chars_per_line:
            current += " " + word
        else:
            lines.append(current)
            current = word
    if current:
        lines.append(current)
    return lines
