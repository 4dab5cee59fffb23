"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import re
from pathlib import Path

import pytest

from subalign.data_model import Feature, FeatureSchema

_VERDICTS: dict[str, tuple[bool, str]] = {}


def record_verdict(criterion: str, passed: bool, detail: str) -> None:
    _VERDICTS[criterion] = (bool(passed), detail)


@pytest.fixture
def verdict():
    return record_verdict


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")

    def order(key):
        m = re.match(r"criterion (\d+)(\w?)", key)
        return (int(m.group(1)), m.group(2)) if m else (99, key)

    for key in sorted(_VERDICTS, key=order):
        ok, detail = _VERDICTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")


@pytest.fixture
def tiny_schema() -> FeatureSchema:
    return FeatureSchema(
        (
            Feature("pitch", "audio", "eGeMAPs"),
            Feature("mfcc_0", "audio", "MFCC"),
            Feature("AU01_r", "visual", "FAU"),
        )
    )


def write_frames(path: Path, names, rows) -> Path:
    lines = ["frame," + ",".join(names)]
    lines += [f"{i}," + ",".join(str(v) for v in row) for i, row in enumerate(rows)]
    path.write_text("\n".join(lines) + "\n")
    return path
