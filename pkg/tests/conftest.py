from __future__ import annotations

import numpy as np
import pytest

from ecgsr._runtime import tune_allocator
from ecgsr.signal import WindowPair, make_record
from ecgsr.synth import synth_record_pair

tune_allocator()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_pair(record_id: str = "syn00000", superclass: str = "MI", seed: int = 0, index: int = 0,
              split: str | None = None) -> WindowPair:
    """One clean 5 s window pair straight from the synthetic generator (no filtering)."""
    lr, hr = synth_record_pair(record_id, superclass, seed, duration=5.0, lr_fs=50.0, hr_fs=500.0)
    return WindowPair(lr, hr, superclass, record_id, index, split=split)


@pytest.fixture
def pair():
    return make_pair()


@pytest.fixture
def record_12x1000(rng):
    return make_record(rng.normal(size=(12, 1000)), 100.0, "r001", "MI")


# -- acceptance reporting ---------------------------------------------------

_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """``acceptance(n, ok, detail)`` prints and records one PASS/FAIL line."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
