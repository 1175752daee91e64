import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def disk(shape, center, radius):
    rr, cc = np.mgrid[0 : shape[0], 0 : shape[1]]
    return (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius ** 2


# acceptance results: criterion number -> list of (check, passed, detail)
ACCEPTANCE = {}


def record_acceptance(criterion, check, passed, detail=""):
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(passed), detail))
    line = f"criterion {criterion} [{check}]: {'PASS' if passed else 'FAIL'} {detail}"
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[criterion]
        ok = all(p for _, p, _ in checks)
        parts = "; ".join(f"{c}: {'ok' if p else 'FAILED'} {d}".rstrip() for c, p, d in checks)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {parts}")
