import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def dwt_fixture():
    with np.load(FIXTURES / "dwt_bior13_symmetric.npz") as data:
        arrays = dict(data)
    cases = sorted({k.rsplit("_", 1)[0] for k in arrays})
    return [{band: arrays[f"{case}_{band}"] for band in ("x", "ll", "lh", "hl", "hh")} for case in cases]


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Six 32x32 natural/fake pairs; small enough for full train/eval loops."""
    from sidforge.harness import make_toy_corpus

    root = tmp_path_factory.mktemp("tiny")
    make_toy_corpus(root, 6, seed=3, size=32)
    return root


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Record one acceptance criterion's verdict for the terminal summary."""

    def _record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
