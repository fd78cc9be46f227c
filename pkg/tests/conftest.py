import os
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = Path(os.environ.get("CELLATTN_DATA", ROOT / "data"))


def have_dataset(name: str) -> bool:
    return (DATA_DIR / name / f"{name}_A.txt").exists()


@pytest.fixture(scope="session")
def mutag():
    if not have_dataset("MUTAG"):
        pytest.skip("MUTAG not available")
    from cellattn.data import parse_tud
    return parse_tud(DATA_DIR, "MUTAG")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
