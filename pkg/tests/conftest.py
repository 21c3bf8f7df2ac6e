import pytest

from raqr.atomdata import load_parameter_table, load_quantum_defects
from raqr.pipeline import Receiver

#: Filled by tests/test_acceptance.py: criterion number -> (passed, detail).
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def cs():
    """Caesium species constants and quantum-defect table."""
    return load_quantum_defects()


@pytest.fixture(scope="session")
def table_4l():
    return load_parameter_table("cs_2c4l")


@pytest.fixture(scope="session")
def table_5l():
    return load_parameter_table("cs_3c5l")


@pytest.fixture(scope="session")
def rx_4l(table_4l):
    return Receiver(table_4l)


@pytest.fixture(scope="session")
def rx_5l(table_5l):
    return Receiver(table_5l)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
