import numpy as np
import pytest

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


class AcceptanceLog:
    def record(self, key: str, ok: bool, detail: str):
        _ACCEPTANCE[key] = (bool(ok), detail)
        print(f"ACCEPTANCE {key}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok


@pytest.fixture
def acceptance():
    return AcceptanceLog()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (len(k.split()[0]), k)):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'} | {detail}")
