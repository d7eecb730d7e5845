import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict[str, tuple[str, str, str]] = {}


class AcceptanceLog:
    """Collects one verdict per acceptance criterion for the terminal summary."""

    def record(self, cid: str, title: str, failures: list[str], detail: str = "") -> None:
        status = "PASS" if not failures else "FAIL"
        info = "; ".join(failures) if failures else detail
        _ACCEPTANCE[cid] = (status, title, info)

    def skip(self, cid: str, title: str, reason: str) -> None:
        _ACCEPTANCE[cid] = ("SKIP", title, reason)


@pytest.fixture(scope="session")
def acceptance() -> AcceptanceLog:
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: int(c)):
        status, title, info = _ACCEPTANCE[cid]
        line = f"[{status}] criterion {cid:>2}: {title}"
        if info:
            line += f" | {info}"
        terminalreporter.write_line(line)
