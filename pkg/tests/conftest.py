import contextlib
import time

import pytest

_ACCEPTANCE: list[tuple[int, str, bool, str]] = []


class _Criterion:
    def __init__(self) -> None:
        self.detail = ""


@pytest.fixture
def criterion():
    """Record one acceptance criterion; failures still propagate."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        c = _Criterion()
        start = time.perf_counter()
        try:
            yield c
        except BaseException as exc:
            _ACCEPTANCE.append((number, title, False, f"{c.detail} {type(exc).__name__}: {exc}".strip()))
            raise
        _ACCEPTANCE.append((number, title, True, f"{c.detail} [{time.perf_counter() - start:.2f}s]".strip()))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE):
        first = detail.splitlines()[0] if detail else ""
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {number:>2}. {title}: {first}")
