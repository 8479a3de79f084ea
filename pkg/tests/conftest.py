import pytest

# (criterion id, passed, detail) lines filled in by test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture()
def record():
    def _record(cid: str, ok: bool, detail: str) -> None:
        ACCEPTANCE.append((cid, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {cid}: {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0].split()[0].lstrip("C"))):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {cid}: {detail}")
