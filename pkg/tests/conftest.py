import pytest

# name -> (passed, detail); filled by the acceptance module and printed at the end.
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda n: int(n.split()[0])):
        passed, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def acceptance_record():
    def record(name, passed, detail):
        ACCEPTANCE_RESULTS[name] = (bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        return passed
    return record
