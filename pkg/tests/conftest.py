import os

import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session", autouse=True)
def _h_cache(tmp_path_factory):
    # keep H strips on disk for the whole session, away from any user cache
    old = os.environ.get("NDMONO_CACHE_DIR")
    os.environ["NDMONO_CACHE_DIR"] = str(tmp_path_factory.mktemp("hcache"))
    yield
    if old is None:
        os.environ.pop("NDMONO_CACHE_DIR", None)
    else:
        os.environ["NDMONO_CACHE_DIR"] = old


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def emit(number: int, ok: bool, text: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
