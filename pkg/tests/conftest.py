import os
import sys
import time
from contextlib import contextmanager

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


class _Criterion:
    def __init__(self, number, title, limit):
        self.number, self.title, self.limit = number, title, limit
        self.detail = ""
        self.elapsed = None


@pytest.fixture
def criterion(request):
    """Time a block as one acceptance criterion and record PASS/FAIL.

    The block must finish inside ``limit`` seconds; ``c.detail`` is echoed
    on the report line.
    """
    results = request.config.stash[_RESULTS]

    @contextmanager
    def run(number, title, limit):
        c = _Criterion(number, title, limit)
        ok = False
        start = time.perf_counter()
        try:
            yield c
            c.elapsed = time.perf_counter() - start
            ok = c.elapsed < limit
            if not ok:
                c.detail += f" (over the {limit:g} s limit)"
        finally:
            if c.elapsed is None:
                c.elapsed = time.perf_counter() - start
            line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({c.elapsed:.2f} s) {c.detail}".rstrip()
            results.append((number, line))
            print(line)
        assert ok, line

    return run


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(results):
        terminalreporter.write_line(line)
