import itertools
import random

import pytest

from harmless import bundled
from harmless.chase import ChaseStatus, standard_chase
from harmless.corpus import certified_programs, random_bcq

CORPUS_SEED = 20240611
CORPUS_SIZE = 200
BCQS_PER_PROGRAM = 3
ORACLE_LIMIT = 300

_results = {}


def record(criterion: int, ok: bool, detail: str = "") -> None:
    _results[criterion] = (ok, detail)


@pytest.fixture
def report():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_results):
        ok, detail = _results[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


class Corpus:
    """Certified programs whose bounded standard chases (with and without
    EGDs) saturate, each paired with a few random Boolean queries."""

    def __init__(self, seed: int, size: int):
        rng = random.Random(seed + 1)
        self.entries = []
        self.skipped = 0
        for p in certified_programs(seed):
            full = standard_chase(p, limit=ORACLE_LIMIT)
            tgd = standard_chase(p.without_egds(), limit=ORACLE_LIMIT)
            if ChaseStatus.STEP_LIMIT in (full.status, tgd.status):
                self.skipped += 1
                continue
            queries = [random_bcq(rng, p) for _ in range(BCQS_PER_PROGRAM)]
            self.entries.append((p, full, queries))
            if len(self.entries) >= size:
                break

    @property
    def programs(self):
        return [p for p, _, _ in self.entries]


@pytest.fixture(scope="session")
def corpus():
    return Corpus(CORPUS_SEED, CORPUS_SIZE)


@pytest.fixture(scope="session")
def examples():
    return {name: bundled.load(name) for name in bundled.names()}
