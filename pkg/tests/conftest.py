import random
import time
from collections import defaultdict
from dataclasses import dataclass

import pytest

from dsrv import harness
from dsrv.monitor import run
from dsrv.oracle import evaluate

CORPUS_SIZE = 500
CORPUS_SEED = 2024

_criteria = {}  # number -> description
_outcomes = defaultdict(list)  # number -> [passed, ...]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by the test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    _criteria[number] = text
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        _outcomes[number].append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        results = _outcomes.get(number, [])
        status = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {_criteria[number]}  ({sum(results)}/{len(results)} tests)")


@dataclass
class Case:
    spec: object
    trace: object
    model: object
    mode: str
    expected: object
    simplifying: object
    strict: object


@dataclass
class Corpus:
    cases: list
    seconds: float


@pytest.fixture(scope="session")
def corpus():
    """Random specifications, placements, delay models and strategies, each
    run with and without the simplifier."""
    start = time.perf_counter()
    rng = random.Random(CORPUS_SEED)
    cases = []
    for i in range(CORPUS_SIZE):
        mode = ("eager", "lazy", "mixed")[i % 3]
        spec, trace = harness.random_case(rng, comm=mode)
        model = harness.random_delay_model(rng, spec.nodes)
        expected = evaluate(spec, trace)
        cases.append(Case(spec, trace, model, mode, expected,
                          run(spec, trace, model, use_simplifier=True),
                          run(spec, trace, model, use_simplifier=False)))
    return Corpus(cases, time.perf_counter() - start)
