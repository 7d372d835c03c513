import random
import sys

import pytest
from hypothesis import settings

from appi.syntax import Declarations, parse_process, parse_term
from appi.term_core import Atom, var

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


VARIABLES = ("x", "y", "z", "v", "w")


def _decls():
    return Declarations(variables=set(VARIABLES))


def P(text):
    """Parse with x, y, z, v, w read as variables and other undeclared identifiers as names."""
    return parse_process(text, _decls())


def T(text):
    return parse_term(text, _decls())


def X(ident, index=0):
    """Frame variable as a term; bare identifiers in parse_term read as names."""
    return Atom(var(ident, index))


@pytest.fixture
def rng():
    return random.Random(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
