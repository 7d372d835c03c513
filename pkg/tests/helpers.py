"""Shared term/process strategies for property tests."""
from hypothesis import strategies as st

from appi.term_core import App, Atom, const, name, var

NAMES = [Atom(name(n)) for n in ("a", "b", "c")]
CONSTS = [Atom(const(c)) for c in ("0", "1")]
VARS = [Atom(var(v)) for v in ("x", "y", "z")]


def terms(functions=(("pair", 2),), atoms=None, max_leaves=8):
    atoms = atoms if atoms is not None else NAMES + CONSTS + VARS
    base = st.sampled_from(atoms)

    def extend(children):
        return st.one_of(*[
            st.tuples(*[children] * n).map(lambda args, f=f: App(f, args)) for f, n in functions
        ])

    return st.recursive(base, extend, max_leaves=max_leaves)


def ground_terms(functions=(("pair", 2),)):
    return terms(functions, NAMES + CONSTS)
