"""Equational theories presented as convergent rewrite systems.

Equality of terms is decided by comparing normal forms.  Termination and
confluence of the rules are assumed, not checked; a step budget turns a
non-terminating theory into an error instead of a hang.  Matching is purely
syntactic (no AC matching, no rewriting modulo equations).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from .term_core import App, Atom, Signature, Symbol, Term, format_term, var, variables_of

DEFAULT_STEP_BUDGET = 10_000


class StepBudgetExceeded(RuntimeError):
    pass


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class RewriteRule:
    lhs: Term
    rhs: Term

    def __post_init__(self):
        if isinstance(self.lhs, Atom) and self.lhs.symbol.is_variable:
            raise RuleError("left-hand side of a rule cannot be a bare variable")
        extra = variables_of(self.rhs) - variables_of(self.lhs)
        if extra:
            raise RuleError(
                "right-hand side introduces variables "
                + ", ".join(sorted(map(str, extra)))
            )

    def __str__(self):
        return f"{format_term(self.lhs)} -> {format_term(self.rhs)}"


def match(pattern: Term, subject: Term, binding: dict[Symbol, Term]) -> bool:
    """Syntactic matching; variables of ``pattern`` are pattern variables."""
    if isinstance(pattern, Atom):
        s = pattern.symbol
        if s.is_variable:
            bound = binding.get(s)
            if bound is None:
                binding[s] = subject
                return True
            return bound == subject
        return pattern == subject
    if not isinstance(subject, App) or subject.fn != pattern.fn:
        return False
    if len(subject.args) != len(pattern.args):
        return False
    return all(match(p, s, binding) for p, s in zip(pattern.args, subject.args))


def instantiate(t: Term, binding: dict[Symbol, Term]) -> Term:
    if isinstance(t, Atom):
        return binding.get(t.symbol, t)
    return App(t.fn, (instantiate(a, binding) for a in t.args))


@dataclass(frozen=True)
class EquationalTheory:
    signature: Signature = field(default_factory=Signature)
    rules: tuple[RewriteRule, ...] = ()
    step_budget: int = DEFAULT_STEP_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        for r in self.rules:
            try:
                self.signature.check(r.lhs)
                self.signature.check(r.rhs)
            except ValueError as exc:
                raise RuleError(f"rule {r}: {exc}") from None
        by_head: dict[object, list[RewriteRule]] = {}
        for r in self.rules:
            by_head.setdefault(_head(r.lhs), []).append(r)
        object.__setattr__(self, "_by_head", by_head)
        object.__setattr__(self, "_cache", {})

    def __hash__(self):
        return hash((self.signature.function_symbols.__repr__(), self.rules))

    def candidates(self, t: Term):
        return self._by_head.get(_head(t), ())

    def normalize(self, e: Term) -> Term:
        return normalize_term(e, self)

    def equal(self, a: Term, b: Term) -> bool:
        return terms_equal(a, b, self)


def _head(t: Term):
    return t.fn if isinstance(t, App) else t.symbol


EMPTY_THEORY = EquationalTheory()


class _Budget:
    __slots__ = ("left",)

    def __init__(self, n):
        self.left = n


def _rewrite_root(t: Term, theory: EquationalTheory):
    for rule in theory.candidates(t):
        binding: dict[Symbol, Term] = {}
        if match(rule.lhs, t, binding):
            return instantiate(rule.rhs, binding)
    return None


def _innermost(t: Term, theory: EquationalTheory, budget: _Budget, cache) -> Term:
    hit = cache.get(t)
    if hit is not None:
        return hit
    original = t
    while True:
        if isinstance(t, App):
            args = tuple(_innermost(a, theory, budget, cache) for a in t.args)
            if any(n is not o for n, o in zip(args, t.args)):
                t = App(t.fn, args)
        reduct = _rewrite_root(t, theory)
        if reduct is None:
            break
        budget.left -= 1
        if budget.left < 0:
            raise StepBudgetExceeded(
                f"more than {theory.step_budget} rewrite steps normalizing {format_term(original)}"
            )
        t = reduct
    cache[original] = t
    return t


def normalize_term(e: Term, theory: EquationalTheory) -> Term:
    """Innermost, leftmost rewriting to a normal form with first-matching-rule priority."""
    if not theory.rules:
        return e
    cache = theory._cache
    hit = cache.get(e)
    if hit is not None:
        return hit
    if len(cache) > 200_000:
        cache.clear()
    return _innermost(e, theory, _Budget(theory.step_budget), cache)


def terms_equal(a: Term, b: Term, theory: EquationalTheory) -> bool:
    if a == b:
        return True
    return normalize_term(a, theory) == normalize_term(b, theory)


def is_normal(e: Term, theory: EquationalTheory) -> bool:
    return normalize_term(e, theory) == e


# Fixture theories used throughout the tests and the CLI prelude.

def _v(ident):
    return Atom(var(ident))


def pair_projection_theory() -> EquationalTheory:
    x, y = _v("X"), _v("Y")
    sig = Signature({"fst": 1, "snd": 1})
    return EquationalTheory(
        sig,
        (
            RewriteRule(App("fst", (App("pair", (x, y)),)), x),
            RewriteRule(App("snd", (App("pair", (x, y)),)), y),
        ),
    )


def symmetric_encryption_theory() -> EquationalTheory:
    x, y = _v("X"), _v("Y")
    sig = Signature({"enc": 2, "dec": 2, "fst": 1, "snd": 1})
    return EquationalTheory(
        sig,
        (
            RewriteRule(App("dec", (App("enc", (x, y)), y)), x),
            RewriteRule(App("fst", (App("pair", (x, y)),)), x),
            RewriteRule(App("snd", (App("pair", (x, y)),)), y),
        ),
    )
