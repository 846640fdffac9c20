import itertools
import random
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from emtcalc.canon import canonicalize, equal, match_free, rename_free
from emtcalc.dsl import parse, parse_expr
from emtcalc.expr import Factor, Term, TensorExpr, lo, scalar_expr, set_dim, up
from emtcalc.verify import evaluate, sample_config

from randexpr import FIELDS, random_expr

PROG = parse("""
field phi { rank: 0 }
field A { rank: 1 }
field h { rank: 2, symmetry: symmetric }
field W { rank: 2, symmetry: antisymmetric }
""")


def expr(src):
    return parse_expr(src, PROG)


def canon(src):
    return canonicalize(expr(src), PROG.fields)


def test_relabeled_difference_cancels():
    assert canon("d[a] phi * d[^a] phi - d[b] phi * d[^b] phi").is_zero()


def test_dummy_variance_swap_is_identified():
    assert canon("d[a] phi * d[^a] phi - d[^a] phi * d[a] phi").is_zero()


def test_derivative_order_is_immaterial():
    assert canon("d[a] d[b] phi * h[^a, ^b] - d[b] d[a] phi * h[^a, ^b]").is_zero()


def test_symmetric_slots_are_identified():
    assert canon("h[a, b] * d[^a] d[^b] phi - h[b, a] * d[^a] d[^b] phi").is_zero()


def test_antisymmetric_slots_carry_sign():
    assert canon("W[a, b] * d[^a] A[^b] + W[b, a] * d[^a] A[^b]").is_zero()


def test_antisymmetric_trace_is_zero():
    assert canon("W[a, ^a] * phi").is_zero()


def test_symmetric_contraction_with_antisymmetric_is_zero():
    assert canon("W[a, b] * h[^a, ^b]").is_zero()


def test_eta_raises_indices():
    assert canon("eta[^a, ^b] * d[a] phi * d[b] phi"
                 " - d[c] phi * d[^c] phi").is_zero()


def test_eta_trace_gives_dimension():
    at_d = canonicalize(expr("eta[a, b] * eta[^a, ^b] * phi"))
    assert at_d.terms[0].params == ("D",)
    at_four = canonicalize(set_dim(expr("eta[a, b] * eta[^a, ^b] * phi"), 4))
    assert at_four.terms[0].coeff == 4 and at_four.terms[0].params == ()


def test_eta_chain_collapses():
    assert canon("eta[^a, ^b] * eta[b, c] * A[^c] - A[^a]").is_zero()


def test_canonical_order_is_deterministic():
    a = canon("A[a] * d[^a] phi + d[b] phi * A[^b] * phi * phi")
    b = canon("d[b] phi * A[^b] * phi * phi + A[a] * d[^a] phi")
    assert a.terms == b.terms


def test_match_free_renames_second_argument():
    a = expr("d[^m] phi")
    b = expr("d[^n] phi")
    assert sorted(match_free(a, b).free_indices()) == ["m"]
    assert equal(a, b, PROG.fields)


def test_rename_free_avoids_dummy_capture():
    e = expr("d[^m] phi * d[a] phi * d[^a] phi")
    out = rename_free(e, {"m": "a"})
    assert sorted(out.free_indices()) == ["a"]


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_idempotence(seed):
    e = random_expr(seed)
    c = canonicalize(e, FIELDS)
    assert canonicalize(c, FIELDS).terms == c.terms


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_relabeling_invariance(seed):
    e = random_expr(seed)
    rng = random.Random(seed + 1)
    relabeled = []
    for t in e.terms:
        names = sorted(t.dummy_names())
        perm = [f"w{k}" for k in range(len(names))]
        rng.shuffle(perm)
        relabeled.append(t.rename(dict(zip(names, perm))))
    e2 = TensorExpr(tuple(relabeled), e.dim)
    assert canonicalize(e, FIELDS).terms == canonicalize(e2, FIELDS).terms


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_oracle_agreement(seed):
    e = random_expr(seed)
    c = canonicalize(e, FIELDS)
    frees = sorted(e.free_indices())
    cfg = sample_config(seed, 3, FIELDS)
    rng = random.Random(seed)
    point = tuple(rng.randint(-2, 2) for _ in range(4))
    for combo in itertools.product(range(4), repeat=len(frees)):
        vals = dict(zip(frees, combo))
        expected = 0 if c.is_zero() else evaluate(c, cfg, point, vals)
        assert evaluate(e, cfg, point, vals) == expected
