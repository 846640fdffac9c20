"""Curved promotion, metric variation, and flat restriction."""
import pytest

from emtcalc.canon import canonicalize, equal, match_free
from emtcalc.dsl import expand_defs, parse
from emtcalc.expr import UsageError, set_dim
from emtcalc.hilbert import (christoffel, curved_fields, flat_restrict,
                             hilbert_emt, promote_to_curved,
                             prune_flat_vanishing)
from emtcalc.variational import noether_emt


def test_christoffel_is_first_order_in_metric():
    gam = christoffel("x", "c", "a")
    assert set(gam.free_indices()) == {"x", "c", "a"}
    for t in gam.terms:
        derived = [f for f in t.factors if f.head == "g" and f.derivs]
        assert len(derived) == 1 and len(derived[0].derivs) == 1


def test_promotion_flat_round_trip(kg, em, gb):
    for prog in (kg, em, gb):
        L = canonicalize(expand_defs(prog), prog.fields)
        back = canonicalize(flat_restrict(promote_to_curved(prog)),
                            prog.fields)
        assert equal(back, L, prog.fields)


def test_promotion_rejects_bare_vector_derivative():
    prog = parse("field A { rank: 1 }\n"
                 "lagrangian = d[mu] A[nu] * d[^mu] A[^nu]\n")
    with pytest.raises(UsageError, match="promotion"):
        promote_to_curved(prog)


def test_promotion_rejects_bare_second_derivative_of_scalar():
    prog = parse("field phi { rank: 0 }\n"
                 "lagrangian = d[mu] d[nu] phi * d[^mu] d[^nu] phi\n")
    with pytest.raises(UsageError, match="promotion"):
        promote_to_curved(prog)


def test_prune_drops_doubly_derived_metric_terms(gb):
    promoted = promote_to_curved(gb)
    pruned = prune_flat_vanishing(promoted)
    assert len(pruned.terms) < len(promoted.terms)
    for t in pruned.terms:
        derived = [f for f in t.factors
                   if f.head in ("g", "ginv", "sqrtg") and f.derivs]
        assert len(derived) <= 1
        if derived:
            assert len(derived[0].derivs) <= 2


def test_pruning_preserves_the_flat_emt(kg):
    # pruning only removes terms whose variation vanishes at the flat metric
    fields = curved_fields(kg.fields)
    promoted = promote_to_curved(kg)
    from emtcalc.hilbert import metric_variation
    full = canonicalize(set_dim(flat_restrict(
        metric_variation(promoted, fields, ("mu", "nu"))), 4), kg.fields)
    pruned = canonicalize(set_dim(flat_restrict(
        metric_variation(prune_flat_vanishing(promoted), fields,
                         ("mu", "nu"))), 4), kg.fields)
    assert equal(full, pruned, kg.fields)


def test_hilbert_equals_noether_for_kg(kg):
    L = canonicalize(expand_defs(kg), kg.fields)
    tn = set_dim(noether_emt(L, kg, ("mu", "nu")), 4)
    th = hilbert_emt(kg, ("mu", "nu"), 4)
    assert equal(th, match_free(th, tn), kg.fields)


def test_hilbert_equals_noether_for_em_with_improvement(em_bh):
    L = canonicalize(expand_defs(em_bh), em_bh.fields)
    tn = set_dim(noether_emt(L, em_bh, ("mu", "nu")), 4)
    th = hilbert_emt(em_bh, ("mu", "nu"), 4)
    assert equal(th, match_free(th, tn), em_bh.fields)


def test_hilbert_stage_artifacts_are_populated(kg):
    stages = {}
    T = hilbert_emt(kg, ("mu", "nu"), 4, stages=stages)
    assert set(stages) == {"promoted", "pruned", "varied", "flat"}
    assert equal(stages["flat"], T, kg.fields)
    assert not stages["promoted"].is_zero()
