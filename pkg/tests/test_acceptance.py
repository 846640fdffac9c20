"""End-to-end acceptance suite for the two derivation pipelines.

Covers: canonical equivalence of the translation-current and
metric-variation tensors for electrodynamics and the scalar field,
canonical and numeric inequivalence for the quadratic-curvature model,
tiered comparison against the published closed form with a certified
discrepancy report, structural properties of the reference tensor,
identity residuals, canonicalizer soundness, and the trace-part identity.
"""
import json
import time
from fractions import Fraction
from pathlib import Path

import pytest

from emtcalc.canon import canonicalize, equal, match_free
from emtcalc.cli import main as cli_main
from emtcalc.dsl import expand_defs
from emtcalc.expr import (Factor, Idx, Term, TensorExpr, expr_from_json,
                          expr_to_json, set_dim, subs_params)
from emtcalc.hilbert import (curved_fields, flat_restrict, hilbert_emt,
                             metric_variation, promote_to_curved,
                             prune_flat_vanishing)
from emtcalc.variational import noether_emt, noether_identity_residual
from emtcalc.verify import (check_property, compare_to_reference, evaluate,
                            oracle_equal, oracle_zero, sample_config)

from randexpr import FIELDS, random_expr

GB_POINT = {"A": Fraction(1, 4), "B": Fraction(-1), "C": Fraction(1, 4)}
ARTIFACTS = Path(__file__).resolve().parent.parent / "artifacts"


def _load(corpus_dir, name):
    return expr_from_json(json.loads((corpus_dir / name).read_text()))


def _emt(prog, dim=4):
    L = canonicalize(expand_defs(prog), prog.fields)
    return set_dim(noether_emt(L, prog, ("mu", "nu")), dim)


def _eta_part(T, mu="mu", nu="nu"):
    """Terms proportional to the free-index metric factor."""
    keep = [t for t in T.terms
            if any(f.head == "eta" and not f.derivs
                   and {i.name for i in f.slots} == {mu, nu}
                   and all(i.up for i in f.slots)
                   for f in t.factors)]
    return TensorExpr(tuple(keep), T.dim)


def _eta_times(L, dim=4):
    eta = TensorExpr((Term(Fraction(1), (),
                           (Factor("eta", (), (Idx("mu", True),
                                               Idx("nu", True))),)),), dim)
    return eta * set_dim(L, dim)


@pytest.fixture(scope="module")
def gb_hilbert(gb):
    """Metric-variation tensor of the quadratic-curvature model,
    symbolic in the couplings A, B, C at dimension four."""
    return hilbert_emt(gb, ("mu", "nu"), 4)


# ---- criterion 1: electrodynamics, both pipelines agree ---------------------

def test_em_noether_and_hilbert_match_reference(corpus_dir, tmp_path, capsys):
    t0 = time.monotonic()
    ref = str(corpus_dir / "em_emt_reference.json")
    tn = tmp_path / "tn.json"
    th = tmp_path / "th.json"
    assert cli_main(["derive", "noether", str(corpus_dir / "em.lag"),
                     "--delta", str(corpus_dir / "em_bessel_hagen.lag"),
                     "-o", str(tn)]) == 0
    assert cli_main(["derive", "hilbert", str(corpus_dir / "em.lag"),
                     "-o", str(th)]) == 0
    assert cli_main(["diff", str(tn), ref]) == 0
    assert cli_main(["diff", str(th), ref]) == 0
    assert cli_main(["diff", str(tn), str(th)]) == 0
    capsys.readouterr()
    assert time.monotonic() - t0 < 10


# ---- criterion 2: scalar field, both pipelines agree -------------------------

def test_kg_noether_equals_hilbert(kg):
    t0 = time.monotonic()
    tn = _emt(kg)
    th = hilbert_emt(kg, ("mu", "nu"), 4)
    assert equal(th, match_free(th, tn), kg.fields)
    # cross-check the symbolic equality numerically
    assert oracle_equal(th, tn, kg.fields, trials=20)["verdict"] == "equal"
    assert time.monotonic() - t0 < 5


# ---- criterion 3: quadratic-curvature model, pipelines disagree --------------

def test_gb_hilbert_differs_from_reference(corpus_dir, gb, gb_hilbert):
    t0 = time.monotonic()
    th = canonicalize(subs_params(gb_hilbert, GB_POINT), gb.fields)
    ref = _load(corpus_dir, "gb_noether_emt_reference.json")
    d = canonicalize(th - match_free(th, ref), gb.fields)
    assert not d.is_zero()
    rep = oracle_equal(th, ref, gb.fields, trials=20, seed=0, degree=3)
    assert rep["verdict"] == "unequal"
    w = rep["witness"]
    assert set(w) == {"config_seed", "point", "indices", "value"}
    assert Fraction(w["value"]) != 0
    assert time.monotonic() - t0 < 600


# ---- criterion 4: tiered comparison with the published closed form ----------

def _alternate_path(prog, dim=4):
    """Same variation applied to the uncanonicalized pruned promotion."""
    cf = curved_fields(prog.fields)
    pruned = prune_flat_vanishing(promote_to_curved(prog))
    varied = metric_variation(pruned, cf, ("mu", "nu"))
    return canonicalize(set_dim(flat_restrict(varied).scale(Fraction(2)),
                                dim), prog.fields)


def test_gb_tiered_comparison_with_certified_report(corpus_dir, gb,
                                                    gb_hilbert):
    # tier 1: the metric-proportional part must reproduce the coupling
    # coefficients of the quadratic-curvature Lagrangian exactly
    L_ref = _load(corpus_dir, "gb_lagrangian_expanded_reference.json")
    eta_part = canonicalize(_eta_part(gb_hilbert), gb.fields)
    want = canonicalize(_eta_times(L_ref), gb.fields)
    tier1 = compare_to_reference(eta_part, want, gb.fields)
    assert tier1["match"] is True

    # tier 2: term-by-term comparison against the published closed form,
    # full expression and metric-proportional part separately
    printed = _load(corpus_dir, "gb_hilbert_printed_reference.json")
    printed_eta = _load(corpus_dir, "gb_hilbert_eta_part_reference.json")
    full_rep = compare_to_reference(gb_hilbert, printed, gb.fields)
    eta_rep = compare_to_reference(eta_part, printed_eta, gb.fields)

    # certification: an independent pipeline path must agree with the
    # computed tensor both symbolically and on the exact numeric oracle
    alt = _alternate_path(gb)
    cert_symbolic = equal(gb_hilbert, match_free(gb_hilbert, alt), gb.fields)
    th_pt = canonicalize(subs_params(gb_hilbert, GB_POINT), gb.fields)
    alt_pt = canonicalize(subs_params(alt, GB_POINT), gb.fields)
    cert_oracle = oracle_equal(th_pt, alt_pt, gb.fields, trials=20, seed=1,
                               degree=3)
    assert cert_symbolic
    assert cert_oracle["verdict"] == "equal"

    ARTIFACTS.mkdir(exist_ok=True)
    report = {
        "tier1_coupling_coefficients": tier1,
        "tier2_full_expression": full_rep,
        "tier2_metric_proportional_part": eta_rep,
        "certification": {
            "alternate_path_symbolic_equal": cert_symbolic,
            "alternate_path_oracle": cert_oracle,
        },
    }
    (ARTIFACTS / "hilbert_closed_form_comparison.json").write_text(
        json.dumps(report, indent=1, sort_keys=True, default=str) + "\n")
    # the criterion passes on an exact match or on a certified report
    assert full_rep["match"] or (cert_symbolic
                                 and cert_oracle["verdict"] == "equal")


# ---- criterion 5: reference tensor property suite ----------------------------

def test_gb_reference_tensor_properties(corpus_dir, gb):
    t0 = time.monotonic()
    ref = _load(corpus_dir, "gb_noether_emt_reference.json")
    for prop in ("symmetric", "traceless", "gauge_invariant"):
        rep = check_property(ref, prop, gb.fields, gauge_field="h")
        assert rep["verdict"] == "pass", prop
    num = check_property(ref, "conserved", gb.fields, mode="numeric",
                         trials=20, seed=0, degree=5)
    assert num["verdict"] == "pass"
    # classify the symbolic residual: it is an exact canonical zero
    sym = check_property(ref, "conserved", gb.fields, mode="symbolic")
    assert sym["verdict"] == "pass"
    assert time.monotonic() - t0 < 300


# ---- criterion 6: translation-identity residuals -----------------------------

def test_identity_residual_vanishes_for_corpus(kg, em, gb, fp):
    t0 = time.monotonic()
    for prog in (kg, em, gb, fp):
        L = canonicalize(expand_defs(prog), prog.fields)
        assert noether_identity_residual(L, prog, "nu").is_zero()
    assert time.monotonic() - t0 < 300


# ---- criterion 7: canonicalizer soundness ------------------------------------

def test_canonicalizer_idempotent_relabeling_invariant_and_oracle_exact():
    t0 = time.monotonic()
    for seed in range(200):
        e = random_expr(seed)
        c = canonicalize(e, FIELDS)
        again = canonicalize(c, FIELDS)
        assert again.terms == c.terms, seed
        # dummy relabeling must not change the canonical form
        relab = TensorExpr(tuple(
            t.rename({n: f"w{k}" for k, n in enumerate(sorted(t.dummy_names()))})
            for t in e.terms), e.dim)
        assert canonicalize(relab, FIELDS).terms == c.terms, seed
        free = sorted(e.free_indices())
        for trial in range(3):
            cfg = sample_config(seed * 17 + trial, 2, FIELDS)
            point = tuple((seed + k + trial) % 3 - 1 for k in range(4))
            vals = {n: (seed + 2 * k + trial) % 4 for k, n in enumerate(free)}
            ve = evaluate(e, cfg, point, vals)
            vc = (Fraction(0) if c.is_zero()
                  else evaluate(c, cfg, point, vals))
            assert ve == vc, seed
    assert time.monotonic() - t0 < 300


# ---- criterion 8: the metric-proportional part equals eta times L ------------

def test_noether_trace_part_is_lagrangian(kg, em):
    t0 = time.monotonic()
    for prog in (kg, em):
        L = canonicalize(expand_defs(prog), prog.fields)
        T = _emt(prog)
        part = canonicalize(_eta_part(T), prog.fields)
        want = canonicalize(_eta_times(L), prog.fields)
        assert equal(part, match_free(part, want), prog.fields)
    assert time.monotonic() - t0 < 5
