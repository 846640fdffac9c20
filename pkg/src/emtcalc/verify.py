"""Exact numeric oracle and property checks.

Expressions are evaluated on deterministic pseudo-random field configurations
whose components are integer-coefficient polynomials in the four coordinates,
at integer sample points, against the flat metric diag(+1, -1, -1, -1).  All
arithmetic is exact: contractions run over machine integers with a rigorous
overflow bound (falling back to arbitrary-precision integers), and rational
term coefficients multiply the integer contraction values.
"""
from __future__ import annotations

import itertools
import random
import string
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .canon import canonicalize, match_free, rename_free
from .expr import (Factor, FieldSpec, Idx, TensorExpr, Term, UsageError,
                   lo, total_derivative, up)

SIG = (1, -1, -1, -1)
_ETA = np.diag(np.array(SIG, dtype=np.int64))
_EYE = np.eye(4, dtype=np.int64)
_SIGNS = np.array(SIG, dtype=np.int64)

Poly = dict[tuple[int, int, int, int], int]


def _poly_derive(p: Poly, var: int) -> Poly:
    out: Poly = {}
    for exps, c in p.items():
        if exps[var] == 0:
            continue
        e2 = list(exps)
        e2[var] -= 1
        out[tuple(e2)] = c * exps[var]
    return out


def _poly_eval(p: Poly, point) -> int:
    total = 0
    for exps, c in p.items():
        v = c
        for x, e in zip(point, exps):
            v *= x ** e
        total += v
    return total


@dataclass
class FieldConfig:
    """Deterministic polynomial field configuration."""
    seed: int
    degree: int
    comps: dict[str, dict[tuple[int, ...], Poly]]
    _cache: dict = dc_field(default_factory=dict, compare=False, repr=False)


def _monomials(degree: int):
    out = []
    for exps in itertools.product(range(degree + 1), repeat=4):
        if sum(exps) <= degree:
            out.append(exps)
    return sorted(out)


def sample_config(seed: int, degree: int,
                  fields: Mapping[str, FieldSpec]) -> FieldConfig:
    """Sample a field configuration; degree must be at least 2 so that
    second derivatives are nontrivial."""
    if degree < 2:
        raise UsageError("configuration degree must be >= 2")
    rng = random.Random(seed * 1_000_003 + degree)
    monos = _monomials(degree)
    comps: dict[str, dict[tuple[int, ...], Poly]] = {}
    for name in sorted(fields):
        spec = fields[name]
        if spec.kind == "builtin":
            continue
        table: dict[tuple[int, ...], Poly] = {}
        for idx in itertools.product(range(4), repeat=spec.rank):
            if spec.symmetry == "symmetric" and tuple(sorted(idx)) != idx:
                continue
            if spec.symmetry == "antisymmetric" and not all(
                    idx[i] < idx[i + 1] for i in range(len(idx) - 1)):
                continue
            p: Poly = {m: rng.randint(-3, 3) for m in monos}
            p = {m: c for m, c in p.items() if c != 0}
            if not any(sum(m) >= 2 for m in p):
                p[(2, 0, 0, 0)] = 1
            table[idx] = p
        # mirror symmetric / antisymmetric assignments
        full: dict[tuple[int, ...], Poly] = {}
        for idx in itertools.product(range(4), repeat=spec.rank):
            if idx in table:
                full[idx] = table[idx]
            elif spec.symmetry == "symmetric":
                full[idx] = table[tuple(sorted(idx))]
            elif spec.symmetry == "antisymmetric":
                srt = tuple(sorted(idx))
                if len(set(idx)) < len(idx):
                    full[idx] = {}
                else:
                    base = table[srt]
                    perm = tuple(sorted(range(len(idx)), key=lambda i: idx[i]))
                    inv = sum(1 for i in range(len(perm))
                              for j in range(i + 1, len(perm))
                              if perm[i] > perm[j])
                    full[idx] = base if inv % 2 == 0 else \
                        {m: -c for m, c in base.items()}
        comps[name] = full
    return FieldConfig(seed, degree, comps)


def _deriv_table(cfg: FieldConfig, head: str, order: int, rank: int,
                 point: tuple[int, ...]) -> np.ndarray:
    key = (head, order, point)
    hit = cfg._cache.get(key)
    if hit is not None:
        return hit
    if head not in cfg.comps:
        raise UsageError(f"no configuration for field {head!r}")
    table = cfg.comps[head]
    arr = np.zeros((4,) * (order + rank), dtype=np.int64)
    for didx in itertools.product(range(4), repeat=order):
        for sidx in itertools.product(range(4), repeat=rank):
            p = table[sidx]
            for v in didx:
                p = _poly_derive(p, v)
            arr[didx + sidx] = _poly_eval(p, point)
    cfg._cache[key] = arr
    return arr


def _factor_array(f: Factor, cfg: FieldConfig, point) -> np.ndarray:
    if f.head == "eta":
        a, b = f.slots
        return _EYE if a.up != b.up else _ETA
    if f.head == "delta":
        return _EYE
    rank = len(f.slots)
    arr = _deriv_table(cfg, f.head, len(f.derivs), rank, point)
    for ax, i in enumerate(f.indices()):
        if i.up:
            shape = [1] * arr.ndim
            shape[ax] = 4
            arr = arr * _SIGNS.reshape(shape)
    return arr


def _contract_exact(arrays, subs):
    """Arbitrary-precision fallback contraction."""
    objs = [a.astype(object) for a in arrays]
    return np.einsum(subs, *objs)


def evaluate(e: TensorExpr, cfg: FieldConfig, point,
             free_index_values: Mapping[str, int] | None = None) -> Fraction:
    """Evaluate an expression exactly at an integer sample point."""
    point = tuple(int(x) for x in point)
    free_index_values = dict(free_index_values or {})
    free = e.free_indices()
    if set(free) != set(free_index_values):
        raise UsageError(
            f"free index values must cover exactly {sorted(free)}")
    total = Fraction(0)
    letters = string.ascii_letters
    for t in e.terms:
        for p in t.params:
            raise UsageError(
                f"fix parameter '{p}' before numeric evaluation")
        if not t.factors:
            total += t.coeff
            continue
        names = sorted(t.dummy_names())
        if len(names) > len(letters):
            raise UsageError("too many contracted indices in one term")
        axis = {n: letters[i] for i, n in enumerate(names)}
        arrays = []
        labels = []
        for f in t.factors:
            arr = _factor_array(f, cfg, point)
            lab = ""
            for i in f.indices():
                if i.name in free_index_values:
                    arr = np.take(arr, free_index_values[i.name], axis=len(lab))
                else:
                    lab += axis[i.name]
            arrays.append(arr)
            labels.append(lab)
        subs = ",".join(labels) + "->"
        bound = np.einsum(subs, *[np.abs(a) for a in arrays],
                          dtype=np.float64)
        if bound >= 2.0 ** 62:
            val = int(_contract_exact(arrays, subs))
        else:
            val = int(np.einsum(subs, *arrays))
        total += t.coeff * val
    return total


# ---- oracle comparison ------------------------------------------------------

def _trial_rng(seed: int, trial: int) -> random.Random:
    return random.Random((seed << 24) ^ (trial * 2_654_435_761))


def oracle_equal(a: TensorExpr, b: TensorExpr, fields: Mapping[str, FieldSpec],
                 trials: int = 20, seed: int = 0, degree: int = 3) -> dict:
    """Compare two expressions numerically; returns an oracle report."""
    b2 = match_free(a, b)
    free = sorted(a.free_indices())
    report = {"verdict": "equal", "trials": trials, "seed": seed,
              "degree": degree}
    for t in range(trials):
        cfg = sample_config(seed + 7919 * t, degree, fields)
        rng = _trial_rng(seed, t)
        point = tuple(rng.randint(-3, 3) for _ in range(4))
        vals = {n: rng.randint(0, 3) for n in free}
        va = evaluate(a, cfg, point, vals)
        vb = evaluate(b2, cfg, point, vals)
        if va != vb:
            report["verdict"] = "unequal"
            report["witness"] = {
                "config_seed": cfg.seed,
                "point": list(point),
                "indices": {n: vals[n] for n in free},
                "value": str(va - vb),
            }
            return report
    return report


def oracle_zero(e: TensorExpr, fields: Mapping[str, FieldSpec],
                trials: int = 20, seed: int = 0, degree: int = 3) -> dict:
    """Check that an expression evaluates to zero on random configurations."""
    free = sorted(e.free_indices())
    report = {"verdict": "equal", "trials": trials, "seed": seed,
              "degree": degree}
    for t in range(trials):
        cfg = sample_config(seed + 7919 * t, degree, fields)
        rng = _trial_rng(seed, t)
        point = tuple(rng.randint(-3, 3) for _ in range(4))
        vals = {n: rng.randint(0, 3) for n in free}
        v = evaluate(e, cfg, point, vals)
        if v != 0:
            report["verdict"] = "unequal"
            report["witness"] = {"config_seed": cfg.seed,
                                 "point": list(point),
                                 "indices": vals, "value": str(v)}
            return report
    return report


# ---- property checks --------------------------------------------------------

PROPERTIES = ("symmetric", "traceless", "gauge_invariant", "conserved")


def gauge_rule(spec: FieldSpec, param: str = "xi") -> tuple[TensorExpr, tuple[str, ...]]:
    """Standard gauge transformation rule for a field, as a substitution."""
    if spec.rank == 1:
        t0 = Term(Fraction(1), (), (Factor(spec.symbol, (), (lo("a"),)),))
        t1 = Term(Fraction(1), (), (Factor(param, (lo("a"),), ()),))
        return TensorExpr((t0, t1)), ("a",)
    if spec.rank == 2 and spec.symmetry == "symmetric":
        t0 = Term(Fraction(1), (), (Factor(spec.symbol, (), (lo("a"), lo("b"))),))
        t1 = Term(Fraction(1), (), (Factor(param, (lo("a"),), (lo("b"),)),))
        t2 = Term(Fraction(1), (), (Factor(param, (lo("b"),), (lo("a"),)),))
        return TensorExpr((t0, t1, t2)), ("a", "b")
    raise UsageError(
        f"no standard gauge rule for field {spec.symbol!r}")


def _gauge_fields(fields: Mapping[str, FieldSpec], rank: int) -> dict:
    out = dict(fields)
    out.setdefault("xi", FieldSpec("xi", rank - 1, "none", "gauge-parameter"))
    return out


def check_property(T: TensorExpr, prop: str, fields: Mapping[str, FieldSpec],
                   *, gauge_field: str | None = None, mode: str = "symbolic",
                   trials: int = 20, seed: int = 0, degree: int = 4) -> dict:
    """Check a structural property of a rank-2 (both indices up) tensor."""
    if prop not in PROPERTIES:
        raise UsageError(f"unknown property {prop!r}")
    if mode not in ("symbolic", "numeric"):
        raise UsageError(f"unknown mode {mode!r}")
    free = T.free_indices()
    if len(free) != 2 or not all(i.up for i in free.values()):
        raise UsageError("property checks expect two contravariant free indices")
    m, n = sorted(free)

    if prop == "symmetric":
        residual = T - rename_free(T, {m: n, n: m})
        chk_fields = fields
    elif prop == "traceless":
        eta_mn = TensorExpr((Term(Fraction(1), (), (Factor("eta", (), (lo(m), lo(n))),)),),
                            T.dim)
        residual = T * eta_mn
        chk_fields = fields
    elif prop == "gauge_invariant":
        from .expr import substitute
        if gauge_field is None:
            dyn = sorted(h for h in {f.head for t in T.terms for f in t.factors}
                         if h in fields and fields[h].kind == "dynamical")
            if len(dyn) != 1:
                raise UsageError("specify gauge_field explicitly")
            gauge_field = dyn[0]
        spec = fields[gauge_field]
        rule, slots = gauge_rule(spec)
        chk_fields = _gauge_fields(fields, spec.rank)
        residual = substitute(T, gauge_field, rule, slots) - T
    else:  # conserved
        gen_name = "dv0"
        while gen_name in {nm for t in T.terms for nm in t.names()}:
            gen_name += "x"
        div = total_derivative(rename_free(T, {m: gen_name}), lo(gen_name),
                               allow_contraction=True)
        residual = div
        chk_fields = fields

    report = {"property": prop, "mode": mode}
    if mode == "symbolic":
        res = canonicalize(residual, chk_fields)
        report["verdict"] = "pass" if res.is_zero() else "fail"
        if not res.is_zero():
            from .expr import expr_to_json
            report["witness"] = expr_to_json(res)
        return report
    # numeric mode
    resid_free = sorted(residual.free_indices())
    for t in range(max(trials, 20)):
        cfg = sample_config(seed + 104729 * t, degree, chk_fields)
        rng = _trial_rng(seed, t)
        point = tuple(rng.randint(-2, 2) for _ in range(4))
        for combo in itertools.product(range(4), repeat=len(resid_free)):
            vals = dict(zip(resid_free, combo))
            v = evaluate(residual, cfg, point, vals)
            if v != 0:
                report["verdict"] = "fail"
                report["witness"] = {"config_seed": cfg.seed,
                                     "point": list(point),
                                     "indices": vals, "value": str(v)}
                return report
    report["verdict"] = "pass"
    report["trials"] = max(trials, 20)
    report["seed"] = seed
    return report


def compare_to_reference(computed: TensorExpr, reference: TensorExpr,
                         fields: Mapping[str, FieldSpec]) -> dict:
    """Term-by-term canonical comparison; returns a discrepancy report."""
    from .expr import expr_to_json
    a = canonicalize(computed, fields)
    b = canonicalize(match_free(a, reference) if a.terms or reference.terms
                     else reference, fields)
    amap = {(t.params, t.factors): t.coeff for t in a.terms}
    bmap = {(t.params, t.factors): t.coeff for t in b.terms}
    mismatched = []
    for key in sorted(set(amap) | set(bmap)):
        ca = amap.get(key, Fraction(0))
        cb = bmap.get(key, Fraction(0))
        if ca != cb:
            params, factors = key
            mismatched.append({
                "term": expr_to_json(TensorExpr((Term(Fraction(1), params, factors),), a.dim))["terms"][0],
                "computed_coeff": str(ca),
                "reference_coeff": str(cb),
            })
    return {"match": not mismatched, "discrepancies": mismatched,
            "computed_terms": len(a.terms), "reference_terms": len(b.terms)}
