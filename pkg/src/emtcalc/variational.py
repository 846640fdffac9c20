"""Formal variational calculus: jet derivatives, Euler-Lagrange operators and
translation-symmetry currents for flat-spacetime Lagrangians.

Conventions: a jet variable is a field together with up to two covariant
derivative indices.  Derivatives of a factor with respect to a jet variable
symmetrize over the derivative multiset and over symmetric or antisymmetric
slot lists, e.g.::

    d(d_a d_m g_bc) / d(d_xi d_om g_gr) = Delta^{xi om}_{a m} Delta^{g r}_{b c}

with Delta the symmetrized double delta.  The current associated with a
translation, with the constant direction factored out, is

    J^{mu nu} = eta^{mu nu} L + dL/d(d_mu Phi) K^{nu}
              + dL/d(d_mu d_om Phi) d_om K^{nu}
              - [d_om dL/d(d_mu d_om Phi)] K^{nu}

where the total field variation is delta Phi = K^{nu} delta x_nu and the
default (no gauge part) rule is K^{nu} = -d^{nu} Phi.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .canon import canonicalize
from .dsl import Program
from .expr import (Factor, FieldSpec, Idx, TensorExpr, Term, UsageError,
                   connector, fresh_names, lo, total_derivative, up, zero)


@dataclass(frozen=True)
class JetVariable:
    field: str
    deriv_names: tuple[str, ...] = ()
    slot_names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.deriv_names) > 2:
            raise UsageError(
                f"jet variables support at most two derivatives, got {len(self.deriv_names)}")


def _slot_matchings(sym: str, r: int):
    """Bijections slot-position -> output-position with weight and sign."""
    if r == 0:
        return [((), Fraction(1))]
    if sym == "none":
        return [(tuple(range(r)), Fraction(1))]
    w = Fraction(1)
    for k in range(2, r + 1):
        w /= k
    out = []
    for perm in itertools.permutations(range(r)):
        sign = 1
        if sym == "antisymmetric":
            inv = sum(1 for i in range(r) for j in range(i + 1, r)
                      if perm[i] > perm[j])
            sign = -1 if inv % 2 else 1
        out.append((perm, w * sign))
    return out


def jet_derivative(L: TensorExpr, v: JetVariable,
                   fields: Mapping[str, FieldSpec]) -> TensorExpr:
    """Formal derivative of ``L`` with respect to a jet variable.

    The result carries the contravariant duals of ``v``'s indices as new free
    indices.  Returns zero when the variable does not occur.
    """
    spec = fields.get(v.field)
    if spec is None:
        raise UsageError(f"unknown field {v.field!r}")
    if len(v.slot_names) != spec.rank:
        raise UsageError(
            f"jet variable for {v.field!r} needs {spec.rank} slots, got {len(v.slot_names)}")
    k = len(v.deriv_names)
    vnames = set(v.deriv_names) | set(v.slot_names)
    dweight = Fraction(1)
    for j in range(2, k + 1):
        dweight /= j
    out: list[Term] = []
    for t0 in L.terms:
        free = t0.free_indices()
        if vnames & set(free):
            raise UsageError("jet-variable index names collide with free indices")
        t = t0.freshen_dummies(vnames)
        for pos, f in enumerate(t.factors):
            if f.head != v.field or len(f.derivs) != k:
                continue
            rest = t.factors[:pos] + t.factors[pos + 1:]
            for dperm in itertools.permutations(range(k)):
                dconn = tuple(connector(up(v.deriv_names[j]), f.derivs[dperm[j]])
                              for j in range(k))
                for sperm, weight in _slot_matchings(spec.symmetry, spec.rank):
                    sconn = tuple(connector(up(v.slot_names[sperm[j]]), f.slots[j])
                                  for j in range(spec.rank))
                    out.append(Term(t.coeff * dweight * weight, t.params,
                                    rest + dconn + sconn))
    return TensorExpr(tuple(out), L.dim)


def max_deriv_order(L: TensorExpr, field: str) -> int:
    return max((len(f.derivs) for t in L.terms for f in t.factors
                if f.head == field), default=0)


def euler_lagrange(L: TensorExpr, field: str, slot_names: tuple[str, ...],
                   fields: Mapping[str, FieldSpec]) -> TensorExpr:
    """Euler-Lagrange derivative of a scalar Lagrangian, canonicalized.

    Free indices of the result are the contravariant duals of the field's
    slots, carrying ``slot_names``.
    """
    if max_deriv_order(L, field) > 2:
        raise UsageError(
            f"Lagrangian is of higher than second order in {field!r}")
    taken = set(slot_names) | {n for t in L.terms for n in t.names()}
    gen = fresh_names(taken, base="w")
    wnames = (next(gen), next(gen))
    total = zero(L.dim)
    for k in (0, 1, 2):
        jd = jet_derivative(L, JetVariable(field, wnames[:k], tuple(slot_names)),
                            fields)
        if jd.is_zero():
            continue
        for w in wnames[:k]:
            jd = total_derivative(jd, lo(w), allow_contraction=True)
        total = total + jd.scale(Fraction((-1) ** k))
    return canonicalize(total, fields)


# ---- variation rules -------------------------------------------------------

def variation_coefficient(prog: Program, field: str, slot_names: tuple[str, ...],
                          trans: str) -> TensorExpr:
    """Coefficient K in the total variation delta Phi = K^{trans} delta x_trans.

    Uses the program's ``delta`` rule for the field when present, else the
    pure-translation rule K = -d^{trans} Phi.
    """
    spec = prog.fields[field]
    rule = prog.deltas.get(field)
    if rule is None:
        f = Factor(field, (up(trans),), tuple(lo(s) for s in slot_names))
        return TensorExpr((Term(Fraction(-1), (), (f,)),))
    lhs_slots, rhs = rule
    from .dsl import expand_macros
    rhs = expand_macros(rhs, prog)
    mapping = {s.name: n for s, n in zip(lhs_slots, slot_names)}
    out: list[Term] = []
    for t in rhs.terms:
        t = t.freshen_dummies(set(slot_names) | {trans} | set(mapping))
        t = t.rename(mapping)
        factors = []
        done = False
        for f in t.factors:
            if f.head == "dx" and not done:
                factors.append(connector(up(trans), f.slots[0]))
                done = True
            else:
                factors.append(f)
        if not done:
            raise UsageError(f"delta rule term for {field!r} lacks a dx factor")
        out.append(Term(t.coeff, t.params, tuple(factors)))
    return TensorExpr(tuple(out))


def _dynamical_fields(L: TensorExpr, prog: Program) -> list[str]:
    heads = {f.head for t in L.terms for f in t.factors}
    return sorted(h for h in heads
                  if h in prog.fields and prog.fields[h].kind == "dynamical")


def noether_current(L: TensorExpr, prog: Program,
                    out: tuple[str, str] = ("mu", "nu")) -> TensorExpr:
    """Translation-symmetry current J^{mu nu} (direction factored out)."""
    mu, nu = out
    if L.free_indices():
        raise UsageError("the Lagrangian must be a scalar")
    fields = prog.fields
    eta_mn = TensorExpr((Term(Fraction(1), (), (Factor("eta", (), (up(mu), up(nu))),)),))
    cur = eta_mn * L
    taken = {mu, nu} | {n for t in L.terms for n in t.names()}
    gen = fresh_names(taken, base="s")
    for fname in _dynamical_fields(L, prog):
        spec = fields[fname]
        s = tuple(next(gen) for _ in range(spec.rank))
        om = next(gen)
        K = variation_coefficient(prog, fname, s, nu)
        K = TensorExpr(tuple(t.freshen_dummies({mu, om}) for t in K.terms), K.dim)
        jd1 = jet_derivative(L, JetVariable(fname, (mu,), s), fields)
        cur = cur + jd1 * K
        jd2 = jet_derivative(L, JetVariable(fname, (mu, om), s), fields)
        if not jd2.is_zero():
            cur = cur + jd2 * total_derivative(K, lo(om), allow_contraction=True)
            cur = cur - total_derivative(jd2, lo(om), allow_contraction=True) * K
    return canonicalize(cur, fields)


def noether_emt(L: TensorExpr, prog: Program,
                out: tuple[str, str] = ("mu", "nu")) -> TensorExpr:
    """Energy-momentum tensor from the translation current, both indices up."""
    return noether_current(L, prog, out)


def noether_identity_residual(L: TensorExpr, prog: Program,
                              out: str = "nu") -> TensorExpr:
    """EL . deltaPhi + d_mu J^{mu nu}; identically zero for valid inputs."""
    fields = prog.fields
    taken = {out} | {n for t in L.terms for n in t.names()}
    gen = fresh_names(taken, base="r")
    mu = next(gen)
    res = zero(L.dim)
    for fname in _dynamical_fields(L, prog):
        spec = fields[fname]
        s = tuple(next(gen) for _ in range(spec.rank))
        K = variation_coefficient(prog, fname, s, out)
        K = TensorExpr(tuple(t.freshen_dummies({mu}) for t in K.terms), K.dim)
        el = euler_lagrange(L, fname, s, fields)
        res = res + el * K
    cur = noether_current(L, prog, (mu, out))
    res = res + total_derivative(cur, lo(mu), allow_contraction=True)
    return canonicalize(res, fields)
