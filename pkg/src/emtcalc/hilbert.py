"""Energy-momentum tensors from metric variation.

A flat-spacetime Lagrangian is promoted to a curved background with metric
``g`` (inverse ``ginv``, volume density ``sqrtg``), the promoted density is
varied with respect to ``g_{gamma rho}``, and the result is restricted back to
the flat metric:

    T^{gamma rho} = 2 [ dL/dg_{gr} - d_om dL/d(d_om g_gr)
                        + d_xi d_om dL/d(d_xi d_om g_gr) ] |_{g = eta}

Promotion happens at the level of macro definitions: a macro whose expansion
is the linear curvature of a symmetric rank-2 field (or one of its traces) is
replaced by its covariant-derivative counterpart, a macro matching an
antisymmetrized first derivative of a vector field is kept as is, and purely
algebraic macros are rewired through ``g``/``ginv``.  Derivatives are kept off
``ginv`` and ``sqrtg`` by the usual rewrites, so only ``g`` ever carries them.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from .canon import canonicalize, equal, rename_free
from .dsl import MacroDef, Program, expand_macros
from .expr import (CONSTANT_HEADS, Factor, FieldSpec, Idx, TensorExpr, Term,
                   UsageError, ValidationError, fresh_names, lo, set_dim, up,
                   zero)
from .variational import JetVariable, jet_derivative, max_deriv_order

CURVED_FIELDS: dict[str, FieldSpec] = {
    "g": FieldSpec("g", 2, "symmetric", "metric"),
    "ginv": FieldSpec("ginv", 2, "symmetric", "metric"),
    "sqrtg": FieldSpec("sqrtg", 0, "none", "metric"),
}
METRIC_HEADS = frozenset(CURVED_FIELDS)


def curved_fields(fields: Mapping[str, FieldSpec]) -> dict[str, FieldSpec]:
    out = dict(fields)
    for k, v in CURVED_FIELDS.items():
        if k in out and out[k] != v:
            raise UsageError(f"field name {k!r} is reserved for the metric")
        out[k] = v
    return out


def curved_total_derivative(e: TensorExpr, idx: Idx,
                            allow_contraction: bool = False) -> TensorExpr:
    """Leibniz derivative that keeps all metric derivatives on ``g``.

    Uses d ginv^{ab} = -ginv^{ax} ginv^{by} d g_{xy} and
    d sqrtg = 1/2 sqrtg ginv^{xy} d g_{xy}.
    """
    out: list[Term] = []
    for t in e.terms:
        if idx.name in t.names():
            if not allow_contraction:
                raise UsageError(
                    f"derivative index '{idx.name}' collides with an index in the expression")
            if idx.name not in t.free_indices():
                raise ValidationError(
                    f"derivative index '{idx.name}' would appear three times")
        for pos, f in enumerate(t.factors):
            if f.head in CONSTANT_HEADS:
                continue
            rest = t.factors[:pos] + t.factors[pos + 1:]
            if f.head == "ginv":
                gen = fresh_names(t.names() | {idx.name})
                x, y = next(gen), next(gen)
                new = (Factor("ginv", (), (f.slots[0], up(x))),
                       Factor("ginv", (), (f.slots[1], up(y))),
                       Factor("g", (idx,), (lo(x), lo(y))))
                out.append(Term(-t.coeff, t.params, rest + new))
            elif f.head == "sqrtg":
                gen = fresh_names(t.names() | {idx.name})
                x, y = next(gen), next(gen)
                new = (Factor("sqrtg", (), ()),
                       Factor("ginv", (), (up(x), up(y))),
                       Factor("g", (idx,), (lo(x), lo(y))))
                out.append(Term(t.coeff / 2, t.params, rest + new))
            else:
                out.append(Term(t.coeff, t.params,
                                t.factors[:pos] + (f.with_deriv(idx),)
                                + t.factors[pos + 1:]))
    return TensorExpr(tuple(out), e.dim)


# ---- covariant building blocks ---------------------------------------------

def christoffel(x: str, c: str, a: str, dim="D") -> TensorExpr:
    """Gamma^x_{ca} for the metric g, expanded into ginv * dg."""
    m = "cs0"
    terms = []
    for didx, s0, s1, sign in ((lo(c), lo(m), lo(a), 1),
                               (lo(a), lo(m), lo(c), 1),
                               (lo(m), lo(c), lo(a), -1)):
        terms.append(Term(Fraction(sign, 2), (),
                          (Factor("ginv", (), (up(x), up(m))),
                           Factor("g", (didx,), (s0, s1)))))
    return TensorExpr(tuple(terms), dim)


def _nabla_h(field: str, c: str, a: str, b: str, dim="D") -> TensorExpr:
    """nabla_c h_{ab} for a rank-2 field on the curved background."""
    base = TensorExpr((Term(Fraction(1), (),
                            (Factor(field, (lo(c),), (lo(a), lo(b))),)),), dim)
    gx = "cx0"
    for slot, other in ((a, b), (b, a)):
        gam = christoffel(gx, c, slot, dim)
        hfac = TensorExpr((Term(Fraction(-1), (),
                                (Factor(field, (), (lo(gx), lo(other)))
                                 if other == b and slot == a else
                                 Factor(field, (), (lo(other), lo(gx))),)),),
                          dim)
        base = base + gam * hfac
    return base


def _nabla2_h(field: str, d: str, c: str, a: str, b: str, dim="D") -> TensorExpr:
    """nabla_d nabla_c h_{ab}."""
    inner = _nabla_h(field, c, a, b, dim)
    out = curved_total_derivative(inner, lo(d))
    gx = "cy0"
    for pos, names in enumerate(((gx, a, b), (c, gx, b), (c, a, gx))):
        slot = (c, a, b)[pos]
        gam = christoffel(gx, d, slot, dim)
        out = out + TensorExpr(
            tuple(Term(-t.coeff, t.params, t.factors)
                  for t in (gam * _nabla_h(field, *names, dim)).terms), dim)
    return out


def _linear_riemann_terms(field: str, i: tuple[Idx, Idx, Idx, Idx],
                          nabla: bool, dim="D") -> TensorExpr:
    """1/2 (D_1 D_4 h_23 + D_2 D_3 h_14 - D_1 D_3 h_24 - D_2 D_4 h_13)."""
    combos = (((0, 3, 1, 2), 1), ((1, 2, 0, 3), 1),
              ((0, 2, 1, 3), -1), ((1, 3, 0, 2), -1))
    out = zero(dim)
    for (d1, d2, a, b), sign in combos:
        if nabla:
            piece = _nabla2_h(field, i[d1].name, i[d2].name,
                              i[a].name, i[b].name, dim)
        else:
            piece = TensorExpr((Term(Fraction(1), (),
                                     (Factor(field,
                                             tuple(sorted((i[d1], i[d2]))),
                                             (i[a], i[b])),)),),
                               dim)
        out = out + TensorExpr(tuple(Term(t.coeff * sign / 2, t.params, t.factors)
                                     for t in piece.terms), dim)
    return out


def _with_variance(body: TensorExpr, internal: tuple[str, ...],
                   declared: tuple[Idx, ...], curved: bool) -> TensorExpr:
    """Rename all-covariant free names onto declared indices, raising the
    contravariant ones through ginv (curved) or eta (flat)."""
    declared_names = {i.name for i in declared}
    if declared_names & set(internal):
        gen = fresh_names(declared_names | set(internal), base="w")
        safe = {nm: next(gen) for nm in internal}
        body = rename_free(body, safe)
        internal = tuple(safe[nm] for nm in internal)
    mapping: dict[str, str] = {}
    extra: list[Factor] = []
    for nm, dec in zip(internal, declared):
        if dec.up:
            head = "ginv" if curved else "eta"
            extra.append(Factor(head, (), (up(dec.name), up(nm))))
        else:
            mapping[nm] = dec.name
    out = []
    for t in body.terms:
        t2 = t.freshen_dummies(set(mapping.values())
                               | {i.name for i in declared})
        out.append(Term(t2.coeff, t2.params,
                        t2.rename(mapping).factors + tuple(extra)))
    return TensorExpr(tuple(out), body.dim)


_COV_CACHE: dict[tuple[str, str], TensorExpr] = {}


def covariant_curvature(field: str, dim="D") -> TensorExpr:
    """Covariantized linear curvature nabla-R(h)_{c1 c2 c3 c4}, pruned of
    terms that cannot survive the flat restriction of a metric variation."""
    key = (field, str(dim))
    hit = _COV_CACHE.get(key)
    if hit is None:
        names = ("c1", "c2", "c3", "c4")
        raw = _linear_riemann_terms(field, tuple(lo(n) for n in names), True, dim)
        hit = canonicalize(prune_flat_vanishing(raw),
                           curved_fields({field: FieldSpec(field, 2, "symmetric")}))
        _COV_CACHE[key] = hit
    return hit


# ---- macro classification and promotion ------------------------------------

def _flat_pattern(field: str, declared: tuple[Idx, ...], contractions: int,
                  dim="D") -> TensorExpr:
    """Linear curvature pattern (rank 4), its trace (rank 2) or double trace
    (rank 0), carrying the declared free indices."""
    names = ["p1", "p2", "p3", "p4"]
    idx = [lo(n) for n in names]
    if contractions >= 1:
        idx[0], idx[2] = lo("pz"), up("pz")
    if contractions == 2:
        idx[1], idx[3] = lo("pw"), up("pw")
    body = _linear_riemann_terms(field, tuple(idx), False, dim)
    internal = {0: ("p1", "p2", "p3", "p4"), 1: ("p2", "p4"), 2: ()}[contractions]
    return _with_variance(body, internal, declared, curved=False)


def _curved_curvature(field: str, declared: tuple[Idx, ...], contractions: int,
                      dim="D") -> TensorExpr:
    cov = covariant_curvature(field, dim)
    if contractions >= 1:
        tr = TensorExpr((Term(Fraction(1), (),
                              (Factor("ginv", (), (up("c1"), up("c3"))),)),), dim)
        cov = cov * tr
    if contractions == 2:
        tr = TensorExpr((Term(Fraction(1), (),
                              (Factor("ginv", (), (up("c2"), up("c4"))),)),), dim)
        cov = cov * tr
    internal = {0: ("c1", "c2", "c3", "c4"), 1: ("c2", "c4"), 2: ()}[contractions]
    return _with_variance(cov, internal, declared, curved=True)


def _field_strength_pattern(field: str, declared: tuple[Idx, ...],
                            dim="D") -> TensorExpr:
    t1 = Term(Fraction(1), (), (Factor(field, (lo("p1"),), (lo("p2"),)),))
    t2 = Term(Fraction(-1), (), (Factor(field, (lo("p2"),), (lo("p1"),)),))
    return _with_variance(TensorExpr((t1, t2), dim), ("p1", "p2"), declared,
                          curved=False)


def _derived_tensor_heads(e: TensorExpr, fields: Mapping[str, FieldSpec]) -> set[str]:
    out = set()
    for t in e.terms:
        for f in t.factors:
            spec = fields.get(f.head)
            if spec is None or f.head in CONSTANT_HEADS:
                continue
            if f.derivs and (spec.rank >= 1 or len(f.derivs) >= 2):
                out.add(f.head)
    return out


def _classify_macro(name: str, prog: Program) -> MacroDef | None:
    """Curved replacement for a macro, or None for algebraic macros."""
    md = prog.defs[name]
    declared = md.params
    call = TensorExpr((Term(Fraction(1), (),
                            (Factor(name, (), declared),)),), "D")
    flat = canonicalize(expand_macros(call, prog), prog.fields)
    rank2_sym = [f for f in prog.fields.values()
                 if f.rank == 2 and f.symmetry == "symmetric"
                 and f.kind == "dynamical"]
    rank1 = [f for f in prog.fields.values()
             if f.rank == 1 and f.kind == "dynamical"]
    contractions = {4: 0, 2: 1, 0: 2}.get(len(declared))
    if contractions is not None:
        for spec in rank2_sym:
            pat = _flat_pattern(spec.symbol, declared, contractions)
            for sign in (1, -1):
                cand = pat if sign == 1 else TensorExpr(
                    tuple(Term(-t.coeff, t.params, t.factors) for t in pat.terms),
                    pat.dim)
                if equal(flat, cand, prog.fields):
                    body = _curved_curvature(spec.symbol, declared, contractions)
                    if sign == -1:
                        body = TensorExpr(tuple(Term(-t.coeff, t.params, t.factors)
                                                for t in body.terms), body.dim)
                    return MacroDef(name, declared, body)
    if len(declared) == 2:
        for spec in rank1:
            pat = _field_strength_pattern(spec.symbol, declared)
            for sign in (1, -1):
                cand = pat if sign == 1 else TensorExpr(
                    tuple(Term(-t.coeff, t.params, t.factors) for t in pat.terms),
                    pat.dim)
                if equal(flat, cand, prog.fields):
                    # antisymmetry makes the flat body covariant already
                    return MacroDef(name, declared, md.body)
    if _derived_tensor_heads(flat, prog.fields):
        raise UsageError(
            f"macro {name!r} differentiates a tensor field in a way that has "
            "no covariant promotion; supported shapes are linear curvature, "
            "its traces, antisymmetrized vector derivatives, and algebraic "
            "expressions")
    return None


def _rewire_term_curved(t: Term) -> Term:
    """eta -> g/ginv; contravariant indices on field factors are routed
    through explicit inverse-metric factors; one volume factor per term."""
    gen = fresh_names(t.names(), base="q")
    fs: list[Factor] = []
    extra: list[Factor] = []
    for f in t.factors:
        if f.head == "eta":
            if all(i.up for i in f.slots):
                fs.append(Factor("ginv", (), f.slots))
            elif not any(i.up for i in f.slots):
                fs.append(Factor("g", (), f.slots))
            else:
                fs.append(Factor("delta", (), f.slots))
            continue
        if f.head == "delta" or f.head in METRIC_HEADS:
            fs.append(f)
            continue
        derivs, slots = [], []
        for group, sink in ((f.derivs, derivs), (f.slots, slots)):
            for i in group:
                if i.up:
                    z = next(gen)
                    extra.append(Factor("ginv", (), (up(i.name), up(z))))
                    sink.append(lo(z))
                else:
                    sink.append(i)
        fs.append(Factor(f.head, tuple(sorted(derivs)), tuple(slots)))
    fs.extend(extra)
    fs.append(Factor("sqrtg", (), ()))
    return Term(t.coeff, t.params, tuple(fs))


def promote_to_curved(prog: Program) -> TensorExpr:
    """Curved-background Lagrangian density for a program's Lagrangian."""
    if prog.lagrangian is None:
        raise UsageError("the program defines no lagrangian")
    cdefs: dict[str, MacroDef] = {}
    for name in prog.defs:
        rep = _classify_macro(name, prog)
        if rep is not None:
            cdefs[name] = rep
    for t in prog.lagrangian.terms:
        for f in t.factors:
            if f.head in prog.defs and f.derivs:
                # the derivative would be taken before metric rewiring
                raise UsageError(
                    f"derivative of macro {f.head!r} has no covariant promotion")
            spec = prog.fields.get(f.head)
            if (spec is not None and f.derivs
                    and (spec.rank >= 1 or len(f.derivs) >= 2)):
                raise UsageError(
                    f"no covariant promotion for this derivative of {f.head!r}; "
                    "wrap it in a curvature or field-strength macro")
    cprog = Program(fields=curved_fields(prog.fields), params=list(prog.params),
                    defs={**{n: d for n, d in prog.defs.items() if n not in cdefs},
                          **cdefs})
    expanded = expand_macros(prog.lagrangian, cprog)
    return TensorExpr(tuple(_rewire_term_curved(t) for t in expanded.terms),
                      expanded.dim)


def prune_flat_vanishing(e: TensorExpr, max_use: int = 2) -> TensorExpr:
    """Drop terms that cannot contribute to the flat-restricted variation.

    A term survives only when at most one metric factor carries derivatives
    and that factor's order does not exceed the variation's jet order."""
    keep = []
    for t in e.terms:
        derived = [f for f in t.factors
                   if f.head in METRIC_HEADS and f.derivs]
        if len(derived) > 1:
            continue
        if derived and len(derived[0].derivs) > max_use:
            continue
        keep.append(t)
    return TensorExpr(tuple(keep), e.dim)


# ---- metric variation -------------------------------------------------------

def metric_jet_derivative(L: TensorExpr, deriv_names: tuple[str, ...],
                          slot_names: tuple[str, str],
                          fields: Mapping[str, FieldSpec]) -> TensorExpr:
    """Derivative of ``L`` with respect to (derivatives of) g_{slot_names},
    including the chain rule through ginv and sqrtg at order zero."""
    out = jet_derivative(L, JetVariable("g", deriv_names, slot_names), fields)
    if deriv_names:
        return out
    ga, rho = slot_names
    vnames = {ga, rho}
    extra: list[Term] = []
    for t0 in L.terms:
        if vnames & set(t0.free_indices()):
            raise UsageError("variation index names collide with free indices")
        t = t0.freshen_dummies(vnames)
        for pos, f in enumerate(t.factors):
            rest = t.factors[:pos] + t.factors[pos + 1:]
            if f.head == "ginv" and not f.derivs:
                a, b = f.slots
                for s1, s2 in ((ga, rho), (rho, ga)):
                    extra.append(Term(-t.coeff / 4, t.params, rest + (
                        Factor("ginv", (), (a, up(s1))),
                        Factor("ginv", (), (b, up(s2))))))
                    extra.append(Term(-t.coeff / 4, t.params, rest + (
                        Factor("ginv", (), (b, up(s1))),
                        Factor("ginv", (), (a, up(s2))))))
            elif f.head == "sqrtg" and not f.derivs:
                extra.append(Term(t.coeff / 2, t.params, rest + (
                    Factor("sqrtg", (), ()),
                    Factor("ginv", (), (up(ga), up(rho))))))
    return out + TensorExpr(tuple(extra), L.dim)


def metric_variation(L: TensorExpr, fields: Mapping[str, FieldSpec],
                     out: tuple[str, str] = ("mu", "nu")) -> TensorExpr:
    """Variational derivative dL/dg_{mu nu} as a rank-2 contravariant field."""
    if L.free_indices():
        raise UsageError("the promoted Lagrangian must be a scalar")
    order = max_deriv_order(L, "g")
    if order > 2:
        raise UsageError(
            f"metric variation supports up to second derivatives, found order {order}")
    taken = set(out) | {n for t in L.terms for n in t.names()}
    gen = fresh_names(taken, base="v")
    om, xi = next(gen), next(gen)
    result = metric_jet_derivative(L, (), out, fields)
    if order >= 1:
        p1 = metric_jet_derivative(L, (om,), out, fields)
        d1 = curved_total_derivative(p1, lo(om), allow_contraction=True)
        result = result + TensorExpr(
            tuple(Term(-t.coeff, t.params, t.factors) for t in d1.terms), L.dim)
    if order == 2:
        p2 = metric_jet_derivative(L, (xi, om), out, fields)
        d2 = curved_total_derivative(p2, lo(om), allow_contraction=True)
        d2 = curved_total_derivative(d2, lo(xi), allow_contraction=True)
        result = result + d2
    return result


def flat_restrict(e: TensorExpr) -> TensorExpr:
    """Set g to the flat metric: derived metric factors vanish, bare metric
    factors become eta, the volume factor becomes one."""
    out = []
    for t in e.terms:
        fs = []
        dead = False
        for f in t.factors:
            if f.head in METRIC_HEADS:
                if f.derivs:
                    dead = True
                    break
                if f.head == "sqrtg":
                    continue
                fs.append(Factor("eta", (), f.slots))
            else:
                fs.append(f)
        if not dead:
            out.append(Term(t.coeff, t.params, tuple(fs)))
    return TensorExpr(tuple(out), e.dim)


def hilbert_emt(prog: Program, out: tuple[str, str] = ("mu", "nu"),
                dim=4, stages: dict | None = None) -> TensorExpr:
    """Energy-momentum tensor by metric variation, both indices up."""
    fields = curved_fields(prog.fields)
    promoted = promote_to_curved(prog)
    if stages is not None:
        stages["promoted"] = canonicalize(promoted, fields)
    pruned = canonicalize(prune_flat_vanishing(promoted), fields)
    if stages is not None:
        stages["pruned"] = pruned
    varied = metric_variation(pruned, fields, out)
    if stages is not None:
        stages["varied"] = canonicalize(prune_flat_vanishing(varied, max_use=0),
                                        fields)
    flat = flat_restrict(varied)
    doubled = TensorExpr(tuple(Term(2 * t.coeff, t.params, t.factors)
                               for t in flat.terms), flat.dim)
    if isinstance(dim, int):
        doubled = set_dim(doubled, dim)
    T = canonicalize(doubled, prog.fields)
    if stages is not None:
        stages["flat"] = T
    return T
