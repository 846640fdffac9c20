"""Core tensor-expression model: exact-rational sums of indexed monomials.

A :class:`TensorExpr` is a flat sum of :class:`Term`s.  Each term is an exact
rational coefficient, a multiset of scalar parameter symbols and an unordered
product of :class:`Factor`s.  A factor is a head symbol carrying partial
derivative indices and slot indices; every index has explicit variance, so
raising and lowering always goes through explicit ``eta`` factors.

Index wiring follows the abstract-index convention: within one term every
index name appears either once (free) or exactly twice with opposite variance
(contracted).  All objects are immutable; operations return new values.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping


class TensorError(Exception):
    """Base class for engine errors."""


class ValidationError(TensorError):
    """Malformed expression: bad index wiring, rank mismatch, and similar."""


class UsageError(TensorError):
    """An operation was invoked outside its contract."""


@dataclass(frozen=True, order=True)
class Idx:
    """A single abstract index: a name plus explicit variance."""

    name: str
    up: bool = False

    def flipped(self) -> "Idx":
        return Idx(self.name, not self.up)

    def renamed(self, name: str) -> "Idx":
        return Idx(name, self.up)


def up(name: str) -> Idx:
    return Idx(name, True)


def lo(name: str) -> Idx:
    return Idx(name, False)


#: heads whose total derivative vanishes identically
CONSTANT_HEADS = frozenset({"eta", "delta"})


@dataclass(frozen=True, order=True)
class Factor:
    head: str
    derivs: tuple[Idx, ...] = ()
    slots: tuple[Idx, ...] = ()

    def indices(self) -> tuple[Idx, ...]:
        return self.derivs + self.slots

    def with_deriv(self, idx: Idx) -> "Factor":
        return Factor(self.head, tuple(sorted(self.derivs + (idx,))), self.slots)

    def rename(self, mapping: Mapping[str, str]) -> "Factor":
        def rn(i: Idx) -> Idx:
            return Idx(mapping.get(i.name, i.name), i.up)

        return Factor(self.head, tuple(rn(i) for i in self.derivs),
                      tuple(rn(i) for i in self.slots))


def connector(a: Idx, b: Idx) -> Factor:
    """A 2-index metric-type factor wiring ``a`` to ``b``.

    Same variance gives an ``eta`` factor, mixed variance a ``delta``
    (stored with the contravariant slot first).
    """
    if a.up == b.up:
        return Factor("eta", (), (a, b))
    if not a.up:
        a, b = b, a
    return Factor("delta", (), (a, b))


@dataclass(frozen=True)
class FieldSpec:
    symbol: str
    rank: int
    symmetry: str = "none"       # none | symmetric | antisymmetric
    kind: str = "dynamical"      # dynamical | metric | gauge-parameter | builtin


@dataclass(frozen=True)
class Term:
    coeff: Fraction
    params: tuple[str, ...] = ()
    factors: tuple[Factor, ...] = ()

    def indices(self) -> list[Idx]:
        out: list[Idx] = []
        for f in self.factors:
            out.extend(f.indices())
        return out

    def names(self) -> set[str]:
        return {i.name for i in self.indices()}

    def free_indices(self) -> dict[str, Idx]:
        """Map of free index name -> Idx.  Raises on invalid wiring."""
        occ: dict[str, list[Idx]] = {}
        for i in self.indices():
            occ.setdefault(i.name, []).append(i)
        free: dict[str, Idx] = {}
        for n, idxs in occ.items():
            if len(idxs) == 1:
                free[n] = idxs[0]
            elif len(idxs) == 2:
                if idxs[0].up == idxs[1].up:
                    raise ValidationError(
                        f"index '{n}' appears twice with the same variance")
            else:
                raise ValidationError(
                    f"index '{n}' appears {len(idxs)} times in one term")
        return free

    def validate(self) -> None:
        self.free_indices()

    def rename(self, mapping: Mapping[str, str]) -> "Term":
        return Term(self.coeff, self.params,
                    tuple(f.rename(mapping) for f in self.factors))

    def dummy_names(self) -> set[str]:
        seen: dict[str, int] = {}
        for i in self.indices():
            seen[i.name] = seen.get(i.name, 0) + 1
        return {n for n, c in seen.items() if c == 2}

    def freshen_dummies(self, avoid: set[str]) -> "Term":
        """Rename any dummy index whose name collides with ``avoid``."""
        clash = self.dummy_names() & avoid
        if not clash:
            return self
        taken = avoid | self.names()
        gen = fresh_names(taken)
        mapping = {n: next(gen) for n in sorted(clash)}
        return self.rename(mapping)

    def scaled(self, r: Fraction) -> "Term":
        return Term(self.coeff * r, self.params, self.factors)


def fresh_names(avoid: set[str], base: str = "z") -> Iterator[str]:
    k = 0
    while True:
        n = f"{base}{k}"
        k += 1
        if n not in avoid:
            yield n


def _join_dim(a, b, a_empty: bool, b_empty: bool):
    if a == b:
        return a
    if a_empty:
        return b
    if b_empty:
        return a
    raise UsageError(f"dimension mismatch: {a!r} vs {b!r}")


@dataclass(frozen=True)
class TensorExpr:
    terms: tuple[Term, ...] = ()
    dim: "int | str" = "D"

    # ---- algebra -------------------------------------------------------
    def __add__(self, other: "TensorExpr") -> "TensorExpr":
        dim = _join_dim(self.dim, other.dim, not self.terms, not other.terms)
        return TensorExpr(self.terms + other.terms, dim)

    def __neg__(self) -> "TensorExpr":
        return self.scale(Fraction(-1))

    def __sub__(self, other: "TensorExpr") -> "TensorExpr":
        return self + (-other)

    def scale(self, r) -> "TensorExpr":
        r = Fraction(r)
        return TensorExpr(tuple(t.scaled(r) for t in self.terms), self.dim)

    def __mul__(self, other: "TensorExpr") -> "TensorExpr":
        dim = _join_dim(self.dim, other.dim, not self.terms, not other.terms)
        out = []
        for ta in self.terms:
            a_names = ta.names()
            for tb in other.terms:
                tb2 = tb.freshen_dummies(a_names)
                out.append(Term(ta.coeff * tb2.coeff,
                                tuple(sorted(ta.params + tb2.params)),
                                ta.factors + tb2.factors))
        return TensorExpr(tuple(out), dim)

    # ---- inspection ----------------------------------------------------
    def free_indices(self) -> dict[str, Idx]:
        if not self.terms:
            return {}
        ref = self.terms[0].free_indices()
        for t in self.terms[1:]:
            cur = t.free_indices()
            if cur != ref:
                raise ValidationError(
                    f"terms have differing free indices: {sorted(ref)} vs {sorted(cur)}")
        return ref

    def validate(self) -> "TensorExpr":
        self.free_indices()
        return self

    def is_zero(self) -> bool:
        return not self.terms


def zero(dim="D") -> TensorExpr:
    return TensorExpr((), dim)


def scalar_expr(c, params: tuple[str, ...] = (), dim="D") -> TensorExpr:
    c = Fraction(c)
    if c == 0:
        return zero(dim)
    return TensorExpr((Term(c, tuple(sorted(params)), ()),), dim)


def factor_expr(f: Factor, coeff=1, dim="D") -> TensorExpr:
    return TensorExpr((Term(Fraction(coeff), (), (f,)),), dim)


def expand(e: TensorExpr) -> TensorExpr:
    """Validate and return the flat sum-of-monomials form.

    Products distribute eagerly in this representation, so this is a
    validating identity and is idempotent.
    """
    return e.validate()


def total_derivative(e: TensorExpr, idx: Idx,
                     allow_contraction: bool = False) -> TensorExpr:
    """Apply the formal partial derivative with index ``idx`` by Leibniz.

    ``idx`` must be fresh with respect to every term unless
    ``allow_contraction`` is set, in which case it may close onto an existing
    free index of opposite variance.
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
            fs = t.factors[:pos] + (f.with_deriv(idx),) + t.factors[pos + 1:]
            out.append(Term(t.coeff, t.params, fs))
    return TensorExpr(tuple(out), e.dim)


def _merge_terms(a: Term, b: Term) -> Term:
    b2 = b.freshen_dummies(a.names())
    return Term(a.coeff * b2.coeff, tuple(sorted(a.params + b2.params)),
                a.factors + b2.factors)


def substitute(e: TensorExpr, field: str, rule: TensorExpr,
               slots: tuple[str, ...]) -> TensorExpr:
    """Replace every occurrence of ``field`` by ``rule``.

    ``slots`` names the covariant free indices of ``rule`` standing for the
    replaced factor's slot positions.  Derivatives on replaced occurrences
    distribute onto the rule by Leibniz; contravariant occurrence slots are
    wired through explicit ``eta`` factors.
    """
    for rt in rule.terms:
        fr = rt.free_indices()
        for s in slots:
            if s not in fr or fr[s].up:
                raise UsageError(
                    f"substitution rule must carry covariant free index '{s}' in every term")

    # A rule may mention the substituted field itself (e.g. a shift
    # Phi -> Phi + ...); mask those occurrences so replacement terminates.
    sentinel = "__subst__" + field
    if any(f.head == field for rt in rule.terms for f in rt.factors):
        rule = TensorExpr(
            tuple(Term(rt.coeff, rt.params,
                       tuple(Factor(sentinel if f.head == field else f.head,
                                    f.derivs, f.slots) for f in rt.factors))
                  for rt in rule.terms), rule.dim)

    def replace_one(f: Factor, avoid: set[str]) -> TensorExpr:
        if len(f.slots) != len(slots):
            raise UsageError(
                f"substitution arity mismatch for '{field}': "
                f"{len(f.slots)} slots vs rule with {len(slots)}")
        out = zero(e.dim)
        for rt in rule.terms:
            taken = avoid | set(slots) | {i.name for i in f.indices()}
            rt2 = rt.freshen_dummies(taken)
            mapping: dict[str, str] = {}
            extra: list[Factor] = []
            gen = fresh_names(taken | rt2.names())
            for ph, target in zip(slots, f.slots):
                if target.up:
                    y = next(gen)
                    mapping[ph] = y
                    extra.append(connector(Idx(target.name, True), Idx(y, True)))
                else:
                    mapping[ph] = target.name
            rt3 = rt2.rename(mapping)
            rep = TensorExpr((Term(rt3.coeff, rt3.params,
                                   rt3.factors + tuple(extra)),), e.dim)
            for d in f.derivs:
                rep = total_derivative(rep, d, allow_contraction=True)
            out = out + rep
        return out

    def process(t: Term) -> list[Term]:
        for pos, f in enumerate(t.factors):
            if f.head != field:
                continue
            rest = Term(t.coeff, t.params, t.factors[:pos] + t.factors[pos + 1:])
            rep = replace_one(f, t.names())
            done: list[Term] = []
            for r in rep.terms:
                done.extend(process(_merge_terms(rest, r)))
            return done
        return [t]

    out: list[Term] = []
    for t in e.terms:
        out.extend(process(t))
    out = [Term(t.coeff, t.params,
                tuple(Factor(field if f.head == sentinel else f.head,
                             f.derivs, f.slots) for f in t.factors))
           for t in out]
    return TensorExpr(tuple(out), e.dim)


def subs_params(e: TensorExpr, values: Mapping[str, Fraction]) -> TensorExpr:
    """Substitute rational values for scalar parameter symbols."""
    out = []
    for t in e.terms:
        c = t.coeff
        keep = []
        for p in t.params:
            if p in values:
                c *= Fraction(values[p])
            else:
                keep.append(p)
        if c != 0:
            out.append(Term(c, tuple(keep), t.factors))
    return TensorExpr(tuple(out), e.dim)


def set_dim(e: TensorExpr, dim: int) -> TensorExpr:
    """Fix the symbolic spacetime dimension to an integer value."""
    if not isinstance(dim, int) or dim < 1:
        raise UsageError("dimension must be a positive integer")
    e2 = subs_params(TensorExpr(e.terms, dim), {"D": Fraction(dim)})
    return e2


# ---- JSON serialization -------------------------------------------------

def _idx_to_json(i: Idx) -> dict:
    return {"n": i.name, "v": "up" if i.up else "lo"}


def _idx_from_json(d: dict) -> Idx:
    if d["v"] not in ("up", "lo"):
        raise ValidationError(f"bad variance tag {d['v']!r}")
    return Idx(d["n"], d["v"] == "up")


def expr_to_json(e: TensorExpr) -> dict:
    return {
        "dim": e.dim,
        "terms": [
            {
                "coeff": str(t.coeff),
                "params": list(t.params),
                "factors": [
                    {
                        "head": f.head,
                        "derivs": [_idx_to_json(i) for i in f.derivs],
                        "slots": [_idx_to_json(i) for i in f.slots],
                    }
                    for f in t.factors
                ],
            }
            for t in e.terms
        ],
    }


def expr_from_json(obj: dict) -> TensorExpr:
    dim = obj.get("dim", "D")
    if not (dim == "D" or isinstance(dim, int)):
        raise ValidationError(f"bad dim {dim!r}")
    terms = []
    for td in obj.get("terms", []):
        factors = tuple(
            Factor(fd["head"],
                   tuple(_idx_from_json(i) for i in fd.get("derivs", [])),
                   tuple(_idx_from_json(i) for i in fd.get("slots", [])))
            for fd in td.get("factors", [])
        )
        terms.append(Term(Fraction(td["coeff"]),
                          tuple(sorted(td.get("params", []))), factors))
    return TensorExpr(tuple(terms), dim).validate()


def dump_expr(e: TensorExpr) -> str:
    return json.dumps(expr_to_json(e), indent=1, sort_keys=True) + "\n"


def load_expr(text: str) -> TensorExpr:
    return expr_from_json(json.loads(text))
