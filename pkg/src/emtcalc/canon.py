"""Canonical forms for tensor expressions.

Per term the pipeline is:

1. absorb ``eta``/``delta`` contractions (raising, lowering, chains and
   traces; traces contribute a factor of the spacetime dimension);
2. search the symmetry-allowed rearrangements -- factor order within
   equal-shape groups, derivative order, symmetric/antisymmetric slot order
   (with sign) -- for the lexicographically minimal term encoding, with dummy
   pairs oriented so that the first occurrence is covariant;
3. rename dummies by first appearance and merge terms with identical
   canonical factor lists by summing coefficients.

A term whose minimal encoding is reachable with both signs cancels against
itself (for example the trace of an antisymmetric factor) and is dropped.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Mapping

from .expr import (CONSTANT_HEADS, Factor, FieldSpec, Idx, TensorExpr, Term,
                   UsageError, fresh_names)

_CONNECTORS = ("eta", "delta")


def _symmetry(head: str, fields: Mapping[str, FieldSpec]) -> str:
    if head in _CONNECTORS:
        return "symmetric"
    spec = fields.get(head)
    return spec.symmetry if spec is not None else "none"


# ---- connector absorption -------------------------------------------------

def _find_index(factors: list[Factor], skip: int, name: str):
    """Locate an occurrence of ``name`` outside factor ``skip``."""
    for j, f in enumerate(factors):
        if j == skip:
            continue
        for kind, seq in (("derivs", f.derivs), ("slots", f.slots)):
            for pos, i in enumerate(seq):
                if i.name == name:
                    return j, kind, pos
    return None


def _replace_index(f: Factor, kind: str, pos: int, new: Idx) -> Factor:
    if kind == "derivs":
        d = list(f.derivs)
        d[pos] = new
        return Factor(f.head, tuple(d), f.slots)
    s = list(f.slots)
    s[pos] = new
    return Factor(f.head, f.derivs, tuple(s))


def _absorb_connectors(term: Term, dim) -> Term:
    coeff = term.coeff
    params = list(term.params)
    factors = list(term.factors)
    changed = True
    while changed:
        changed = False
        for i, f in enumerate(factors):
            if f.head not in _CONNECTORS or f.derivs:
                continue
            a, b = f.slots
            if a.name == b.name:
                # eta^mu_mu / delta^mu_mu: a full trace
                del factors[i]
                if isinstance(dim, int):
                    coeff *= dim
                else:
                    params.append("D")
                changed = True
                break
            hit = _find_index(factors, i, a.name)
            other = b
            if hit is None:
                hit = _find_index(factors, i, b.name)
                other = a
            if hit is None:
                continue  # both slots free: keep the factor
            j, kind, pos = hit
            factors[j] = _replace_index(factors[j], kind, pos,
                                        Idx(other.name, other.up))
            del factors[i]
            changed = True
            break
    return Term(coeff, tuple(sorted(params)), tuple(factors))


# ---- minimal-encoding search ------------------------------------------------

def _parity(perm: tuple[int, ...]) -> int:
    inv = 0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                inv += 1
    return -1 if inv % 2 else 1


def _arrangements(f: Factor, fields) -> list[tuple[tuple[Idx, ...], tuple[Idx, ...], int]]:
    dperms = sorted(set(itertools.permutations(f.derivs)))
    sym = _symmetry(f.head, fields)
    if sym == "none" or len(f.slots) < 2:
        sperms = [(f.slots, 1)]
    else:
        seen: dict[tuple[Idx, ...], int] = {}
        for perm in itertools.permutations(range(len(f.slots))):
            s = tuple(f.slots[i] for i in perm)
            sign = _parity(perm) if sym == "antisymmetric" else 1
            seen.setdefault(s, sign)
        sperms = sorted(seen.items())
    return [(d, s, sg) for d in dperms for s, sg in sperms]


def _inv_elem(i: Idx, free: set[str]):
    # Dummy variance is excluded: contracted pairs may be reoriented freely,
    # so it is not an invariant of the factor.
    if i.name in free:
        return (0, i.name, i.up)
    return (1, "", False)


def _shape_key(f: Factor, free: set[str], fields):
    sym = _symmetry(f.head, fields)
    dkey = tuple(sorted(_inv_elem(i, free) for i in f.derivs))
    if sym == "none":
        skey = tuple(_inv_elem(i, free) for i in f.slots)
    else:
        skey = tuple(sorted(_inv_elem(i, free) for i in f.slots))
    return (f.head, len(f.derivs), len(f.slots), sym, dkey, skey)


def _encode_factor(head: str, ds, ss, lm: dict, free: set[str]):
    """Encode one arranged factor; extends the dummy label map ``lm``."""
    elems = []
    for i in ds + ss:
        if i.name in free:
            elems.append((0, i.name, i.up))
        else:
            idn = lm.get(i.name)
            if idn is None:
                idn = len(lm)
                lm[i.name] = idn
            elems.append((1, idn, False))
    return (head, len(ds), tuple(elems))


def _shape_groups(factors, free: set[str], fields) -> list[list[Factor]]:
    keyed = sorted(((_shape_key(f, free, fields), f) for f in factors),
                   key=lambda kv: kv)
    groups: list[tuple[tuple, list[Factor]]] = []
    for key, f in keyed:
        if groups and groups[-1][0] == key:
            groups[-1][1].append(f)
        else:
            groups.append((key, [f]))
    return [members for _, members in groups]


def _min_term_encoding(factors, free: set[str], fields):
    """Lexicographically minimal encoding over all allowed rearrangements.

    Factor order between shape groups is fixed; within a group the next
    factor is chosen greedily by minimal encoded block, branching on ties so
    no minimum is missed.  ``blocks is None`` signals a term that cancels
    against itself (the same minimal form is reachable with both signs).
    """
    opt_cache: dict[Factor, list] = {}

    def opts(f: Factor):
        o = opt_cache.get(f)
        if o is None:
            o = _arrangements(f, fields)
            opt_cache[f] = o
        return o

    states: list[tuple[dict, int]] = [({}, 1)]
    blocks = []
    for members in _shape_groups(factors, free, fields):
        cur = [(tuple(sorted(members)), lm, sg) for lm, sg in states]
        for _ in members:
            best = None
            nxt: dict[tuple, set[int]] = {}
            for rem, lm, sg in cur:
                tried = set()
                for k, f in enumerate(rem):
                    if f in tried:
                        continue
                    tried.add(f)
                    rem2 = rem[:k] + rem[k + 1:]
                    for ds, ss, asg in opts(f):
                        lm2 = dict(lm)
                        block = _encode_factor(f.head, ds, ss, lm2, free)
                        if best is None or block < best:
                            best = block
                            nxt = {}
                        if block == best:
                            nxt.setdefault(
                                (rem2, tuple(sorted(lm2.items()))),
                                set()).add(sg * asg)
            blocks.append(best)
            cur = []
            for (rem2, lmk), sset in sorted(nxt.items()):
                if len(sset) == 2:
                    return None, {1, -1}
                cur.append((rem2, dict(lmk), next(iter(sset))))
        merged: dict[tuple, set[int]] = {}
        for _, lm, sg in cur:
            merged.setdefault(tuple(sorted(lm.items())), set()).add(sg)
        states = []
        for lmk, sset in sorted(merged.items()):
            if len(sset) == 2:
                return None, {1, -1}
            states.append((dict(lmk), next(iter(sset))))
    signs = {sg for _, sg in states}
    if len(signs) == 2:
        return None, signs
    return tuple(blocks), signs


def _rebuild(enc, free_map: Mapping[str, Idx]):
    n_ids = 0
    for _, _, elems in enc:
        for e in elems:
            if e[0] == 1:
                n_ids = max(n_ids, e[1] + 1)
    gen = fresh_names(set(free_map), base="i")
    pool = [next(gen) for _ in range(n_ids)]
    occ: dict[int, int] = {}
    factors = []
    for head, k, elems in enc:
        idxs = []
        for e in elems:
            if e[0] == 0:
                idxs.append(Idx(e[1], e[2]))
            else:
                c = occ.get(e[1], 0)
                occ[e[1]] = c + 1
                idxs.append(Idx(pool[e[1]], c > 0))
        factors.append(Factor(head, tuple(idxs[:k]), tuple(idxs[k:])))
    return tuple(factors)


def _canon_term(term: Term, fields, dim, memo):
    t = _absorb_connectors(term, dim)
    if t.coeff == 0:
        return None
    for f in t.factors:
        if f.head in _CONNECTORS and f.derivs:
            return None  # derivative of a constant tensor
    key = (t.factors, dim if isinstance(dim, int) else "D")
    hit = memo.get(key)
    if hit is not None:
        factors, sign = hit
        if factors is None:
            return None
        return (t.params, factors), t.coeff * sign
    free_map = t.free_indices()
    free = set(free_map)
    if not t.factors:
        memo[key] = ((), 1)
        return (t.params, ()), t.coeff
    best, signs_at_best = _min_term_encoding(t.factors, free, fields)
    if best is None or len(signs_at_best) == 2:
        memo[key] = (None, 0)
        return None
    sign = signs_at_best.pop()
    factors = _rebuild(best, free_map)
    memo[key] = (factors, sign)
    return (t.params, factors), t.coeff * sign


def canonicalize(e: TensorExpr, fields: Mapping[str, FieldSpec] | None = None) -> TensorExpr:
    """Return the canonical form of ``e``.

    Idempotent, invariant under dummy relabeling and term/factor reordering,
    and linear over term concatenation.
    """
    fields = fields or {}
    memo: dict = {}
    acc: dict[tuple, Fraction] = {}
    for t in e.terms:
        res = _canon_term(t, fields, e.dim, memo)
        if res is None:
            continue
        key, coeff = res
        acc[key] = acc.get(key, Fraction(0)) + coeff
    terms = [Term(c, params, factors)
             for (params, factors), c in acc.items() if c != 0]
    terms.sort(key=lambda t: (t.factors, t.params))
    return TensorExpr(tuple(terms), e.dim)


def rename_free(e: TensorExpr, mapping: Mapping[str, str]) -> TensorExpr:
    """Rename free indices; dummies colliding with targets are freshened."""
    out = []
    for t in e.terms:
        t2 = t.freshen_dummies(set(mapping.values()) | set(mapping))
        out.append(t2.rename(dict(mapping)))
    return TensorExpr(tuple(out), e.dim)


def match_free(a: TensorExpr, b: TensorExpr) -> TensorExpr:
    """Rename ``b``'s free indices onto ``a``'s by sorted position."""
    fa = a.free_indices()
    fb = b.free_indices()
    if len(fa) != len(fb):
        raise UsageError(
            f"free index mismatch: {sorted(fa)} vs {sorted(fb)}")
    mapping = {}
    for (na, ia), (nb, ib) in zip(sorted(fa.items()), sorted(fb.items())):
        if ia.up != ib.up:
            raise UsageError(
                f"free index variance mismatch: '{na}' vs '{nb}'")
        if na != nb:
            mapping[nb] = na
    return rename_free(b, mapping) if mapping else b


def equal(a: TensorExpr, b: TensorExpr,
          fields: Mapping[str, FieldSpec] | None = None) -> bool:
    """Exact canonical equality, after matching free indices by position."""
    b2 = match_free(a, b)
    return canonicalize(a - b2, fields).is_zero()
