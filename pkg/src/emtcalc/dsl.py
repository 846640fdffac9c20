"""Parser for the Lagrangian description language.

Grammar (whitespace-insensitive, ``#`` starts a line comment)::

    file  := stmt*
    stmt  := "field" NAME "{" "rank" ":" INT ["," "symmetry" ":" SYM] "}"
           | "param" NAME ("," NAME)*
           | "def" NAME "[" [idx ("," idx)*] "]" "=" expr
           | "delta" NAME "[" [idx ("," idx)*] "]" "=" expr
           | "lagrangian" "=" expr
    expr  := ["-"] term (("+" | "-") term)*
    term  := factor ("*" factor)*
    factor:= RAT | NAME | NAME "[" idx ("," idx)* "]"
           | "d" "[" idx "]" factor | "(" expr ")"
    idx   := NAME | "^" NAME

``d[mu]`` binds to the factor immediately following it; stacked derivatives
read outermost first.  ``eta`` and ``delta`` are built-in; ``dx`` is the
translation direction and is only legal inside ``delta`` statements.
Macro (``def``) bodies declare the variance of each index parameter; a use
site may pass either variance, and mismatches are wired through explicit
``eta`` factors.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from .canon import canonicalize
from .expr import (Factor, FieldSpec, Idx, TensorExpr, Term, UsageError,
                   ValidationError, connector, fresh_names, scalar_expr,
                   total_derivative, zero)

RESERVED = {"field", "param", "def", "delta", "lagrangian", "d", "rank",
            "symmetry", "eta", "dx"}
SYMMETRIES = {"none", "symmetric", "antisymmetric"}


class ParseError(UsageError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[\[\]{}():,=*+^/-])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str  # int | name | punct | eof
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos, line, start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}",
                             line, pos - start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, text, line, pos - start + 1))
        line += text.count("\n")
        if "\n" in text:
            start = pos + text.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, len(src) - start + 1))
    return toks


@dataclass(frozen=True)
class MacroDef:
    name: str
    params: tuple[Idx, ...]      # declared names with body variance
    body: TensorExpr


@dataclass
class Program:
    fields: dict[str, FieldSpec] = dc_field(default_factory=dict)
    params: list[str] = dc_field(default_factory=list)
    defs: dict[str, MacroDef] = dc_field(default_factory=dict)
    lagrangian: TensorExpr | None = None
    deltas: dict[str, tuple[tuple[Idx, ...], TensorExpr]] = dc_field(default_factory=dict)

    def known(self, name: str) -> bool:
        return (name in self.fields or name in self.params
                or name in self.defs or name in ("eta", "delta"))


class _Parser:
    def __init__(self, src: str, base: Program | None = None,
                 allow_dx: bool = False):
        self.toks = _tokenize(src)
        self.pos = 0
        self.prog = Program()
        if base is not None:
            self.prog.fields.update(base.fields)
            self.prog.params.extend(base.params)
            self.prog.defs.update(base.defs)
            self.prog.lagrangian = base.lagrangian
            self.prog.deltas.update(base.deltas)
        self.in_delta = False
        self.allow_dx = allow_dx

    # --- token helpers ---
    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}",
                             t.line, t.col)
        return t

    def expect_name(self) -> _Tok:
        t = self.next()
        if t.kind != "name":
            raise ParseError(f"expected a name, found {t.text!r}", t.line, t.col)
        return t

    def err(self, msg: str):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    # --- statements ---
    def parse_program(self) -> Program:
        while self.peek().kind != "eof":
            t = self.peek()
            if t.text == "field":
                self.stmt_field()
            elif t.text == "param":
                self.stmt_param()
            elif t.text == "def":
                self.stmt_def()
            elif t.text == "delta":
                self.stmt_delta()
            elif t.text == "lagrangian":
                self.stmt_lagrangian()
            else:
                self.err(f"unexpected {t.text!r}; expected a statement")
        return self.prog

    def declare(self, name: str, tok: _Tok):
        if name in RESERVED:
            raise ParseError(f"{name!r} is reserved", tok.line, tok.col)
        if self.prog.known(name):
            raise ParseError(f"{name!r} is already declared", tok.line, tok.col)

    def stmt_field(self):
        self.next()
        nm = self.expect_name()
        self.declare(nm.text, nm)
        self.expect("{")
        self.expect("rank")
        self.expect(":")
        rk = self.next()
        if rk.kind != "int":
            raise ParseError("rank must be an integer", rk.line, rk.col)
        sym = "none"
        if self.peek().text == ",":
            self.next()
            self.expect("symmetry")
            self.expect(":")
            st = self.expect_name()
            if st.text not in SYMMETRIES:
                raise ParseError(f"unknown symmetry {st.text!r}", st.line, st.col)
            sym = st.text
        self.expect("}")
        rank = int(rk.text)
        if sym != "none" and rank != 2:
            raise ParseError("symmetry declarations require rank 2", nm.line, nm.col)
        self.prog.fields[nm.text] = FieldSpec(nm.text, rank, sym)

    def stmt_param(self):
        self.next()
        while True:
            nm = self.expect_name()
            self.declare(nm.text, nm)
            self.prog.params.append(nm.text)
            if self.peek().text == ",":
                self.next()
            else:
                break

    def parse_idx_list(self) -> list[Idx]:
        self.expect("[")
        out: list[Idx] = []
        if self.peek().text == "]":
            self.next()
            return out
        while True:
            upv = False
            if self.peek().text == "^":
                self.next()
                upv = True
            nm = self.expect_name()
            out.append(Idx(nm.text, upv))
            t = self.next()
            if t.text == "]":
                return out
            if t.text != ",":
                raise ParseError(f"expected ',' or ']', found {t.text!r}",
                                 t.line, t.col)

    def stmt_def(self):
        self.next()
        nm = self.expect_name()
        self.declare(nm.text, nm)
        params = tuple(self.parse_idx_list())
        seen = set()
        for p in params:
            if p.name in seen:
                raise ParseError(f"duplicate macro index {p.name!r}", nm.line, nm.col)
            seen.add(p.name)
        self.expect("=")
        body = self.parse_expr()
        want = {p.name: p for p in params}
        got = body.free_indices() if body.terms else {}
        if set(got) != set(want) or any(got[n].up != want[n].up for n in got):
            raise ParseError(
                f"macro '{nm.text}' body free indices do not match its header",
                nm.line, nm.col)
        self.prog.defs[nm.text] = MacroDef(nm.text, params, body)

    def stmt_delta(self):
        tok = self.next()
        nm = self.expect_name()
        if nm.text not in self.prog.fields:
            raise ParseError(f"delta rule for undeclared field {nm.text!r}",
                             nm.line, nm.col)
        slots = tuple(self.parse_idx_list())
        spec = self.prog.fields[nm.text]
        if len(slots) != spec.rank or any(s.up for s in slots):
            raise ParseError(
                f"delta rule for '{nm.text}' must list {spec.rank} covariant slots",
                nm.line, nm.col)
        self.expect("=")
        self.in_delta = True
        rhs = self.parse_expr()
        self.in_delta = False
        n_dx = sum(1 for t in rhs.terms for f in t.factors if f.head == "dx")
        if n_dx != len(rhs.terms):
            raise ParseError("each delta-rule term needs exactly one dx factor",
                             tok.line, tok.col)
        self.prog.deltas[nm.text] = (slots, rhs)

    def stmt_lagrangian(self):
        tok = self.next()
        if self.prog.lagrangian is not None:
            raise ParseError("lagrangian is already defined", tok.line, tok.col)
        self.expect("=")
        e = self.parse_expr()
        if e.terms and e.free_indices():
            raise ParseError("lagrangian must be a scalar", tok.line, tok.col)
        self.prog.lagrangian = e

    # --- expressions ---
    def parse_expr(self) -> TensorExpr:
        neg = False
        if self.peek().text == "-":
            self.next()
            neg = True
        e = self.parse_term()
        if neg:
            e = -e
        while self.peek().text in ("+", "-"):
            op = self.next().text
            t = self.parse_term()
            e = e + t if op == "+" else e - t
        return e

    def parse_term(self) -> TensorExpr:
        e = self.parse_factor()
        while True:
            nxt = self.peek()
            if nxt.text == "*":
                self.next()
                e = e * self.parse_factor()
            else:
                break
        return e

    def parse_factor(self) -> TensorExpr:
        t = self.peek()
        if t.text == "(":
            self.next()
            e = self.parse_expr()
            self.expect(")")
            return e
        if t.kind == "int":
            self.next()
            num = int(t.text)
            if self.peek().text == "/":
                self.next()
                den = self.next()
                if den.kind != "int":
                    raise ParseError("expected an integer denominator",
                                     den.line, den.col)
                return scalar_expr(Fraction(num, int(den.text)))
            return scalar_expr(num)
        if t.text == "d":
            self.next()
            idxs = self.parse_idx_list()
            if len(idxs) != 1:
                raise ParseError("d[...] takes exactly one index", t.line, t.col)
            inner = self.parse_factor()
            return total_derivative(inner, idxs[0], allow_contraction=True)
        if t.kind == "name":
            self.next()
            name = t.text
            slots: list[Idx] | None = None
            if self.peek().text == "[":
                slots = self.parse_idx_list()
            return self.symbol_use(name, slots, t)
        raise ParseError(f"unexpected {t.text!r} in expression", t.line, t.col)

    def symbol_use(self, name: str, slots: list[Idx] | None, tok: _Tok) -> TensorExpr:
        prog = self.prog
        if name == "dx":
            if not (self.in_delta or self.allow_dx):
                raise ParseError("dx is only allowed in delta rules", tok.line, tok.col)
            if slots is None or len(slots) != 1:
                raise ParseError("dx takes exactly one index", tok.line, tok.col)
            return TensorExpr((Term(Fraction(1), (), (Factor("dx", (), tuple(slots)),)),))
        if name in ("eta", "delta") and slots is not None:
            if len(slots) != 2:
                raise ParseError(f"{name} takes two indices", tok.line, tok.col)
            if name == "eta" and slots[0].up != slots[1].up:
                raise ParseError("eta slots must share variance; use delta",
                                 tok.line, tok.col)
            if name == "delta" and slots[0].up == slots[1].up:
                raise ParseError("delta needs one upper and one lower index",
                                 tok.line, tok.col)
            return TensorExpr((Term(Fraction(1), (), (connector(slots[0], slots[1]),)),))
        if name in prog.params:
            if slots is not None:
                raise ParseError(f"parameter {name!r} takes no indices",
                                 tok.line, tok.col)
            return scalar_expr(1, params=(name,))
        if name in prog.fields:
            spec = prog.fields[name]
            got = [] if slots is None else slots
            if len(got) != spec.rank:
                raise ParseError(
                    f"field {name!r} has rank {spec.rank}, got {len(got)} indices",
                    tok.line, tok.col)
            return TensorExpr((Term(Fraction(1), (), (Factor(name, (), tuple(got)),)),))
        if name in prog.defs:
            md = prog.defs[name]
            got = [] if slots is None else slots
            if len(got) != len(md.params):
                raise ParseError(
                    f"macro {name!r} takes {len(md.params)} indices, got {len(got)}",
                    tok.line, tok.col)
            return TensorExpr((Term(Fraction(1), (), (Factor(name, (), tuple(got)),)),))
        raise ParseError(f"unknown symbol {name!r}", tok.line, tok.col)


def parse(src: str, base: Program | None = None) -> Program:
    """Parse a program; ``base`` supplies declarations visible to rule files."""
    return _Parser(src, base).parse_program()


def parse_expr(src: str, prog: Program, allow_dx: bool = False) -> TensorExpr:
    """Parse a single expression in the context of ``prog``."""
    p = _Parser(src, prog, allow_dx=allow_dx)
    e = p.parse_expr()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    return e


# ---- macro expansion ------------------------------------------------------

def _check_recursion(prog: Program):
    def deps(name: str) -> set[str]:
        out = set()
        for t in prog.defs[name].body.terms:
            for f in t.factors:
                if f.head in prog.defs:
                    out.add(f.head)
        return out

    state: dict[str, int] = {}

    def visit(n: str, chain: list[str]):
        if state.get(n) == 1:
            raise UsageError(f"recursive macro definition: {' -> '.join(chain + [n])}")
        if state.get(n) == 2:
            return
        state[n] = 1
        for m in deps(n):
            visit(m, chain + [n])
        state[n] = 2

    for n in prog.defs:
        visit(n, [])


def expand_macros(e: TensorExpr, prog: Program) -> TensorExpr:
    """Resolve macro factors into declared fields (without canonicalizing)."""
    _check_recursion(prog)

    def expand_term(t: Term) -> list[Term]:
        for pos, f in enumerate(t.factors):
            if f.head not in prog.defs:
                continue
            md = prog.defs[f.head]
            rest = Term(t.coeff, t.params, t.factors[:pos] + t.factors[pos + 1:])
            rep = zero(e.dim)
            for bt in md.body.terms:
                taken = t.names() | bt.names() | {i.name for i in f.slots}
                bt2 = bt.freshen_dummies(taken)
                gen = fresh_names(taken | bt2.names())
                mapping: dict[str, str] = {}
                extra: list[Factor] = []
                for p, u in zip(md.params, f.slots):
                    if p.up == u.up:
                        mapping[p.name] = u.name
                    else:
                        y = next(gen)
                        mapping[p.name] = y
                        extra.append(connector(Idx(u.name, u.up), Idx(y, u.up)))
                bt3 = bt2.rename(mapping)
                rep = rep + TensorExpr(
                    (Term(bt3.coeff, bt3.params, bt3.factors + tuple(extra)),),
                    e.dim)
            for d in f.derivs:
                rep = total_derivative(rep, d, allow_contraction=True)
            out: list[Term] = []
            for r in rep.terms:
                merged = Term(rest.coeff * r.coeff,
                              tuple(sorted(rest.params + r.params)),
                              rest.factors + r.freshen_dummies(rest.names()).factors)
                out.extend(expand_term(merged))
            return out
        return [t]

    out: list[Term] = []
    for t in e.terms:
        out.extend(expand_term(t))
    return TensorExpr(tuple(out), e.dim)


def expand_defs(prog: Program) -> TensorExpr:
    """Macro-expanded, canonicalized Lagrangian of a program."""
    if prog.lagrangian is None:
        raise UsageError("the program defines no lagrangian")
    return canonicalize(expand_macros(prog.lagrangian, prog), prog.fields)


# ---- rendering ------------------------------------------------------------

def _render_idx(i: Idx) -> str:
    return f"^{i.name}" if i.up else i.name


def _render_factor(f: Factor) -> str:
    s = "".join(f"d[{_render_idx(d)}] " for d in f.derivs)
    if f.slots:
        return s + f"{f.head}[{', '.join(_render_idx(i) for i in f.slots)}]"
    return s + f.head


def render(e: TensorExpr, fmt: str = "dsl") -> str:
    """Render an expression as DSL text or JSON."""
    if fmt == "json":
        from .expr import dump_expr
        return dump_expr(e)
    if fmt != "dsl":
        raise UsageError(f"unknown render format {fmt!r}")
    if not e.terms:
        return "0"
    parts = []
    for k, t in enumerate(e.terms):
        c = t.coeff
        sign = "-" if c < 0 else "+"
        bits = []
        if abs(c) != 1 or (not t.params and not t.factors):
            bits.append(str(abs(c)))
        bits.extend(t.params)
        bits.extend(_render_factor(f) for f in t.factors)
        body = " * ".join(bits)
        if k == 0:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f"{sign} {body}")
    return " ".join(parts)
