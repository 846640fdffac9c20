"""Generate the frozen reference fixtures shipped under emtcalc/corpus.

Each fixture is a hand-transcribed published expression, entered via the
Lagrangian DSL, macro-expanded, canonicalized, and dumped as deterministic
JSON.  Run from the repository root:

    python3 tools/gen_fixtures.py
"""
from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from emtcalc.canon import canonicalize
from emtcalc.dsl import expand_macros, parse, parse_expr
from emtcalc.expr import dump_expr, set_dim

CORPUS = ROOT / "src" / "emtcalc" / "corpus"

# Linearized Christoffel symbol for the reference transcriptions below.
GAM = """
def Gam[la, mu, al] = 1/2 * (- d[la] h[mu, al] + d[al] h[la, mu] + d[mu] h[la, al])
"""

# Energy-momentum tensor of electrodynamics: F^{mu al} F^nu_al - 1/4 eta F^2.
EM_EMT = """
F[^mu, al] * F[^nu, ^al] - 1/4 * eta[^mu, ^nu] * F[al, be] * F[^al, ^be]
"""

# Unique Noether energy-momentum tensor of linearized Gauss-Bonnet gravity.
GB_NOETHER_EMT = """
- R4[^mu, ^r1, ^r2, ^r3] * R4[^nu, r1, r2, r3]
+ 2 * Ric[r1, r2] * R4[^mu, ^r1, ^nu, ^r2]
+ 2 * Ric[^mu, ^r1] * Ric[^nu, r1]
- Rs[] * Ric[^mu, ^nu]
+ 1/4 * eta[^mu, ^nu] * (R4[a, b, c, e] * R4[^a, ^b, ^c, ^e]
                         - 4 * Ric[a, b] * Ric[^a, ^b] + Rs[] * Rs[])
"""

# The quadratic-curvature Lagrangian written out in d d h monomials
# (13 monomials: 3 with coefficient A, 7 with B/4, 3 with C).
GB_LAGRANGIAN_EXPANDED = """
A * (d[mu] d[nu] h[al, be] * d[^mu] d[^nu] h[^al, ^be]
     - 2 * d[mu] d[nu] h[al, be] * d[^mu] d[^al] h[^nu, ^be]
     + d[mu] d[nu] h[al, be] * d[^al] d[^be] h[^mu, ^nu])
+ 1/4 * B * (d[om] d[^om] h[al, be] * d[xi] d[^xi] h[^al, ^be]
             + 2 * d[mu] d[nu] h[al, ^al] * d[om] d[^om] h[^mu, ^nu]
             - 4 * d[mu] d[nu] h[^nu, be] * d[om] d[^om] h[^mu, ^be]
             + d[mu] d[nu] h[al, ^al] * d[^mu] d[^nu] h[be, ^be]
             - 4 * d[mu] d[nu] h[al, ^al] * d[^mu] d[be] h[^nu, ^be]
             + 2 * d[mu] d[nu] h[^nu, ^be] * d[^mu] d[al] h[^al, be]
             + 2 * d[mu] d[nu] h[^nu, be] * d[^be] d[al] h[^mu, ^al])
+ C * (d[om] d[^om] h[nu, ^nu] * d[xi] d[^xi] h[be, ^be]
       - 2 * d[mu] d[nu] h[^mu, ^nu] * d[om] d[^om] h[be, ^be]
       + d[mu] d[nu] h[^mu, ^nu] * d[al] d[be] h[^al, ^be])
"""

# Published closed form of the metric-variation (Hilbert) energy-momentum
# tensor of the quadratic-curvature model, after all delta contractions.
GB_HILBERT_PRINTED = """
- A * (- eta[^mu, ^nu] * R4[a, b, c, e] * R4[^a, ^b, ^c, ^e]
       + 8 * R4[^mu, ^b, ^c, ^e] * R4[^nu, b, c, e])
- B * (- eta[^mu, ^nu] * Ric[b, e] * Ric[^b, ^e]
       + 4 * Ric[^mu, e] * Ric[^e, ^nu]
       + 4 * R4[^mu, ^b, ^nu, ^e] * Ric[b, e])
- C * (- eta[^mu, ^nu] * Rs[] * Rs[] + 8 * Ric[^mu, ^nu] * Rs[])
+ 16 * A * d[om] (R4[^mu, ^b, ^nu, ^e] * Gam[^om, b, e]
                  - R4[^nu, ^b, ^om, ^e] * Gam[^mu, b, e]
                  - R4[^mu, ^b, ^om, ^e] * Gam[^nu, b, e])
+ 4 * B * d[om] (- Ric[^nu, ^e] * Gam[^om, ^mu, e]
                 + eta[^mu, ^nu] * Ric[b, e] * Gam[^om, ^b, ^e]
                 + Ric[^mu, ^nu] * Gam[^om, ^b, b]
                 - Ric[^mu, ^e] * Gam[^om, ^nu, e]
                 + Ric[^om, ^e] * Gam[^mu, ^nu, e]
                 - eta[^om, ^nu] * Ric[b, e] * Gam[^mu, ^b, ^e])
+ 4 * B * d[om] (- Ric[^nu, ^om] * Gam[^mu, ^b, b]
                 + Ric[^om, ^e] * Gam[^nu, ^mu, e]
                 - eta[^om, ^mu] * Ric[b, e] * Gam[^nu, ^b, ^e]
                 - Ric[^mu, ^om] * Gam[^nu, ^b, b]
                 + Ric[^nu, ^e] * Gam[^mu, ^om, e]
                 + Ric[^mu, ^e] * Gam[^nu, ^om, e])
+ 8 * C * d[om] (- Rs[] * Gam[^om, ^nu, ^mu]
                 + eta[^mu, ^nu] * Rs[] * Gam[^om, ^b, b]
                 + Rs[] * Gam[^mu, ^om, ^nu]
                 - eta[^om, ^nu] * Rs[] * Gam[^mu, ^b, b]
                 + Rs[] * Gam[^nu, ^om, ^mu]
                 - eta[^om, ^mu] * Rs[] * Gam[^nu, ^b, b])
+ 2 * A * d[a] d[om] (- R4[^a, ^mu, ^nu, ^e] * h[^om, e]
                      - R4[^a, ^nu, ^mu, ^e] * h[^om, e]
                      + R4[^a, ^nu, ^om, ^e] * h[^mu, e]
                      + R4[^a, ^mu, ^om, ^e] * h[^nu, e]
                      + R4[^a, ^om, ^nu, ^e] * h[^mu, e]
                      + R4[^a, ^om, ^mu, ^e] * h[^nu, e])
+ B * d[a] d[om] (eta[^mu, ^nu] * Ric[^a, ^e] * h[^om, e]
                  - eta[^nu, ^om] * Ric[^a, ^e] * h[^mu, e]
                  - eta[^mu, ^om] * Ric[^a, ^e] * h[^nu, e]
                  + Ric[^a, ^om] * h[^mu, ^nu]
                  + Ric[^mu, ^nu] * h[^om, ^a]
                  - Ric[^nu, ^om] * h[^mu, ^a]
                  - Ric[^mu, ^om] * h[^nu, ^a])
+ 1/2 * B * d[a] d[om] (- eta[^a, ^nu] * Ric[^mu, ^e] * h[^om, e]
                        - eta[^a, ^mu] * Ric[^nu, ^e] * h[^om, e]
                        + eta[^a, ^om] * Ric[^nu, ^e] * h[^mu, e]
                        + eta[^a, ^om] * Ric[^mu, ^e] * h[^nu, e]
                        + eta[^a, ^nu] * Ric[^om, ^e] * h[^mu, e]
                        + eta[^a, ^mu] * Ric[^om, ^e] * h[^nu, e])
+ 2 * C * d[a] d[om] (eta[^a, ^om] * Rs[] * h[^mu, ^nu]
                      + eta[^mu, ^nu] * Rs[] * h[^om, ^a]
                      - eta[^nu, ^om] * Rs[] * h[^mu, ^a]
                      - eta[^mu, ^om] * Rs[] * h[^nu, ^a])
"""

# The part of the expression above proportional to eta[^mu, ^nu].
GB_HILBERT_ETA_PART = """
eta[^mu, ^nu] * (
  A * R4[a, b, c, e] * R4[^a, ^b, ^c, ^e]
  + B * Ric[b, e] * Ric[^b, ^e]
  + C * Rs[] * Rs[])
+ eta[^mu, ^nu] * 8 * C * d[om] (Rs[] * Gam[^om, ^b, b])
+ eta[^mu, ^nu] * 2 * C * d[a] d[om] (Rs[] * h[^om, ^a])
+ eta[^mu, ^nu] * 4 * B * d[om] (Ric[b, e] * Gam[^om, ^b, ^e])
+ eta[^mu, ^nu] * B * d[a] d[om] (Ric[^a, ^e] * h[^om, e])
"""


def build(prog, text: str, dim):
    e = expand_macros(parse_expr(text, prog), prog)
    if dim != "D":
        e = set_dim(e, dim)
    return canonicalize(e, prog.fields)


def main() -> None:
    em = parse((CORPUS / "em.lag").read_text())
    gb = parse((CORPUS / "gauss_bonnet.lag").read_text())
    gbx = parse(GAM, base=gb)

    out = {
        "em_emt_reference.json": build(em, EM_EMT, 4),
        "gb_noether_emt_reference.json": build(gb, GB_NOETHER_EMT, 4),
        "gb_lagrangian_expanded_reference.json":
            build(gb, GB_LAGRANGIAN_EXPANDED, "D"),
        "gb_hilbert_printed_reference.json": build(gbx, GB_HILBERT_PRINTED, 4),
        "gb_hilbert_eta_part_reference.json":
            build(gbx, GB_HILBERT_ETA_PART, 4),
    }
    for name, expr in out.items():
        (CORPUS / name).write_text(dump_expr(expr) + "\n")
        print(f"{name}: {len(expr.terms)} terms")


if __name__ == "__main__":
    main()
