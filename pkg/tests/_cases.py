"""Small hand-written case files shared by the tests."""

import numpy as np

from gridflow.case_io import parse_case


def case_text(buses, gens, branches, base=100.0):
    """buses: (id, type, pd, qd[, gs, bs]); gens: (bus, pg, vg); branches: (f, t, r, x, b[, tap, shift])."""
    rows = []
    for b in buses:
        bid, btype, pd, qd, *rest = b
        gs, bs = rest if rest else (0.0, 0.0)
        rows.append(f"{bid} {btype} {pd} {qd} {gs} {bs} 1 1.0 0 135 1 1.1 0.9;")
    grows = [f"{g[0]} {g[1]} 0 300 -300 {g[2]} 100 1;" for g in gens]
    brows = []
    for br in branches:
        f, t, r, x, b, *rest = br
        tap, shift = rest if rest else (0.0, 0.0)
        brows.append(f"{f} {t} {r} {x} {b} 100 100 100 {tap} {shift} 1;")
    return "\n".join([
        "function mpc = test",
        f"mpc.baseMVA = {base};",
        "mpc.bus = [", *rows, "];",
        "mpc.gen = [", *grows, "];",
        "mpc.branch = [", *brows, "];",
    ]) + "\n"


def two_bus(r=0.0, x=0.1, b=0.0, pd=0.0, qd=0.0):
    return parse_case(case_text([(1, 3, 0, 0), (2, 1, pd, qd)], [(1, 0, 1.0)],
                                [(1, 2, r, x, b)]), name="two_bus")


def ring(n=5, seed=0, shifts=False, taps=False):
    """Random meshed network: ring plus chords, slack at bus 1, a PV bus at 2."""
    rng = np.random.default_rng(seed)
    buses = [(1, 3, 0, 0)] + [(2, 2, 20, 5)] + [(i, 1, float(rng.uniform(5, 30)),
                                                 float(rng.uniform(0, 10)), 0.0,
                                                 float(rng.uniform(0, 5)))
                                                for i in range(3, n + 1)]
    gens = [(1, 0, 1.02), (2, 40, 1.01)]
    edges = [(i, i % n + 1) for i in range(1, n + 1)] + [(1, 3), (2, n)]
    branches = []
    for f, t in edges:
        r, x, b = rng.uniform(0.005, 0.05), rng.uniform(0.05, 0.3), rng.uniform(0, 0.05)
        tap = rng.uniform(0.95, 1.05) if taps else 0.0
        shift = rng.uniform(-5, 5) if shifts else 0.0
        branches.append((f, t, r, x, b, tap, shift))
    return parse_case(case_text(buses, gens, branches), name=f"ring{n}")
