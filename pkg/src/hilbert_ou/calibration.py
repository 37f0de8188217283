"""Frozen constants for the inequality checks, and the code that produced them.

Each bound below holds with an unspecified constant.  The constant is fitted
once on the reference spectrum (lambda_k = k^-2, n = 64) with ``CAL_SEED`` as
1.1 times the largest observed ratio, then frozen here.  Verification runs use
other seeds, other grids or other draws.

Run ``python -m hilbert_ou.calibration`` to recompute.
"""

from __future__ import annotations

import numpy as np

CAL_SEED = 1
MARGIN = 1.1

# sup_k |Q^{-1} (T/S)(eps) (T/S)(eps xi)| * eps * sqrt(xi); the analytic sup is 1
OPERATOR_C = 1.0999725

# ||B_eps||_{L^p'} <= C ||u||_{L^r} (||F||_{1,s,T} + ||Q^{-1/2} F||_{L^s}) for p, r, s = 4, 4, 2
SWEEP_C = 0.085319028

# int |div_Q G|^p <= C_p int (||DG||^2 + |Q^{-1/2} G|^p) over compactly supported G
DIVQ_C = {1.5: 0.94872154, 2.0: 1.1005927, 3.0: 3.7450850}


def reference_spectrum():
    from .spectral import build_spectrum

    return build_spectrum("power-law", 64, gamma=2.0)


def operator_grid():
    return np.logspace(-4, 1, 51), np.logspace(-4, 0, 41)


def calibrate_operator():
    from .commutator import operator_sup

    spec = reference_spectrum()
    eps_grid, xi_grid = operator_grid()
    top = max(operator_sup(spec, e, x) * e * np.sqrt(x) for e in eps_grid for x in xi_grid)
    return MARGIN * top


def sweep_pairs(horizon=1.0):
    """Bounded (u, F) pairs the sweep constant is fitted on."""
    from .cylinder import bump_field, make_function, sine_field, tanh_field

    return [
        ("sine/sine", make_function("sine", w=[1.0, 0.5]), sine_field([1.0, 0.5], [[1.0, 0.3], [0.2, 1.0]])),
        ("tanh/tanh", make_function("tanh", w=[1.0, -0.5]), tanh_field([0.8, 0.6], [[1.0, 0.0], [0.5, 1.0]])),
        ("gauss/bump", make_function("gauss", center=[0.2, 0.0], width=0.8), bump_field([1.0, 0.5], [0.0, 0.0], 1.5)),
        (
            "sine-vanish/sine",
            make_function("sine", profile="vanish", w=[0.5, 1.0], phase=0.4),
            sine_field([0.6, 1.0], [[0.5, 1.0], [1.0, 0.2]], [0.1, 0.7]),
        ),
    ]


SWEEP_EPS = (0.4, 0.2, 0.1, 0.05, 0.01)


def calibrate_sweep(outer=2000, time_nodes=17, levels=12):
    from .commutator import ExponentTriple, norm_sweep
    from .semigroup import gh
    from .spectral import sample_gaussian

    spec = reference_spectrum()
    exps = ExponentTriple(4.0, 4.0, 2.0)
    batch = sample_gaussian(spec, outer, CAL_SEED, dims=2)
    grid = np.linspace(0.0, 1.0, time_nodes)
    top = 0.0
    for _, u, F in sweep_pairs():
        sw = norm_sweep(u, F, spec, exps, SWEEP_EPS, batch, grid, gh(levels, 2, error_estimate=False))
        top = max(top, float(np.max(sw.ratios)))
    return MARGIN * top


def compact_fields():
    from .cylinder import bump_field

    return [
        ("bump e1", bump_field([1.0], [0.0], 1.0)),
        ("bump 2d", bump_field([2.0, 1.0], [0.3, 0.0], 0.8)),
        ("small bump", bump_field([0.5], [0.5], 0.5)),
        ("wide bump", bump_field([0.3, -0.4], [0.0, 0.2], 2.5)),
        ("tall bump", bump_field([4.0], [-0.3], 1.2)),
    ]


DIVQ_P = (1.5, 2.0, 3.0)


def calibrate_divq(m=200_000):
    from .identities import divq_lp_probe
    from .spectral import sample_gaussian

    spec = reference_spectrum()
    batch = sample_gaussian(spec, m, CAL_SEED, dims=2)
    out = {}
    for p in DIVQ_P:
        out[p] = MARGIN * max(divq_lp_probe(G, spec, p, batch).ratio for _, G in compact_fields())
    return out


if __name__ == "__main__":
    print(f"OPERATOR_C = {float(calibrate_operator())!r}")
    print(f"SWEEP_C = {calibrate_sweep()!r}")
    print(f"DIVQ_C = {calibrate_divq()!r}")
