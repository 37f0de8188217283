"""Gradient blow-up of P_eps applied to a discontinuous function.

For u = sign(x1) the gradient of the OU semigroup at the origin grows like
eps^-1/2. This script tabulates sup |D P_eps u| over a probe set and fits the
log-log slope.
"""

import numpy as np

from hilbert_ou.cylinder import make_function
from hilbert_ou.semigroup import gh, smoothing_probe
from hilbert_ou.spectral import build_spectrum

spec = build_spectrum("power-law", 64, gamma=2.0)
eps = np.logspace(-3, 0, 7)
res = smoothing_probe(make_function("sign"), spec, eps, gh(20, 1))

print(f"{'eps':>10} {'sup|D P_eps u|':>16}")
for e, s in zip(eps, res.sup):
    print(f"{e:10.4g} {s:16.6g}")
print(f"fitted slope {res.slope:.4f} (expected -0.5)")
