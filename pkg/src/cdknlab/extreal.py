"""Extended-real conventions.

Values in [0, +inf] are represented as IEEE doubles: ``math.inf`` already
gives the arithmetic closure the entropies and distortion coefficients need
(inf + x = inf, c * inf = inf for c > 0, total order).  The one place IEEE
semantics disagree with the measure-theoretic convention is 0 * inf, which
must be 0 (cells carrying no mass contribute nothing no matter how heavy the
reference measure is there); use :func:`mul0` for those products.
"""

import math

import numpy as np

INF = math.inf


def is_finite(x: float) -> bool:
    return math.isfinite(x)


def mul0(a, b):
    """Elementwise a*b with the convention 0 * inf = 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        out = a * b
    zero = (a == 0.0) | (b == 0.0)
    if np.ndim(out) == 0:
        return 0.0 if bool(zero) else float(out)
    out = np.where(zero, 0.0, out)
    return out


def xlogy_sum(w, x):
    """sum(w * log(x)) over w > 0 with 0 * log(anything) = 0."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    mask = w > 0
    with np.errstate(divide="ignore"):
        lx = np.log(x[mask])
    return float(np.sum(w[mask] * lx))
