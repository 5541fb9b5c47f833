"""Scalar special functions: regularized incomplete gamma and the chi-square quantile.

Self-contained double-precision implementations (series + continued fraction,
bisection for the inverse) so the package has no SciPy runtime dependency.
"""

import math

_MAX_ITER = 500
_EPS = 1e-15


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).

    Uses the power series for x < a + 1 and the Lentz continued fraction of
    the upper function otherwise.
    """
    if a <= 0:
        raise ValueError(f"shape parameter must be positive, got {a}")
    if x < 0:
        raise ValueError(f"argument must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cont_fraction(a, x)


def _gamma_series(a: float, x: float) -> float:
    # P(a,x) = x^a e^-x / Gamma(a) * sum_{n>=0} x^n / (a (a+1) ... (a+n))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_fraction(a: float, x: float) -> float:
    # Q(a,x) via modified Lentz; returns the regularized upper function.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi_square_cdf(x: float, dof: int) -> float:
    """P(X <= x) for a chi-square variable with `dof` degrees of freedom."""
    if dof < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {dof}")
    if x <= 0.0:
        return 0.0
    return gammainc_lower(0.5 * dof, 0.5 * x)


def chi_square_quantile(p: float, dof: int, tol: float = 1e-10) -> float:
    """Inverse chi-square CDF by bisection, to absolute tolerance `tol`.

    Bisection on the monotone CDF is slow but unconditionally robust; the
    quantile is computed once per detector configuration, never per trial.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must be in (0, 1), got {p}")
    lo = 0.0
    hi = float(dof)
    while chi_square_cdf(hi, dof) < p:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("chi-square quantile bracket failed to close")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi_square_cdf(mid, dof) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)
