import math

import numpy as np
import pytest
import scipy.special
import scipy.stats

from mimosd.special import chi_square_cdf, chi_square_quantile, gammainc_lower


def test_gammainc_lower_matches_scipy_over_grid():
    for a in (0.5, 1.0, 2.5, 8.0, 16.0, 24.0, 48.0):
        for x in (1e-6, 0.1, 0.5, 1.0, 2.0, a, 2 * a, 5 * a, 200.0):
            ours = gammainc_lower(a, x)
            ref = scipy.special.gammainc(a, x)
            assert ours == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_gammainc_lower_limits():
    assert gammainc_lower(3.0, 0.0) == 0.0
    assert gammainc_lower(3.0, 1e4) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        gammainc_lower(0.0, 1.0)
    with pytest.raises(ValueError):
        gammainc_lower(1.0, -1.0)


def test_chi_square_cdf_matches_scipy():
    for dof in (1, 2, 8, 32, 48):
        for x in (0.01, 0.5, dof / 2, float(dof), 2.0 * dof):
            assert chi_square_cdf(x, dof) == pytest.approx(
                scipy.stats.chi2.cdf(x, dof), rel=1e-12)


def test_chi_square_quantile_round_trip():
    for dof in (2, 8, 32, 48):
        for p in (0.01, 0.5, 0.9, 0.999):
            q = chi_square_quantile(p, dof)
            assert chi_square_cdf(q, dof) == pytest.approx(p, abs=1e-10)


def test_chi_square_quantile_matches_scipy():
    for dof in (2, 16, 32, 48):
        for p in (0.1, 0.5, 0.99, 0.999):
            assert chi_square_quantile(p, dof) == pytest.approx(
                scipy.stats.chi2.ppf(p, dof), rel=1e-9)


def test_chi_square_quantile_monotone_in_p_and_dof():
    qs = [chi_square_quantile(p, 16) for p in (0.1, 0.5, 0.9, 0.999)]
    assert qs == sorted(qs)
    by_dof = [chi_square_quantile(0.999, d) for d in (2, 8, 32)]
    assert by_dof == sorted(by_dof)


def test_chi_square_quantile_rejects_bad_p():
    with pytest.raises(ValueError):
        chi_square_quantile(0.0, 4)
    with pytest.raises(ValueError):
        chi_square_quantile(1.0, 4)
