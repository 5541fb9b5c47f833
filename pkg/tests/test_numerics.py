import numpy as np
import pytest

from mimosd.numerics import (OpCounter, RankDeficient, counted_residual_metric,
                             gaussian_complex_vector, qrd)
from mimosd.search import SearchProblem, branch_metric
from mimosd.channel import qpsk


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestOpCounter:
    def test_accumulates_and_resets(self):
        c = OpCounter()
        c.add(3, 5)
        c.add(1, 0)
        assert (c.mults, c.adds, c.total) == (4, 5, 9)
        snap = c.copy()
        c.reset()
        assert (c.mults, c.adds) == (0, 0)
        assert snap == OpCounter(4, 5)

    def test_equality(self):
        assert OpCounter(1, 2) == OpCounter(1, 2)
        assert OpCounter(1, 2) != OpCounter(2, 1)


class TestQrd:
    def test_identity(self):
        f = qrd(np.eye(4, dtype=complex))
        assert np.allclose(f.q1, np.eye(4))
        assert np.allclose(f.r, np.eye(4))
        assert f.q2.shape == (4, 0)

    def test_positive_diagonal_fixed_case(self):
        f = qrd(np.diag([2.0, 3.0]).astype(complex))
        assert np.allclose(f.q1, np.eye(2))
        assert np.allclose(f.r, np.diag([2.0, 3.0]))

    def test_reconstruction_oracle(self):
        rng = np.random.default_rng(3)
        for n in (2, 4, 8):
            for _ in range(1000):
                h = np.sqrt(0.5) * random_complex(rng, (n, n))
                f = qrd(h)
                assert np.max(np.abs(f.q1 @ f.r - h)) < 1e-9
                q = np.hstack([f.q1, f.q2])
                assert np.max(np.abs(q.conj().T @ q - np.eye(n))) < 1e-9
                d = np.diag(f.r)
                assert np.all(d.imag == 0.0) and np.all(d.real > 0)
                assert np.allclose(np.tril(f.r, -1), 0.0)

    def test_tall_matrix_residual_complement(self):
        rng = np.random.default_rng(5)
        h = np.sqrt(0.5) * random_complex(rng, (6, 3))
        f = qrd(h)
        assert f.q1.shape == (6, 3) and f.q2.shape == (6, 3) and f.r.shape == (3, 3)
        assert np.max(np.abs(f.q1 @ f.r - h)) < 1e-9
        # q2 spans the orthogonal complement of range(h)
        assert np.max(np.abs(f.q2.conj().T @ h)) < 1e-9

    def test_rank_deficient_raises(self):
        h = np.ones((4, 2), dtype=complex)
        h[:, 1] = 2.0 * h[:, 0]
        with pytest.raises(RankDeficient):
            qrd(h)

    def test_wide_matrix_rejected(self):
        with pytest.raises(ValueError):
            qrd(np.ones((2, 4), dtype=complex))


class TestGaussianComplexVector:
    def test_zero_variance(self):
        v = gaussian_complex_vector(5, 0.0, np.random.default_rng(0))
        assert np.all(v == 0)

    def test_moment_check(self):
        v = gaussian_complex_vector(10 ** 5, 2.0, np.random.default_rng(8))
        assert 1.98 <= np.mean(np.abs(v) ** 2) <= 2.02

    def test_determinism(self):
        a = gaussian_complex_vector(16, 1.5, np.random.default_rng(123))
        b = gaussian_complex_vector(16, 1.5, np.random.default_rng(123))
        assert np.array_equal(a, b)


class TestCountedResidualMetric:
    def test_exact_fit_is_zero(self):
        rng = np.random.default_rng(1)
        r = np.triu(random_complex(rng, (4, 4)))
        x = random_complex(rng, 4)
        c = OpCounter()
        assert counted_residual_metric(r @ x, r, x, c) == pytest.approx(0.0, abs=1e-20)

    def test_scalar_case_by_hand(self):
        c = OpCounter()
        value = counted_residual_metric(np.array([3.0 + 0j]), np.array([[1.0 + 0j]]),
                                        np.array([1.0 + 0j]), c)
        assert value == pytest.approx(4.0)
        assert c == OpCounter(2, 2)

    def test_counts_follow_triangular_formula(self):
        n = 5
        rng = np.random.default_rng(2)
        r = np.triu(random_complex(rng, (n, n)))
        c = OpCounter()
        counted_residual_metric(random_complex(rng, n), r, random_complex(rng, n), c)
        per_row = sum(n - l + 1 for l in range(n))
        assert c == OpCounter(per_row, per_row + n - 1)

    def test_telescoping_against_branch_metrics(self, qpsk_c):
        rng = np.random.default_rng(4)
        for _ in range(25):
            n = 4
            r = np.triu(random_complex(rng, (n, n)))
            r[np.arange(n), np.arange(n)] = np.abs(np.diag(r)) + 0.5
            z = random_complex(rng, n)
            x = qpsk_c.symbols[rng.integers(0, 4, n)]
            problem = SearchProblem(z=z, r=r, constellation=qpsk_c,
                                    squared_radius=np.inf)
            total = sum(branch_metric(problem, layer, x) for layer in range(n))
            direct = counted_residual_metric(z, r, x, OpCounter())
            assert total == pytest.approx(direct, abs=1e-9)
