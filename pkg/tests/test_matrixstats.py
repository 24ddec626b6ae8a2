import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss
from scipy.integrate import quad
from scipy.special import k0

from rhlab.matrixstats import (
    asymptotic_ratio,
    estimate_e_table,
    gamma_asymptote,
    low_index_tail,
    sample_sym,
    sample_sym_batch,
)


def absdet2_grid_oracle(nodes=120):
    """Tensor-grid quadrature of E|a b - c^2|, a,b ~ N(0,1), c ~ N(0,1/2)."""
    x, w = hermegauss(nodes)  # weight exp(-x^2/2), total sqrt(2 pi)
    w = w / math.sqrt(2 * math.pi)
    a = x[:, None, None]
    b = x[None, :, None]
    c = (x * math.sqrt(0.5))[None, None, :]
    vals = np.abs(a * b - c * c)
    return float(np.einsum("i,j,k,ijk->", w, w, w, vals))


def absdet2_bessel_oracle():
    """Independent route: E|z - t|, z product-normal with density K0(|z|)/pi."""

    def e_abs_shift(t):
        f = lambda z: abs(z - t) * k0(abs(z)) / math.pi
        parts = [quad(f, lo, hi, limit=200)[0] for lo, hi in ((-40, 0), (0, max(t, 1e-12)), (max(t, 1e-12), 40))]
        return sum(parts)

    g = lambda c: e_abs_shift(c * c) * math.exp(-c * c) / math.sqrt(math.pi)
    return quad(g, -8, 8, limit=400)[0]


class TestSampleSym:
    def test_m1_signature_is_sign(self):
        for s in range(40):
            samp = sample_sym(1, seed=5, stream_index=s)
            a = samp.entries[0, 0]
            assert samp.signature == ((1, 0) if a > 0 else (0, 1))

    def test_entry_variances_m2(self):
        A = sample_sym_batch(2, seed=3, stream_index=0, count=1_000_000)
        assert A[:, 0, 0].var() == pytest.approx(1.0, rel=0.01)
        assert A[:, 1, 1].var() == pytest.approx(1.0, rel=0.01)
        assert A[:, 0, 1].var() == pytest.approx(0.5, rel=0.01)
        np.testing.assert_array_equal(A[:, 0, 1], A[:, 1, 0])

    def test_trace_centered(self):
        A = sample_sym_batch(5, seed=9, stream_index=1, count=200_000)
        tr = np.einsum("bii->b", A)
        se = tr.std(ddof=1) / math.sqrt(len(tr))
        assert abs(tr.mean()) < 3 * se

    def test_eigen_identities(self):
        for s in range(20):
            samp = sample_sym(6, seed=11, stream_index=s)
            assert np.trace(samp.entries) == pytest.approx(samp.eigenvalues.sum(), rel=1e-8, abs=1e-10)
            assert np.linalg.det(samp.entries) == pytest.approx(samp.determinant, rel=1e-8)

    def test_signature_sums_to_size(self):
        for s in range(20):
            samp = sample_sym(7, seed=2, stream_index=s)
            assert sum(samp.signature) == 7

    def test_determinism(self):
        a = sample_sym(4, seed=1, stream_index=9)
        b = sample_sym(4, seed=1, stream_index=9)
        np.testing.assert_array_equal(a.entries, b.entries)


class TestETable:
    def test_m1_closed_form(self):
        # E|a| = sqrt(2/pi), split evenly between the two signature bins
        t = estimate_e_table(1, 400_000, seed=7)
        half = 0.5 * math.sqrt(2 / math.pi)
        for i in (0, 1):
            assert abs(t.e_hat[i] - half) < 3 * t.std_errors[i]
        assert t.total == pytest.approx(math.sqrt(2) / math.pi, rel=0.01)

    def test_m2_total_matches_grid_oracle(self):
        grid = absdet2_grid_oracle()
        bessel = absdet2_bessel_oracle()
        # the two oracles must agree with each other first
        assert grid == pytest.approx(bessel, abs=2e-3)
        t = estimate_e_table(2, 400_000, seed=13)
        se_total = float(np.sqrt((t.std_errors**2).sum()))
        assert abs(t.e_hat.sum() - grid) < 3 * se_total + 2e-3

    @pytest.mark.parametrize("m", [2, 5, 10])
    def test_signature_symmetry(self, m):
        t = estimate_e_table(m, 120_000, seed=21)
        for i in range(m + 1):
            j = m - i
            joint = math.hypot(t.std_errors[i], t.std_errors[j])
            assert abs(t.e_hat[i] - t.e_hat[j]) < 3 * joint + 1e-12

    def test_exact_decomposition(self):
        t = estimate_e_table(3, 50_000, seed=4)
        assert t.e_hat.sum() == pytest.approx(t.mean_absdet, rel=1e-12)

    def test_determinism(self):
        a = estimate_e_table(3, 20_000, seed=8)
        b = estimate_e_table(3, 20_000, seed=8)
        np.testing.assert_array_equal(a.e_hat, b.e_hat)


class TestAsymptoticRatio:
    def test_n2_value_documents_constant(self):
        # exact: (sqrt(2)/pi) / ((2 sqrt2/pi) Gamma(3/2)) = 1/sqrt(pi);
        # the asymptote tracks E|det| itself, not E|det|/sqrt(pi)
        [(n, ratio)] = asymptotic_ratio([1], 400_000, seed=3)
        assert n == 2
        assert ratio == pytest.approx(1.0 / math.sqrt(math.pi), rel=0.01)

    def test_edet_convergence_to_asymptote(self):
        # sqrt(pi) * ratio = E|det| / asymptote -> 1
        out = asymptotic_ratio([1, 9, 19], 150_000, seed=15)
        devs = {n: abs(math.sqrt(math.pi) * r - 1.0) for n, r in out}
        assert devs[10] < 0.02
        assert devs[20] < 0.03

    def test_positive_and_deterministic(self):
        a = asymptotic_ratio([1, 2, 3], 10_000, seed=5)
        b = asymptotic_ratio([1, 2, 3], 10_000, seed=5)
        assert a == b
        assert all(r > 0 for _, r in a)

    def test_gamma_asymptote_values(self):
        assert gamma_asymptote(2) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)
        assert gamma_asymptote(3) == pytest.approx(2 * math.sqrt(2) / math.pi, rel=1e-12)


class TestLowIndexTail:
    def test_alpha_zero_m1(self):
        v = low_index_tail(1, 0.0, 400_000, seed=6)
        assert v == pytest.approx(0.5 * math.sqrt(2 / math.pi) / math.sqrt(math.pi), rel=0.02)

    def test_monotone_below_total(self):
        t = estimate_e_table(5, 50_000, seed=31)
        for alpha in (0.0, 0.2, 0.4, 0.49):
            assert low_index_tail(5, alpha, 50_000, seed=31) <= t.total + 1e-12

    def test_empty_bins_use_rule_of_three(self):
        # m = 15, i <= 1 bins are far beyond reach of 2000 trials
        v = low_index_tail(15, 0.1, 2000, seed=1)
        t = estimate_e_table(15, 2000, seed=1)
        assert t.bin_counts[0] == 0
        assert v >= t.e_upper_empty / math.sqrt(math.pi) > 0

    def test_alpha_range_checked(self):
        with pytest.raises(ValueError):
            low_index_tail(3, 0.5, 100)
