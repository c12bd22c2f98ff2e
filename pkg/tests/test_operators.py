import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tfouter import (
    StoppingSequence,
    SequenceFunction,
    TFGrid,
    multiplier_segment,
    carleson,
    var_carleson,
    TruncationLadder,
    var_truncation,
    bilinear_forms,
    xi_lattice,
)


def _randf(rng, n=32):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


class TestMultiplierSegment:
    def test_matches_direct_dft_sum(self, rng):
        """Independent O(n^2) evaluation of the band projection."""
        n, dz = 32, 0.25
        f = _randf(rng, n)
        xi = xi_lattice(n, dz)
        z = dz * np.arange(n)
        c_minus, c_plus = -3.0, 5.0
        got = multiplier_segment(f, c_minus, c_plus, dz)
        fhat = np.array([dz * np.sum(f * np.exp(-1j * x * z)) for x in xi])
        want = np.zeros(n, dtype=complex)
        for m, x in enumerate(xi):
            if c_minus < x < c_plus:
                w = 1.0
            elif x == c_minus or x == c_plus:
                w = 0.5
            else:
                w = 0.0
            want += w * fhat[m] * np.exp(1j * x * z) / (n * dz)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_half_weight_at_exact_bin(self, rng):
        n, dz = 16, 0.5
        xi = xi_lattice(n, dz)
        m0 = 3
        f = np.exp(1j * xi[m0] * dz * np.arange(n))
        # boundary exactly on the mode: half weight
        got = multiplier_segment(f, xi[m0], xi[m0] + 10.0, dz)
        assert np.max(np.abs(got - 0.5 * f)) < 1e-12

    def test_full_band_identity(self, rng):
        f = _randf(rng)
        got = multiplier_segment(f, -np.inf, np.inf, 0.25)
        assert np.max(np.abs(got - f)) < 1e-12

    def test_reversed_warns_and_zeroes(self, rng):
        f = _randf(rng)
        with pytest.warns(RuntimeWarning, match="out of order"):
            got = multiplier_segment(f, 2.0, -2.0, 0.25)
        assert np.all(got == 0.0)

    def test_equal_boundaries_silent_zero(self, recwarn, rng):
        f = _randf(rng)
        got = multiplier_segment(f, 2.0, 2.0, 0.25)
        assert np.all(got == 0.0)
        assert len(recwarn) == 0

    def test_nan_rejected(self, rng):
        with pytest.raises(ValueError, match="NaN"):
            multiplier_segment(_randf(rng), np.nan, 1.0, 0.25)

    @settings(max_examples=20, deadline=None)
    @given(cm=st.floats(-4, 0), width=st.floats(0.5, 6))
    def test_projection_idempotent(self, cm, width):
        rng = np.random.default_rng(5)
        f = _randf(rng)
        once = multiplier_segment(f, cm, cm + width, 0.25)
        twice = multiplier_segment(once, cm, cm + width, 0.25)
        # interior weights are 0/1; each exact-boundary bin gains another 1/2
        dz = 0.25
        xi = xi_lattice(f.size, dz)
        if not np.any((xi == cm) | (xi == cm + width)):
            assert np.max(np.abs(twice - once)) < 1e-12


class TestCarleson:
    def test_sentinels(self, rng):
        n, dz = 32, 0.25
        f = _randf(rng, n)
        full = StoppingSequence([0, n], [[-np.inf]])
        assert np.max(np.abs(carleson(f, full, dz) - f)) < 1e-12
        none = StoppingSequence([0, n], [[np.inf]])
        assert np.all(carleson(f, none, dz) == 0.0)

    def test_cellwise_application(self, rng):
        n, dz = 32, 0.25
        f = _randf(rng, n)
        stopping = StoppingSequence([0, 16, n], [[-1.0], [2.0]])
        got = carleson(f, stopping, dz)
        lo = multiplier_segment(f, -1.0, np.inf, dz)
        hi = multiplier_segment(f, 2.0, np.inf, dz)
        assert np.max(np.abs(got[:16] - lo[:16])) < 1e-12
        assert np.max(np.abs(got[16:] - hi[16:])) < 1e-12

    def test_requires_single_boundary(self, rng):
        stopping = StoppingSequence([0, 32], [[-1.0, 1.0]])
        with pytest.raises(ValueError, match="single"):
            carleson(_randf(rng), stopping, 0.25)


class TestVarCarleson:
    def test_two_boundary_reduction(self, rng):
        """(c, +inf) ladders reproduce the plain truncation in magnitude."""
        n, dz = 32, 0.25
        f = _randf(rng, n)
        single = StoppingSequence([0, 16, n], [[-1.0], [0.5]])
        double = StoppingSequence(
            [0, 16, n], [[-1.0, np.inf], [0.5, np.inf]]
        )
        want = np.abs(carleson(f, single, dz))
        for r in (2.5, 4.0, np.inf):
            got = var_carleson(f, double, r, dz)
            assert np.max(np.abs(got - want)) < 1e-12

    def test_monotone_in_r(self, rng):
        n, dz = 32, 0.25
        f = _randf(rng, n)
        stopping = StoppingSequence(
            [0, n], [[-2.0, -0.5, 1.0, 3.0]]
        )
        v2 = var_carleson(f, stopping, 2.5, dz)
        v4 = var_carleson(f, stopping, 4.0, dz)
        vi = var_carleson(f, stopping, np.inf, dz)
        assert np.all(v2 >= v4 - 1e-12)
        assert np.all(v4 >= vi - 1e-12)

    def test_validation(self, rng):
        f = _randf(rng)
        single = StoppingSequence([0, 32], [[0.0]])
        with pytest.raises(ValueError, match="two boundaries"):
            var_carleson(f, single, 3.0, 0.25)
        double = StoppingSequence([0, 32], [[0.0, 1.0]])
        with pytest.raises(ValueError, match="exceed 1"):
            var_carleson(f, double, 1.0, 0.25)


class TestTruncationLadder:
    def test_validation(self):
        with pytest.raises(ValueError, match="positive and strictly increasing"):
            TruncationLadder([1.0, 1.0])
        with pytest.raises(ValueError, match="positive and strictly increasing"):
            TruncationLadder([-1.0, 1.0])
        with pytest.raises(ValueError, match="256"):
            TruncationLadder(np.linspace(1, 2, 300))
        with pytest.raises(ValueError, match="unit mass"):
            TruncationLadder([1.0, 2.0], mollifier_hat=lambda v: 0.5 * np.exp(-(v**2)))
        with pytest.raises(ValueError, match="nonnegative"):
            TruncationLadder([1.0, 2.0], sigma=-1.0)

    def test_convolutions_shape_and_dc(self, rng):
        n, dz = 32, 0.25
        f = _randf(rng, n)
        ladder = TruncationLadder([0.5, 1.0, 2.0])
        V = ladder.convolutions(f, dz)
        assert V.shape == (3, n)
        # unit-mass mollifier preserves the mean at every scale
        assert np.allclose(V.mean(axis=1), f.mean())


def _oracle_variation(V, adm, r):
    """Exhaustive r-variation over admissible increasing subsequences.

    Maximizes the left-to-right power sums over all chains, applying the
    single root at the end.  Jump powers and the root go through the same
    array expressions as the production code so the comparison is exact:
    numpy's scalar and array pow can differ in the last ulp.
    """
    m, n = V.shape
    A = [None] + [np.abs(V[j][None, :] - V[:j]) for j in range(1, m)]
    P = (
        A
        if np.isinf(r)
        else [None] + [A[j] ** r for j in range(1, m)]
    )
    out = np.zeros(n)
    for i in range(n):
        idxs = [j for j in range(m) if adm[j, i]]
        best = 0.0
        for size in range(2, len(idxs) + 1):
            for chain in itertools.combinations(idxs, size):
                if np.isinf(r):
                    s = max(A[b][a, i] for a, b in zip(chain, chain[1:]))
                else:
                    s = 0.0
                    for a, b in zip(chain, chain[1:]):
                        s = s + P[b][a, i]
                best = max(best, s)
        out[i] = best
    return out if np.isinf(r) else out ** (1.0 / r)


class TestVarTruncation:
    @pytest.mark.parametrize("r", [2.5, 3.0, np.inf])
    def test_matches_exhaustive_oracle(self, r, rng):
        n, dz = 12, 0.5
        f = _randf(rng, n)
        scales = np.geomspace(0.3, 3.0, 7)
        sigma = rng.uniform(0.0, 2.0, n)
        ladder = TruncationLadder(scales, sigma=sigma)
        got = var_truncation(f, ladder, r, dz)
        V = ladder.convolutions(f, dz)
        adm = scales[:, None] > sigma[None, :]
        want = _oracle_variation(V, adm, r)
        assert np.max(np.abs(got - want)) == 0.0

    def test_monotone_in_sigma(self, rng):
        n, dz = 16, 0.5
        f = _randf(rng, n)
        ladder = TruncationLadder(np.geomspace(0.3, 3.0, 9))
        lo = var_truncation(f, ladder, 3.0, dz, sigma=0.0)
        hi = var_truncation(f, ladder, 3.0, dz, sigma=1.0)
        assert np.all(hi <= lo + 1e-12)

    def test_small_r_guard(self, rng):
        f = _randf(rng, 8)
        ladder = TruncationLadder([0.5, 1.0])
        with pytest.raises(ValueError, match="allow_small_r"):
            var_truncation(f, ladder, 2.0, 0.5)
        var_truncation(f, ladder, 2.0, 0.5, allow_small_r=True)
        with pytest.raises(ValueError, match="exceed 1"):
            var_truncation(f, ladder, 1.0, 0.5, allow_small_r=True)


@pytest.fixture(scope="module")
def setup():
    n = 64
    grid = TFGrid((-8.0, 8.0), n, (-6.0, 6.0), 96, (0.08, 2.2), 48)
    xi = xi_lattice(n, grid.dy)
    fhat = np.exp(-((xi - 0.3) ** 2) / 0.18) + 0.6j * np.exp(
        -((xi + 0.2) ** 2) / 0.22
    )
    f = np.fft.ifft(fhat) / grid.dy
    stopping = StoppingSequence([0, 32, n], [[-2.9, 2.7], [-3.1, 2.5]])
    seqfun = SequenceFunction([[1.0 - 0.5j], [0.8 + 0.3j]], 2.0)
    return f, seqfun, stopping, grid


class TestBilinearForms:
    def test_lhs_is_direct_segment_pairing(self, setup, gen):
        f, seqfun, stopping, grid = setup
        lhs, _ = bilinear_forms(f, seqfun, stopping, grid, gen)
        dz = grid.dy
        want = 0.0 + 0.0j
        for c in range(2):
            sl = slice(stopping.edges[c], stopping.edges[c + 1])
            cm, cp = stopping.values[c]
            seg = multiplier_segment(f, cm, cp, dz)
            want += seqfun.values[c, 0] * np.sum(seg[sl]) * dz
        assert abs(lhs - want) < 1e-12

    def test_quadrature_approximates_pairing(self, setup, gen):
        f, seqfun, stopping, grid = setup
        lhs, rhs = bilinear_forms(f, seqfun, stopping, grid, gen)
        assert abs(lhs) > 1e-3
        assert abs(lhs - rhs) / abs(lhs) < 0.05

    def test_contract_errors(self, setup, gen):
        f, seqfun, stopping, grid = setup
        with pytest.raises(ValueError, match="at least two"):
            single = StoppingSequence([0, 64], [[0.0]])
            fun = SequenceFunction([[1.0]], 2.0)
            bilinear_forms(f, fun, single, grid, gen)
        with pytest.raises(ValueError, match="channel"):
            fun = SequenceFunction(np.ones((2, 3)), 2.0)
            bilinear_forms(f, fun, stopping, grid, gen)
