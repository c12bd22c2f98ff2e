"""Frequency-segment multipliers, variation operators, and the bilinear pairing.

All operators act on complex samples over the periodic z lattice with
spacing dz.  Segment cutoffs are sharp in frequency: a DFT bin strictly
inside (c_minus, c_plus) gets weight 1, a bin landing exactly on a finite
boundary gets weight 1/2, everything else 0.  Infinite boundaries are
sentinels for one-sided or empty segments.
"""

import warnings

import numpy as np

from .embeddings import StoppingSequence, SequenceFunction
from .wavepackets import xi_lattice

__all__ = [
    "multiplier_segment",
    "carleson",
    "var_carleson",
    "TruncationLadder",
    "var_truncation",
    "bilinear_forms",
]


def _segment_weights(xi, c_minus, c_plus):
    w = np.zeros(xi.size)
    w[(xi > c_minus) & (xi < c_plus)] = 1.0
    if np.isfinite(c_minus):
        w[xi == c_minus] = 0.5
    if np.isfinite(c_plus):
        w[xi == c_plus] = 0.5
    return w


def multiplier_segment(f, c_minus, c_plus, dz):
    """Apply the sharp frequency cutoff to the segment (c_minus, c_plus).

    Returns samples of the band-limited projection on the z lattice.
    Reversed finite boundaries give the zero function with a warning;
    equal boundaries give the zero function silently.
    """
    f = np.asarray(f, dtype=complex)
    if np.isnan(c_minus) or np.isnan(c_plus):
        raise ValueError("segment boundaries must not be NaN")
    if c_minus >= c_plus:
        if c_minus > c_plus:
            warnings.warn(
                "segment boundaries out of order; returning zero",
                RuntimeWarning,
                stacklevel=2,
            )
        return np.zeros(f.size, dtype=complex)
    xi = xi_lattice(f.size, dz)
    w = _segment_weights(xi, c_minus, c_plus)
    return np.fft.ifft(np.fft.fft(f) * w)


def _cell_slices(stopping):
    e = stopping.edges
    return [slice(int(e[j]), int(e[j + 1])) for j in range(stopping.n_cells)]


def carleson(f, stopping, dz):
    """Linearized Carleson truncation: on each cell the segment (c, +inf).

    stopping must carry a single boundary (K == 1).  A cell with c = -inf
    reproduces f on that cell; c = +inf gives zero there.
    """
    f = np.asarray(f, dtype=complex)
    if stopping.K != 1:
        raise ValueError("carleson expects a single stopping boundary per cell")
    if stopping.n_z != f.size:
        raise ValueError("stopping edges do not match the sample count")
    xi = xi_lattice(f.size, dz)
    fh = np.fft.fft(f)
    out = np.zeros(f.size, dtype=complex)
    for j, sl in enumerate(_cell_slices(stopping)):
        c = stopping.values[j, 0]
        if c == np.inf:
            continue
        seg = np.fft.ifft(fh * _segment_weights(xi, c, np.inf))
        out[sl] = seg[sl]
    return out


def var_carleson(f, stopping, r, dz):
    """r-variation of the segment truncations along a stopping sequence.

    For K boundaries per cell the K - 1 jumps are the segments between
    consecutive boundaries; the result is their pointwise l^r norm.
    Requires K >= 2 and r in (1, inf].
    """
    f = np.asarray(f, dtype=complex)
    if stopping.K < 2:
        raise ValueError("variational Carleson needs at least two boundaries")
    if not r > 1:
        raise ValueError("variation exponent must exceed 1")
    if stopping.n_z != f.size:
        raise ValueError("stopping edges do not match the sample count")
    xi = xi_lattice(f.size, dz)
    fh = np.fft.fft(f)
    out = np.zeros(f.size)
    for j, sl in enumerate(_cell_slices(stopping)):
        acc = np.zeros(sl.stop - sl.start)
        for k in range(stopping.K - 1):
            cm, cp = stopping.values[j, k], stopping.values[j, k + 1]
            if cm >= cp:
                continue
            seg = np.fft.ifft(fh * _segment_weights(xi, cm, cp))
            jump = np.abs(seg[sl])
            if np.isinf(r):
                acc = np.maximum(acc, jump)
            else:
                acc = acc + jump**r
        out[sl] = acc if np.isinf(r) else acc ** (1.0 / r)
    return out


def _gauss_hat(v):
    return np.exp(-0.5 * np.asarray(v, dtype=float) ** 2)


class TruncationLadder:
    """Increasing mollifier scales with an optional lower cutoff sigma.

    The mollifier is given through its transform profile mollifier_hat,
    evaluated at t * xi; unit mass means mollifier_hat(0) == 1.  The
    default is the Gaussian exp(-(t xi)^2 / 2).  At most 256 scales.
    """

    MAX_SCALES = 256

    def __init__(self, scales, sigma=0.0, mollifier_hat=None):
        scales = np.asarray(scales, dtype=float)
        if scales.ndim != 1 or scales.size == 0:
            raise ValueError("scales must be a nonempty 1d array")
        if scales.size > self.MAX_SCALES:
            raise ValueError("truncation ladder capped at 256 scales")
        if np.any(scales <= 0) or np.any(np.diff(scales) <= 0):
            raise ValueError("scales must be positive and strictly increasing")
        if mollifier_hat is None:
            mollifier_hat = _gauss_hat
        if abs(float(mollifier_hat(0.0)) - 1.0) > 1e-12:
            raise ValueError("mollifier must have unit mass")
        sig = np.asarray(sigma, dtype=float)
        if np.any(sig < 0):
            raise ValueError("sigma must be nonnegative")
        self.scales = scales
        self.sigma = sigma
        self.mollifier_hat = mollifier_hat

    @property
    def n_scales(self):
        return self.scales.size

    def convolutions(self, f, dz):
        """Mollified samples at every ladder scale, shape (n_scales, n)."""
        f = np.asarray(f, dtype=complex)
        xi = xi_lattice(f.size, dz)
        prof = self.mollifier_hat(self.scales[:, None] * xi[None, :])
        return np.fft.ifft(np.fft.fft(f)[None, :] * prof, axis=1)


def var_truncation(f, ladder, r, dz, sigma=None, allow_small_r=False):
    """Exact r-variation over admissible ladder scales, per sample.

    A scale t is admissible at z when t > sigma(z); the variation is the
    max over increasing admissible subsequences of the l^r jump sum,
    computed by dynamic programming (no approximation).  r <= 2 is
    rejected unless allow_small_r is set.
    """
    f = np.asarray(f, dtype=complex)
    n = f.size
    if not r > 1:
        raise ValueError("variation exponent must exceed 1")
    if r <= 2 and not allow_small_r:
        raise ValueError("variation exponent must exceed 2 (set allow_small_r to override)")
    if sigma is None:
        sigma = ladder.sigma
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    V = ladder.convolutions(f, dz)
    adm = ladder.scales[:, None] > sig[None, :]
    m = ladder.n_scales
    if np.isinf(r):
        best = np.zeros(n)
        for j in range(1, m):
            d = np.abs(V[j][None, :] - V[:j])
            d = np.where(adm[:j] & adm[j][None, :], d, 0.0)
            best = np.maximum(best, d.max(axis=0))
        return best
    # dp[j] = best jump sum over admissible subsequences ending at scale j
    dp = np.full((m, n), -np.inf)
    dp[0] = np.where(adm[0], 0.0, -np.inf)
    for j in range(1, m):
        cand = dp[:j] + np.abs(V[j][None, :] - V[:j]) ** r
        best = np.maximum(cand.max(axis=0), 0.0)
        dp[j] = np.where(adm[j], best, -np.inf)
    out = dp.max(axis=0)
    out = np.where(np.isfinite(out), np.maximum(out, 0.0), 0.0)
    return out ** (1.0 / r)


def _panel_rows(gen, t, anchor, side, edges, n_eta):
    """Chi panel masses and centroids for one boundary at one scale.

    Returns (panel indices, centroids, masses) for the panels of the eta
    lattice meeting the support of chi(t(eta - anchor)) (side 0) or
    chi(t(anchor - eta)) (side 1).  Masses are int chi d eta per panel.
    """
    g = gen.geom
    if side == 0:
        lo, hi = anchor + (g.d - g.eps) / t, anchor + (g.d + g.eps) / t
    else:
        lo, hi = anchor - (g.d + g.eps) / t, anchor - (g.d - g.eps) / t
    j0 = max(int(np.searchsorted(edges, lo, "right")) - 1, 0)
    j1 = min(int(np.searchsorted(edges, hi, "left")), n_eta)
    if j1 <= j0:
        return None
    e = edges[j0 : j1 + 1]
    if side == 0:
        dm = np.diff(gen.cum_chi(t * (e - anchor)))
        du = np.diff(gen.cum_uchi(t * (e - anchor)))
    else:
        dm = -np.diff(gen.cum_chi(t * (anchor - e)))
        du = -np.diff(gen.cum_uchi(t * (anchor - e)))
    good = dm > 1e-14
    if not np.any(good):
        return None
    if side == 0:
        centroids = anchor + du[good] / (t * dm[good])
    else:
        centroids = anchor - du[good] / (t * dm[good])
    return np.arange(j0, j1)[good], centroids, dm[good] / t


def bilinear_forms(f, seqfun, stopping, grid, gen, interp=True):
    """Segment pairing and its wave-packet quadrature, returned as (lhs, rhs).

    lhs integrates sum_k a_k(z) times the segment projection of f between
    consecutive stopping boundaries.  rhs is the triple-grid quadrature of
    the embedded field against the packet superposition carrying the same
    stopping data, with chi lumped into per-panel masses and centroids in
    eta.  The z lattice of f must coincide with the y lattice of grid.
    """
    f = np.asarray(f, dtype=complex)
    n = f.size
    if stopping.n_z != n:
        raise ValueError("stopping edges do not match the sample count")
    if grid.n_y != n:
        raise ValueError("grid y lattice must match the z lattice")
    if stopping.K < 2:
        raise ValueError("bilinear pairing needs at least two boundaries")
    if seqfun.values.shape != (stopping.n_cells, stopping.K - 1):
        raise ValueError("sequence function must have one channel per jump")
    dz = grid.dy
    xi = xi_lattice(n, dz)
    fh = np.fft.fft(f)
    slices = _cell_slices(stopping)

    lhs = 0.0 + 0.0j
    for c, sl in enumerate(slices):
        for k in range(stopping.K - 1):
            a = seqfun.values[c, k]
            if a == 0:
                continue
            cm, cp = stopping.values[c, k], stopping.values[c, k + 1]
            if cm >= cp:
                continue
            seg = np.fft.ifft(fh * _segment_weights(xi, cm, cp))
            lhs += a * np.sum(seg[sl]) * dz

    n_eta = grid.n_eta
    etag = grid.eta
    deta = grid.deta
    edges = grid.eta_range[0] + np.arange(n_eta + 1) * deta
    dlg = grid.dlogt
    cellfft = np.empty((stopping.n_cells, n), dtype=complex)
    for c, sl in enumerate(slices):
        ind = np.zeros(n)
        ind[sl] = 1.0
        cellfft[c] = np.fft.fft(ind)

    rhs = 0.0 + 0.0j
    for t in grid.t:
        F = np.fft.ifft(fh[None, :] * gen.psi_hat(t * (xi[None, :] - etag[:, None])), axis=1)
        rows_spec, rows_eta, rows_mass = [], [], []
        for c in range(stopping.n_cells):
            for k in range(stopping.K - 1):
                a = seqfun.values[c, k]
                if a == 0:
                    continue
                cm, cp = stopping.values[c, k], stopping.values[c, k + 1]
                for side in (0, 1):
                    anchor = cm if side == 0 else cp
                    if np.isinf(anchor):
                        continue
                    panels = _panel_rows(gen, t, anchor, side, edges, n_eta)
                    if panels is None:
                        continue
                    jj, centroids, mass = panels
                    # spectral rows at -xi: pairing is a correlation in z
                    if side == 0:
                        bfac = gen.beta(t * (cp + xi)) if np.isfinite(cp) else 1.0
                    else:
                        bfac = gen.beta(t * (-xi - cm)) if np.isfinite(cm) else 1.0
                    prof = gen.phi_hat(t * (-xi[None, :] - centroids[:, None])) * bfac
                    rows_spec.append(prof * (a * cellfft[c])[None, :])
                    rows_eta.append(np.stack([jj, (centroids - etag[jj]) / deta], axis=1))
                    rows_mass.append(mass)
        if not rows_spec:
            continue
        spec = np.concatenate(rows_spec, axis=0)
        em = np.concatenate(rows_eta, axis=0)
        ms = np.concatenate(rows_mass, axis=0)
        conv = np.fft.ifft(spec, axis=1)
        jj = em[:, 0].astype(int)
        if interp:
            frac = em[:, 1]
            jp = np.clip(jj + 1, 0, n_eta - 1)
            jm = np.clip(jj - 1, 0, n_eta - 1)
            Frow = F[jj] + 0.5 * frac[:, None] * (F[jp] - F[jm])
        else:
            Frow = F[jj]
        vals = np.einsum("ij,ij->i", Frow, conv)
        rhs += t * dlg * np.sum(ms * vals) * dz
    return lhs, rhs
