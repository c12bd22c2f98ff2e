"""Generator functions and truncated wave packets.

The construction chain: phi_hat is an amplitude-normalized smooth bump on
B_b; chi a smooth bump on B_eps(d); kappa = chi * phi_hat (convolution),
supported on (d-eps-b, d+eps+b); gamma a smooth dilation-partition cutoff
with gamma(t) + gamma(1/t) = 1; beta(x) = int gamma(t) kappa(t x) dt/t,
which rises from 0 to 1; psi_hat equals 1 on B_b and decays smoothly to 0
at (1+eps) b.  Together these produce truncated wave packets whose
(eta, t)-integral reconstructs the indicator of a frequency interval.

All z-space functions live on a periodic lattice; spectra are sampled on
the DFT frequency lattice with the convention hat(f)(xi) = sum f(z)
exp(-i xi z) dz.
"""

import csv
import os

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.signal import fftconvolve

from ._smooth import bump, expstep
from .geometry import GeometryParams

__all__ = [
    "Generators",
    "BumpWeight",
    "build_generators",
    "bump_eval",
    "truncated_packet",
    "packet_spectrum",
    "reconstruct_indicator",
    "xi_lattice",
]


def xi_lattice(n, dz):
    """DFT frequency lattice 2*pi*fftfreq for an n-point grid of spacing dz."""
    return 2.0 * np.pi * np.fft.fftfreq(n, d=dz)


class BumpWeight:
    """Polynomial tail weight W(z) = (1+z^2)^(-N/2), W_t(z) = W(z/t)/t."""

    def __init__(self, N):
        if N < 1 or int(N) != N:
            raise ValueError("bump exponent N must be a positive integer")
        self.N = int(N)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return (1.0 + z * z) ** (-self.N / 2.0)


def bump_eval(B, t, z):
    """Dilated tail weight W_t(z) = t^-1 (1+(z/t)^2)^(-N/2)."""
    if not t > 0:
        raise ValueError("t must be positive")
    return B(np.asarray(z, dtype=float) / t) / t


class Generators:
    """Immutable bundle of generator functions and tables.

    Exposes callables phi_hat, chi, kappa, beta, gamma, psi_hat, the
    cumulative chi tables used by quadrature rules, and the effective
    packet thresholds implied by the construction's support arithmetic.
    """

    def __init__(self, geom, amplitude, kappa_itp, kappa_lattice_support,
                 beta_itp, beta_table_range, cum_tables):
        self.geom = geom
        self.amplitude = amplitude
        self._kappa_itp = kappa_itp
        self._kap_lo, self._kap_hi = kappa_lattice_support
        self._beta_itp = beta_itp
        self._bx_lo, self._bx_hi = beta_table_range
        (self._cchi_itp, self._cuchi_itp, self.chi_mass, self.chi_moment) = cum_tables
        g = geom
        # exact support constants of kappa = chi * phi_hat
        self.kappa_support = (g.d - g.eps - g.b, g.d + g.eps + g.b)
        self.beta_vanish_below = self.kappa_support[0] / (1.0 + g.eps)
        self.beta_one_above = self.kappa_support[1] * (1.0 + g.eps)
        # a left packet is nonzero only when t(c+ - eta) exceeds this,
        # and coincides with the c+ = +inf packet beyond the second value
        self.vanish_threshold = self.beta_vanish_below - g.b
        self.stabilization_threshold = self.beta_one_above + g.b
        self.weight = BumpWeight(g.decay_N)

    # ---- frequency-side generators ----

    def phi_hat(self, v):
        """Amplitude-normalized bump on B_b (the transform of phi)."""
        return self.amplitude * bump(np.asarray(v, dtype=float) / self.geom.b)

    def chi(self, u):
        """Smooth bump supported on B_eps(d), peak value 1."""
        g = self.geom
        return bump((np.asarray(u, dtype=float) - g.d) / g.eps)

    def kappa(self, v):
        """(chi * phi_hat)(v), tabulated; support inside kappa_support."""
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        m = (v > self._kap_lo) & (v < self._kap_hi)
        if np.any(m):
            out[m] = np.maximum(self._kappa_itp(v[m]), 0.0)
        return out

    def gamma(self, t):
        """Smooth partition cutoff: 1 on (0, (1+eps)^-1], 0 on [1+eps, inf)."""
        t = np.asarray(t, dtype=float)
        g1 = _gamma_tilde(t, self.geom.eps)
        g2 = _gamma_tilde(1.0 / np.maximum(t, 1e-300), self.geom.eps)
        tot = g1 + g2
        return np.where(tot > 0, g1 / np.where(tot > 0, tot, 1.0), 0.0)

    def beta(self, x):
        """Rising cutoff int gamma(t) kappa(t x) dt/t, tabulated.

        Identically 0 for x <= (d-eps-b)/(1+eps) and 1 for
        x >= (d+eps+b)(1+eps).
        """
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[x >= self._bx_hi] = 1.0
        m = (x > self._bx_lo) & (x < self._bx_hi)
        if np.any(m):
            out[m] = np.clip(self._beta_itp(x[m]), 0.0, 1.0)
        return out

    def psi_hat(self, v):
        """Even profile: 1 on B_b, smooth fall to 0 at (1+eps) b."""
        g = self.geom
        v = np.abs(np.asarray(v, dtype=float))
        hi = (1.0 + g.eps) * g.b
        return np.where(
            v <= g.b,
            1.0,
            np.where(v >= hi, 0.0, expstep((hi - v) / (g.eps * g.b))),
        )

    # ---- cumulative chi tables (quadrature support) ----

    def cum_chi(self, v):
        """int_{-inf}^{v} chi(u) du, exact at panel edges of the table."""
        g = self.geom
        v = np.asarray(v, dtype=float)
        c = np.clip(v, g.d - g.eps, g.d + g.eps)
        return np.where(
            v <= g.d - g.eps,
            0.0,
            np.where(v >= g.d + g.eps, self.chi_mass, self._cchi_itp(c)),
        )

    def cum_uchi(self, v):
        """int_{-inf}^{v} u chi(u) du, for panel centroid computation."""
        g = self.geom
        v = np.asarray(v, dtype=float)
        c = np.clip(v, g.d - g.eps, g.d + g.eps)
        return np.where(
            v <= g.d - g.eps,
            0.0,
            np.where(v >= g.d + g.eps, self.chi_moment, self._cuchi_itp(c)),
        )

    # ---- z-space kernels on the periodic lattice ----

    def psi_time(self, t, n, dz):
        """Periodized samples of psi_t(w) = psi(w/t)/t on the z lattice."""
        xi = xi_lattice(n, dz)
        return np.fft.ifft(self.psi_hat(t * xi)) / dz

    def phi_time(self, t, n, dz):
        """Periodized samples of phi_t(w) = phi(w/t)/t on the z lattice."""
        xi = xi_lattice(n, dz)
        return np.fft.ifft(self.phi_hat(t * xi)) / dz

    # ---- table export ----

    def dump_tables(self, outdir, n=1024):
        """Write each generator as a two-column CSV (argument, value)."""
        g = self.geom
        os.makedirs(outdir, exist_ok=True)
        lo, hi = self.kappa_support
        tables = {
            "phi_hat": (np.linspace(-1.2 * g.b, 1.2 * g.b, n), self.phi_hat),
            "chi": (np.linspace(g.d - 1.2 * g.eps, g.d + 1.2 * g.eps, n), self.chi),
            "kappa": (np.linspace(lo - 0.05, hi + 0.05, n), self.kappa),
            "beta": (np.exp(np.linspace(np.log(0.5 * self.beta_vanish_below),
                                        np.log(2.0 * self.beta_one_above), n)),
                     self.beta),
            "gamma": (np.exp(np.linspace(np.log(0.5), np.log(2.0), n)), self.gamma),
            "psi_hat": (np.linspace(-1.5 * g.b, 1.5 * g.b, n), self.psi_hat),
        }
        paths = []
        for name, (args, fn) in tables.items():
            path = os.path.join(outdir, f"{name}.csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["argument", "value"])
                for a, v in zip(args, np.asarray(fn(args), dtype=float)):
                    w.writerow([repr(float(a)), repr(float(v))])
            paths.append(path)
        return paths


def _gamma_tilde(t, eps):
    a0, a1 = 1.0 / (1.0 + eps), 1.0 + eps
    t = np.asarray(t, dtype=float)
    return np.where(
        t <= a0, 1.0, np.where(t >= a1, 0.0, expstep((a1 - t) / (a1 - a0)))
    )


def build_generators(g=None, n_table=4096, n_beta=4096, n_beta_quad=1024):
    """Construct all generators for the given geometry.

    n_table controls the chi/phi sampling (and the cumulative tables),
    n_beta the beta table length, n_beta_quad the quadrature per beta entry.
    Raises if the resolution cannot resolve the supports or if a generator
    invariant fails after construction.
    """
    if g is None:
        g = GeometryParams()
    if n_table < 16:
        raise ValueError("resolution too coarse: need >= 16 samples across chi")
    du = 2.0 * g.eps / n_table
    if int(np.floor(2.0 * g.b / du)) < 16:
        raise ValueError("resolution too coarse: need >= 16 samples across phi_hat")

    # chi and un-normalized phi_hat on a common lattice of step du
    u_chi = np.arange(g.d - g.eps + du / 2.0, g.d + g.eps, du)
    chi_u = bump((u_chi - g.d) / g.eps)
    u_phi = np.arange(-g.b + du / 2.0, g.b, du)
    phi_u = bump(u_phi / g.b)

    # kappa on the summed lattice; normalize so int kappa(v) dv/v = 1
    kap = np.maximum(fftconvolve(chi_u, phi_u) * du, 0.0)
    w_kap = (u_chi[0] + u_phi[0]) + du * np.arange(kap.size)
    amplitude = 1.0 / (np.sum(kap / w_kap) * du)
    kap *= amplitude
    kappa_itp = PchipInterpolator(w_kap, kap, extrapolate=False)
    kap_lo, kap_hi = w_kap[0], w_kap[-1]

    # cumulative chi tables on the panel-edge lattice
    edges = g.d - g.eps + du * np.arange(u_chi.size + 1)
    cchi = np.concatenate([[0.0], np.cumsum(chi_u) * du])
    cuchi = np.concatenate([[0.0], np.cumsum(u_chi * chi_u) * du])
    cchi_itp = PchipInterpolator(edges, cchi, extrapolate=False)
    cuchi_itp = PchipInterpolator(edges, cuchi, extrapolate=False)

    # beta table on log-spaced arguments spanning the transition region
    a1 = 1.0 + g.eps
    bx_lo = kap_lo / a1 * 0.98
    bx_hi = kap_hi * a1 * 1.02
    xs = np.exp(np.linspace(np.log(bx_lo), np.log(bx_hi), n_beta))
    beta_tab = np.empty_like(xs)
    for i, x in enumerate(xs):
        tlo, thi = kap_lo / x, min(kap_hi / x, a1)
        if thi <= tlo:
            beta_tab[i] = 0.0 if x < kap_lo else 1.0
            continue
        lt = np.linspace(np.log(tlo), np.log(thi), n_beta_quad + 1)
        tq = np.exp(0.5 * (lt[1:] + lt[:-1]))
        kv = np.zeros_like(tq)
        m = (tq * x > kap_lo) & (tq * x < kap_hi)
        kv[m] = np.maximum(kappa_itp(tq[m] * x), 0.0)
        gm = _gamma_tilde(tq, g.eps)
        gm = gm / (gm + _gamma_tilde(1.0 / tq, g.eps))
        beta_tab[i] = np.sum(gm * kv) * (lt[1] - lt[0])
    beta_itp = PchipInterpolator(xs, np.clip(beta_tab, 0.0, None), extrapolate=False)

    gen = Generators(
        g,
        amplitude,
        kappa_itp,
        (kap_lo, kap_hi),
        beta_itp,
        (xs[0], xs[-1]),
        (cchi_itp, cuchi_itp, cchi[-1], cuchi[-1]),
    )
    _check_generator_invariants(gen)
    return gen


def _check_generator_invariants(gen):
    g = gen.geom
    # reproducing integral: int kappa(v) dv/v over an independent log grid
    lo, hi = gen.kappa_support
    lt = np.linspace(np.log(lo * 0.999), np.log(hi * 1.001), 8192 + 1)
    tq = np.exp(0.5 * (lt[1:] + lt[:-1]))
    norm = np.sum(gen.kappa(tq)) * (lt[1] - lt[0])
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(
            f"generator invariant violated: reproducing integral = {norm!r}, not 1"
        )
    ts = np.exp(np.linspace(-1.5, 1.5, 41))
    part = gen.gamma(ts) + gen.gamma(1.0 / ts)
    if np.max(np.abs(part - 1.0)) > 1e-12:
        raise ValueError("generator invariant violated: gamma partition of unity")
    if gen.beta(np.array([gen.beta_vanish_below - 0.01]))[0] != 0.0:
        raise ValueError("generator invariant violated: beta not 0 below threshold")
    if gen.beta(np.array([gen.beta_one_above + 0.01]))[0] != 1.0:
        raise ValueError("generator invariant violated: beta not 1 above threshold")


def packet_spectrum(gen, y, eta, t, c_minus, c_plus, side, xi):
    """Frequency samples of a truncated wave packet at the given xi values.

    Left:  chi(t(eta-c-)) * phi_hat(t(xi-eta)) * beta(t(c+ - xi))
    Right: chi(t(c+ -eta)) * phi_hat(t(xi-eta)) * beta(t(xi - c-))
    with the e^{-i xi y} translation phase.  Infinite boundaries are
    sentinel flags: the boundary carrying chi must be finite (else the
    packet is identically zero); an infinite boundary under beta makes
    that factor identically 1.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if np.isfinite(c_minus) and np.isfinite(c_plus) and c_minus >= c_plus:
        raise ValueError("need c_minus < c_plus")
    xi = np.asarray(xi, dtype=float)
    if side == "left":
        if not np.isfinite(c_minus):
            return np.zeros(xi.shape, dtype=complex)
        amp = gen.chi(np.array([t * (eta - c_minus)]))[0]
        if amp == 0.0:
            return np.zeros(xi.shape, dtype=complex)
        env = gen.phi_hat(t * (xi - eta))
        bf = gen.beta(t * (c_plus - xi)) if np.isfinite(c_plus) else 1.0
    elif side == "right":
        if not np.isfinite(c_plus):
            return np.zeros(xi.shape, dtype=complex)
        amp = gen.chi(np.array([t * (c_plus - eta)]))[0]
        if amp == 0.0:
            return np.zeros(xi.shape, dtype=complex)
        env = gen.phi_hat(t * (xi - eta))
        bf = gen.beta(t * (xi - c_minus)) if np.isfinite(c_minus) else 1.0
    else:
        raise ValueError(f"unknown side: {side}")
    return amp * env * bf * np.exp(-1j * xi * y)


def truncated_packet(gen, y, eta, t, c_minus, c_plus, side, period, n):
    """Sampled truncated wave packet on the periodic z lattice.

    Returns complex samples at z_j = j * period / n, computed by the
    frequency-domain product formula and an inverse DFT.
    """
    dz = period / n
    xi = xi_lattice(n, dz)
    hat = packet_spectrum(gen, y, eta, t, c_minus, c_plus, side, xi)
    return np.fft.ifft(hat) / dz


def reconstruct_indicator(gen, c_minus, c_plus, xi_samples, n_eta=128, n_t=64,
                          tpad=1.05, t_range=None):
    """Quadrature of the double integral of (Psi_hat^l + Psi_hat^r) d eta dt.

    Approximates the indicator of (c_minus, c_plus) at the xi samples.  The
    eta integral is carried out in the scaled variable u = t(eta - c) with
    nodes across supp chi, so each t-slice is fully resolved; the t ladder
    is logarithmic over the scales where kappa can be active, inferred from
    the sample-to-boundary distances unless t_range is given.
    """
    xi = np.asarray(xi_samples, dtype=float)
    g = gen.geom
    lo_fin = np.isfinite(c_minus)
    hi_fin = np.isfinite(c_plus)
    if not (lo_fin or hi_fin):
        raise ValueError("need at least one finite boundary")
    kap_lo, kap_hi = gen.kappa_support
    if t_range is None:
        dists = []
        if lo_fin:
            dists.append(xi - c_minus)
        if hi_fin:
            dists.append(c_plus - xi)
        dists = np.concatenate(dists)
        dists = dists[dists > 0]
        if dists.size == 0:
            raise ValueError("no sample lies on the positive side of a boundary")
        t_lo = kap_lo / np.max(dists) / tpad
        t_hi = kap_hi / np.min(dists) * tpad
    else:
        t_lo, t_hi = t_range
    dlg = np.log(t_hi / t_lo) / n_t
    tg = t_lo * np.exp((np.arange(n_t) + 0.5) * dlg)

    duq = 2.0 * g.eps / n_eta
    uq = g.d - g.eps + (np.arange(n_eta) + 0.5) * duq
    chi_q = gen.chi(uq)

    out = np.zeros_like(xi)
    for t in tg:
        if lo_fin:
            # eta-integral of the left packet: kappa(t(xi-c-)) * beta factor
            kl = np.sum(chi_q[None, :] * gen.phi_hat(
                t * (xi[:, None] - c_minus) - uq[None, :]), axis=1) * duq
            bl = gen.beta(t * (c_plus - xi)) if hi_fin else 1.0
            out += dlg * kl * bl
        if hi_fin:
            kr = np.sum(chi_q[None, :] * gen.phi_hat(
                t * (c_plus - xi[:, None]) - uq[None, :]), axis=1) * duq
            br = gen.beta(t * (xi - c_minus)) if lo_fin else 1.0
            out += dlg * kr * br
    return out
