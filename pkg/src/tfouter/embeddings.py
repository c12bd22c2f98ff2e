"""Embedding maps from boundary data on the z lattice into fields on the grid.

The z axis is a circle of circumference grid.period whose samples coincide
with the y nodes of the grid.  Each map evaluates its defining z-integral
pointwise at the (y, eta, t) nodes by direct quadrature: an explicit
weighted sum over the z samples against a tabulated, periodized kernel.
The one exception is embed_energy, whose kernel is a plain convolution and
is applied spectrally.  Kernel tables themselves are periodized by sampling
the analytic spectrum on the dual lattice.
"""

import json

import numpy as np

from ._smooth import expstep
from .wavepackets import packet_spectrum, xi_lattice

__all__ = [
    "EmbeddedField",
    "StoppingSequence",
    "SequenceFunction",
    "embed_energy",
    "embed_mass",
    "embed_var_mass_linear",
    "embed_var_mass_sup",
    "embed_aux",
    "embed_aux_ball",
    "maximal_function",
    "cz_decompose",
]


class EmbeddedField:
    """Complex field on a TFGrid, values indexed (t, eta, y)."""

    def __init__(self, grid, values, label=""):
        values = np.asarray(values, dtype=complex)
        if values.shape != grid.shape:
            raise ValueError("field values must have grid shape (n_t, n_eta, n_y)")
        self.grid = grid
        self.values = np.ascontiguousarray(values)
        self.label = str(label)

    def to_csv(self, path):
        """Write the field as CSV with a JSON metadata header line.

        Row order is t-major, then eta, then y, so output is byte
        deterministic for identical values.
        """
        g = self.grid
        meta = {
            "label": self.label,
            "y_range": list(g.y_range),
            "n_y": g.n_y,
            "eta_range": list(g.eta_range),
            "n_eta": g.n_eta,
            "t_range": list(g.t_range),
            "n_t": g.n_t,
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            fh.write("y,eta,t,re,im\n")
            ys = [float(v) for v in g.y]
            for k in range(g.n_t):
                t = float(g.t[k])
                for e in range(g.n_eta):
                    eta = float(g.eta[e])
                    row = self.values[k, e]
                    fh.writelines(
                        f"{ys[i]!r},{eta!r},{t!r},{float(row[i].real)!r},{float(row[i].imag)!r}\n"
                        for i in range(g.n_y)
                    )

    @staticmethod
    def from_csv(path):
        from .geometry import TFGrid

        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline()
            if not header.startswith("# "):
                raise ValueError("missing field metadata header")
            meta = json.loads(header[2:])
            fh.readline()
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        grid = TFGrid(
            meta["y_range"], meta["n_y"],
            meta["eta_range"], meta["n_eta"],
            meta["t_range"], meta["n_t"],
        )
        vals = (data[:, 3] + 1j * data[:, 4]).reshape(grid.shape)
        return EmbeddedField(grid, vals, label=meta.get("label", ""))


class StoppingSequence:
    """Cellwise-constant nondecreasing stopping data on the z lattice.

    edges are integer sample indices, strictly increasing, with
    edges[0] == 0 and edges[-1] == n_z; cell j covers samples
    edges[j] <= i < edges[j+1].  values has shape (n_cells, K) with each
    row nondecreasing; entries may be -inf or +inf.  K == 1 is a single
    stopping function; K >= 2 gives K - 1 variational channels whose k-th
    boundary pair is (values[:, k], values[:, k+1]).
    """

    def __init__(self, edges, values):
        edges = np.asarray(edges, dtype=int)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("edges must contain at least one cell")
        if edges[0] != 0 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must start at 0 and strictly increase")
        if values.ndim != 2 or values.shape[0] != edges.size - 1:
            raise ValueError("values must have one row per cell")
        if np.any(np.isnan(values)):
            raise ValueError("stopping values must not be NaN")
        if not np.all(values[:, 1:] >= values[:, :-1]):
            raise ValueError("stopping values must be nondecreasing per cell")
        self.edges = edges
        self.values = values

    @property
    def n_z(self):
        return int(self.edges[-1])

    @property
    def n_cells(self):
        return self.edges.size - 1

    @property
    def K(self):
        return self.values.shape[1]

    @property
    def n_channels(self):
        return self.K - 1

    @property
    def sample_cells(self):
        """Cell index of every z sample, shape (n_z,)."""
        idx = np.searchsorted(self.edges, np.arange(self.n_z), side="right") - 1
        return idx

    def boundary_at_samples(self, k):
        """values[:, k] expanded to the z samples."""
        return self.values[self.sample_cells, k]

    def cell_masks(self):
        """Indicator columns of the cells, shape (n_z, n_cells)."""
        cols = np.zeros((self.n_z, self.n_cells))
        cols[np.arange(self.n_z), self.sample_cells] = 1.0
        return cols


class SequenceFunction:
    """Cellwise-constant channel amplitudes with an inner exponent.

    values is complex with shape (n_cells, n_channels); r_prime in
    [1, inf] is the exponent of the inner sequence norm (np.inf allowed).
    """

    def __init__(self, values, r_prime):
        values = np.asarray(values, dtype=complex)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("sequence values must be 2-d (n_cells, n_channels)")
        r_prime = float(r_prime)
        if not r_prime >= 1.0:
            raise ValueError("inner exponent must satisfy r_prime >= 1")
        self.values = values
        self.r_prime = r_prime

    @property
    def n_cells(self):
        return self.values.shape[0]

    @property
    def n_channels(self):
        return self.values.shape[1]

    def inner_norm_cells(self, active=None):
        """l^{r'} norm of the channel values per cell, shape (n_cells,).

        active optionally masks channels per cell, same shape as values.
        """
        mag = np.abs(self.values)
        if active is not None:
            mag = np.where(active, mag, 0.0)
        if np.isinf(self.r_prime):
            return mag.max(axis=1) if mag.shape[1] else np.zeros(mag.shape[0])
        return (mag ** self.r_prime).sum(axis=1) ** (1.0 / self.r_prime)

    def mixed_norm(self, stopping, p_prime, dz):
        """L^{p'} norm over z of the cellwise l^{r'} norms."""
        inner = self.inner_norm_cells()
        lengths = np.diff(stopping.edges) * dz
        if np.isinf(p_prime):
            return float(inner.max()) if inner.size else 0.0
        return float(((inner ** p_prime) * lengths).sum() ** (1.0 / p_prime))


def _check_lattice(stopping, grid):
    if stopping.n_z != grid.n_y:
        raise ValueError("stopping sequence lattice does not match grid y lattice")


def _check_channels(seqfun, stopping):
    if seqfun.n_cells != stopping.n_cells:
        raise ValueError("sequence function cells do not match stopping cells")
    if seqfun.n_channels != stopping.n_channels:
        raise ValueError("sequence function channels must equal K - 1")


_INDEX_CACHE = {}


def _circ_index(n, orientation):
    """Index matrix turning a kernel table into an explicit circulant.

    conv: out[i] = sum_j h[j] k[(i-j) % n]; corr: k[(j-i) % n].
    """
    key = (n, orientation)
    if key not in _INDEX_CACHE:
        i = np.arange(n)
        if orientation == "conv":
            _INDEX_CACHE[key] = (i[:, None] - i[None, :]) % n
        else:
            _INDEX_CACHE[key] = (i[None, :] - i[:, None]) % n
    return _INDEX_CACHE[key]


def embed_energy(f, grid, gen):
    """Wave-packet transform of boundary data f against the psi family.

    F(y, eta, t) = sum_z f(z) psi_(eta,t)(y - z) dz, a pure convolution in
    z at every (eta, t), applied spectrally.
    """
    f = np.asarray(f, dtype=complex)
    n, dz = grid.n_y, grid.dy
    if f.shape != (n,):
        raise ValueError("boundary data must live on the grid y lattice")
    xi = xi_lattice(n, dz)
    fhat = np.fft.fft(f)
    out = np.empty(grid.shape, dtype=complex)
    for k, t in enumerate(grid.t):
        spec = gen.psi_hat(t * (xi[None, :] - grid.eta[:, None]))
        out[k] = np.fft.ifft(fhat[None, :] * spec, axis=1)
    return EmbeddedField(grid, out, label="energy")


def embed_mass(a, stopping, grid, gen, profile="psi"):
    """Stopping-cut embedding of a density a against one stopping function.

    A(y, eta, t) = sum_z a(z) k_(eta,t) chi(t (eta - c(z))) dz with kernel
    argument y - z for profile "psi" and z - y for profile "packet" (the
    packet profile is the untruncated left packet envelope).  Evaluated by
    direct quadrature: explicit circulant sums against tabulated kernels.
    """
    _check_lattice(stopping, grid)
    if stopping.K != 1:
        raise ValueError("embed_mass needs a single stopping function (K == 1)")
    if profile not in ("psi", "packet"):
        raise ValueError(f"unknown mass profile: {profile}")
    a = np.asarray(a, dtype=complex)
    n, dz = grid.n_y, grid.dy
    if a.shape != (n,):
        raise ValueError("density must live on the grid y lattice")
    xi = xi_lattice(n, dz)
    c = stopping.values[:, 0]
    cells = stopping.cell_masks()
    H = cells * a[:, None]
    idx = _circ_index(n, "conv" if profile == "psi" else "corr")
    out = np.zeros(grid.shape, dtype=complex)
    for k, t in enumerate(grid.t):
        arg = t * (grid.eta[:, None] - c[None, :])
        chiw = np.zeros_like(arg)
        fin = np.isfinite(arg)
        chiw[fin] = gen.chi(arg[fin])
        active = np.flatnonzero(np.any(chiw != 0.0, axis=1))
        if active.size == 0:
            continue
        if profile == "psi":
            spec = gen.psi_hat(t * (xi[None, :] - grid.eta[active, None]))
        else:
            spec = gen.phi_hat(t * (xi[None, :] - grid.eta[active, None]))
        ktab = np.fft.ifft(spec, axis=1) / dz
        circ = ktab[:, idx]
        out[k][active] = dz * np.einsum(
            "eij,jc,ec->ei", circ, H, chiw[active], optimize=True
        )
    return EmbeddedField(grid, out, label=f"mass-{profile}")


def _boundary_groups(seqfun, stopping):
    """Accumulate cell-masked channel densities by distinct boundary pair."""
    cells = stopping.cell_masks()
    groups = {}
    for c in range(stopping.n_cells):
        for ch in range(stopping.n_channels):
            pair = (stopping.values[c, ch], stopping.values[c, ch + 1])
            col = groups.setdefault(pair, np.zeros(stopping.n_z, dtype=complex))
            col += seqfun.values[c, ch] * cells[:, c]
    return groups


def embed_var_mass_linear(seqfun, stopping, grid, gen, side="both"):
    """Variational embedding of channel densities against truncated packets.

    For each channel k the density is paired with the left or right
    truncated packet with boundaries (c_k(z), c_{k+1}(z)), evaluated at z:
    A(y, eta, t) = sum_k sum_z a_k(z) Pkt_(y,eta,t,c_k,c_{k+1})(z) dz.
    Direct quadrature against kernels tabulated from packet_spectrum, so
    sentinel handling matches the packet constructor exactly.
    """
    if side not in ("left", "right", "both"):
        raise ValueError(f"unknown packet side: {side}")
    _check_lattice(stopping, grid)
    _check_channels(seqfun, stopping)
    n, dz = grid.n_y, grid.dy
    xi = xi_lattice(n, dz)
    idx = _circ_index(n, "corr")
    groups = _boundary_groups(seqfun, stopping)
    sides = ("left", "right") if side == "both" else (side,)
    fields = []
    for sd in sides:
        out = np.zeros(grid.shape, dtype=complex)
        for k, t in enumerate(grid.t):
            for (cm, cp), col in groups.items():
                if not np.any(col):
                    continue
                if sd == "left":
                    if not np.isfinite(cm):
                        continue
                    amp = gen.chi(t * (grid.eta - cm))
                else:
                    if not np.isfinite(cp):
                        continue
                    amp = gen.chi(t * (cp - grid.eta))
                active = np.flatnonzero(amp != 0.0)
                if active.size == 0:
                    continue
                spec = np.stack(
                    [
                        packet_spectrum(gen, 0.0, grid.eta[e], t, cm, cp, sd, xi)
                        for e in active
                    ]
                )
                ktab = np.fft.ifft(spec, axis=1) / dz
                circ = ktab[:, idx]
                out[k][active] += dz * np.einsum(
                    "eij,j->ei", circ, col, optimize=True
                )
        fields.append(EmbeddedField(grid, out, label=f"var-mass-{sd}"))
    if side == "both":
        return tuple(fields)
    return fields[0]


def embed_var_mass_sup(seqfun, stopping, grid, gen):
    """Pointwise max of |left|, |right| and |left + right| variational fields."""
    left, right = embed_var_mass_linear(seqfun, stopping, grid, gen, side="both")
    mag = np.maximum(np.abs(left.values), np.abs(right.values))
    mag = np.maximum(mag, np.abs(left.values + right.values))
    return EmbeddedField(left.grid, mag, label="var-mass-sup")


def _active_theta(arg, lo, hi, variant):
    """Strict frequency-window indicator; variant one of full/plus/minus.

    full is (lo, hi); plus is [0, hi); minus is (lo, 0].  Non-finite
    arguments are excluded.
    """
    fin = np.isfinite(arg)
    safe = np.where(fin, arg, hi + 1.0)
    if variant == "full":
        return fin & (safe > lo) & (safe < hi)
    if variant == "plus":
        return fin & (safe >= 0.0) & (safe < hi)
    if variant == "minus":
        return fin & (safe > lo) & (safe <= 0.0)
    raise ValueError(f"unknown window variant: {variant}")


def _combine_channels(seqfun, active):
    """Inner l^{r'} norm of channel values under an activity mask.

    active has shape (..., n_cells, n_channels); returns (..., n_cells).
    """
    mag = np.abs(seqfun.values)
    if mag.shape[-1] == 0:
        return np.zeros(np.broadcast_shapes(active.shape, mag.shape)[:-1])
    if np.isinf(seqfun.r_prime):
        return np.where(active, mag, 0.0).max(axis=-1)
    return (np.where(active, mag, 0.0) ** seqfun.r_prime).sum(axis=-1) ** (
        1.0 / seqfun.r_prime
    )


def embed_aux(seqfun, stopping, grid, gen, geom):
    """Tail-weighted auxiliary embedding of the channel densities.

    M(y, eta, t) = sum_z (sum_k |a_k(z)|^{r'} 1_Theta(t (eta - c_k(z))))^{1/r'}
    W_t(z - y) dz, with W_t(u) = W(u/t)/t the periodized tail weight and
    c_k the lower boundary of channel k.  Direct quadrature per t level.
    """
    _check_lattice(stopping, grid)
    _check_channels(seqfun, stopping)
    n, dz = grid.n_y, grid.dy
    period = grid.period
    lower = stopping.values[:, :-1]
    cells = stopping.cell_masks()
    idx = _circ_index(n, "corr")
    lo, hi = geom.alpha_minus, geom.alpha_plus
    out = np.zeros(grid.shape, dtype=complex)
    for k, t in enumerate(grid.t):
        arg = t * (grid.eta[:, None, None] - lower[None, :, :])
        active = _active_theta(arg, lo, hi, "full")
        G = _combine_channels(seqfun, active)
        wtab = _periodized_weight(gen, t, n, dz, period)
        circ = wtab[idx]
        out[k] = dz * np.einsum("ij,jc,ec->ei", circ, cells, G, optimize=True)
    return EmbeddedField(grid, out, label="aux")


def _periodized_weight(gen, t, n, dz, period):
    """Table of W_t on the lattice offsets, periodized by image sum."""
    if gen.geom.decay_N < 2:
        raise ValueError("decay_N >= 2 required for a periodizable tail weight")
    u = dz * np.arange(n)
    m = np.arange(-128, 129)
    return gen.weight((u[None, :] + period * m[:, None]) / t).sum(axis=0) / t


def embed_aux_ball(seqfun, stopping, R, y, eta, t, grid, geom, variant="full"):
    """Ball-averaged auxiliary embedding at arbitrary points of the 3-space.

    Replaces the tail weight by the sharp ball average
    (2 R t)^{-1} sum_{|z - y| < R t} dz with circle distance in z, and the
    frequency window by Theta (full), Theta+ = [0, alpha+) (plus) or
    Theta- = (alpha-, 0] (minus).  y, eta, t broadcast to a common shape.
    """
    _check_lattice(stopping, grid)
    _check_channels(seqfun, stopping)
    if not R > 0:
        raise ValueError("ball factor R must be positive")
    y, eta, t = np.broadcast_arrays(
        np.asarray(y, dtype=float),
        np.asarray(eta, dtype=float),
        np.asarray(t, dtype=float),
    )
    shape = y.shape
    yf, ef, tf = y.ravel(), eta.ravel(), t.ravel()
    if np.any(tf <= 0):
        raise ValueError("t must be positive")
    n, dz, period = grid.n_y, grid.dy, grid.period
    z = grid.y
    lower = stopping.values[:, :-1]
    sample_cells = stopping.sample_cells
    lo, hi = geom.alpha_minus, geom.alpha_plus
    out = np.empty(yf.size)
    chunk = max(1, 8192 // max(1, n // 64))
    for start in range(0, yf.size, chunk):
        sl = slice(start, start + chunk)
        yc, ec, tc = yf[sl], ef[sl], tf[sl]
        diff = np.abs(z[None, :] - yc[:, None])
        dist = np.minimum(diff % period, (-diff) % period)
        ball = dist < (R * tc)[:, None]
        arg = tc[:, None, None] * (ec[:, None, None] - lower[None, :, :])
        active = _active_theta(arg, lo, hi, variant)
        G = _combine_channels(seqfun, active)
        gz = G[:, sample_cells]
        out[sl] = (ball * gz).sum(axis=1) * dz / (2.0 * R * tc)
    return out.reshape(shape)


def maximal_function(g, dz, p=1.0, period=None):
    """Discrete Hardy-Littlewood maximal function on the circle lattice.

    M_p g (y) = max over dyadic radii r of the count-normalized mean of
    |g|^p over {z : |z - y| < r}, raised to 1/p.  Radii are dz 2^j up to
    the first radius covering the half circle, so M_p g >= |g| pointwise
    and M_p of a constant is that constant.
    """
    g = np.asarray(g)
    n = g.size
    if period is None:
        period = n * dz
    p = float(p)
    if not (p >= 1.0 and np.isfinite(p)):
        raise ValueError("maximal exponent p must be finite and >= 1")
    mag = np.abs(g).astype(float) ** p
    offs = dz * np.arange(n)
    dist = np.minimum(offs, period - offs)
    j_top = max(0, int(np.ceil(np.log2(period / (2.0 * dz)))))
    best = np.zeros(n)
    idx = _circ_index(n, "corr")
    for j in range(j_top + 1):
        r = dz * 2.0 ** j
        row = (dist < r).astype(float)
        count = row.sum()
        mean = (row[idx] @ mag) / count
        np.maximum(best, mean, out=best)
    return best ** (1.0 / p)


def cz_decompose(f, x0, s, N, grid):
    """Smooth dyadic decomposition of f around x0 at base scale 5 s.

    Pieces are f times successive differences of the cutoff
    upsilon(u) = expstep(2 - |u|) at scales 5 s 2^{N k}, using the signed
    circle distance to x0.  The pieces sum to f exactly: the last scale is
    at least the circumference, where the cutoff is identically one.
    """
    f = np.asarray(f, dtype=complex)
    n, dz, period = grid.n_y, grid.dy, grid.period
    if f.shape != (n,):
        raise ValueError("boundary data must live on the grid y lattice")
    if not s > 0:
        raise ValueError("base scale must be positive")
    if N < 1 or int(N) != N:
        raise ValueError("scale exponent N must be a positive integer")
    w = (grid.y - x0 + period / 2.0) % period - period / 2.0
    upsilon = lambda u: expstep(2.0 - np.abs(u))
    pieces = []
    prev = np.zeros(n)
    k = 0
    while True:
        sk = 5.0 * s * 2.0 ** (N * k)
        cur = upsilon(w / sk)
        pieces.append(f * (cur - prev))
        prev = cur
        if sk >= period:
            return pieces
        k += 1
