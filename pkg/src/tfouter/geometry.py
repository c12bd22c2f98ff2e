"""Tents, strips, frequency-interval parameters, and membership geometry.

The ambient space is the upper 3-space of points (y, eta, t) with t > 0:
translations y, modulations eta, dilations t.  Tents and strips are the
generating sets of the two outer measures; both carry premeasure s.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GeometryParams",
    "Tent",
    "Strip",
    "TFGrid",
    "classify_point",
    "strip_contains",
    "enlarge_tent",
    "enlargement_contains",
    "q_plus_disjoint",
    "strips_disjoint",
    "tent_inside_strip",
    "tent_region_mask",
    "strip_mask",
]


@dataclass(frozen=True)
class GeometryParams:
    """Frequency intervals and wave-packet constants.

    Theta = (alpha_minus, alpha_plus) is the tent frequency window,
    Theta_int = (beta_minus, beta_plus) its interior part.  b, d, d_prime,
    d_dblprime, eps control the generator construction; decay_N is the
    exponent of the tail weight (1+u^2)^(-N/2); R0 is the admissibility
    threshold for the covering algorithm.
    """

    alpha_minus: float = -1.0
    beta_minus: float = -0.6
    beta_plus: float = 0.6
    alpha_plus: float = 1.0
    d: float = 0.9
    d_prime: float = 1.5
    d_dblprime: float = 2.0
    eps: float = 0.05
    b: float = None
    decay_N: int = 4
    R0: float = None

    def __post_init__(self):
        if self.b is None:
            object.__setattr__(
                self, "b", (self.d_prime - self.d) / (2.0 * (1.0 - 3.0 * self.eps))
            )
        if self.R0 is None:
            object.__setattr__(self, "R0", self.alpha_plus)
        self._validate()

    def _validate(self):
        am, bm, bp, ap = (
            self.alpha_minus,
            self.beta_minus,
            self.beta_plus,
            self.alpha_plus,
        )
        d, dp, dpp, eps, b = self.d, self.d_prime, self.d_dblprime, self.eps, self.b

        def req(cond, name):
            if not cond:
                raise ValueError(f"geometry invariant violated: {name}")

        req(am <= bm < 0.0 < bp <= ap, "alpha- <= beta- < 0 < beta+ <= alpha+")
        req(b > 0 and eps > 0 and d > 0 and dp > 0 and dpp > 0, "positive constants")
        req(-b > bm and b < bp, "[-b, b] inside (beta-, beta+)")
        req(bm >= -dp and bp <= dp, "(beta-, beta+) inside [-d', d']")
        # +-[d-eps, d+eps] must avoid the interior window but sit inside Theta
        req(d - eps > bp and d + eps < ap, "[d-eps, d+eps] inside Theta minus interior")
        req(dpp > max(dp, d), "d'' > max(d', d)")
        req(3.0 * d > dp, "3d > d'")
        req((1.0 + eps) * b < bp, "(1+eps) b < beta+")
        req(bp < d - eps, "beta+ < d - eps")
        if self.decay_N < 1 or int(self.decay_N) != self.decay_N:
            raise ValueError("geometry invariant violated: decay_N positive integer")
        req(self.R0 >= ap, "R0 >= alpha+")
        req(am <= -ap / self.R0, "alpha- <= -alpha+/R0")

    @property
    def theta(self):
        return (self.alpha_minus, self.alpha_plus)

    @property
    def theta_interior(self):
        return (self.beta_minus, self.beta_plus)


@dataclass(frozen=True, order=True)
class Tent:
    """Generating set T(x, xi, s): |y-x| < s, t < s, t(eta-xi) in Theta."""

    x: float
    xi: float
    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("tent scale must be positive")

    @property
    def premeasure(self):
        return self.s


@dataclass(frozen=True, order=True)
class Strip:
    """Generating set D(x, s): |y-x| < s, t < s, eta unconstrained."""

    x: float
    s: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("strip scale must be positive")

    @property
    def premeasure(self):
        return self.s


class TFGrid:
    """Quadrature grid on the upper 3-space.

    y uniform with left-edge nodes (coincides with the periodic z lattice),
    eta uniform cell centers, t logarithmic cell midpoints.  The node weight
    at t-level k is dy * deta * t_k * dlogt, a midpoint rule for dy deta dt.
    """

    def __init__(self, y_range, n_y, eta_range, n_eta, t_range, n_t):
        y0, y1 = map(float, y_range)
        e0, e1 = map(float, eta_range)
        t0, t1 = map(float, t_range)
        if not (y1 > y0 and e1 > e0 and t1 > t0 > 0):
            raise ValueError("grid ranges must be increasing with t > 0")
        if min(n_y, n_eta, n_t) < 1:
            raise ValueError("grid counts must be positive")
        self.y_range, self.eta_range, self.t_range = (y0, y1), (e0, e1), (t0, t1)
        self.n_y, self.n_eta, self.n_t = int(n_y), int(n_eta), int(n_t)
        self.dy = (y1 - y0) / n_y
        self.deta = (e1 - e0) / n_eta
        self.dlogt = np.log(t1 / t0) / n_t
        self.y = y0 + self.dy * np.arange(n_y)
        self.eta = e0 + self.deta * (np.arange(n_eta) + 0.5)
        self.t = t0 * np.exp(self.dlogt * (np.arange(n_t) + 0.5))

    @property
    def period(self):
        """Circumference of the periodic y/z axis."""
        return self.y_range[1] - self.y_range[0]

    @property
    def slice_weights(self):
        """Node quadrature weight per t-level, shape (n_t,)."""
        return self.dy * self.deta * self.t * self.dlogt

    @property
    def box_volume(self):
        (y0, y1), (e0, e1), (t0, t1) = self.y_range, self.eta_range, self.t_range
        return (y1 - y0) * (e1 - e0) * (t1 - t0)

    @property
    def shape(self):
        return (self.n_t, self.n_eta, self.n_y)

    def refine(self, factor=2):
        """Same box with every axis count multiplied by factor."""
        return TFGrid(
            self.y_range,
            self.n_y * factor,
            self.eta_range,
            self.n_eta * factor,
            self.t_range,
            self.n_t * factor,
        )


def _freq_window(val, lo, hi):
    return (val > lo) & (val < hi)


def classify_point(tent, point, g):
    """Classify one (y, eta, t) point against a tent: interior/exterior/outside.

    All inequalities strict, exactly as in the tent definition; the exterior
    label means inside the tent with t(eta-xi) outside the interior window.
    """
    y, eta, t = point
    if not (abs(y - tent.x) < tent.s and t < tent.s):
        return "outside"
    v = t * (eta - tent.xi)
    if not _freq_window(v, g.alpha_minus, g.alpha_plus):
        return "outside"
    if _freq_window(v, g.beta_minus, g.beta_plus):
        return "interior"
    return "exterior"


def strip_contains(strip, point):
    """True iff (y, eta, t) lies in the strip: |y-x| < s and t < s (strict)."""
    y, _eta, t = point
    return bool(abs(y - strip.x) < strip.s and t < strip.s)


def enlarge_tent(tent, R, g):
    """Cover of the R-enlargement by O(R^2) tents at scale R s.

    The R-enlargement is the union of T(x, xi', R s) over |xi' - xi| < R/s.
    Frequency centers are spaced (alpha+ - alpha-)/(2 R s) apart so that
    consecutive windows overlap by at least half at every height t < R s;
    total premeasure is <= C R^3 s with C depending only on Theta.
    R = 1 returns [tent].
    """
    if R < 1:
        raise ValueError("enlargement factor must be >= 1")
    if R == 1:
        return [tent]
    x, xi, s = tent.x, tent.xi, tent.s
    step = (g.alpha_plus - g.alpha_minus) / (2.0 * R * s)
    half = R / s + step
    n_side = int(np.ceil(half / step))
    centers = xi + step * np.arange(-n_side, n_side + 1)
    return [Tent(x, c, R * s) for c in centers]


def enlargement_contains(tent, R, y, eta, t, g):
    """Membership in the R-enlargement of a tent (vectorized over points)."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    t = np.asarray(t, dtype=float)
    x, xi, s = tent.x, tent.xi, tent.s
    v = t * (eta - xi)
    pad = R * t / s
    return (
        (np.abs(y - x) < R * s)
        & (t < R * s)
        & (v > g.alpha_minus - pad)
        & (v < g.alpha_plus + pad)
    )


def q_plus_disjoint(t1, t2, Q, g):
    """Q+-disjointness of two tents.

    True iff the open balls B_{Q s}(x) are disjoint or the half-open
    frequency intervals {c : s(xi - c) in Theta+} = (xi - alpha+/s, xi]
    are disjoint, with Theta+ = Theta intersected with [0, inf).
    """
    if not Q > 0:
        raise ValueError("Q must be positive")
    if abs(t1.x - t2.x) >= Q * (t1.s + t2.s):
        return True
    a1, b1 = t1.xi - g.alpha_plus / t1.s, t1.xi
    a2, b2 = t2.xi - g.alpha_plus / t2.s, t2.xi
    return bool(b1 <= a2 or b2 <= a1)


def strips_disjoint(d1, d2):
    """True iff the open base intervals of two strips do not meet."""
    return bool(abs(d1.x - d2.x) >= d1.s + d2.s)


def tent_inside_strip(tent, strip, factor=3.0):
    """True iff the tent base ball and scale fit inside the widened strip.

    The widened strip has the same center and factor times the radius;
    containment means |x - zeta| + s <= factor tau and s <= factor tau.
    """
    return bool(
        abs(tent.x - strip.x) + tent.s <= factor * strip.s
        and tent.s <= factor * strip.s
    )


def tent_region_mask(tent, grid, g, region="full"):
    """Boolean mask of grid nodes inside a tent region, shape (n_t, n_eta, n_y).

    region is one of full/interior/exterior; all boundary tests strict.
    """
    x, xi, s = tent.x, tent.xi, tent.s
    ymask = np.abs(grid.y - x) < s
    tmask = grid.t < s
    v = grid.t[:, None] * (grid.eta[None, :] - xi)
    full = _freq_window(v, g.alpha_minus, g.alpha_plus)
    if region == "full":
        fmask = full
    elif region == "interior":
        fmask = _freq_window(v, g.beta_minus, g.beta_plus)
    elif region == "exterior":
        fmask = full & ~_freq_window(v, g.beta_minus, g.beta_plus)
    else:
        raise ValueError(f"unknown tent region: {region}")
    return tmask[:, None, None] & fmask[:, :, None] & ymask[None, None, :]


def strip_mask(strip, grid):
    """Boolean mask of grid nodes inside a strip, shape (n_t, n_eta, n_y)."""
    ymask = np.abs(grid.y - strip.x) < strip.s
    tmask = grid.t < strip.s
    ones = np.ones(grid.n_eta, dtype=bool)
    return tmask[:, None, None] & ones[None, :, None] & ymask[None, None, :]
