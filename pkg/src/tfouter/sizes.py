"""Local sizes of fields on tents and the node-anchored candidate family.

A size assigns to each tent a seminorm of the field restricted to one of
the tent regions (full, interior, exterior).  Composite sizes are sums of
primitive components.  Two evaluation paths are provided: a generic one
for arbitrary tents through region masks, and a vectorized one that
computes the sizes of every node-anchored candidate tent at once using
separable box aggregates (prefix sums, two-pass sliding maxima).
"""

import numpy as np

from .geometry import Tent, tent_region_mask

__all__ = [
    "SizeSpec",
    "local_size",
    "generated_size",
    "candidate_scales",
    "tent_at",
    "all_local_sizes",
    "restrict_field",
]

# primitive components (aggregate, region); composites sum their components
_COMPONENTS = {
    "S_inf": (("sup", "full"),),
    "S_1_interior": (("l1", "interior"),),
    "S_1_plain": (("l1", "full"),),
    "S_2_full": (("l2", "full"),),
    "S_2_exterior": (("l2", "exterior"),),
    "S_energy": (("l2", "exterior"), ("sup", "full")),
    "S_mass": (("l2", "full"), ("l1", "interior")),
}

_QUASI_TRIANGLE = {
    "S_inf": 1.0,
    "S_1_interior": 1.0,
    "S_1_plain": 1.0,
    "S_2_full": 2.0,
    "S_2_exterior": 2.0,
    "S_energy": 2.0,
    "S_mass": 2.0,
}


class SizeSpec:
    """Named size; kind is one of the keys of SizeSpec.kinds()."""

    def __init__(self, kind):
        if kind not in _COMPONENTS:
            raise ValueError(f"unknown size kind: {kind}")
        self.kind = kind

    @staticmethod
    def kinds():
        return tuple(_COMPONENTS)

    @property
    def components(self):
        return _COMPONENTS[self.kind]

    @property
    def quasi_triangle_constant(self):
        return _QUASI_TRIANGLE[self.kind]

    def __repr__(self):
        return f"SizeSpec({self.kind!r})"


def local_size(field, tent, spec, geom):
    """Size of the field on one tent (generic path, any tent)."""
    total = 0.0
    for comp in spec.components:
        total += _component_value(field, tent, comp, geom)
    return total


def _component_value(field, tent, comp, geom):
    agg, region = comp
    mask = tent_region_mask(tent, field.grid, geom, region)
    mag = np.abs(field.values)
    if agg == "sup":
        sel = mag[mask]
        return float(sel.max()) if sel.size else 0.0
    w = field.grid.slice_weights[:, None, None]
    if agg == "l1":
        return float((w * mag * mask).sum() / tent.s)
    return float(np.sqrt((w * mag**2 * mask).sum()) / np.sqrt(tent.s))


def generated_size(field, tents, spec, geom):
    """Sup of the local sizes over a family of tents (0 for an empty family)."""
    best = 0.0
    for tent in tents:
        best = max(best, local_size(field, tent, spec, geom))
    return best


def candidate_scales(grid):
    """Anchor scale per t level: the upper edge of the logarithmic t cell.

    With this choice every grid node lies inside the candidate tent
    anchored at it, which makes greedy covers terminate.
    """
    t0 = grid.t_range[0]
    return t0 * np.exp(grid.dlogt * (np.arange(grid.n_t) + 1.0))


def tent_at(grid, k, e, i):
    """Candidate tent anchored at grid node (k, e, i)."""
    s = float(candidate_scales(grid)[k])
    return Tent(float(grid.y[i]), float(grid.eta[e]), s)


def restrict_field(field, mask):
    """Field multiplied by a boolean node mask (same class, same grid)."""
    return type(field)(field.grid, field.values * mask, label=field.label)


def _box_sum_last(Q, m_lo, m_hi):
    """Sum of Q over index windows [i + m_lo, i + m_hi] along the last axis.

    Windows are clipped to the array; empty windows give 0.
    """
    n = Q.shape[-1]
    if m_lo > m_hi:
        return np.zeros_like(Q)
    cs = np.concatenate(
        [np.zeros(Q.shape[:-1] + (1,)), np.cumsum(Q, axis=-1)], axis=-1
    )
    i = np.arange(n)
    lo = np.clip(i + m_lo, 0, n)
    hi = np.clip(i + m_hi + 1, 0, n)
    hi = np.maximum(hi, lo)
    return cs[..., hi] - cs[..., lo]


def _window_max_last(Q, L):
    """Max of Q over index windows [u, u + L - 1] along the last axis."""
    n = Q.shape[-1]
    nb = -(-n // L)
    pad = nb * L - n
    if pad:
        fill = np.full(Q.shape[:-1] + (pad,), -np.inf)
        Q = np.concatenate([Q, fill], axis=-1)
    blocks = Q.reshape(Q.shape[:-1] + (nb, L))
    fwd = np.maximum.accumulate(blocks, axis=-1).reshape(Q.shape[:-1] + (nb * L,))
    rev = np.flip(
        np.maximum.accumulate(np.flip(blocks, axis=-1), axis=-1), axis=-1
    ).reshape(Q.shape[:-1] + (nb * L,))
    u = np.arange(n - L + 1)
    return np.maximum(rev[..., u], fwd[..., u + L - 1])


def _box_max_last(Q, m_lo, m_hi):
    """Max of Q over windows [i + m_lo, i + m_hi] along the last axis.

    Entries are assumed nonnegative; clipped and empty windows give 0.
    """
    n = Q.shape[-1]
    if m_lo > m_hi:
        return np.zeros_like(Q)
    L = m_hi - m_lo + 1
    pad_lo = max(0, -m_lo)
    pad_hi = max(0, m_hi)
    Zp = np.concatenate(
        [
            np.zeros(Q.shape[:-1] + (pad_lo,)),
            Q,
            np.zeros(Q.shape[:-1] + (pad_hi,)),
        ],
        axis=-1,
    )
    full = _window_max_last(Zp, L)
    start = m_lo + pad_lo
    return full[..., start : start + n]


def _eta_offsets(t, deta, lo, hi):
    """Integer eta offsets m with t deta m strictly inside (lo, hi)."""
    x = t * deta
    m_lo = int(np.floor(lo / x)) + 1
    m_hi = int(np.ceil(hi / x)) - 1
    return m_lo, m_hi


def _eta_aggregate(Q, t, deta, geom, region, agg):
    """Frequency-window aggregate along the eta axis (axis 0 of Q)."""
    op = _box_max_last if agg == "sup" else _box_sum_last
    Qt = np.swapaxes(Q, 0, 1)
    f_lo, f_hi = _eta_offsets(t, deta, geom.alpha_minus, geom.alpha_plus)
    if region == "full":
        out = op(Qt, f_lo, f_hi)
    elif region == "interior":
        i_lo, i_hi = _eta_offsets(t, deta, geom.beta_minus, geom.beta_plus)
        out = op(Qt, i_lo, i_hi)
    elif region == "exterior":
        i_lo, i_hi = _eta_offsets(t, deta, geom.beta_minus, geom.beta_plus)
        lo_part = op(Qt, f_lo, i_lo - 1)
        hi_part = op(Qt, i_hi + 1, f_hi)
        out = np.maximum(lo_part, hi_part) if agg == "sup" else lo_part + hi_part
    else:
        raise ValueError(f"unknown tent region: {region}")
    return np.swapaxes(out, 0, 1)


def all_local_sizes(field, spec, geom):
    """Local sizes of every node-anchored candidate tent, shape (n_t, n_eta, n_y).

    The candidate at node (k, e, i) is the tent centered at
    (y_i, eta_e) with scale candidate_scales(grid)[k]; node levels
    kp <= k lie strictly below the scale, frequency and space windows are
    strict, and sums are separable box aggregates per level.
    """
    grid = field.grid
    scales = candidate_scales(grid)
    total = np.zeros(grid.shape)
    for comp in spec.components:
        total += _component_all(field, comp, geom, scales)
    return total


def _component_all(field, comp, geom, scales):
    agg, region = comp
    grid = field.grid
    n_t, n_eta, n_y = grid.shape
    mag = np.abs(field.values)
    # skip empty levels: restricted fields are often sparse in t
    level_nonzero = mag.reshape(n_t, -1).any(axis=1)
    if not level_nonzero.any():
        return np.zeros(grid.shape)
    if agg == "l2":
        Q = grid.slice_weights[:, None, None] * mag**2
    elif agg == "l1":
        Q = grid.slice_weights[:, None, None] * mag
    else:
        Q = mag
    out = np.empty(grid.shape)
    acc = np.zeros((n_eta, n_y))
    seen = False
    for k in range(n_t):
        if level_nonzero[k]:
            level = _eta_aggregate(Q[k], grid.t[k], grid.deta, geom, region, agg)
            if agg == "sup":
                acc = np.maximum(acc, level)
            else:
                acc = acc + level
            seen = True
        if not seen:
            out[k] = 0.0
            continue
        m = int(np.ceil(scales[k] / grid.dy)) - 1
        if agg == "sup":
            out[k] = _box_max_last(acc, -m, m)
        else:
            out[k] = _box_sum_last(acc, -m, m)
    if agg == "l2":
        return np.sqrt(out) / np.sqrt(scales)[:, None, None]
    if agg == "l1":
        return out / scales[:, None, None]
    return out
