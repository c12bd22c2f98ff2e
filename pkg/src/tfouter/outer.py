"""Outer measures on the upper 3-space and the algorithms built on them.

Premeasures live on tents and strips; superlevel measures of a field are
computed by a greedy cover whose selection order does not depend on the
level: each step removes the candidate with the largest local size of the
current residual, so one trajectory of (residual size, spent premeasure)
pairs serves every level at once.  On top of this sit the outer L^p
norms, the iterated strip norms, an exact reference solver for small
candidate families, the covering algorithm for superlevel sets of the
ball maximal embedding, projection of channel data onto strips, and the
Lipschitz stopping-time construction.
"""

import heapq
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .embeddings import (
    StoppingSequence,
    SequenceFunction,
    _active_theta,
    embed_aux_ball,
)
from .geometry import (
    Tent,
    Strip,
    enlargement_contains,
    strip_mask,
    tent_inside_strip,
    tent_region_mask,
)
from .sizes import all_local_sizes, candidate_scales, local_size, tent_at

__all__ = [
    "GreedyTrajectory",
    "NormReport",
    "CoverResult",
    "StripProjection",
    "ScaleProfile",
    "greedy_trajectory",
    "superlevel_measure",
    "outer_lp",
    "exact_superlevel_measures",
    "exact_outer_lp",
    "iter_lp_lq",
    "cover_superlevel",
    "cover_superlevel_aux",
    "mass_project",
    "lipschitz_extend",
    "stopping_density",
]


class _FieldView:
    """Minimal field wrapper for residuals inside the greedy loops."""

    __slots__ = ("grid", "values", "label")

    def __init__(self, grid, values, label=""):
        self.grid = grid
        self.values = values
        self.label = label


@dataclass
class GreedyTrajectory:
    """Residual sizes and cumulative premeasures along a greedy cover.

    sizes[j] is the residual size before the j-th selection and
    premeasures[j] the premeasure spent so far; sizes are nonincreasing
    because removing covered nodes can only shrink every local size.
    """

    sizes: np.ndarray
    premeasures: np.ndarray
    selections: list

    def measure_at(self, lam):
        """Premeasure of the greedy cover at level lam (first size <= lam)."""
        hit = np.flatnonzero(self.sizes <= lam)
        if hit.size == 0:
            raise ValueError("trajectory was not run deep enough for this level")
        return float(self.premeasures[hit[0]]), int(hit[0])


def _argmax_node(sizes):
    """Largest entry of the candidate size array, ties by (-s, x, xi)."""
    smax = sizes.max()
    k, e, i = np.unravel_index(np.argmax(sizes), sizes.shape)
    ties = np.argwhere(sizes == smax)
    if ties.shape[0] > 1:
        order = np.lexsort((ties[:, 1], ties[:, 2], -ties[:, 0]))
        k, e, i = ties[order[0]]
    return float(smax), int(k), int(e), int(i)


def greedy_trajectory(field, spec, geom, lam_stop=0.0, candidates=None,
                      max_steps=None):
    """Greedy cover trajectory of a field down to residual size lam_stop.

    candidates None uses the node-anchored family with the vectorized
    size sweep; a list of tents uses the generic path.  Selection removes
    the full tent region from the residual.
    """
    grid = field.grid
    values = np.array(field.values, dtype=complex, copy=True)
    view = _FieldView(grid, values)
    sizes_log, pre_log, selections = [], [], []
    cum = 0.0
    if max_steps is None:
        max_steps = values.size + 1
    if candidates is not None:
        cand_masks = [tent_region_mask(T, grid, geom, "full") for T in candidates]
    for _ in range(max_steps):
        if candidates is None:
            allv = all_local_sizes(view, spec, geom)
            smax, k, e, i = _argmax_node(allv)
            chosen = tent_at(grid, k, e, i) if smax > lam_stop else None
            chosen_mask = None
        else:
            smax, chosen, chosen_mask = 0.0, None, None
            for T, m in zip(candidates, cand_masks):
                v = local_size(view, T, spec, geom)
                better = v > smax
                if v == smax and chosen is not None and smax > 0:
                    better = (-T.s, T.x, T.xi) < (-chosen.s, chosen.x, chosen.xi)
                if better:
                    smax, chosen, chosen_mask = v, T, m
            if smax <= lam_stop:
                chosen = None
        sizes_log.append(smax)
        pre_log.append(cum)
        if chosen is None:
            break
        if chosen_mask is None:
            chosen_mask = tent_region_mask(chosen, grid, geom, "full")
        selections.append(chosen)
        cum += chosen.premeasure
        values[chosen_mask] = 0.0
    else:
        raise RuntimeError("greedy cover failed to terminate")
    return GreedyTrajectory(
        np.asarray(sizes_log), np.asarray(pre_log), selections
    )


def superlevel_measure(field, lam, spec, geom, candidates=None):
    """Greedy outer measure of the superlevel set at one level."""
    traj = greedy_trajectory(field, spec, geom, lam_stop=lam, candidates=candidates)
    mu, _steps = traj.measure_at(lam)
    return mu


@dataclass
class NormReport:
    """Level ladder backing an outer L^p value, with CSV/JSON output."""

    kind: str
    p: float
    strong: float
    weak: float
    lambdas: np.ndarray
    measures: np.ndarray
    cover_sizes: np.ndarray
    cumulative: np.ndarray

    def to_csv(self, path):
        meta = {
            "kind": self.kind,
            "p": self.p,
            "strong": self.strong,
            "weak": self.weak,
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            fh.write("lambda,measure,cover_size,cumulative\n")
            for j in range(self.lambdas.size):
                fh.write(
                    f"{float(self.lambdas[j])!r},{float(self.measures[j])!r},"
                    f"{int(self.cover_sizes[j])},{float(self.cumulative[j])!r}\n"
                )

    def to_json(self, path):
        payload = {
            "kind": self.kind,
            "p": self.p,
            "strong": self.strong,
            "weak": self.weak,
            "lambda": [float(v) for v in self.lambdas],
            "measure": [float(v) for v in self.measures],
            "cover_size": [int(v) for v in self.cover_sizes],
            "cumulative": [float(v) for v in self.cumulative],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")


def _ladder(smax, n_ladder):
    """Geometric midpoint level ladder spanning [smax 2^-n, smax]."""
    j = np.arange(n_ladder)
    return smax * 2.0 ** (-(j + 0.5))


def _ladder_norms(kind, p, lambdas, measures, steps):
    """Strong and weak norms from a level ladder via the layer-cake rule."""
    terms = p * lambdas**p * measures * np.log(2.0)
    cumulative = np.cumsum(terms) ** (1.0 / p)
    strong = float(cumulative[-1]) if lambdas.size else 0.0
    weak = float(np.max(lambdas * measures ** (1.0 / p))) if lambdas.size else 0.0
    return NormReport(
        kind, float(p), strong, weak, lambdas, measures,
        np.asarray(steps, dtype=int), cumulative,
    )


def outer_lp(field, p, spec, geom, candidates=None, n_ladder=20):
    """Outer L^p norm of a field over the tent outer measure.

    Returns (strong norm, NormReport).  p = inf returns the generated
    size with a trivial report.  The level ladder is geometric with ratio
    2 over [smax 2^-n_ladder, smax], read off one greedy trajectory.
    """
    p = float(p)
    if not p > 0:
        raise ValueError("outer exponent p must be positive")
    grid = field.grid
    if candidates is None:
        view = _FieldView(grid, np.asarray(field.values, dtype=complex))
        smax = float(all_local_sizes(view, spec, geom).max())
    else:
        smax = max(
            (local_size(field, T, spec, geom) for T in candidates), default=0.0
        )
    empty = NormReport(
        spec.kind, p, 0.0, 0.0, np.empty(0), np.empty(0),
        np.empty(0, dtype=int), np.empty(0),
    )
    if smax == 0.0:
        if np.isinf(p):
            return 0.0, empty
        return 0.0, empty
    if np.isinf(p):
        rep = NormReport(
            spec.kind, p, smax, smax, np.asarray([smax]), np.asarray([0.0]),
            np.asarray([0], dtype=int), np.asarray([smax]),
        )
        return smax, rep
    lambdas = _ladder(smax, n_ladder)
    traj = greedy_trajectory(
        field, spec, geom, lam_stop=lambdas[-1], candidates=candidates
    )
    measures, steps = [], []
    for lam in lambdas:
        mu, nsel = traj.measure_at(lam)
        measures.append(mu)
        steps.append(nsel)
    report = _ladder_norms(spec.kind, p, lambdas, np.asarray(measures), steps)
    return report.strong, report


def exact_superlevel_measures(field, lams, spec, geom, candidates):
    """Exact superlevel measures by subset enumeration (reference solver).

    Enumerates all subsets of the candidate family, memoizes the
    level-independent off-cover size of each subset, and minimizes the
    premeasure among subsets whose off-cover size is below each level.
    Limited to 16 candidates.
    """
    n = len(candidates)
    if n > 16:
        raise ValueError("exact solver is limited to 16 candidates")
    grid = field.grid
    masks = [tent_region_mask(T, grid, geom, "full") for T in candidates]
    pres = np.array([T.premeasure for T in candidates])
    union = np.zeros((1 << n,) + grid.shape, dtype=bool) if n else None
    sizes_off = np.empty(1 << n)
    premeasures = np.empty(1 << n)
    for code in range(1 << n):
        if code:
            low = code & -code
            union[code] = union[code ^ low] | masks[low.bit_length() - 1]
        rest = _FieldView(grid, field.values * ~union[code])
        sizes_off[code] = max(
            local_size(rest, T, spec, geom) for T in candidates
        )
        bits = [b for b in range(n) if code >> b & 1]
        premeasures[code] = pres[bits].sum() if bits else 0.0
    out = np.empty(len(lams))
    for j, lam in enumerate(np.asarray(lams, dtype=float)):
        ok = sizes_off <= lam
        if not np.any(ok):
            raise ValueError("no subset covers down to this level")
        out[j] = premeasures[ok].min()
    return out


def exact_outer_lp(field, p, spec, geom, candidates, n_ladder=20):
    """Outer L^p norm with exact superlevel measures (same ladder rule)."""
    p = float(p)
    smax = max((local_size(field, T, spec, geom) for T in candidates), default=0.0)
    if smax == 0.0:
        return 0.0, None
    if np.isinf(p):
        return smax, None
    lambdas = _ladder(smax, n_ladder)
    measures = exact_superlevel_measures(field, lambdas, spec, geom, candidates)
    report = _ladder_norms(
        spec.kind, p, lambdas, measures, np.zeros_like(lambdas, dtype=int)
    )
    return report.strong, report


def default_strips(grid):
    """Node-anchored strip family: every y node at every candidate scale."""
    scales = candidate_scales(grid)
    return [
        Strip(float(grid.y[i]), float(scales[k]))
        for k in range(grid.n_t)
        for i in range(grid.n_y)
    ]


def iter_lp_lq(field, p, q, spec, geom, strips=None, n_ladder=20,
               inner_ladder=20, inner_weak=False):
    """Iterated outer norm: L^p over strips of the strip-local L^q size.

    The strip-local size of G on D is the outer L^q norm of G restricted
    to D, normalized by premeasure(D)^(1/q); q = inf drops the
    normalization, and inner_weak swaps in the weak L^q value (the inner
    endpoint norm).  The outer level runs the same level-independent
    greedy, lazily re-evaluating strip values only when an overlapping
    strip was selected.
    """
    p, q = float(p), float(q)
    grid = field.grid
    if strips is None:
        strips = default_strips(grid)
    if not strips:
        raise ValueError("iterated norm needs a nonempty strip family")
    masks = [strip_mask(D, grid) for D in strips]
    values = np.array(field.values, dtype=complex, copy=True)

    def strip_value(D, mask):
        sub = _FieldView(grid, values * mask)
        if np.isinf(q):
            return float(all_local_sizes(sub, spec, geom).max())
        val, rep = outer_lp(sub, q, spec, geom, n_ladder=inner_ladder)
        if inner_weak:
            val = rep.weak
        return val / D.premeasure ** (1.0 / q)

    version = [0] * len(strips)
    heap = []
    for idx, (D, m) in enumerate(zip(strips, masks)):
        v = strip_value(D, m)
        heapq.heappush(heap, (-v, -D.s, D.x, idx, 0))
    sizes_log, pre_log, selections = [], [], []
    cum = 0.0
    lam_stop = None
    lambdas = None
    while heap:
        negv, negs, x, idx, ver = heapq.heappop(heap)
        if ver != version[idx]:
            v = strip_value(strips[idx], masks[idx])
            heapq.heappush(heap, (-v, negs, x, idx, version[idx]))
            continue
        smax = -negv
        if lam_stop is None:
            # first fresh maximum fixes the ladder and the stopping level
            if smax == 0.0 or np.isinf(p):
                top = smax
                rep = NormReport(
                    spec.kind, p, top, top,
                    np.asarray([top] if top else []),
                    np.asarray([0.0] if top else []),
                    np.asarray([0] if top else [], dtype=int),
                    np.asarray([top] if top else []),
                )
                return top, rep
            lambdas = _ladder(smax, n_ladder)
            lam_stop = lambdas[-1]
        sizes_log.append(smax)
        pre_log.append(cum)
        if smax <= lam_stop:
            break
        D = strips[idx]
        selections.append(D)
        cum += D.premeasure
        values[masks[idx]] = 0.0
        for jdx, Dj in enumerate(strips):
            if abs(Dj.x - D.x) < Dj.s + D.s:
                version[jdx] += 1
        v = strip_value(D, masks[idx])
        heapq.heappush(heap, (-v, -D.s, D.x, idx, version[idx]))
    traj = GreedyTrajectory(np.asarray(sizes_log), np.asarray(pre_log), selections)
    measures, steps = [], []
    for lam in lambdas:
        mu, nsel = traj.measure_at(lam)
        measures.append(mu)
        steps.append(nsel)
    report = _ladder_norms(spec.kind, p, lambdas, np.asarray(measures), steps)
    return report.strong, report


@dataclass
class CoverResult:
    """Output of the superlevel covering pass.

    selected holds indices into points; cover_of[i] is the index of the
    selected point whose tent accounts for point i (itself if selected).
    """

    points: np.ndarray
    selected: list
    cover_of: np.ndarray
    R: float
    Q: float

    def tents(self):
        return [
            Tent(float(p[0]), float(p[1]), float(p[2]))
            for p in self.points[self.selected]
        ]


def cover_superlevel(points, R, Q, geom):
    """Greedy cover of a finite set of tent tops by enlarged tents.

    Points are rows (y, eta, t), each standing for the tent T(y, eta, t).
    Iterating in order of decreasing scale (ties by y then eta), the next
    point not yet inside a 3Q^2-enlargement of a selected tent is
    selected; largest-remaining-scale points are maximal for the
    domination relation, and the selected tents come out pairwise
    Q+-disjoint.  Preconditions: Q > R > R0.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("points must be rows (y, eta, t)")
    if not (Q > R > geom.R0):
        raise ValueError("covering preconditions require Q > R > R0")
    y, eta, t = points[:, 0], points[:, 1], points[:, 2]
    if np.any(t <= 0):
        raise ValueError("tent scales must be positive")
    order = np.lexsort((eta, y, -t))
    n = points.shape[0]
    covered = np.zeros(n, dtype=bool)
    cover_of = np.full(n, -1, dtype=int)
    selected = []
    for idx in order:
        if covered[idx]:
            continue
        tent = Tent(float(y[idx]), float(eta[idx]), float(t[idx]))
        selected.append(int(idx))
        inside = enlargement_contains(tent, 3.0 * Q * Q, y, eta, t, geom)
        fresh = inside & ~covered
        covered[fresh] = True
        cover_of[fresh] = idx
        if not covered[idx]:
            raise RuntimeError("selected top escaped its own enlargement")
    return CoverResult(points, selected, cover_of, float(R), float(Q))


def cover_superlevel_aux(seqfun, stopping, lam, R, Q, grid, geom):
    """Cover of the discrete superlevel set of the one-sided ball embedding.

    Evaluates the plus-window ball embedding at every grid node, collects
    the nodes with value >= lam as tent tops, and runs the greedy
    enlargement cover on them.
    """
    tt, ee, yy = np.meshgrid(grid.t, grid.eta, grid.y, indexing="ij")
    vals = embed_aux_ball(
        seqfun, stopping, R, yy, ee, tt, grid, geom, variant="plus"
    )
    hit = vals >= lam
    points = np.column_stack([yy[hit], ee[hit], tt[hit]])
    return cover_superlevel(points, R, Q, geom)


@dataclass
class StripProjection:
    """Channel data projected onto one strip.

    members are indices of the input tents attached to the strip, sorted
    by center frequency; stopping/seqfun carry the projected boundaries
    (sorted tent frequencies, upper sentinel) and strip-averaged
    amplitudes, constant on the strip and zero outside it.
    """

    strip: Strip
    members: list
    stopping: StoppingSequence
    seqfun: SequenceFunction


def _cells_from_mask(mask):
    """Edges of the maximal constant runs of a boolean lattice mask."""
    n = mask.size
    change = np.flatnonzero(np.diff(mask.astype(np.int8))) + 1
    edges = np.concatenate([[0], change, [n]])
    return edges


def mass_project(tents, seqfun, stopping, strips, R, grid, geom):
    """Project channel data onto strips through the one-sided window.

    A tent T_l belongs to strip D_m iff the circle distance from x_l to
    zeta_m is below R s_l + tau_m.  Its projected amplitude on the strip
    is the count-normalized strip average of the inner l^{r'} norm of
    the channels active in Theta+ = [0, alpha+) at scale s_l against the
    lower boundaries; its projected boundary is xi_l.  Boundaries are
    sorted per strip and closed with an upper sentinel.

    Requires R > 1, strips pairwise disjoint, tents pairwise Q+-disjoint
    for some Q > 2R, and no tent contained in a tripled strip; each
    violation raises ValueError naming the offending precondition.  When
    additionally every member strip is shorter than a third of its
    tent's scale, the projected ball maximum at factor 2R dominates half
    of the original one at factor R at every tent top (the doubled ball
    halves the normalization, so the clean ratio can approach 1/2).
    """
    z = grid.y
    period = grid.period

    def circ(a, b):
        d = abs(a - b)
        return min(d % period, (-d) % period)

    if not R > 1.0:
        raise ValueError("ball factor R must exceed 1")
    for i, Da in enumerate(strips):
        for Db in strips[i + 1 :]:
            if circ(Da.x, Db.x) < Da.s + Db.s:
                raise ValueError("strips must be pairwise disjoint")
    for i, Ta in enumerate(tents):
        for Tb in tents[i + 1 :]:
            far = circ(Ta.x, Tb.x) > 2.0 * R * (Ta.s + Tb.s)
            sep = (
                Ta.xi <= Tb.xi - geom.alpha_plus / Tb.s
                or Tb.xi <= Ta.xi - geom.alpha_plus / Ta.s
            )
            if not (far or sep):
                raise ValueError(
                    "tents must be pairwise Q+-disjoint for some Q > 2R"
                )
    for T in tents:
        for D in strips:
            if tent_inside_strip(T, D):
                raise ValueError("tent contained in a tripled strip")

    lower = stopping.values[:, :-1]
    sample_cells = stopping.sample_cells
    mags = np.abs(seqfun.values)
    rp = seqfun.r_prime
    out = []
    for D in strips:
        members = [
            l
            for l, T in enumerate(tents)
            if circ(T.x, D.x) < R * T.s + D.s
        ]
        diff = np.abs(z - D.x)
        smask = np.minimum(diff % period, (-diff) % period) < D.s
        count = int(smask.sum())
        members.sort(key=lambda l: (tents[l].xi, tents[l].s, tents[l].x))
        edges = _cells_from_mask(smask)
        in_strip = smask[edges[:-1]]
        n_cells = edges.size - 1
        if not members or count == 0:
            strip_stop = StoppingSequence(
                edges, np.full((n_cells, 1), np.inf)
            )
            strip_fun = SequenceFunction(np.zeros((n_cells, 0)), rp)
            out.append(StripProjection(D, members, strip_stop, strip_fun))
            continue
        cs = sample_cells[smask]
        low_s = lower[cs]
        mag_s = mags[cs]
        atil = np.empty(len(members))
        for j, l in enumerate(members):
            T = tents[l]
            arg = T.s * (T.xi - low_s)
            act = _active_theta(arg, geom.alpha_minus, geom.alpha_plus, "plus")
            sel = np.where(act, mag_s, 0.0)
            if np.isinf(rp):
                inner = sel.max(axis=1) if sel.shape[1] else np.zeros(count)
            else:
                inner = (sel**rp).sum(axis=1) ** (1.0 / rp)
            atil[j] = inner.mean()
        bounds = np.array([tents[l].xi for l in members] + [np.inf])
        values = np.tile(bounds, (n_cells, 1))
        amps = np.where(in_strip[:, None], atil[None, :], 0.0)
        strip_stop = StoppingSequence(edges, values)
        strip_fun = SequenceFunction(amps.astype(complex), rp)
        out.append(StripProjection(D, members, strip_stop, strip_fun))
    return out


@dataclass
class ScaleProfile:
    """Positive scale profile sigma on a uniform line lattice."""

    x: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.x.ndim != 1 or self.x.shape != self.sigma.shape:
            raise ValueError("profile needs matching 1-d lattices")
        if self.x.size < 2:
            raise ValueError("profile needs at least two samples")
        if np.any(self.sigma <= 0):
            raise ValueError("scale profile must be positive")
        steps = np.diff(self.x)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0]):
            raise ValueError("profile lattice must be uniform increasing")

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    def density(self, z):
        return stopping_density(z, self.x, self.sigma, self.dx)


def lipschitz_extend(xs, sigma, x0, s, L, y):
    """Lipschitz extension of a scale profile beyond its base interval.

    sigma~(y) = min(2 s, inf over sample points x of
    max(sigma(x), |y - x| / L)); the result is 1/L-Lipschitz, bounded by
    2 s, and at most sigma at the sample points.  Requires L > 2.
    """
    if not L > 2:
        raise ValueError("extension slope parameter must satisfy L > 2")
    xs = np.asarray(xs, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if xs.shape != sigma.shape or xs.ndim != 1:
        raise ValueError("profile needs matching 1-d lattices")
    if np.any(np.abs(xs - x0) > s):
        raise ValueError("profile samples must lie in the base interval")
    if np.any(sigma <= 0):
        raise ValueError("scale profile must be positive")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty(y.shape)
    chunk = max(1, 2_000_000 // xs.size)
    for start in range(0, y.size, chunk):
        sl = slice(start, start + chunk)
        cand = np.maximum(sigma[None, :], np.abs(y[sl, None] - xs[None, :]) / L)
        out[sl] = cand.min(axis=1)
    return np.minimum(out, 2.0 * s)


def stopping_density(z, xs, sigma, dx):
    """Density of the stopping region over a scale profile.

    rho(z) = sum over lattice points x of dx / (2 sigma(x)) for
    |z - x| < sigma(x): the midpoint-rule mass of the normalized
    indicator columns at height z.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    xs = np.asarray(xs, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    out = np.empty(z.shape)
    chunk = max(1, 2_000_000 // xs.size)
    for start in range(0, z.size, chunk):
        sl = slice(start, start + chunk)
        hit = np.abs(z[sl, None] - xs[None, :]) < sigma[None, :]
        out[sl] = (hit * (dx / (2.0 * sigma[None, :]))).sum(axis=1)
    return out
