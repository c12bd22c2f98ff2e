"""Randomized ensembles and inequality verification experiments.

Every experiment consumes an Ensemble, evaluates a deterministic sequence
of random instances, and returns a report dict with per-instance rows, an
aggregate summary, and flags.  Reports serialize to CSV and JSON with a
fixed row schema: instance, exponents, lhs, rhs, ratio, flags.  The
exponents column is a key=value list so one schema covers all
experiments.  Instance i of an ensemble depends only on (seed, i), so
doubling an ensemble extends it without changing existing instances.
"""

import json
import os
import time

import numpy as np

from .geometry import GeometryParams, TFGrid, Strip, tent_region_mask, strip_mask
from .wavepackets import build_generators, xi_lattice
from .embeddings import (
    StoppingSequence,
    SequenceFunction,
    embed_energy,
    embed_mass,
    embed_var_mass_sup,
    embed_aux,
    embed_aux_ball,
)
from .sizes import SizeSpec, all_local_sizes, candidate_scales, tent_at
from .outer import outer_lp, iter_lp_lq, cover_superlevel_aux, _FieldView
from .operators import bilinear_forms

__all__ = [
    "Exponents",
    "Ensemble",
    "stability_strips",
    "verify_duality",
    "verify_holder",
    "verify_radon_nikodym",
    "bound_ratio_sweep",
    "verify_interpolation",
    "verify_size_control",
    "verify_wavepackets",
    "write_report",
]

_ENERGY = SizeSpec("S_energy")
_MASS = SizeSpec("S_mass")
_SUP = SizeSpec("S_inf")
_L1 = SizeSpec("S_1_plain")

# harness-wide ladder depths: values stabilize well before these depths
# while keeping strip evaluations affordable
_OUTER_LADDER = 8
_INNER_LADDER = 4


def conjugate(p):
    """Holder conjugate with the usual conventions at 1 and infinity."""
    p = float(p)
    if p == 1.0:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


class Exponents:
    """Exponent tuple (p, q, r) with derived conjugates.

    The conjugate identities 1/p + 1/p' = 1 are validated to 1e-12 at
    construction.
    """

    def __init__(self, p=4.0, q=4.0, r=3.0):
        self.p = float(p)
        self.q = float(q)
        self.r = float(r)
        for v, name in ((self.p, "p"), (self.q, "q"), (self.r, "r")):
            if not v >= 1.0:
                raise ValueError(f"exponent {name} must be >= 1")
        self.p_prime = conjugate(self.p)
        self.q_prime = conjugate(self.q)
        self.r_prime = conjugate(self.r)
        for v, c in ((self.p, self.p_prime), (self.q, self.q_prime), (self.r, self.r_prime)):
            lhs = (0.0 if np.isinf(v) else 1.0 / v) + (0.0 if np.isinf(c) else 1.0 / c)
            if abs(lhs - 1.0) > 1e-12:
                raise ValueError("conjugate identity violated")

    def as_dict(self):
        return {
            "p": self.p,
            "q": self.q,
            "r": self.r,
            "p_prime": self.p_prime,
            "q_prime": self.q_prime,
            "r_prime": self.r_prime,
        }

    def __repr__(self):
        return f"Exponents(p={self.p}, q={self.q}, r={self.r})"


_GEN_CACHE = {}


def _generators_for(geom):
    key = (
        geom.alpha_minus, geom.beta_minus, geom.beta_plus, geom.alpha_plus,
        geom.d, geom.d_prime, geom.d_dblprime, geom.eps, geom.b, geom.decay_N,
        geom.R0,
    )
    if key not in _GEN_CACHE:
        _GEN_CACHE[key] = build_generators(geom)
    return _GEN_CACHE[key]


class Ensemble:
    """Seeded family of random test instances on a fixed grid.

    Grid and instance parameters are physical, so refining the grid keeps
    every instance's underlying functions unchanged; instance i draws from
    default_rng((seed, i)) so ensembles extend deterministically.
    """

    def __init__(self, seed=0, size=50, exponents=None, n_z=32, period=8.0,
                 n_eta=16, n_t=8, eta_pad=4.0, t_range=(0.25, 2.0), ncell=4,
                 K=3, geom=None):
        if n_z % ncell != 0:
            raise ValueError("ncell must divide n_z")
        if K < 1:
            raise ValueError("need at least one stopping boundary")
        self.seed = int(seed)
        self.size = int(size)
        self.exponents = exponents if exponents is not None else Exponents()
        self.n_z = int(n_z)
        self.period = float(period)
        self.n_eta = int(n_eta)
        self.n_t = int(n_t)
        self.eta_pad = float(eta_pad)
        self.t_range = (float(t_range[0]), float(t_range[1]))
        self.ncell = int(ncell)
        self.K = int(K)
        self.geom = geom if geom is not None else GeometryParams()
        self._grid = None

    @property
    def grid(self):
        if self._grid is None:
            half = self.period / 2.0
            self._grid = TFGrid(
                (-half, half), self.n_z, (-self.eta_pad, self.eta_pad),
                self.n_eta, self.t_range, self.n_t,
            )
        return self._grid

    @property
    def generators(self):
        return _generators_for(self.geom)

    @property
    def dz(self):
        return self.period / self.n_z

    def instance_rng(self, i):
        return np.random.default_rng((self.seed, int(i)))

    def doubled(self):
        return self._clone(size=2 * self.size)

    def refined(self):
        return self._clone(n_z=2 * self.n_z, n_eta=2 * self.n_eta, n_t=2 * self.n_t)

    def _clone(self, **kw):
        args = dict(
            seed=self.seed, size=self.size, exponents=self.exponents,
            n_z=self.n_z, period=self.period, n_eta=self.n_eta, n_t=self.n_t,
            eta_pad=self.eta_pad, t_range=self.t_range, ncell=self.ncell,
            K=self.K, geom=self.geom,
        )
        args.update(kw)
        return Ensemble(**args)

    def config(self):
        return {
            "seed": self.seed,
            "size": self.size,
            "n_z": self.n_z,
            "period": self.period,
            "n_eta": self.n_eta,
            "n_t": self.n_t,
            "eta_pad": self.eta_pad,
            "t_range": list(self.t_range),
            "ncell": self.ncell,
            "K": self.K,
            "exponents": self.exponents.as_dict(),
        }

    # ---- instance generators ----

    def random_function(self, rng):
        """Band-limited sample: at most 8 modulated Gaussian bumps.

        All parameters are drawn in fixed counts so the draw sequence does
        not depend on the grid resolution.
        """
        nb = int(rng.integers(3, 9))
        mu = rng.uniform(-0.5 * self.eta_pad, 0.5 * self.eta_pad, 8)
        sg = rng.uniform(0.10 * self.eta_pad, 0.25 * self.eta_pad, 8)
        amp = rng.normal(size=8) + 1j * rng.normal(size=8)
        dz = self.dz
        xi = xi_lattice(self.n_z, dz)
        fhat = np.zeros(self.n_z, dtype=complex)
        for i in range(nb):
            fhat += amp[i] * np.exp(-((xi - mu[i]) ** 2) / (2 * sg[i] ** 2))
        return np.fft.ifft(fhat) / dz

    def random_stopping(self, rng, K=None):
        K = self.K if K is None else int(K)
        lim = 0.75 * self.eta_pad
        vals = np.sort(rng.uniform(-lim, lim, (self.ncell, K)), axis=1)
        u = rng.random(2)
        if u[0] < 0.2:
            vals[:, 0] = -np.inf
        if u[1] < 0.2 and K >= 2:
            vals[:, -1] = np.inf
        edges = np.arange(self.ncell + 1) * (self.n_z // self.ncell)
        return StoppingSequence(edges, vals)

    def random_seqfun(self, rng, n_channels=None):
        ch = (self.K - 1 if n_channels is None else int(n_channels))
        ch = max(ch, 1)
        vals = rng.normal(size=(self.ncell, ch)) + 1j * rng.normal(size=(self.ncell, ch))
        vals[rng.random(size=(self.ncell, ch)) < 0.2] = 0.0
        return SequenceFunction(vals, self.exponents.r_prime)

    def random_density(self, rng):
        """Cellwise-constant density on the z lattice."""
        vals = rng.normal(size=self.ncell) + 1j * rng.normal(size=self.ncell)
        return np.repeat(vals, self.n_z // self.ncell)


def stability_strips(grid, n_x=8, n_scales=6):
    """Sparse strip family with grid-independent physical members.

    Positions are every period/n_x; scales are thinned from the candidate
    ladder keeping the top scale, so one refinement (which doubles the
    ladder) reproduces the same physical strips and refinement studies
    compare like with like.
    """
    stride = max(1, grid.n_y // n_x)
    ys = grid.y[::stride]
    sc = candidate_scales(grid)
    step = max(1, sc.size // n_scales)
    idx = sorted(range(sc.size - 1, -1, -step))
    return [Strip(float(x), float(sc[k])) for k in idx for x in ys]


def _integral(values, grid):
    """Box quadrature of a field over dy deta dt."""
    return complex((values * grid.slice_weights[:, None, None]).sum())


def _lp_norm(arr, p, dz):
    a = np.abs(np.asarray(arr))
    if np.isinf(p):
        return float(a.max()) if a.size else 0.0
    return float((np.sum(a**p) * dz) ** (1.0 / p))


# ---- report plumbing ----


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


def _row(instance, exponents, lhs, rhs, ratio, flags=()):
    return {
        "instance": int(instance),
        "exponents": exponents,
        "lhs": float(lhs),
        "rhs": float(rhs),
        "ratio": float(ratio),
        "flags": ";".join(flags),
    }


def _report(experiment, config, rows, summary, flags):
    return {
        "experiment": experiment,
        "config": _jsonable(config),
        "instances": rows,
        "summary": _jsonable(summary),
        "flags": sorted(set(flags)),
    }


def write_report(report, outdir, name=None):
    """Write a report as <name>.csv (instance rows) and <name>.json.

    Wall-time summary entries are dropped from the files so reruns with
    the same seed and config are byte-identical.
    """
    os.makedirs(outdir, exist_ok=True)
    name = name if name is not None else report["experiment"]
    report = dict(report)
    report["summary"] = {
        k: v for k, v in report["summary"].items() if not k.endswith("_s")
    }
    csv_path = os.path.join(outdir, name + ".csv")
    json_path = os.path.join(outdir, name + ".json")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("instance,exponents,lhs,rhs,ratio,flags\n")
        for r in report["instances"]:
            fh.write(
                f"{r['instance']},{r['exponents']},{float(r['lhs'])!r},"
                f"{float(r['rhs'])!r},{float(r['ratio'])!r},{r['flags']}\n"
            )
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return csv_path, json_path


def _stability_flags(base_max, doubled_max, refined_max):
    flags = []
    if doubled_max > 2.0 * base_max:
        flags.append("divergence-doubling")
    if base_max > 0 and not (0.5 * base_max < refined_max < 2.0 * base_max):
        flags.append("divergence-refinement")
    return flags


# ---- duality ----


def _duality_instance(ens, rng, boundary_band=(2.4, 3.4), center_band=0.6,
                      sigma_band=(0.30, 0.45), min_gap=0.5):
    """One duality test instance: separated-band f and channel data."""
    n_z, dz = ens.n_z, ens.dz
    xi = xi_lattice(n_z, dz)
    nb = int(rng.integers(3, 7))
    mu = rng.uniform(-center_band, center_band, 8)
    sg = rng.uniform(sigma_band[0], sigma_band[1], 8)
    amp = rng.normal(size=8) + 1j * rng.normal(size=8)
    fhat = np.zeros(n_z, dtype=complex)
    for i in range(nb):
        fhat += amp[i] * np.exp(-((xi - mu[i]) ** 2) / (2 * sg[i] ** 2))
    f = np.fft.ifft(fhat) / dz
    K = int(rng.integers(1, ens.K + 1))
    lo, hi = boundary_band
    bnds = np.empty((ens.ncell, K + 1))
    for c in range(ens.ncell):
        while True:
            v = np.sort(np.concatenate([
                rng.uniform(-hi, -lo, size=rng.integers(0, K + 2)),
                rng.uniform(lo, hi, size=rng.integers(0, K + 2)),
            ]))
            if v.size >= K + 1:
                v = np.sort(rng.choice(v, K + 1, replace=False))
                if np.all(np.diff(v) >= min_gap):
                    break
        bnds[c] = v
    if rng.random() < 0.3:
        bnds[:, 0] = -np.inf
    if rng.random() < 0.3 and K >= 2:
        bnds[:, -1] = np.inf
    av = rng.normal(size=(ens.ncell, K)) + 1j * rng.normal(size=(ens.ncell, K))
    av[rng.random(size=(ens.ncell, K)) < 0.2] = 0.0
    for c in range(ens.ncell):
        for k in range(K):
            if np.isinf(bnds[c, k]) and np.isinf(bnds[c, k + 1]):
                av[c, k] = 0.0
    edges = np.arange(ens.ncell + 1) * (n_z // ens.ncell)
    stopping = StoppingSequence(edges, bnds)
    seqfun = SequenceFunction(av, ens.exponents.r_prime)
    return f, seqfun, stopping


def verify_duality(ens, levels=2, n_eta_base=64, n_t_base=32, eta_pad=7.0,
                   t_min=0.085, t_max_base=1.30, domination=True, min_lhs=1e-3):
    """Segment pairing against its wave-packet quadrature over refinements.

    Per instance and refinement level records |lhs|, |rhs| and the
    relative gap; at the base level also checks the domination integral
    of |F| times the sup variational field against |lhs| minus the gap.
    """
    gen = ens.generators
    half = ens.period / 2.0
    instances = [_duality_instance(ens, ens.instance_rng(i)) for i in range(ens.size)]
    rows, flags = [], []
    medians, maxima, runtimes = [], [], []
    dom_margins = []
    for lvl in range(levels):
        grid = TFGrid(
            (-half, half), ens.n_z, (-eta_pad, eta_pad), n_eta_base * 2**lvl,
            (t_min, t_max_base * 2**lvl), n_t_base * 2**lvl,
        )
        t0 = time.time()
        gaps = []
        for i, (f, seqfun, stopping) in enumerate(instances):
            lhs, rhs = bilinear_forms(f, seqfun, stopping, grid, gen)
            row_flags = [f"level={lvl}"]
            if abs(lhs) < min_lhs:
                row_flags.append("degenerate")
                gap = 0.0
            else:
                gap = abs(lhs - rhs) / abs(lhs)
                gaps.append(gap)
            if domination and lvl == 0 and abs(lhs) >= min_lhs:
                F = embed_energy(f, grid, gen)
                A = embed_var_mass_sup(seqfun, stopping, grid, gen)
                dom = float((np.abs(F.values) * np.abs(A.values)
                             * grid.slice_weights[:, None, None]).sum())
                margin = dom / (abs(lhs) - abs(lhs - rhs))
                dom_margins.append(margin)
                row_flags.append(f"dom_margin={margin:.3g}")
                if dom < (abs(lhs) - abs(lhs - rhs)) * 0.95:
                    row_flags.append("domination-violated")
                    flags.append("domination-violated")
            rows.append(_row(i, f"level={lvl}", abs(lhs), abs(rhs), gap, row_flags))
        runtimes.append(time.time() - t0)
        medians.append(float(np.median(gaps)) if gaps else 0.0)
        maxima.append(float(np.max(gaps)) if gaps else 0.0)
    ratios = [
        (medians[l + 1] / medians[l]) if medians[l] > 0 else 0.0
        for l in range(levels - 1)
    ]
    for rat in ratios:
        if rat > 0.6:
            flags.append("gap-ratio-above-0.6")
    summary = {
        "median_gap": medians,
        "max_gap": maxima,
        "gap_ratio": ratios,
        "runtime_s": runtimes,
        "domination_min_margin": (min(dom_margins) if dom_margins else None),
        "n_instances": ens.size,
    }
    return _report("duality", ens.config(), rows, summary, flags)


# ---- Holder ----


def _holder_instance(ens, i, iterated):
    rng = ens.instance_rng(i)
    f = ens.random_function(rng)
    stopping = ens.random_stopping(rng)
    seqfun = ens.random_seqfun(rng)
    grid, gen, geom = ens.grid, ens.generators, ens.geom
    e = ens.exponents
    F = embed_energy(f, grid, gen)
    A = embed_var_mass_sup(seqfun, stopping, grid, gen)
    num = abs(_integral(F.values * A.values, grid))
    if iterated:
        strips = stability_strips(grid)
        nF, _ = iter_lp_lq(F, e.p, e.q, _ENERGY, geom, strips=strips,
                           n_ladder=_OUTER_LADDER, inner_ladder=_INNER_LADDER)
        nA, _ = iter_lp_lq(A, e.p_prime, e.q_prime, _MASS, geom, strips=strips,
                           n_ladder=_OUTER_LADDER, inner_ladder=_INNER_LADDER)
    else:
        nF, _ = outer_lp(F, e.p, _ENERGY, geom, n_ladder=_OUTER_LADDER)
        nA, _ = outer_lp(A, e.p_prime, _MASS, geom, n_ladder=_OUTER_LADDER)
    return num, nF * nA


def verify_holder(ens, iterated=True, stability=True):
    """Pairing integral against the product of iterated outer norms.

    Records the ratio per instance and the ensemble max; with stability
    set, also evaluates the doubled ensemble and one grid refinement and
    flags divergence when the max moves by a factor 2 or more.
    """
    e = ens.exponents
    exps = f"p={e.p:g};q={e.q:g};r={e.r:g}"
    rows, flags = [], []
    skipped = 0

    def ratio_at(source, i, tag):
        nonlocal skipped
        num, den = _holder_instance(source, i, iterated)
        if den == 0.0:
            skipped += 1
            rows.append(_row(i, exps, num, den, 0.0, (tag, "zero-denominator")))
            return None
        rows.append(_row(i, exps, num, den, num / den, (tag,) if tag else ()))
        return num / den

    t0 = time.time()
    base_vals = [ratio_at(ens, i, "") for i in range(ens.size)]
    base_vals = [v for v in base_vals if v is not None]
    base_max = max(base_vals, default=0.0)
    summary = {
        "base_max": base_max,
        "skipped": skipped,
        "iterated": iterated,
        "n_instances": ens.size,
    }
    if stability:
        dbl = ens.doubled()
        dbl_vals = [ratio_at(dbl, i, "doubled") for i in range(ens.size, dbl.size)]
        dbl_vals = [v for v in dbl_vals if v is not None]
        doubled_max = max([base_max] + dbl_vals)
        ref = ens.refined()
        ref_vals = [ratio_at(ref, i, "refined") for i in range(ref.size)]
        ref_vals = [v for v in ref_vals if v is not None]
        refined_max = max(ref_vals, default=0.0)
        flags.extend(_stability_flags(base_max, doubled_max, refined_max))
        summary.update({"doubled_max": doubled_max, "refined_max": refined_max})
    summary["runtime_s"] = time.time() - t0
    if not np.isfinite(base_max):
        flags.append("nonfinite-max")
    return _report("holder", ens.config(), rows, summary, flags)


# ---- embedding bound sweeps ----

_SWEEP_KINDS = ("mass", "energy", "var-mass", "aux")


def _check_sweep_range(ens, which, explore):
    e = ens.exponents
    problems = []
    if which == "mass":
        if not e.p_prime > 1:
            problems.append("p' must exceed 1")
        if not e.q_prime > 1:
            problems.append("q' must exceed 1")
    elif which == "energy":
        if not e.p > 1:
            problems.append("p must exceed 1")
        if not e.q > max(2.0, e.p_prime):
            problems.append("q must exceed max(2, p')")
    elif which == "var-mass":
        if not (1 <= e.r_prime < 2):
            problems.append("r' must lie in [1, 2)")
        if not e.p_prime > 1:
            problems.append("p' must exceed 1")
        if not e.q_prime > e.r_prime:
            problems.append("q' must exceed r'")
    elif which == "aux":
        if not e.p_prime > 1:
            problems.append("p' must exceed 1")
        if not e.q_prime > e.r_prime:
            problems.append("q' must exceed r'")
    else:
        raise ValueError(f"unknown sweep kind: {which}")
    if problems and not explore:
        raise ValueError(
            f"exponents outside the stated range for {which}: "
            + "; ".join(problems) + " (set explore=True to probe)"
        )
    return [f"exploration:{p}" for p in problems]


def _sweep_ratio(ens, which, i):
    rng = ens.instance_rng(i)
    grid, gen, geom = ens.grid, ens.generators, ens.geom
    e = ens.exponents
    strips = stability_strips(grid)
    if which == "energy":
        f = ens.random_function(rng)
        F = embed_energy(f, grid, gen)
        num, _ = iter_lp_lq(F, e.p, e.q, _ENERGY, geom, strips=strips,
                            n_ladder=_OUTER_LADDER, inner_ladder=_INNER_LADDER)
        den = _lp_norm(f, e.p, ens.dz)
        return num, den
    if which == "mass":
        a = ens.random_density(rng)
        stopping = ens.random_stopping(rng, K=1)
        A = embed_mass(a, stopping, grid, gen)
        num, _ = iter_lp_lq(A, e.p_prime, e.q_prime, _MASS, geom, strips=strips,
                            n_ladder=_OUTER_LADDER, inner_ladder=_INNER_LADDER)
        den = _lp_norm(a, e.p_prime, ens.dz)
        return num, den
    stopping = ens.random_stopping(rng)
    seqfun = ens.random_seqfun(rng)
    if which == "var-mass":
        A = embed_var_mass_sup(seqfun, stopping, grid, gen)
        num, _ = iter_lp_lq(A, e.p_prime, e.q_prime, _MASS, geom, strips=strips,
                            n_ladder=_OUTER_LADDER, inner_ladder=_INNER_LADDER)
    else:
        M = embed_aux(seqfun, stopping, grid, gen, geom)
        num, _ = iter_lp_lq(M, e.p_prime, e.q_prime, _SUP, geom, strips=strips,
                            n_ladder=_OUTER_LADDER, inner_ladder=_INNER_LADDER)
    den = seqfun.mixed_norm(stopping, e.p_prime, ens.dz)
    return num, den


def _aux_weak_endpoint(ens, i, R, Q, n_lambda=4):
    """Covering estimate of the aux weak endpoint ratio for one instance.

    Evaluates the ball-averaged positive-side aux map on the grid, runs
    the superlevel covering at a short geometric lambda ladder, and
    bounds the superlevel measure by the selected premeasures.
    """
    rng = ens.instance_rng(i)
    grid, geom = ens.grid, ens.geom
    rp = ens.exponents.r_prime
    stopping = ens.random_stopping(rng)
    seqfun = ens.random_seqfun(rng)
    tt, ee, yy = np.meshgrid(grid.t, grid.eta, grid.y, indexing="ij")
    vals = embed_aux_ball(seqfun, stopping, R, yy.ravel(), ee.ravel(),
                          tt.ravel(), grid, geom, variant="plus")
    smax = float(np.max(vals))
    den = seqfun.mixed_norm(stopping, rp, ens.dz)
    if smax == 0.0 or den == 0.0:
        return 0.0
    best = 0.0
    for j in range(n_lambda):
        lam = smax * 2.0 ** (-(j + 0.5))
        cov = cover_superlevel_aux(seqfun, stopping, lam, R, Q, grid, geom)
        mu = sum(T.s for T in cov.tents())
        if mu > 0:
            best = max(best, lam * mu ** (1.0 / rp) / den)
    return best


def bound_ratio_sweep(ens, which, explore=False, stability=True,
                      endpoints=True, n_endpoint=3, R=2.0, Q=8.0):
    """Embedded-field norm over input norm for one theorem family.

    which selects the embedding: mass (single boundary), energy,
    var-mass (sup of truncations) or aux (tail-weighted).  Exponents
    outside the theorem's stated range are refused unless explore is
    set.  Weak endpoint rows are added for the first few instances of the
    var-mass and aux families.
    """
    range_flags = _check_sweep_range(ens, which, explore)
    e = ens.exponents
    exps = f"kind={which};p={e.p:g};q={e.q:g};r={e.r:g}"
    rows, flags = [], list(range_flags)
    skipped = 0

    def ratio_at(source, i, tag):
        nonlocal skipped
        num, den = _sweep_ratio(source, which, i)
        if den == 0.0:
            skipped += 1
            rows.append(_row(i, exps, num, den, 0.0, (tag, "zero-input")))
            return None
        r = num / den
        rows.append(_row(i, exps, num, den, r, (tag,) if tag else ()))
        return r

    t0 = time.time()
    base_vals = [ratio_at(ens, i, "") for i in range(ens.size)]
    base_vals = [v for v in base_vals if v is not None]
    base_max = max(base_vals, default=0.0)
    summary = {
        "kind": which,
        "base_max": base_max,
        "skipped": skipped,
        "n_instances": ens.size,
    }
    if endpoints and which == "var-mass":
        grid, gen, geom = ens.grid, ens.generators, ens.geom
        strips = stability_strips(grid)
        for i in range(min(n_endpoint, ens.size)):
            rng = ens.instance_rng(i)
            _ = ens.random_function(rng)
            stopping = ens.random_stopping(rng)
            seqfun = ens.random_seqfun(rng)
            A = embed_var_mass_sup(seqfun, stopping, grid, gen)
            den1 = seqfun.mixed_norm(stopping, e.p_prime, ens.dz)
            den2 = seqfun.mixed_norm(stopping, 1.0, ens.dz)
            if den1 > 0:
                num, _r = iter_lp_lq(A, e.p_prime, np.inf, _MASS, geom, strips=strips,
                                     n_ladder=_OUTER_LADDER)
                rows.append(_row(i, exps, num, den1, num / den1, ("endpoint=q-inf",)))
            if den2 > 0:
                _v, rep = iter_lp_lq(A, 1.0, e.q_prime, _MASS, geom, strips=strips,
                                     n_ladder=_OUTER_LADDER, inner_ladder=_INNER_LADDER)
                rows.append(_row(i, exps, rep.weak, den2, rep.weak / den2,
                                 ("endpoint=p1-weak",)))
                _v, rep = iter_lp_lq(A, 1.0, e.r_prime, _MASS, geom, strips=strips,
                                     n_ladder=_OUTER_LADDER, inner_ladder=_INNER_LADDER,
                                     inner_weak=True)
                rows.append(_row(i, exps, rep.weak, den2, rep.weak / den2,
                                 ("endpoint=double-weak",)))
    if endpoints and which == "aux":
        for i in range(min(n_endpoint, ens.size)):
            r = _aux_weak_endpoint(ens, i, R, Q)
            rows.append(_row(i, exps, r, 1.0, r, ("endpoint=weak-cover",)))
    if stability:
        dbl = ens.doubled()
        dbl_vals = [ratio_at(dbl, i, "doubled") for i in range(ens.size, dbl.size)]
        dbl_vals = [v for v in dbl_vals if v is not None]
        doubled_max = max([base_max] + dbl_vals)
        ref = ens.refined()
        ref_vals = [ratio_at(ref, i, "refined") for i in range(ref.size)]
        ref_vals = [v for v in ref_vals if v is not None]
        refined_max = max(ref_vals, default=0.0)
        flags.extend(_stability_flags(base_max, doubled_max, refined_max))
        summary.update({"doubled_max": doubled_max, "refined_max": refined_max})
    summary["runtime_s"] = time.time() - t0
    if not np.isfinite(base_max):
        flags.append("nonfinite-max")
    return _report(f"sweep-{which}", ens.config(), rows, summary, flags)


# ---- Radon-Nikodym ----


def _borel_mask(ens, rng, kind, grid):
    shape = grid.shape
    if kind == "full":
        return np.ones(shape, dtype=bool)
    if kind == "tent":
        k = int(rng.integers(grid.n_t))
        e = int(rng.integers(grid.n_eta))
        i = int(rng.integers(grid.n_y))
        T = tent_at(grid, k, e, i)
        return tent_region_mask(T, grid, ens.geom, region="full")
    if kind == "boxes":
        mask = np.zeros(shape, dtype=bool)
        for _ in range(3):
            k0, k1 = np.sort(rng.integers(0, grid.n_t + 1, 2))
            e0, e1 = np.sort(rng.integers(0, grid.n_eta + 1, 2))
            i0, i1 = np.sort(rng.integers(0, grid.n_y + 1, 2))
            mask[k0:k1, e0:e1, i0:i1] = True
        return mask
    if kind == "bernoulli":
        return rng.random(shape) < 0.3
    raise ValueError(f"unknown subset kind: {kind}")


def verify_radon_nikodym(ens, tol=0.25):
    """Lebesgue-against-outer-norm domination on random Borel subsets.

    For each instance, the quadrature measure restricted to a random
    subset is compared against the outer L1 norm (and the iterated
    L1 L1 norm) scaled by the tentwise hypothesis constant; with the full
    measure the hypothesis constant is exactly 1.
    """
    grid, gen, geom = ens.grid, ens.generators, ens.geom
    kinds = ("full", "tent", "boxes", "bernoulli")
    rows, flags = [], []
    w = grid.slice_weights[:, None, None]
    t0 = time.time()
    per_kind = {k: [] for k in kinds}
    for i in range(ens.size):
        rng = ens.instance_rng(i)
        f = ens.random_function(rng)
        G = embed_energy(f, grid, gen)
        kind = kinds[i % len(kinds)]
        mask = _borel_mask(ens, rng, kind, grid)
        integral = float((np.abs(G.values) * mask * w).sum())
        sizes_full = all_local_sizes(G, _L1, geom)
        masked = _FieldView(grid, G.values * mask)
        sizes_masked = all_local_sizes(masked, _L1, geom)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios = np.where(sizes_full > 0, sizes_masked / np.maximum(sizes_full, 1e-300), 0.0)
        c_hyp = float(ratios.max())
        norm1, _ = outer_lp(G, 1.0, _L1, geom, n_ladder=_OUTER_LADDER)
        iter11, _ = iter_lp_lq(G, 1.0, 1.0, _L1, geom,
                               strips=stability_strips(grid),
                               n_ladder=_OUTER_LADDER, inner_ladder=_INNER_LADDER)
        row_flags = [f"kind={kind}"]
        c_direct = integral / norm1 if norm1 > 0 else 0.0
        c_iter = integral / iter11 if iter11 > 0 else 0.0
        if kind == "full" and abs(c_hyp - 1.0) > 1e-9:
            row_flags.append("full-measure-hypothesis-off")
            flags.append("full-measure-hypothesis-off")
        if norm1 > 0 and integral > c_hyp * norm1 * (1.0 + tol):
            row_flags.append("direct-bound-violated")
            flags.append("direct-bound-violated")
        if iter11 > 0 and integral > c_hyp * iter11 * (1.0 + tol):
            row_flags.append("iterated-bound-violated")
            flags.append("iterated-bound-violated")
        per_kind[kind].append(c_direct)
        rows.append(_row(i, f"kind={kind}", integral, c_hyp * norm1, c_direct, row_flags))
        rows.append(_row(i, f"kind={kind};variant=iterated", integral,
                         c_hyp * iter11, c_iter, row_flags))
    summary = {
        "max_c_direct": {k: (max(v) if v else 0.0) for k, v in per_kind.items()},
        "tolerance": tol,
        "runtime_s": time.time() - t0,
        "n_instances": ens.size,
    }
    return _report("radon-nikodym", ens.config(), rows, summary, flags)


# ---- interpolation ----


def ladder_strong_factor(p, n_ladder=20):
    """Closed form of the ladder strong norm for a unit indicator field.

    For G = 1_T with the sup size, every ladder level has measure s, so
    the strong norm is s^(1/p) times this factor.
    """
    p = float(p)
    q = 2.0 ** (-p)
    return (p * np.log(2.0) * 2.0 ** (-p / 2.0) * (1 - q**n_ladder) / (1 - q)) ** (1.0 / p)


def verify_interpolation(ens, p0=2.0, p1=8.0, theta=0.5):
    """Log-convexity of outer norms and Marcinkiewicz consistency.

    Part one checks strong norms at the intermediate exponent against the
    product of weak endpoint norms, with a closed-form indicator instance
    first.  Part two interpolates the auxiliary embedding between its
    weak r' endpoint and the sup bound.
    """
    if p0 == p1:
        raise ValueError("interpolation endpoints must differ")
    grid, gen, geom = ens.grid, ens.generators, ens.geom
    e = ens.exponents
    p_theta = 1.0 / ((1.0 - theta) / p0 + theta / p1)
    exps = f"p0={p0:g};p1={p1:g};theta={theta:g}"
    rows, flags = [], []
    t0 = time.time()

    # closed-form instance: indicator of a candidate tent, sup size
    k_mid = grid.n_t // 2
    T = tent_at(grid, k_mid, grid.n_eta // 2, grid.n_y // 2)
    mask = tent_region_mask(T, grid, geom, region="full")
    G0 = _FieldView(grid, mask.astype(complex))
    strong, rep = outer_lp(G0, p_theta, _SUP, geom)
    predicted = rep.measures[0] ** (1.0 / p_theta) * ladder_strong_factor(p_theta) \
        if rep.measures.size else 0.0
    ratio0 = strong / predicted if predicted > 0 else 0.0
    rows.append(_row(0, exps, strong, predicted, ratio0, ("closed-form",)))
    if predicted > 0 and abs(ratio0 - 1.0) > 1e-9:
        flags.append("closed-form-mismatch")

    conv_ratios = []
    for i in range(1, ens.size):
        rng = ens.instance_rng(i)
        if i % 2:
            G = embed_energy(ens.random_function(rng), grid, gen)
            spec = _ENERGY
        else:
            stopping = ens.random_stopping(rng)
            G = embed_var_mass_sup(ens.random_seqfun(rng), stopping, grid, gen)
            spec = _MASS
        s_theta, _ = outer_lp(G, p_theta, spec, geom)
        _s0, rep0 = outer_lp(G, p0, spec, geom)
        _s1, rep1 = outer_lp(G, p1, spec, geom)
        bound = rep0.weak ** (1.0 - theta) * rep1.weak**theta
        if bound == 0.0:
            rows.append(_row(i, exps, s_theta, bound, 0.0, ("zero-endpoints",)))
            continue
        ratio = s_theta / bound
        conv_ratios.append(ratio)
        row_flags = []
        if i == 1:
            # theta = 0 degeneracy: strong vs weak at the same exponent
            degen = _s0 / rep0.weak if rep0.weak > 0 else 0.0
            row_flags.append(f"theta0_ratio={degen:.3g}")
        rows.append(_row(i, exps, s_theta, bound, ratio, row_flags))

    marc_ratios = []
    rp = e.r_prime
    theta_m = 0.5
    p_m = rp / (1.0 - theta_m)
    for i in range(min(ens.size, 10)):
        rng = ens.instance_rng(i)
        _ = ens.random_function(rng)
        stopping = ens.random_stopping(rng)
        seqfun = ens.random_seqfun(rng)
        M = embed_aux(seqfun, stopping, grid, gen, geom)
        den_rp = seqfun.mixed_norm(stopping, rp, ens.dz)
        den_inf = seqfun.mixed_norm(stopping, np.inf, ens.dz)
        den_m = seqfun.mixed_norm(stopping, p_m, ens.dz)
        if min(den_rp, den_inf, den_m) == 0.0:
            continue
        _sv, rep_w = outer_lp(M, rp, _SUP, geom)
        c1 = rep_w.weak / den_rp
        c2 = float(np.max(np.abs(M.values))) / den_inf
        s_m, _ = outer_lp(M, p_m, _SUP, geom)
        if c1 > 0 and c2 > 0:
            ratio = (s_m / den_m) / (c1 ** (1.0 - theta_m) * c2**theta_m)
            marc_ratios.append(ratio)
            rows.append(_row(i, f"variant=marcinkiewicz;p_theta={p_m:g}",
                             s_m / den_m, c1 ** (1.0 - theta_m) * c2**theta_m,
                             ratio, ("marcinkiewicz",)))
    max_conv = max(conv_ratios, default=0.0)
    max_marc = max(marc_ratios, default=0.0)
    if not (np.isfinite(max_conv) and np.isfinite(max_marc)):
        flags.append("nonfinite-max")
    summary = {
        "p_theta": p_theta,
        "max_convexity_ratio": max_conv,
        "max_marcinkiewicz_ratio": max_marc,
        "runtime_s": time.time() - t0,
        "n_instances": ens.size,
    }
    return _report("interpolation", ens.config(), rows, summary, flags)


# ---- size control ----


def verify_size_control(ens, n_strips=2, n_tents=2):
    """Mass size of the sup field off a strip/tent union against the aux level.

    lambda is the max of the aux embedding off the union; the assertion
    is that the generated mass size of the restricted sup field stays
    within a stable constant times lambda.
    """
    grid, gen, geom = ens.grid, ens.generators, ens.geom
    rows, flags = [], []
    consts = []
    t0 = time.time()
    scales = candidate_scales(grid)
    for i in range(ens.size):
        rng = ens.instance_rng(i)
        if i == 0:
            seqfun = SequenceFunction(
                np.zeros((ens.ncell, max(ens.K - 1, 1)), dtype=complex),
                ens.exponents.r_prime,
            )
            stopping = ens.random_stopping(rng)
            union = np.zeros(grid.shape, dtype=bool)
            tag = "trivial-zero"
        elif i == 1:
            stopping = ens.random_stopping(rng)
            seqfun = ens.random_seqfun(rng)
            union = np.ones(grid.shape, dtype=bool)
            tag = "trivial-covered"
        else:
            stopping = ens.random_stopping(rng)
            seqfun = ens.random_seqfun(rng)
            union = np.zeros(grid.shape, dtype=bool)
            for _ in range(n_strips):
                D = Strip(float(rng.choice(grid.y)), float(rng.choice(scales)))
                union |= strip_mask(D, grid)
            for _ in range(n_tents):
                T = tent_at(grid, int(rng.integers(grid.n_t)),
                            int(rng.integers(grid.n_eta)), int(rng.integers(grid.n_y)))
                union |= tent_region_mask(T, grid, geom, region="full")
            tag = ""
        A = embed_var_mass_sup(seqfun, stopping, grid, gen)
        M = embed_aux(seqfun, stopping, grid, gen, geom)
        off = ~union
        lam = float(np.max(np.abs(M.values) * off)) if off.any() else 0.0
        restricted = _FieldView(grid, A.values * off)
        size_off = float(all_local_sizes(restricted, _MASS, geom).max())
        row_flags = [tag] if tag else []
        if lam == 0.0:
            if size_off > 0:
                row_flags.append("lambda-zero")
                flags.append("lambda-zero")
            ratio = 0.0
        else:
            ratio = size_off / lam
            consts.append(ratio)
        rows.append(_row(i, "size=S_mass", size_off, lam, ratio, row_flags))
    cmax = max(consts, default=0.0)
    if not np.isfinite(cmax):
        flags.append("nonfinite-max")
    summary = {
        "max_constant": cmax,
        "runtime_s": time.time() - t0,
        "n_instances": ens.size,
    }
    return _report("size-control", ens.config(), rows, summary, flags)


# ---- generator identities ----


def verify_wavepackets(geom=None, n=4001, span=8.0):
    """Static identities of the packet generators on a fine lattice.

    Checks symmetry and support of the two profiles, positivity and total
    mass of the window, consistency of the cumulative tables with direct
    quadrature, and monotonicity of the boundary factor.
    """
    geom = geom if geom is not None else GeometryParams()
    gen = _generators_for(geom)
    v = np.linspace(-span, span, n)
    rows, flags = [], []
    t0 = time.time()

    def check(i, name, lhs, rhs, tol):
        dev = abs(lhs - rhs)
        bad = dev > tol
        if bad:
            flags.append(f"failed:{name}")
        rows.append(_row(i, f"check={name};tol={tol:g}", lhs, rhs,
                         dev, ("failed",) if bad else ()))

    inside = (v > geom.beta_minus) & (v < geom.beta_plus)
    check(0, "phi-even", float(np.max(np.abs(gen.phi_hat(v) - gen.phi_hat(-v)))), 0.0, 0.0)
    check(1, "phi-support-interior",
          float(np.max(np.abs(gen.phi_hat(v[~inside])))), 0.0, 1e-12)
    check(2, "psi-unit-center", float(np.abs(gen.psi_hat(0.0))), 1.0, 1e-12)
    check(3, "psi-support-interior",
          float(np.max(np.abs(gen.psi_hat(v[~inside])))), 0.0, 1e-12)
    chi = gen.chi(v)
    outside = (v < geom.d - geom.eps) | (v > geom.d + geom.eps)
    check(4, "chi-nonnegative", float(min(chi.min(), 0.0)), 0.0, 0.0)
    check(5, "chi-support", float(np.max(np.abs(chi[outside]))), 0.0, 0.0)
    fine = np.linspace(geom.d - geom.eps, geom.d + geom.eps, 200001)
    check(6, "chi-mass", float(np.trapezoid(gen.chi(fine), fine)),
          float(gen.chi_mass), 1e-9)
    probes = geom.d + geom.eps * np.array([-0.6, -0.2, 0.3, 0.8])
    worst = 0.0
    for x in probes:
        seg = np.linspace(geom.d - geom.eps, x, 50001)
        worst = max(worst, abs(float(np.trapezoid(gen.chi(seg), seg)) - float(gen.cum_chi(x))))
    check(7, "cum-chi-quadrature", worst, 0.0, 1e-6)
    bt = gen.beta(v)
    check(8, "beta-range", float(min(bt.min(), 0.0)), 0.0, 0.0)
    check(9, "beta-monotone", float(min(np.min(np.diff(bt)), 0.0)), 0.0, 1e-15)
    check(10, "beta-saturates", float(gen.beta(span)), 1.0, 1e-12)
    summary = {
        "n_checks": len(rows),
        "n_failed": len(flags),
        "runtime_s": time.time() - t0,
    }
    config = {"n": n, "span": span}
    return _report("wavepackets", config, rows, summary, flags)
