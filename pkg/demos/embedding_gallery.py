"""Tour of the embedding maps from line data to position-frequency-scale space.

A function of one variable (or a channel family with stopping
boundaries) becomes a field on the discretized upper 3-space.  The
energy embedding tests against wave packets; the mass-type embeddings
average channel amplitudes through scale-adapted windows; the ball
variant replaces the smooth weight by a sharp average, which is the
form the covering and projection routines consume.
"""

import numpy as np

from tfouter import (
    GeometryParams,
    SequenceFunction,
    StoppingSequence,
    TFGrid,
    build_generators,
    embed_aux_ball,
    embed_energy,
    embed_var_mass_sup,
    maximal_function,
)

geom = GeometryParams()
gen = build_generators(geom)

# periodic z lattice shared with the y axis: 128 samples, period 16
grid = TFGrid((-8.0, 8.0), 128, (-4.0, 4.0), 32, (0.25, 2.0), 12)
z = grid.y
dz = grid.dy

# a modulated Gaussian packet as the test function
f = np.exp(-((z - 1.0) ** 2)) * np.exp(2.0j * z)

F = embed_energy(f, grid, gen)
k, e, i = np.unravel_index(np.argmax(np.abs(F.values)), F.values.shape)
print("energy embedding peak:")
print(f"  |F| max {np.abs(F.values).max():.4f} at "
      f"y={grid.y[i]:.2f} eta={grid.eta[e]:.2f} t={grid.t[k]:.3f}")
print(f"  (packet center y=1, frequency 2)")

# two-channel amplitude data constant on four cells, boundaries rising
edges = np.arange(0, 129, 32)
bounds = np.array([[-2.0, 0.5], [-1.0, 1.0], [0.0, 1.5], [1.0, 2.5]])
stopping = StoppingSequence(edges, np.column_stack([bounds, np.full(4, np.inf)]))
amps = np.array([[1.0, 0.2], [0.5, 1.0], [0.3, 0.3], [1.0, 0.1]], dtype=complex)
seqfun = SequenceFunction(amps, 1.5)

A = embed_var_mass_sup(seqfun, stopping, grid, gen)
print(f"\nsup variational mass field: max {np.abs(A.values).max():.4f}, "
      f"mean {np.abs(A.values).mean():.4f}")

# the ball average at a few probe points of the 3-space
R = 2.0
probes = [(0.0, 0.6, 0.5), (2.0, 1.2, 1.0), (-3.0, -0.5, 1.5)]
print(f"\nsharp ball averages (R = {R:g}), one-sided window:")
for y0, eta0, t0 in probes:
    v = embed_aux_ball(seqfun, stopping, R, y0, eta0, t0, grid, geom, "plus")
    print(f"  (y={y0:5.1f}, eta={eta0:5.1f}, t={t0:4.1f})  M+ = {float(v):.4f}")

# the discrete maximal function dominates the profile pointwise
g = np.abs(f)
mg = maximal_function(g, dz, period=grid.period)
print(f"\nmaximal function: min(Mg - g) = {np.min(mg - g):.2e} (never negative), "
      f"sup Mg / sup g = {mg.max() / g.max():.3f}")
