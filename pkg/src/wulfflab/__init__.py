"""wulfflab: lattice samplers, exact oracles and equilibrium crystal shapes.

Layers, bottom to top: `lattice` (geometries, configurations, energies),
`exact` (brute-force oracles on tiny instances), `samplers` (Glauber,
Kawasaki, FK/Edwards-Sokal, Bernoulli, restricted phase), `tension`
(transfer-matrix and decay estimates of the surface tension, wall free
energy), `geometry` (Wulff/Winterbottom constructions and shape metrics),
`contours` (dual contours, skeletons, droplet statistics), `labels`
(mesoscopic coarse graining), `experiments` + `cli` (reproducible presets
and the wulff-lab command).
"""

__version__ = "0.1.0"
