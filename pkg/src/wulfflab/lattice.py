"""Lattice geometries, spin/bond configurations and energies.

Supported geometries: the d-dimensional torus, finite boxes (optionally
rectangular), the half-space slab with a distinguished wall row, and the
"Wulff box" N*K cut out of Z^2 by a convex polygon.  Sites are indexed
row-major; neighbor lookups are precomputed arrays so the Monte Carlo
kernels never touch Python dictionaries.

Conventions:
  * torus edges are listed as (i, i + e_mu) for every site and positive
    axis mu; for N = 2 this yields the doubled edges of the periodic
    multigraph (the all-plus energy of torus(2^2) is -8, on 8 edges);
  * a box/slab exterior is described implicitly: `nbr` holds -1 where the
    neighbor is not a site, and boundary bonds are enumerated separately
    with the exterior coordinate, so boundary conditions can price them;
  * the slab has no bonds below the wall row x_d = 0 -- the wall field
    term -eta * sum_{wall} sigma_i replaces them;
  * energies are dimensionless: H = -sum J sigma sigma - h sum sigma
    - eta sum_{wall} sigma, and Gibbs weights are exp(-beta H).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "BoundaryCondition",
    "CouplingSpec",
    "LatticeGeometry",
    "SpinConfig",
    "BondConfig",
    "build_lattice",
    "hamiltonian",
    "magnetization",
    "fk_edges",
    "write_snapshot",
    "read_snapshot",
]


# ---------------------------------------------------------------------------
# boundary conditions and couplings


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary context for a finite region.

    tag in {"plus", "minus", "free", "periodic", "mixed_pm", "wall_field"}.
    mixed_pm carries the splitting direction n_hat (exterior spins are +1
    on the i.n >= 0 side, -1 below); wall_field carries the wall field
    strength eta and the sign of the bulk boundary ("plus" or "minus").
    """

    tag: str
    n_hat: Optional[tuple] = None
    eta: float = 0.0
    base: str = "plus"

    @staticmethod
    def plus():
        return BoundaryCondition("plus")

    @staticmethod
    def minus():
        return BoundaryCondition("minus")

    @staticmethod
    def free():
        return BoundaryCondition("free")

    @staticmethod
    def periodic():
        return BoundaryCondition("periodic")

    @staticmethod
    def mixed_pm(n_hat: Sequence[float]):
        n = np.asarray(n_hat, dtype=float)
        n = n / np.linalg.norm(n)
        return BoundaryCondition("mixed_pm", n_hat=tuple(n.tolist()))

    @staticmethod
    def wall_field(eta: float, base: str = "plus"):
        if base not in ("plus", "minus"):
            raise ValueError("wall_field base must be 'plus' or 'minus'")
        return BoundaryCondition("wall_field", eta=float(eta), base=base)

    def exterior_spin(self, coord: np.ndarray) -> int:
        """Fixed spin at an exterior coordinate (plus/minus/mixed/wall)."""
        if self.tag == "plus":
            return 1
        if self.tag == "minus":
            return -1
        if self.tag == "wall_field":
            return 1 if self.base == "plus" else -1
        if self.tag == "mixed_pm":
            return 1 if float(np.dot(coord, self.n_hat)) >= 0.0 else -1
        raise ValueError(f"boundary condition {self.tag!r} has no exterior spins")

    @property
    def has_exterior(self) -> bool:
        return self.tag in ("plus", "minus", "mixed_pm", "wall_field")

    def label(self) -> str:
        if self.tag == "mixed_pm":
            return f"mixed_pm({','.join(f'{x:g}' for x in self.n_hat)})"
        if self.tag == "wall_field":
            return f"wall_field(eta={self.eta:g},base={self.base})"
        return self.tag


@dataclass(frozen=True)
class CouplingSpec:
    """Ferromagnetic pair couplings at inverse temperature beta.

    model "nn" is the nearest-neighbor Ising model with J = 1.  model
    "finite_range" takes a table {offset: J} over lattice offsets; the
    table is symmetrized over +/-offset internally and must be
    ferromagnetic (J >= 0) with finite range r.
    """

    beta: float
    model: str = "nn"
    j_table: Optional[tuple] = None  # tuple of (offset tuple, J)

    def __post_init__(self):
        if self.model not in ("nn", "finite_range"):
            raise ValueError(f"unknown coupling model {self.model!r}")
        if self.model == "finite_range":
            if not self.j_table:
                raise ValueError("finite_range coupling needs a j_table")
            for off, j in self.j_table:
                if j < 0:
                    raise ValueError("couplings must be ferromagnetic (J >= 0)")
                if not any(off):
                    raise ValueError("zero offset in coupling table")

    @staticmethod
    def nn(beta: float) -> "CouplingSpec":
        return CouplingSpec(beta=float(beta))

    @staticmethod
    def finite_range(beta: float, table: dict) -> "CouplingSpec":
        items = tuple(sorted((tuple(k), float(v)) for k, v in table.items()))
        return CouplingSpec(beta=float(beta), model="finite_range", j_table=items)

    def half_offsets(self, d: int):
        """Canonical half of the offset set (first nonzero component > 0)."""
        if self.model == "nn":
            offs = [tuple(1 if k == mu else 0 for k in range(d)) for mu in range(d)]
            return [(off, 1.0) for off in offs]
        seen = {}
        for off, j in self.j_table:
            if len(off) != d:
                raise ValueError("offset dimension mismatch")
            key = off
            neg = tuple(-x for x in off)
            first = next(x for x in off if x != 0)
            canon = key if first > 0 else neg
            seen[canon] = max(seen.get(canon, 0.0), j)
        return sorted(seen.items())

    @property
    def range(self) -> int:
        if self.model == "nn":
            return 1
        return max(max(abs(x) for x in off) for off, _ in self.j_table)


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class LatticeGeometry:
    """Immutable lattice region with precomputed adjacency.

    coords:    (n_sites, d) integer coordinates
    nbr:       (n_sites, 2d) site index of neighbor along direction mu
               (+e_0..+e_{d-1}, -e_0..-e_{d-1}), or -1 if not a site
    edges:     (n_edges, 2) internal bonds; torus convention doubles
               bonds when N == 2 (periodic multigraph)
    boundary:  (n_b, 2) rows (site, direction mu) whose neighbor is
               exterior (empty for torus / free-only use)
    wall:      site indices with last coordinate 0 (slab only)
    """

    shape: str
    d: int
    N: int
    M: Optional[int]
    dims: tuple
    coords: np.ndarray
    nbr: np.ndarray
    edges: np.ndarray
    boundary: np.ndarray
    wall: np.ndarray
    polygon: Optional[tuple] = None
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_sites(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def site_index(self, coord) -> int:
        if not self._index:
            object.__setattr__(
                self, "_index", {tuple(c): i for i, c in enumerate(self.coords)}
            )
        return self._index[tuple(coord)]

    def exterior_coord(self, site: int, mu: int) -> np.ndarray:
        step = np.zeros(self.d, dtype=np.int64)
        axis = mu % self.d
        step[axis] = 1 if mu < self.d else -1
        return self.coords[site] + step

    def exterior_boundary(self) -> np.ndarray:
        """Exterior boundary ∂Λ: coordinates outside adjacent to a site."""
        if self.boundary.size == 0:
            return np.empty((0, self.d), dtype=np.int64)
        ext = {
            tuple(self.exterior_coord(s, mu)) for s, mu in self.boundary
        }
        return np.array(sorted(ext), dtype=np.int64)

    def describe(self) -> dict:
        out = {"shape": self.shape, "d": self.d, "N": self.N}
        if self.M is not None:
            out["M"] = self.M
        if self.polygon is not None:
            out["polygon"] = [list(v) for v in self.polygon]
        if self.shape == "box":
            out["dims"] = list(self.dims)
        return out


def _grid_coords(lows, highs):
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in zip(lows, highs)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _point_in_polygon(pt, verts) -> bool:
    """Closed-polygon membership (boundary counts as inside)."""
    x, y = float(pt[0]), float(pt[1])
    n = len(verts)
    inside = False
    for k in range(n):
        x1, y1 = verts[k]
        x2, y2 = verts[(k + 1) % n]
        # on-edge test via cross/dot products
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        if abs(cross) < 1e-12 * max(1.0, abs(x2 - x1) + abs(y2 - y1)):
            if min(x1, x2) - 1e-12 <= x <= max(x1, x2) + 1e-12 and min(
                y1, y2
            ) - 1e-12 <= y <= max(y1, y2) + 1e-12:
                return True
        if (y1 > y) != (y2 > y):
            xs = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xs > x:
                inside = not inside
    return inside


def _finish_site_graph(shape, d, N, M, dims, coords, polygon=None):
    index = {tuple(c): i for i, c in enumerate(coords)}
    n = coords.shape[0]
    nbr = np.full((n, 2 * d), -1, dtype=np.int64)
    b_site, b_mu = [], []
    edges = []
    for i in range(n):
        c = coords[i]
        for mu in range(2 * d):
            axis = mu % d
            step = 1 if mu < d else -1
            cc = c.copy()
            cc[axis] += step
            j = index.get(tuple(cc), -1)
            nbr[i, mu] = j
            if mu < d:
                if j >= 0:
                    edges.append((i, j))
                else:
                    b_site.append(i)
                    b_mu.append(mu)
            elif j < 0:
                b_site.append(i)
                b_mu.append(mu)
    boundary = (
        np.stack([np.array(b_site), np.array(b_mu)], axis=1).astype(np.int64)
        if b_site
        else np.empty((0, 2), dtype=np.int64)
    )
    wall_sites = (
        np.nonzero(coords[:, d - 1] == 0)[0].astype(np.int64)
        if shape == "slab"
        else np.empty(0, dtype=np.int64)
    )
    return LatticeGeometry(
        shape=shape,
        d=d,
        N=N,
        M=M,
        dims=tuple(dims),
        coords=coords,
        nbr=nbr,
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        boundary=boundary,
        wall=wall_sites,
        polygon=polygon,
    )


def build_lattice(
    shape: str,
    N: int,
    d: int = 2,
    M: Optional[int] = None,
    dims: Optional[Sequence[int]] = None,
    polygon=None,
) -> LatticeGeometry:
    """Build a lattice region.

    shape "torus":     {0..N-1}^d with wrap-around adjacency.
    shape "box":       centered box; `dims` overrides the extents
                       (defaults to N^d), used for Lambda(N, M) strips.
    shape "slab":      {-N..N}^{d-1} x {0..M} with the wall at x_d = 0.
    shape "wulff_box": sites of Z^2 whose centers lie in the closed
                       polygon N*K (polygon = unit-area Wulff shape K_1,
                       counterclockwise vertex list).
    """
    if N < 2:
        raise ValueError("N >= 2 required")
    if shape == "torus":
        coords = _grid_coords([0] * d, [N - 1] * d)
        n = coords.shape[0]
        strides = np.array([N ** (d - 1 - k) for k in range(d)], dtype=np.int64)
        nbr = np.empty((n, 2 * d), dtype=np.int64)
        edges = []
        for i in range(n):
            c = coords[i]
            for mu in range(2 * d):
                axis = mu % d
                step = 1 if mu < d else -1
                cc = c.copy()
                cc[axis] = (cc[axis] + step) % N
                j = int(np.dot(cc, strides))
                nbr[i, mu] = j
                if mu < d:
                    edges.append((i, j))
        return LatticeGeometry(
            shape="torus",
            d=d,
            N=N,
            M=None,
            dims=(N,) * d,
            coords=coords,
            nbr=nbr,
            edges=np.array(edges, dtype=np.int64),
            boundary=np.empty((0, 2), dtype=np.int64),
            wall=np.empty(0, dtype=np.int64),
        )
    if shape == "box":
        ext = tuple(int(x) for x in (dims if dims is not None else (N,) * d))
        if any(x < 1 for x in ext):
            raise ValueError("box extents must be positive")
        lows = [-(x - 1) // 2 for x in ext]
        highs = [lo + x - 1 for lo, x in zip(lows, ext)]
        coords = _grid_coords(lows, highs)
        return _finish_site_graph("box", d, N, M, ext, coords)
    if shape == "slab":
        if M is None:
            raise ValueError("slab needs M")
        lows = [-N] * (d - 1) + [0]
        highs = [N] * (d - 1) + [M]
        coords = _grid_coords(lows, highs)
        ext = tuple(2 * N + 1 for _ in range(d - 1)) + (M + 1,)
        return _finish_site_graph("slab", d, N, M, ext, coords)
    if shape == "custom":
        raise ValueError("use custom_region() for explicit site sets")
    if shape == "wulff_box":
        if d != 2:
            raise ValueError("wulff_box is 2D only")
        if polygon is None:
            raise ValueError("wulff_box needs the unit-volume polygon")
        verts = [(float(x), float(y)) for x, y in polygon]
        if len(verts) < 3:
            raise ValueError("polygon needs >= 3 vertices")
        area2 = sum(
            verts[k][0] * verts[(k + 1) % len(verts)][1]
            - verts[(k + 1) % len(verts)][0] * verts[k][1]
            for k in range(len(verts))
        )
        if area2 <= 0:
            raise ValueError("polygon must be simple and counterclockwise")
        scaled = [(N * x, N * y) for x, y in verts]
        xs = [v[0] for v in scaled]
        ys = [v[1] for v in scaled]
        keep = []
        for ix in range(int(np.floor(min(xs))), int(np.ceil(max(xs))) + 1):
            for iy in range(int(np.floor(min(ys))), int(np.ceil(max(ys))) + 1):
                if _point_in_polygon((ix, iy), scaled):
                    keep.append((ix, iy))
        if not keep:
            raise ValueError("scaled polygon contains no lattice sites")
        coords = np.array(sorted(keep), dtype=np.int64)
        return _finish_site_graph(
            "wulff_box", 2, N, None, (N, N), coords, polygon=tuple(verts)
        )
    raise ValueError(f"unknown shape {shape!r}")


def custom_region(coords) -> LatticeGeometry:
    """Box-like geometry over an explicit 2D site set (oracle domains)."""
    arr = np.array(sorted({(int(x), int(y)) for x, y in coords}), dtype=np.int64)
    if arr.shape[0] < 1:
        raise ValueError("empty region")
    span = int(max(arr.max(axis=0) - arr.min(axis=0)) + 1)
    return _finish_site_graph("custom", 2, max(span, 2), None, (span, span), arr)


# ---------------------------------------------------------------------------
# configurations


@dataclass
class SpinConfig:
    """+-1 spin field on a geometry, with its boundary-condition context."""

    geom: LatticeGeometry
    spins: np.ndarray
    bc: BoundaryCondition

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8)
        if self.spins.shape != (self.geom.n_sites,):
            raise ValueError("spin array does not match geometry")
        if not np.all(np.abs(self.spins) == 1):
            raise ValueError("spins must be +-1")

    @staticmethod
    def constant(geom, value, bc) -> "SpinConfig":
        return SpinConfig(geom, np.full(geom.n_sites, value, dtype=np.int8), bc)

    @staticmethod
    def random(geom, bc, rng) -> "SpinConfig":
        g = rng.generator() if hasattr(rng, "generator") else rng
        spins = g.integers(0, 2, size=geom.n_sites).astype(np.int8) * 2 - 1
        return SpinConfig(geom, spins, bc)

    def copy(self) -> "SpinConfig":
        return SpinConfig(self.geom, self.spins.copy(), self.bc)


@dataclass
class BondConfig:
    """Open/closed edge field for FK or Bernoulli percolation.

    `edges` is the edge universe [Lambda]_e^pi for the wiring pi; rows may
    reference the ghost site geom.n_sites (wired boundary).  `bonds` holds
    one 0/1 entry per edge row.
    """

    geom: LatticeGeometry
    edges: np.ndarray
    bonds: np.ndarray
    wiring: str

    def __post_init__(self):
        self.bonds = np.asarray(self.bonds, dtype=np.uint8)
        if self.bonds.shape != (self.edges.shape[0],):
            raise ValueError("bond array does not match edge universe")

    @property
    def ghost(self) -> int:
        return self.geom.n_sites

    def cluster_labels(self) -> np.ndarray:
        """Root label per site (ghost included as the last entry)."""
        from ._kernels import union_find_labels

        return union_find_labels(
            self.geom.n_sites + 1, self.edges, self.bonds.astype(np.uint8)
        )

    def cluster_count(self, exclude_ghost=True) -> int:
        """Number of pi-clusters; the ghost cluster is not counted."""
        labels = self.cluster_labels()
        n = self.geom.n_sites
        roots = np.unique(labels[:n])
        if exclude_ghost and self.wiring != "free" and self.wiring != "periodic":
            ghost_root = labels[n]
            return int(np.sum(roots != ghost_root))
        return int(roots.size)


def fk_edges(geom: LatticeGeometry, wiring: str) -> np.ndarray:
    """Edge universe for a wiring pi.

    "free":      internal bonds only
    "periodic":  torus bonds (geometry must be a torus)
    "wired":     internal bonds + boundary bonds attached to one ghost site
    "mixed:k":   wired except on the two faces orthogonal to axis k
    """
    if wiring == "periodic":
        if geom.shape != "torus":
            raise ValueError("periodic wiring needs a torus")
        return geom.edges.copy()
    if wiring == "free":
        return geom.edges.copy()
    if wiring == "wired" or wiring.startswith("mixed:"):
        if geom.shape == "torus":
            raise ValueError("wired wiring needs a boundary")
        ghost = geom.n_sites
        rows = [geom.edges]
        skip_axis = int(wiring.split(":")[1]) if wiring.startswith("mixed:") else None
        extra = []
        for s, mu in geom.boundary:
            if skip_axis is not None and (mu % geom.d) == skip_axis:
                continue
            extra.append((s, ghost))
        if extra:
            rows.append(np.array(extra, dtype=np.int64))
        return np.concatenate(rows, axis=0)
    raise ValueError(f"unknown wiring {wiring!r}")


# ---------------------------------------------------------------------------
# energy and magnetization


def _boundary_pairs(geom, bc):
    """(site, exterior spin) rows for the bonds crossing the boundary."""
    if not bc.has_exterior or geom.boundary.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    out = np.empty((geom.boundary.shape[0], 2), dtype=np.int64)
    for r, (s, mu) in enumerate(geom.boundary):
        out[r, 0] = s
        out[r, 1] = bc.exterior_spin(geom.exterior_coord(int(s), int(mu)))
    return out


def hamiltonian(
    config: SpinConfig,
    coupling: CouplingSpec,
    h: float = 0.0,
    eta: Optional[float] = None,
) -> float:
    """Energy H = -sum J ss - h sum s - eta sum_wall s (dimensionless).

    Bonds crossing the boundary are included for plus/minus/mixed bc and
    excluded for free bc.  For a wall_field bc the eta defaults to the
    bc's own field strength.
    """
    geom, bc = config.geom, config.bc
    s = config.spins.astype(np.int64)
    if eta is None:
        eta = bc.eta if bc.tag == "wall_field" else 0.0
    if coupling.model == "nn":
        e = geom.edges
        bond_sum = float(np.sum(s[e[:, 0]] * s[e[:, 1]]))
        for site, ext in _boundary_pairs(geom, bc):
            bond_sum += float(s[site] * ext)
        energy = -bond_sum
    else:
        if geom.shape == "torus" and geom.N <= 2 * coupling.range:
            raise ValueError("torus too small for the interaction range")
        index = {tuple(c): i for i, c in enumerate(geom.coords)}
        energy = 0.0
        for off, j in coupling.half_offsets(geom.d):
            off = np.array(off, dtype=np.int64)
            for i in range(geom.n_sites):
                cc = geom.coords[i] + off
                if geom.shape == "torus":
                    cc = np.mod(cc, geom.N)
                    energy -= j * float(s[i] * s[index[tuple(cc)]])
                else:
                    partner = index.get(tuple(cc))
                    if partner is not None:
                        energy -= j * float(s[i] * s[partner])
                    elif bc.has_exterior:
                        energy -= j * float(s[i] * bc.exterior_spin(cc))
                # mirror bond from outside into the box
                if geom.shape != "torus" and bc.has_exterior:
                    cc2 = geom.coords[i] - off
                    if tuple(cc2) not in index:
                        energy -= j * float(s[i] * bc.exterior_spin(cc2))
    energy -= h * float(np.sum(s))
    if eta and geom.wall.size:
        energy -= eta * float(np.sum(s[geom.wall]))
    return energy


def magnetization(config: SpinConfig, region=None):
    """Total magnetization and density over a site subset (default: all)."""
    if region is None:
        sel = config.spins
    else:
        region = np.asarray(region, dtype=np.int64)
        if region.size == 0:
            raise ValueError("empty region")
        if region.min() < 0 or region.max() >= config.geom.n_sites:
            raise ValueError("region outside geometry")
        sel = config.spins[region]
    total = int(np.sum(sel, dtype=np.int64))
    return total, total / sel.size


# ---------------------------------------------------------------------------
# snapshot serialization


def write_snapshot(path, config, meta: Optional[dict] = None):
    """Portable snapshot: one JSON header line + packed bit array.

    The header records shape, d, N, M, bc and any sampler metadata
    (beta, h, eta, seed); bits follow in site/edge index order.
    """
    meta = dict(meta or {})
    if isinstance(config, SpinConfig):
        kind = "spins"
        bits = (config.spins > 0).astype(np.uint8)
        bc_label = config.bc.label()
        wiring = None
    elif isinstance(config, BondConfig):
        kind = "bonds"
        bits = config.bonds.astype(np.uint8)
        bc_label = None
        wiring = config.wiring
    else:
        raise TypeError("snapshot supports SpinConfig or BondConfig")
    header = {
        "kind": kind,
        "geometry": config.geom.describe(),
        "bc": bc_label,
        "wiring": wiring,
        "n_bits": int(bits.size),
    }
    header.update(meta)
    payload = np.packbits(bits).tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)


def _bc_from_label(label: str) -> BoundaryCondition:
    if label.startswith("mixed_pm("):
        parts = label[len("mixed_pm(") : -1].split(",")
        return BoundaryCondition.mixed_pm([float(x) for x in parts])
    if label.startswith("wall_field("):
        body = label[len("wall_field(") : -1]
        kv = dict(item.split("=") for item in body.split(","))
        return BoundaryCondition.wall_field(float(kv["eta"]), kv["base"])
    return BoundaryCondition(label)


def read_snapshot(path):
    """Inverse of write_snapshot; returns (config, header dict)."""
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.index(b"\n")
    header = json.loads(data[:nl].decode("utf-8"))
    bits = np.unpackbits(np.frombuffer(data[nl + 1 :], dtype=np.uint8))[
        : header["n_bits"]
    ].astype(np.uint8)
    gd = header["geometry"]
    geom = build_lattice(
        gd["shape"],
        gd["N"],
        d=gd["d"],
        M=gd.get("M"),
        dims=gd.get("dims"),
        polygon=gd.get("polygon"),
    )
    if header["kind"] == "spins":
        spins = bits.astype(np.int8) * 2 - 1
        cfg = SpinConfig(geom, spins, _bc_from_label(header["bc"]))
    else:
        edges = fk_edges(geom, header["wiring"])
        cfg = BondConfig(geom, edges, bits, header["wiring"])
    return cfg, header
