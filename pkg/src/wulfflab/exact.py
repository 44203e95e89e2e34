"""Brute-force oracles on tiny instances.

Everything here is exact: Gibbs tables by full spin enumeration, dual-graph
partition sums by cycle-space enumeration, random-line weights by coset
decomposition.  Size caps keep every oracle below a few seconds; exceeding
a cap raises rather than truncating.

The 2D duality bookkeeping: a primal bond with lower-left endpoint (x, y)
and axis 0 (towards (x+1, y)) is crossed by the dual edge between dual
vertices (x+1, y) and (x+1, y+1); axis 1 (towards (x, y+1)) is crossed by
the dual edge between (x, y+1) and (x+1, y+1).  Dual vertex (a, b) sits at
(a - 1/2, b - 1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .lattice import (
    BoundaryCondition,
    CouplingSpec,
    LatticeGeometry,
    SpinConfig,
    hamiltonian,
)

__all__ = [
    "ExactTable",
    "enumerate_gibbs",
    "exact_two_point",
    "DualDomain",
    "dual_domain",
    "verify_duality",
    "contour_weight",
    "random_line_weights",
    "enumerate_random_cluster",
    "tv_distance",
]

MAX_ENUM_SITES = 24
MAX_ENUM_EDGES = 24


# ---------------------------------------------------------------------------
# Gibbs tables


@dataclass
class ExactTable:
    """Exact Gibbs table: configuration bit-key -> probability.

    Bit k of a key is 1 when the spin at site k is +1.
    """

    n_sites: int
    probs: np.ndarray  # indexed by key, length 2**n_sites
    log_z: float
    meta: dict = field(default_factory=dict)

    def prob(self, key: int) -> float:
        return float(self.probs[key])

    def spins_of(self, key: int) -> np.ndarray:
        bits = (key >> np.arange(self.n_sites)) & 1
        return (bits * 2 - 1).astype(np.int8)

    def key_of(self, spins) -> int:
        s = np.asarray(spins)
        return int(np.sum(((s > 0).astype(np.int64)) << np.arange(self.n_sites)))

    def expectation(self, values: np.ndarray) -> float:
        return float(np.dot(self.probs, values))

    def site_values(self) -> np.ndarray:
        """(2^n, n) matrix of +-1 spins for vectorized expectations."""
        keys = np.arange(2**self.n_sites, dtype=np.int64)
        bits = (keys[:, None] >> np.arange(self.n_sites)[None, :]) & 1
        return (bits * 2 - 1).astype(np.int8)

    def magnetizations(self) -> np.ndarray:
        return self.site_values().sum(axis=1)

    def conditioned(self, mask: np.ndarray) -> "ExactTable":
        p = np.where(mask, self.probs, 0.0)
        tot = math.fsum(p.tolist())
        if tot <= 0:
            raise ValueError("conditioning event has zero probability")
        return ExactTable(self.n_sites, p / tot, self.log_z, dict(self.meta))


def enumerate_gibbs(
    geom: LatticeGeometry,
    bc: BoundaryCondition,
    coupling: CouplingSpec,
    h: float = 0.0,
    eta: Optional[float] = None,
) -> ExactTable:
    """Exact Gibbs table over all configurations compatible with bc."""
    n = geom.n_sites
    if n > MAX_ENUM_SITES:
        raise ValueError(f"{n} sites exceeds the enumeration cap {MAX_ENUM_SITES}")
    n_conf = 2**n
    if coupling.model == "nn":
        energies = np.zeros(n_conf, dtype=np.float64)
        chunk = 1 << 16
        e_in = geom.edges
        bpairs = []
        if bc.has_exterior:
            for s_, mu in geom.boundary:
                bpairs.append(
                    (int(s_), bc.exterior_spin(geom.exterior_coord(int(s_), int(mu))))
                )
        eta_val = eta if eta is not None else (bc.eta if bc.tag == "wall_field" else 0.0)
        for start in range(0, n_conf, chunk):
            keys = np.arange(start, min(start + chunk, n_conf), dtype=np.int64)
            bits = (keys[:, None] >> np.arange(n)[None, :]) & 1
            s = (bits * 2 - 1).astype(np.int64)
            e = -np.sum(s[:, e_in[:, 0]] * s[:, e_in[:, 1]], axis=1).astype(np.float64)
            for site, ext in bpairs:
                e -= s[:, site] * ext
            e -= h * s.sum(axis=1)
            if eta_val and geom.wall.size:
                e -= eta_val * s[:, geom.wall].sum(axis=1)
            energies[start : start + keys.size] = e
    else:
        energies = np.empty(n_conf, dtype=np.float64)
        for key in range(n_conf):
            bits = (key >> np.arange(n)) & 1
            cfg = SpinConfig(geom, (bits * 2 - 1).astype(np.int8), bc)
            energies[key] = hamiltonian(cfg, coupling, h=h, eta=eta)
    w = -coupling.beta * energies
    w_max = float(w.max())
    raw = np.exp(w - w_max)
    z = math.fsum(raw.tolist())
    probs = raw / z
    return ExactTable(
        n_sites=n,
        probs=probs,
        log_z=math.log(z) + w_max,
        meta={"beta": coupling.beta, "h": h, "bc": bc.label()},
    )


def exact_two_point(
    geom: LatticeGeometry, bc: BoundaryCondition, beta: float, i: int, j: int
) -> float:
    """<sigma_i sigma_j> by full enumeration."""
    n = geom.n_sites
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError("sites outside the region")
    table = enumerate_gibbs(geom, bc, CouplingSpec.nn(beta))
    s = table.site_values()
    return table.expectation((s[:, i] * s[:, j]).astype(np.float64))


def tv_distance(p: Dict[int, float], q: Dict[int, float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


# ---------------------------------------------------------------------------
# dual graph and cycle space


def _primal_bonds(geom: LatticeGeometry) -> List[Tuple[int, int, int]]:
    """Canonical (x, y, axis) list of all bonds meeting the region."""
    if geom.d != 2:
        raise ValueError("duality machinery is 2D only")
    if geom.shape == "torus":
        raise ValueError("duality oracles need a finite simply connected region")
    bonds = set()
    for a, b in geom.edges:
        ca, cb = geom.coords[a], geom.coords[b]
        lo = ca if tuple(ca) <= tuple(cb) else cb
        axis = 0 if abs(int(ca[0]) - int(cb[0])) == 1 else 1
        bonds.add((int(lo[0]), int(lo[1]), axis))
    for s_, mu in geom.boundary:
        c = geom.coords[s_].copy()
        axis = int(mu) % 2
        if int(mu) >= 2:  # negative direction: exterior is the lower end
            c[axis] -= 1
        bonds.add((int(c[0]), int(c[1]), axis))
    return sorted(bonds)


def _dual_endpoints(bond) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    x, y, axis = bond
    if axis == 0:
        return (x + 1, y), (x + 1, y + 1)
    return (x, y + 1), (x + 1, y + 1)


@dataclass
class DualDomain:
    """Dual graph of a simply connected 2D region, with cycle space.

    Even subgraphs are enumerated as XOR combinations of fundamental
    cycles over a spanning forest, represented as edge bitmasks.
    """

    coords: List[Tuple[int, int]]
    edges: np.ndarray  # (m, 2) dual site indices
    index: Dict[Tuple[int, int], int]
    _tree_parent: np.ndarray = field(repr=False, default=None)
    _tree_edge: np.ndarray = field(repr=False, default=None)
    _cycles: List[int] = field(repr=False, default=None)

    @property
    def n_sites(self) -> int:
        return len(self.coords)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def _build_tree(self):
        n, m = self.n_sites, self.n_edges
        parent = np.full(n, -1, dtype=np.int64)
        pedge = np.full(n, -1, dtype=np.int64)
        adj: List[List[Tuple[int, int]]] = [[] for _ in range(n)]
        for e in range(m):
            a, b = int(self.edges[e, 0]), int(self.edges[e, 1])
            adj[a].append((b, e))
            adj[b].append((a, e))
        seen = np.zeros(n, dtype=bool)
        tree_edges = set()
        for root in range(n):
            if seen[root]:
                continue
            seen[root] = True
            stack = [root]
            while stack:
                v = stack.pop()
                for w, e in adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        parent[w] = v
                        pedge[w] = e
                        tree_edges.add(e)
                        stack.append(w)
        cycles = []
        for e in range(m):
            if e in tree_edges:
                continue
            a, b = int(self.edges[e, 0]), int(self.edges[e, 1])
            mask = 1 << e
            pa = self._path_to_root_mask(a, parent, pedge)
            pb = self._path_to_root_mask(b, parent, pedge)
            mask ^= pa ^ pb
            cycles.append(mask)
        self._tree_parent = parent
        self._tree_edge = pedge
        self._cycles = cycles

    @staticmethod
    def _path_to_root_mask(v, parent, pedge) -> int:
        mask = 0
        while parent[v] >= 0:
            mask ^= 1 << int(pedge[v])
            v = int(parent[v])
        return mask

    def _ensure_tree(self):
        if self._cycles is None:
            self._build_tree()

    def tree_path_mask(self, i: int, j: int) -> int:
        """Edge mask of the spanning-tree path between dual sites i, j."""
        self._ensure_tree()
        pa = self._path_to_root_mask(i, self._tree_parent, self._tree_edge)
        pb = self._path_to_root_mask(j, self._tree_parent, self._tree_edge)
        mask = pa ^ pb
        if mask == 0 and i != j:
            raise ValueError("dual sites in different components")
        return mask

    def even_masks(self) -> Iterable[int]:
        """All even subgraphs (cycle space)."""
        self._ensure_tree()
        r = len(self._cycles)
        if self.n_edges > MAX_ENUM_EDGES:
            raise ValueError("dual graph exceeds the enumeration cap")
        for combo in range(1 << r):
            mask = 0
            c = combo
            k = 0
            while c:
                if c & 1:
                    mask ^= self._cycles[k]
                c >>= 1
                k += 1
            yield mask

    def coset_masks(self, i: int, j: int) -> Iterable[int]:
        """All subgraphs whose odd-degree set is exactly {i, j}."""
        base = self.tree_path_mask(i, j)
        for mask in self.even_masks():
            yield mask ^ base

    def even_sum(self, x: float, excluded_sites: Iterable[int] = ()) -> float:
        """sum over even subgraphs avoiding the excluded dual sites of
        x^{edge count}; this is the polygon partition sum Z(Lambda*|...)."""
        excl = set(int(v) for v in excluded_sites)
        if not excl:
            terms = [x ** int(bin(m).count("1")) for m in self.even_masks()]
            return math.fsum(terms)
        # restrict to the subgraph avoiding the excluded sites, then
        # enumerate its own cycle space
        keep_edges = [
            e
            for e in range(self.n_edges)
            if int(self.edges[e, 0]) not in excl and int(self.edges[e, 1]) not in excl
        ]
        sub = DualDomain(
            coords=self.coords,
            edges=self.edges[keep_edges].reshape(-1, 2),
            index=self.index,
        )
        terms = [x ** int(bin(m).count("1")) for m in sub.even_masks()]
        return math.fsum(terms)

    def mask_edges(self, mask: int) -> List[int]:
        return [e for e in range(self.n_edges) if (mask >> e) & 1]

    def odd_component(self, mask: int, i: int, j: int) -> Tuple[int, int]:
        """Split a coset member into (open component mask, closed rest)."""
        edges = self.mask_edges(mask)
        adj: Dict[int, List[Tuple[int, int]]] = {}
        for e in edges:
            a, b = int(self.edges[e, 0]), int(self.edges[e, 1])
            adj.setdefault(a, []).append((b, e))
            adj.setdefault(b, []).append((a, e))
        seen_sites = set()
        open_mask = 0
        stack = [i]
        seen_sites.add(i)
        comp_edges = set()
        while stack:
            v = stack.pop()
            for w, e in adj.get(v, ()):
                if e not in comp_edges:
                    comp_edges.add(e)
                if w not in seen_sites:
                    seen_sites.add(w)
                    stack.append(w)
        for e in comp_edges:
            open_mask |= 1 << e
        return open_mask, mask ^ open_mask


def dual_domain(geom: LatticeGeometry) -> DualDomain:
    """Dual graph Lambda* of a finite simply connected 2D region."""
    bonds = _primal_bonds(geom)
    sites: Dict[Tuple[int, int], int] = {}
    rows = []
    for bond in bonds:
        u, v = _dual_endpoints(bond)
        for c in (u, v):
            if c not in sites:
                sites[c] = len(sites)
        rows.append((sites[u], sites[v]))
    coords = [None] * len(sites)
    for c, k in sites.items():
        coords[k] = c
    return DualDomain(
        coords=coords, edges=np.array(rows, dtype=np.int64), index=dict(sites)
    )


def is_simply_connected(geom: LatticeGeometry) -> bool:
    """Site set connected and without holes (flood fill of the complement)."""
    coords = geom.coords
    occ = set(map(tuple, coords.tolist()))
    lo = coords.min(axis=0) - 1
    hi = coords.max(axis=0) + 1
    # connectivity of the region itself
    start = tuple(coords[0])
    stack, seen = [start], {start}
    while stack:
        x, y = stack.pop()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            c = (x + dx, y + dy)
            if c in occ and c not in seen:
                seen.add(c)
                stack.append(c)
    if len(seen) != len(occ):
        return False
    # complement reachable from the outside frame
    total = (hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) - len(occ)
    start = (int(lo[0]), int(lo[1]))
    stack, seen = [start], {start}
    while stack:
        x, y = stack.pop()
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            c = (x + dx, y + dy)
            if (
                lo[0] <= c[0] <= hi[0]
                and lo[1] <= c[1] <= hi[1]
                and c not in occ
                and c not in seen
            ):
                seen.add(c)
                stack.append(c)
    return len(seen) == total


# ---------------------------------------------------------------------------
# duality checks and random-line weights


def _all_spin_matrix(n: int) -> np.ndarray:
    keys = np.arange(2**n, dtype=np.int64)
    bits = (keys[:, None] >> np.arange(n)[None, :]) & 1
    return (bits * 2 - 1).astype(np.int8)


def verify_duality(geom: LatticeGeometry, beta: float, compute_c: bool = True) -> dict:
    """Check the low-temperature / high-temperature partition identity.

    lhs: sum over spin configurations with plus bc of exp(-2 beta b(sigma)),
    b = number of broken bonds (boundary bonds included).
    rhs: polygon sum over even dual subgraphs of tanh(beta*)^{edges} with
    tanh(beta*) = exp(-2 beta).  With compute_c, also reports the
    empirical constant relating the dual free-bc spin partition function
    to the polygon sum.
    """
    if beta <= 0:
        raise ValueError("beta > 0 required")
    if not is_simply_connected(geom):
        raise ValueError("duality identity requires a simply connected region")
    dual = dual_domain(geom)
    if dual.n_sites > 16:
        raise ValueError("dual graph exceeds the 16-site oracle cap")
    n = geom.n_sites
    x = math.exp(-2.0 * beta)
    # lhs by (vectorized) spin enumeration
    s = _all_spin_matrix(n).astype(np.int64)
    e_in = geom.edges
    broken = np.zeros(s.shape[0], dtype=np.int64)
    if e_in.size:
        broken += np.sum(s[:, e_in[:, 0]] * s[:, e_in[:, 1]] == -1, axis=1)
    for s_, mu in geom.boundary:
        broken += s[:, int(s_)] == -1  # plus bc exterior
    lhs = math.fsum((x ** broken.astype(np.float64)).tolist())
    # rhs by cycle-space enumeration on the dual graph
    rhs = dual.even_sum(x)
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
    beta_star = math.atanh(x)
    report = {
        "beta": float(beta),
        "beta_star": float(beta_star),
        "lhs_contour_sum": float(lhs),
        "rhs_polygon_sum": float(rhs),
        "max_rel_err": float(rel),
    }
    if compute_c and dual.n_sites <= MAX_ENUM_SITES:
        ds = _all_spin_matrix(dual.n_sites).astype(np.int64)
        de = dual.edges
        align = np.sum(ds[:, de[:, 0]] * ds[:, de[:, 1]], axis=1).astype(np.float64)
        z_spin = math.fsum(np.exp(beta_star * align).tolist())
        report["c_lambda_empirical"] = float(z_spin / rhs)
        report["c_lambda_formula"] = float(
            (2**dual.n_sites) * math.cosh(beta_star) ** dual.n_edges
        )
    return report


def _path_mask_from_sites(dual: DualDomain, path_sites) -> int:
    """Edge mask of a self-avoiding dual path given as site coordinates."""
    idx = [dual.index[tuple(p)] for p in path_sites]
    closed = len(idx) > 1 and idx[0] == idx[-1]
    if closed:
        if len(set(idx[:-1])) != len(idx) - 1:
            raise ValueError("loop is not self-avoiding")
    elif len(set(idx)) != len(idx):
        raise ValueError("path is not self-avoiding")
    edge_of = {}
    for e in range(dual.n_edges):
        a, b = int(dual.edges[e, 0]), int(dual.edges[e, 1])
        edge_of[(a, b)] = e
        edge_of[(b, a)] = e
    mask = 0
    for a, b in zip(idx[:-1], idx[1:]):
        e = edge_of.get((a, b))
        if e is None:
            raise ValueError("path leaves the dual graph")
        if (mask >> e) & 1:
            raise ValueError("path repeats an edge")
        mask |= 1 << e
    return mask


def contour_weight(dual: DualDomain, beta_star: float, path_sites) -> float:
    """q weight of a dual path or loop: w*(lambda) Z(L*|lambda)/Z(L*).

    `path_sites` is a site-coordinate sequence; a closed loop repeats its
    first site at the end.  The empty family returns 1.
    """
    x = math.tanh(beta_star)
    if path_sites is None or len(path_sites) == 0:
        return 1.0
    mask = _path_mask_from_sites(dual, path_sites)
    n_edges = int(bin(mask).count("1"))
    sites = set()
    for e in dual.mask_edges(mask):
        sites.add(int(dual.edges[e, 0]))
        sites.add(int(dual.edges[e, 1]))
    z_full = dual.even_sum(x)
    z_cond = dual.even_sum(x, excluded_sites=sites)
    return (x**n_edges) * z_cond / z_full


def random_line_weights(dual: DualDomain, beta_star: float, i: int, j: int):
    """All open-contour weights between dual sites i and j.

    Returns (total, per_contour) where per_contour maps the open
    component's edge mask to its aggregated q weight; total equals the
    free-bc two-point function of the dual model at beta_star.
    """
    if i == j:
        raise ValueError("distinct dual sites required")
    x = math.tanh(beta_star)
    z_full = dual.even_sum(x)
    groups: Dict[int, List[float]] = {}
    for mask in dual.coset_masks(i, j):
        w = x ** int(bin(mask).count("1"))
        open_mask, _ = dual.odd_component(mask, i, j)
        groups.setdefault(open_mask, []).append(w)
    per = {k: math.fsum(v) / z_full for k, v in groups.items()}
    total = math.fsum(per.values())
    return total, per


# ---------------------------------------------------------------------------
# tiny random-cluster tables


def enumerate_random_cluster(
    edges: np.ndarray, n_sites: int, p: float, q: float, ghost: Optional[int] = None
):
    """Exact random-cluster table on an explicit edge list.

    Returns dict bond-mask -> probability; the cluster count excludes the
    ghost cluster when a ghost node is given (wired boundary rule).
    """
    from ._kernels import union_find_labels

    m = edges.shape[0]
    if m > MAX_ENUM_EDGES:
        raise ValueError("edge count exceeds the enumeration cap")
    n_nodes = n_sites + (1 if ghost is not None else 0)
    weights = np.empty(2**m, dtype=np.float64)
    for mask in range(2**m):
        bonds = np.array([(mask >> e) & 1 for e in range(m)], dtype=np.uint8)
        labels = union_find_labels(n_nodes, edges, bonds)
        roots = set(int(r) for r in labels[:n_sites])
        if ghost is not None:
            ghost_root = int(labels[ghost])
            c = len(roots - {ghost_root})
        else:
            c = len(roots)
        o = int(bonds.sum())
        weights[mask] = (p**o) * ((1 - p) ** (m - o)) * (q**c)
    z = math.fsum(weights.tolist())
    return {mask: float(weights[mask] / z) for mask in range(2**m)}
