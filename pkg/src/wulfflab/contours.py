"""Microscopic phase boundaries: contours, skeletons, droplet statistics.

Dual bookkeeping (2D nearest-neighbor only): the dual vertex (a, b) sits at
(a - 1/2, b - 1/2); the bond with lower-left endpoint (x, y) along axis 0
is crossed by the dual edge {(x+1, y), (x+1, y+1)}, along axis 1 by
{(x, y+1), (x+1, y+1)}.  A contour is a maximal connected component of
broken-bond dual edges; its boundary is the set of odd-degree dual sites.

Degree-4 dual vertices are resolved by a fixed corner split -- entering
from the south exits east, entering from the north exits west -- which
turns every component into edge-disjoint simple loops without changing the
component decomposition used for counting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import ConvexPolygon
from .lattice import LatticeGeometry, SpinConfig

__all__ = [
    "Contour",
    "Skeleton",
    "SkeletonError",
    "extract_contours",
    "classify_large",
    "split_simple_loops",
    "enclosed_area",
    "reconstruct_spins",
    "extract_skeleton",
    "skeleton_conforms",
    "skeleton_energy",
    "vertex_bound_check",
    "boundary_hausdorff",
    "droplet_statistics",
    "minimal_section_diagnostic",
]


# dual edge canonical form: (a, b, o); o = 0 joins (a,b)-(a+1,b), o = 1
# joins (a,b)-(a,b+1)


@dataclass
class Contour:
    """Maximal connected component of broken-bond dual edges."""

    edges: frozenset
    vertices: frozenset
    boundary: tuple  # odd-degree dual sites
    diam_inf: int
    wraps: bool = False
    geom: Optional[LatticeGeometry] = None

    @property
    def closed(self) -> bool:
        return len(self.boundary) == 0

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass
class Skeleton:
    """Polygonal proxy (u_1..u_n) of a contour at scale s."""

    vertices: np.ndarray
    scale: int
    degenerate: bool = False

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    def polygon_points(self) -> np.ndarray:
        return self.vertices.astype(np.float64)


class SkeletonError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# extraction


def _broken_dual_edges(config: SpinConfig) -> List[Tuple[int, int, int]]:
    geom, bc = config.geom, config.bc
    if geom.d != 2:
        raise ValueError("contours are 2D nearest-neighbor objects")
    s = config.spins
    out = []
    if geom.shape == "torus":
        n = geom.N
        idx = lambda x, y: (x % n) * n + (y % n)
        for i in range(geom.n_sites):
            x, y = geom.coords[i]
            if s[i] != s[idx(x + 1, y)]:
                out.append((int(x + 1), int(y), 1))
            if s[i] != s[idx(x, y + 1)]:
                out.append((int(x), int(y + 1), 0))
        # canonical wrap of dual coordinates into {0..n-1}
        return [(a % n, b % n, o) for (a, b, o) in out]
    for a, b in geom.edges:
        if s[a] != s[b]:
            ca, cb = geom.coords[a], geom.coords[b]
            lo = ca if tuple(ca) <= tuple(cb) else cb
            if abs(int(ca[0]) - int(cb[0])) == 1:
                out.append((int(lo[0]) + 1, int(lo[1]), 1))
            else:
                out.append((int(lo[0]), int(lo[1]) + 1, 0))
    if bc.has_exterior:
        for site, mu in geom.boundary:
            c = geom.coords[site].copy()
            ext = bc.exterior_spin(geom.exterior_coord(int(site), int(mu)))
            if s[site] == ext:
                continue
            axis = int(mu) % 2
            if int(mu) >= 2:
                c[axis] -= 1
            if axis == 0:
                out.append((int(c[0]) + 1, int(c[1]), 1))
            else:
                out.append((int(c[0]), int(c[1]) + 1, 0))
    return out


def _edge_endpoints(e, torus_n: Optional[int] = None):
    a, b, o = e
    if o == 0:
        u, v = (a, b), (a + 1, b)
    else:
        u, v = (a, b), (a, b + 1)
    if torus_n:
        u = (u[0] % torus_n, u[1] % torus_n)
        v = (v[0] % torus_n, v[1] % torus_n)
    return u, v


def _component_diam(vertices, torus_n: Optional[int]) -> Tuple[int, bool]:
    xs = sorted(set(v[0] for v in vertices))
    ys = sorted(set(v[1] for v in vertices))
    if not torus_n:
        return max(xs[-1] - xs[0], ys[-1] - ys[0]), False
    spans = []
    wraps = False
    for vals in (xs, ys):
        if len(vals) == torus_n:
            spans.append(torus_n)
            wraps = True
            continue
        gaps = [
            vals[(k + 1) % len(vals)] - vals[k] if k + 1 < len(vals) else vals[0] + torus_n - vals[k]
            for k in range(len(vals))
        ]
        spans.append(torus_n - max(gaps))
    return max(spans), wraps


def extract_contours(config: SpinConfig) -> List[Contour]:
    """Maximal connected components of the broken-bond dual edges."""
    geom = config.geom
    torus_n = geom.N if geom.shape == "torus" else None
    edges = _broken_dual_edges(config)
    if not edges:
        return []
    incident: Dict[Tuple[int, int], List[int]] = {}
    ends = []
    for k, e in enumerate(edges):
        u, v = _edge_endpoints(e, torus_n)
        ends.append((u, v))
        incident.setdefault(u, []).append(k)
        incident.setdefault(v, []).append(k)
    seen = [False] * len(edges)
    out = []
    for start in range(len(edges)):
        if seen[start]:
            continue
        comp_edges = []
        stack = [start]
        seen[start] = True
        comp_sites = set()
        while stack:
            k = stack.pop()
            comp_edges.append(k)
            for site in ends[k]:
                if site in comp_sites:
                    continue
                comp_sites.add(site)
                for k2 in incident[site]:
                    if not seen[k2]:
                        seen[k2] = True
                        stack.append(k2)
        degree: Dict[Tuple[int, int], int] = {}
        for k in comp_edges:
            for site in ends[k]:
                degree[site] = degree.get(site, 0) + 1
        bdry = tuple(sorted(s_ for s_, d in degree.items() if d % 2 == 1))
        diam, wraps = _component_diam(list(comp_sites), torus_n)
        out.append(
            Contour(
                edges=frozenset(edges[k] for k in comp_edges),
                vertices=frozenset(comp_sites),
                boundary=bdry,
                diam_inf=int(diam),
                wraps=wraps,
                geom=geom,
            )
        )
    return out


def classify_large(contours: Sequence[Contour], s: float):
    """Partition by the infinity-diameter threshold: large iff diam > s."""
    if s < 1:
        raise ValueError("s >= 1 required")
    large = [c for c in contours if c.diam_inf > s]
    small = [c for c in contours if c.diam_inf <= s]
    return large, small


# ---------------------------------------------------------------------------
# corner-rounded loop tracing


def _incident_by_direction(vertex, torus_n):
    """Canonical incident dual edges of a vertex, keyed E/N/W/S."""
    a, b = vertex
    if torus_n:
        return {
            "E": (a, b, 0),
            "N": (a, b, 1),
            "W": ((a - 1) % torus_n, b, 0),
            "S": (a, (b - 1) % torus_n, 1),
        }
    return {
        "E": (a, b, 0),
        "N": (a, b, 1),
        "W": (a - 1, b, 0),
        "S": (a, b - 1, 1),
    }


def split_simple_loops(contour: Contour) -> List[List[Tuple[int, int]]]:
    """Deterministic corner-rounded split into edge-disjoint simple loops.

    The transition system pairs, at each even-degree vertex, either the
    two incident edges (degree 2) or south-with-east and north-with-west
    (degree 4); following the pairing decomposes the contour into
    non-crossing loops.  Only defined for closed contours.
    """
    if not contour.closed:
        raise ValueError("loop splitting needs a closed contour")
    torus_n = (
        contour.geom.N if (contour.geom and contour.geom.shape == "torus") else None
    )
    edge_set = set(contour.edges)
    partner: Dict[Tuple[Tuple[int, int], Tuple[int, int, int]], Tuple[int, int, int]] = {}
    for v in contour.vertices:
        inc = {
            d: e for d, e in _incident_by_direction(v, torus_n).items() if e in edge_set
        }
        if len(inc) == 2:
            (e1, e2) = list(inc.values())
            partner[(v, e1)] = e2
            partner[(v, e2)] = e1
        elif len(inc) == 4:
            partner[(v, inc["S"])] = inc["E"]
            partner[(v, inc["E"])] = inc["S"]
            partner[(v, inc["N"])] = inc["W"]
            partner[(v, inc["W"])] = inc["N"]
        else:
            raise SkeletonError(f"odd degree {len(inc)} at {v} in a closed contour")
    unused = set(edge_set)
    loops = []
    while unused:
        e0 = min(unused)
        u0, v = _edge_endpoints(e0, torus_n)
        loop = [u0]
        edge, vertex = e0, v
        while True:
            unused.discard(edge)
            loop.append(vertex)
            nxt = partner[(vertex, edge)]
            a, b = _edge_endpoints(nxt, torus_n)
            vertex = b if a == vertex else a
            edge = nxt
            if edge == e0:
                break
        if loop[0] == loop[-1]:
            loop = loop[:-1]
        loops.append(loop)
    return loops


# ---------------------------------------------------------------------------
# enclosed area and reconstruction


def enclosed_area(contour: Contour) -> Optional[int]:
    """Number of primal sites enclosed (even-odd filling).

    A site (x, y) is interior iff an odd number of vertical dual edges
    (a, y, o=1) of the contour lie strictly to its right (a > x).  Returns
    None for torus-winding contours, where "interior" is ill-defined.
    """
    if not contour.closed:
        raise ValueError("area needs a closed contour")
    if contour.wraps:
        return None
    edges = contour.edges
    if contour.geom is not None and contour.geom.shape == "torus":
        # unwrap through an empty column and row (exists: not wrapping)
        n = contour.geom.N
        used_a = set(v[0] for v in contour.vertices)
        used_b = set(v[1] for v in contour.vertices)
        free_a = next(a for a in range(n) if a not in used_a)
        free_b = next(b for b in range(n) if b not in used_b)
        edges = frozenset(
            ((a - free_a - 1) % n, (b - free_b - 1) % n, o) for (a, b, o) in edges
        )
    vert = {}
    for (a, b, o) in edges:
        if o == 1:
            vert.setdefault(b, []).append(a)
    if not vert:
        return 0
    area = 0
    for y_row, cols in vert.items():
        cols = sorted(cols)
        # row of primal sites at y = y_row (dual edge (a, y, 1) spans
        # primal row y); crossings strictly right of x are cols > x
        if len(cols) % 2 != 0:
            raise SkeletonError("odd crossing parity in a closed contour")
        for k in range(0, len(cols), 2):
            area += cols[k + 1] - cols[k]
    return area


def reconstruct_spins(geom: LatticeGeometry, contours: Sequence[Contour]) -> np.ndarray:
    """Spins от plus bc from a family of closed contours.

    sigma(x, y) = (+1) * (-1)^{crossings right of x}, using all contour
    edges together (even-odd of the union).
    """
    vert: Dict[int, List[int]] = {}
    for c in contours:
        for (a, b, o) in c.edges:
            if o == 1:
                vert.setdefault(b, []).append(a)
    spins = np.ones(geom.n_sites, dtype=np.int8)
    for i in range(geom.n_sites):
        x, y = int(geom.coords[i][0]), int(geom.coords[i][1])
        cols = vert.get(y, ())
        crossings = sum(1 for a in cols if a > x)
        if crossings % 2 == 1:
            spins[i] = -1
    return spins


# ---------------------------------------------------------------------------
# skeletons


def _loop_through_lex_min(contour: Contour) -> List[Tuple[int, int]]:
    loops = split_simple_loops(contour)
    lexmin = min(contour.vertices)
    for loop in loops:
        if lexmin in loop:
            return loop
    # fall back to the longest loop
    return max(loops, key=len)


def extract_skeleton(contour: Contour, s: int) -> Skeleton:
    """Greedy arc-walk s-skeleton of a closed contour.

    Starting at the lexicographically smallest dual vertex, walk the
    corner-rounded loop and emit a vertex whenever the infinity distance
    to the last emitted vertex reaches s; the final leg is merged when it
    falls below s/2.  All three definition clauses are verified before
    returning.
    """
    if not contour.closed:
        raise ValueError("skeletons are defined for closed contours")
    if contour.diam_inf < s:
        raise ValueError("contour smaller than the skeleton scale")
    loop = _loop_through_lex_min(contour)
    start_idx = loop.index(min(loop))
    loop = loop[start_idx:] + loop[:start_idx]
    verts = [loop[0]]
    for p in loop[1:]:
        d = max(abs(p[0] - verts[-1][0]), abs(p[1] - verts[-1][1]))
        if d >= s:
            verts.append(p)
    if len(verts) >= 3:
        closing = max(abs(verts[-1][0] - verts[0][0]), abs(verts[-1][1] - verts[0][1]))
        if closing < s / 2.0:
            verts.pop()
    degenerate = len(verts) == 2
    if len(verts) < 2:
        raise SkeletonError("contour too short for a skeleton at this scale")
    skel = Skeleton(np.array(verts, dtype=np.float64), scale=int(s), degenerate=degenerate)
    ok, why = skeleton_conforms(skel, contour)
    if not ok:
        raise SkeletonError(f"greedy walk produced a non-conforming skeleton: {why}")
    return skel


def skeleton_conforms(skel: Skeleton, contour: Contour) -> Tuple[bool, str]:
    """Machine check of the three skeleton clauses."""
    pts = [tuple(int(round(c)) for c in v) for v in skel.vertices]
    vset = contour.vertices
    for p in pts:
        if p not in vset:
            return False, f"vertex {p} not on the contour"
    n = len(pts)
    s = skel.scale
    if not skel.degenerate:
        for k in range(n):
            a, b = pts[k], pts[(k + 1) % n]
            d = max(abs(a[0] - b[0]), abs(a[1] - b[1]))
            if d < s / 2.0 - 1e-9 or d > 2.0 * s + 1e-9:
                return False, f"spacing {d} outside [s/2, 2s] at leg {k}"
    dh = boundary_hausdorff(
        np.array(sorted(contour.vertices), dtype=np.float64),
        skel.polygon_points(),
        closed=True,
    )
    if dh > s + 0.75:  # half-cell sampling slack on each side
        return False, f"Hausdorff distance {dh:.2f} exceeds s={s}"
    return True, "ok"


def skeleton_energy(skel: Skeleton, tau) -> float:
    """W over the skeleton polygon: sum of tau(u_{i+1} - u_i).

    Uses the homogeneous extension of the (square-symmetric) tension, for
    which pricing chords by their direction equals pricing by the normal.
    """
    from .geometry import tension_lookup

    v = skel.vertices
    total = 0.0
    for k in range(v.shape[0]):
        total += tension_lookup(tau, v[(k + 1) % v.shape[0]] - v[k])
    return total


def vertex_bound_check(skel: Skeleton, tau, s: float) -> bool:
    """#(S) s min(tau) <= 2 W(Pol(S)): the testable vertex-count bound."""
    w = skeleton_energy(skel, tau)
    tau_min = float(np.min(np.asarray(tau.values)))
    return skel.n * s * tau_min <= 2.0 * w + 1e-9


def boundary_hausdorff(points: np.ndarray, polygon: np.ndarray, closed=True) -> float:
    """Hausdorff distance between a point cloud (contour vertices) and a
    polygon boundary, sampling polygon edges at unit spacing."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    poly = np.asarray(polygon, dtype=np.float64).reshape(-1, 2)
    m = poly.shape[0]
    segs = []
    rng_m = range(m) if closed else range(m - 1)
    samples = []
    for k in rng_m:
        a, b = poly[k], poly[(k + 1) % m]
        segs.append((a, b))
        ln = max(1, int(math.ceil(np.hypot(*(b - a)))))
        ts = np.linspace(0.0, 1.0, ln + 1)
        samples.append(a[None, :] + ts[:, None] * (b - a)[None, :])
    samples = np.concatenate(samples, axis=0)
    d1 = 0.0
    for p in pts:
        best = math.inf
        for a, b in segs:
            ab = b - a
            denom = float(ab @ ab)
            t = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
            q = a + t * ab
            best = min(best, float(np.hypot(*(p - q))))
        d1 = max(d1, best)
    # polygon samples to the nearest contour point
    d2 = 0.0
    for q in samples:
        d = np.min(np.hypot(pts[:, 0] - q[0], pts[:, 1] - q[1]))
        d2 = max(d2, float(d))
    return max(d1, d2)


# ---------------------------------------------------------------------------
# droplet statistics (DKS)


def _wilson_interval(k: int, n: int, z: float = 1.96):
    if n == 0:
        return (0.0, 1.0)
    ph = k / n
    den = 1 + z**2 / n
    center = (ph + z**2 / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z**2 / (4 * n**2)) / den
    return (max(0.0, center - half), min(1.0, center + half))


def droplet_statistics(
    samples: Iterable[SpinConfig],
    s: float,
    tau,
    target_area: float,
    k1: ConvexPolygon,
    translate_budget: int = 3,
) -> dict:
    """Per-sample droplet census against the rescaled Wulff shape.

    For each sample: the number of s-large contours; for the largest
    (by enclosed area): area ratio to the target droplet area, the best
    translate Hausdorff distance of the contour to the shape boundary,
    and the symmetric-difference area.  Aggregates come with Wilson 95%
    intervals.
    """
    shape = k1.scale(math.sqrt(target_area))
    rows = []
    for cfg in samples:
        contours = extract_contours(cfg)
        large, _ = classify_large(contours, s)
        closed_large = [c for c in large if c.closed and not c.wraps]
        row = {"n_large": len(large)}
        if closed_large:
            areas = [(enclosed_area(c) or 0, c) for c in closed_large]
            area, biggest = max(areas, key=lambda t: t[0])
            row["area"] = area
            row["area_ratio"] = area / target_area if target_area > 0 else float("nan")
            pts = np.array(sorted(biggest.vertices), dtype=np.float64)
            centroid = pts.mean(axis=0)
            best = math.inf
            best_shift = centroid
            span = math.sqrt(max(target_area, 1.0))
            half = 0.25 * span
            shift = centroid - shape.centroid()
            for _ in range(translate_budget):
                for dx in np.linspace(-half, half, 5):
                    for dy in np.linspace(-half, half, 5):
                        cand = shift + np.array([dx, dy])
                        d = boundary_hausdorff(pts, shape.translate(cand).vertices)
                        if d < best:
                            best, best_shift = d, cand
                shift = best_shift
                half /= 4.0
            row["d_hausdorff"] = best
            inside = _interior_mask(biggest)
            row["symmdiff_area"] = _symmdiff_with_polygon(
                inside, shape.translate(best_shift)
            )
        rows.append(row)
    n = len(rows)
    ones = sum(1 for r in rows if r["n_large"] == 1)
    ratios = [r["area_ratio"] for r in rows if "area_ratio" in r]
    dhs = [r["d_hausdorff"] for r in rows if "d_hausdorff" in r]
    sds = [r["symmdiff_area"] for r in rows if "symmdiff_area" in r]
    report = {
        "samples": n,
        "single_large_fraction": ones / n if n else float("nan"),
        "single_large_ci": _wilson_interval(ones, n),
        "median_area_ratio": float(np.median(ratios)) if ratios else float("nan"),
        "median_d_hausdorff": float(np.median(dhs)) if dhs else float("nan"),
        "median_symmdiff_area": float(np.median(sds)) if sds else float("nan"),
        "rows": rows,
    }
    return report


def _interior_mask(contour: Contour) -> Dict[Tuple[int, int], bool]:
    vert: Dict[int, List[int]] = {}
    for (a, b, o) in contour.edges:
        if o == 1:
            vert.setdefault(b, []).append(a)
    mask = {}
    for y_row, cols in vert.items():
        cols = sorted(cols)
        for k in range(0, len(cols) - 1, 2):
            for x in range(cols[k], cols[k + 1]):
                mask[(x, y_row)] = True
    return mask


def _symmdiff_with_polygon(mask: Dict[Tuple[int, int], bool], poly: ConvexPolygon) -> float:
    """|int(gamma) DELTA K| by unit-cell counting."""
    xmin, ymin = poly.vertices.min(axis=0)
    xmax, ymax = poly.vertices.max(axis=0)
    cells = set(mask.keys())
    count = 0
    for x in range(int(math.floor(xmin)) - 1, int(math.ceil(xmax)) + 2):
        for y in range(int(math.floor(ymin)) - 1, int(math.ceil(ymax)) + 2):
            inside_poly = poly.contains((x, y))
            if inside_poly != ((x, y) in cells):
                count += 1
            cells.discard((x, y))
    count += len(cells)  # interior cells far outside the polygon bbox
    return float(count)


# ---------------------------------------------------------------------------
# minimal-section bad-box diagnostic


def minimal_section_diagnostic(
    labels: np.ndarray,
    rect: Tuple[int, int, int, int],
    axis: int,
    base: int,
) -> dict:
    """Bad-box counts per section of a parallelepiped stack of blocks.

    `labels` is the {-1, 0, +1} block-label array (y, x); `rect` =
    (x0, x1, y0, y1) selects the stack R (half-open block ranges); `axis`
    is the stacking normal (0 = x, 1 = y) and `base` the section index of
    the interface inside R.  R+ is the side with section index > base.
    Bad boxes: label 0 anywhere in R, label -1 in R+, label +1 in R-.
    Returns minimal bad counts n+ / n- and the smallest minimizing
    locations j+ / j- (offsets from base), plus per-section counts.
    """
    x0, x1, y0, y1 = rect
    h, w = labels.shape
    if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
        raise ValueError("stack outside the label field")
    sections: Dict[int, np.ndarray] = {}
    if axis == 0:
        for j, x in enumerate(range(x0, x1)):
            sections[j] = labels[y0:y1, x]
    else:
        for j, y in enumerate(range(y0, y1)):
            sections[j] = labels[y, x0:x1]
    per_section = {}
    for j, row in sections.items():
        off = j - base
        bad = int(np.sum(row == 0))
        if off > 0:
            bad += int(np.sum(row == -1))
        elif off < 0:
            bad += int(np.sum(row == 1))
        else:
            bad += int(np.sum(row != 0) * 0)
        per_section[off] = bad
    plus_offsets = sorted(o for o in per_section if o > 0)
    minus_offsets = sorted((o for o in per_section if o < 0), reverse=True)
    if not plus_offsets or not minus_offsets:
        raise ValueError("stack must extend on both sides of the base")
    n_plus = min(per_section[o] for o in plus_offsets)
    j_plus = min(o for o in plus_offsets if per_section[o] == n_plus)
    n_minus = min(per_section[o] for o in minus_offsets)
    j_minus = max(o for o in minus_offsets if per_section[o] == n_minus)
    return {
        "n_plus": int(n_plus),
        "n_minus": int(n_minus),
        "j_plus": int(j_plus),
        "j_minus": int(j_minus),
        "per_section": per_section,
    }
