"""Mesoscopic coarse graining: magnetization profiles and phase labels.

Works on dyadic tori N = 2^n.  Scale k means blocks of side M = 2^k; the
block grid has (N/M)^d cells, cell (bx, by) covering sites
[bx M, (bx+1) M) x [by M, (by+1) M), and the doubled box of a block is the
concentric box of side 2M (torus wrap).

Label schemes:
  * averaged:          +-1 when the block mean is zeta-close to +-m*;
  * averaged_refined:  fine-scale unanimity lifted to the coarse scale,
                       then *-adjacent opposite signs zeroed (this makes
                       sign changes pass through 0-blocks by construction);
  * fk_crossing:       Pisztora block events on the FK configuration
                       (unique crossing cluster, no stray large cluster,
                       density near the reference), signed by the crossing
                       cluster's color with a 2*zeta magnetization filter;
  * percolation:       same block events, signed by connectivity to the
                       globally largest cluster.

The c3_accuracy attribute records the per-block magnetization accuracy
guaranteed on nonzero labels (zeta for averaging schemes, 2*zeta for the
FK scheme) and feeds the L1 consistency bound
||M_k - m* u_k||_1 <= accuracy + 2 (zero fraction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ._kernels import union_find_labels
from .lattice import BondConfig, LatticeGeometry, SpinConfig

__all__ = [
    "MagnetizationProfile",
    "PhaseLabelField",
    "local_magnetization",
    "labels_averaged",
    "labels_averaged_refined",
    "labels_fk",
    "labels_percolation",
    "l1_distance",
    "check_c3",
    "assumption_b_violations",
    "zero_fraction",
    "l1_label_bound_ok",
    "tightness_stats",
]


@dataclass
class MagnetizationProfile:
    """Per-block mean magnetization at scale k (blocks of side 2^k)."""

    k: int
    values: np.ndarray  # (nb, nb), row-major (by, bx)

    @property
    def n_blocks(self) -> int:
        return self.values.shape[0]


@dataclass
class PhaseLabelField:
    """{-1, 0, +1} block labels with the scheme's accuracy metadata."""

    k: int
    zeta: float
    labels: np.ndarray
    scheme: str
    c3_accuracy: float

    @property
    def n_blocks(self) -> int:
        return self.labels.shape[0]


def _spin_grid(config: SpinConfig) -> np.ndarray:
    geom = config.geom
    if geom.shape != "torus" or geom.d != 2:
        raise ValueError("coarse graining runs on 2D tori")
    n = geom.N
    if n & (n - 1):
        raise ValueError("dyadic torus (N = 2^n) required")
    grid = np.empty((n, n), dtype=np.int8)
    grid[geom.coords[:, 1], geom.coords[:, 0]] = config.spins
    return grid


def local_magnetization(config: SpinConfig, k: int) -> MagnetizationProfile:
    """Block means at scale k; k = 0 is the raw configuration and k = n
    the global density."""
    grid = _spin_grid(config)
    n = grid.shape[0]
    m = 1 << k
    if k < 0 or m > n:
        raise ValueError("scale out of range")
    nb = n // m
    vals = grid.reshape(nb, m, nb, m).mean(axis=(1, 3))
    return MagnetizationProfile(k=k, values=vals)


def coarsen(profile: MagnetizationProfile) -> MagnetizationProfile:
    """Average 2^d sibling blocks: M_k -> M_{k+1} (exact refinement)."""
    v = profile.values
    nb = v.shape[0] // 2
    return MagnetizationProfile(
        k=profile.k + 1, values=v.reshape(nb, 2, nb, 2).mean(axis=(1, 3))
    )


# ---------------------------------------------------------------------------
# averaging-based labels


def labels_averaged(config: SpinConfig, k: int, zeta: float, m_star: float) -> PhaseLabelField:
    if not 0.0 < zeta < m_star:
        raise ValueError("0 < zeta < m* required")
    prof = local_magnetization(config, k)
    lab = np.zeros_like(prof.values, dtype=np.int8)
    lab[np.abs(prof.values - m_star) < zeta] = 1
    lab[np.abs(prof.values + m_star) < zeta] = -1
    return PhaseLabelField(k=k, zeta=zeta, labels=lab, scheme="averaged", c3_accuracy=zeta)


def _star_neighbor_conflicts(lab: np.ndarray) -> np.ndarray:
    """Boolean mask of blocks in some *-adjacent opposite-sign pair."""
    conflict = np.zeros_like(lab, dtype=bool)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            rolled = np.roll(np.roll(lab, dy, axis=0), dx, axis=1)
            bad = lab * rolled == -1
            conflict |= bad
    return conflict


def labels_averaged_refined(
    config: SpinConfig, k0: int, l0: int, zeta: float, m_star: float
) -> PhaseLabelField:
    """Three-stage construction: fine labels, unanimity lift, conflict
    zeroing; the result never has *-adjacent opposite signs."""
    if not l0 < k0:
        raise ValueError("l0 < k0 required")
    fine = labels_averaged(config, l0, zeta, m_star)
    r = 1 << (k0 - l0)
    nbf = fine.labels.shape[0]
    nb = nbf // r
    tiles = fine.labels.reshape(nb, r, nb, r)
    tilde = np.zeros((nb, nb), dtype=np.int8)
    all_plus = (tiles == 1).all(axis=(1, 3))
    all_minus = (tiles == -1).all(axis=(1, 3))
    tilde[all_plus] = 1
    tilde[all_minus] = -1
    conflict = _star_neighbor_conflicts(tilde)
    out = tilde.copy()
    out[conflict] = 0
    return PhaseLabelField(
        k=k0, zeta=zeta, labels=out, scheme="averaged_refined", c3_accuracy=zeta
    )


# ---------------------------------------------------------------------------
# FK / percolation block events


def _bond_grid(bond: BondConfig) -> Tuple[np.ndarray, np.ndarray, int]:
    """(horizontal, vertical) open-bond grids h[y, x]: bond (x,y)-(x+1,y)."""
    geom = bond.geom
    if geom.shape != "torus" or geom.d != 2:
        raise ValueError("block events run on 2D tori")
    n = geom.N
    if n & (n - 1):
        raise ValueError("dyadic torus required")
    hor = np.zeros((n, n), dtype=np.uint8)
    ver = np.zeros((n, n), dtype=np.uint8)
    coords = geom.coords
    for e in range(bond.edges.shape[0]):
        a, b = bond.edges[e]
        if b >= geom.n_sites or a >= geom.n_sites:
            continue
        xa, ya = coords[a]
        xb, yb = coords[b]
        if (xa + 1) % n == xb and ya == yb:
            hor[ya, xa] = bond.bonds[e]
        elif (xb + 1) % n == xa and ya == yb:
            hor[yb, xb] = bond.bonds[e]
        elif xa == xb and (ya + 1) % n == yb:
            ver[ya, xa] = bond.bonds[e]
        elif xa == xb and (yb + 1) % n == ya:
            ver[yb, xb] = bond.bonds[e]
    return hor, ver, n


def _box_clusters(hor, ver, n, x0, y0, side):
    """Cluster labels of the bond configuration restricted to the box
    [x0, x0+side) x [y0, y0+side) (torus wrap); returns label array (side,
    side) of local roots."""
    idx = lambda lx, ly: ly * side + lx
    edges = []
    for ly in range(side):
        gy = (y0 + ly) % n
        for lx in range(side):
            gx = (x0 + lx) % n
            if lx + 1 < side and hor[gy, gx]:
                edges.append((idx(lx, ly), idx(lx + 1, ly)))
            if ly + 1 < side and ver[gy, gx]:
                edges.append((idx(lx, ly), idx(lx, ly + 1)))
    if edges:
        earr = np.asarray(edges, dtype=np.int64)
        bonds = np.ones(earr.shape[0], dtype=np.uint8)
        labels = union_find_labels(side * side, earr, bonds)
    else:
        labels = np.arange(side * side, dtype=np.int64)
    return labels.reshape(side, side)


def _l1_diameter(xs: np.ndarray, ys: np.ndarray) -> int:
    u = xs + ys
    v = xs - ys
    return int(max(u.max() - u.min(), v.max() - v.min()))


def _block_events(hor, ver, n, bx, by, m, ell):
    """Pisztora events on the doubled box of block (bx, by).

    Returns (regular_wo_density, crossing_label_grid, crossing_mask,
    central_density) where regular_wo_density is U_x and the no-stray-
    large-cluster condition; the density test is applied by the caller.
    """
    side = 2 * m
    x0 = bx * m - m // 2
    y0 = by * m - m // 2
    lab = _box_clusters(hor, ver, n, x0, y0, side)
    # crossing clusters: touch all four faces
    left = set(lab[:, 0].tolist())
    right = set(lab[:, -1].tolist())
    bottom = set(lab[0, :].tolist())
    top = set(lab[-1, :].tolist())
    crossing = left & right & bottom & top
    # singleton "clusters" (isolated sites) only cross when side == 1
    if len(crossing) != 1:
        return False, lab, None, None
    c_star = crossing.pop()
    c_mask = lab == c_star
    # every cluster of l1-diameter > 2^ell must be the crossing one
    two_ell = 1 << ell
    for root in np.unique(lab):
        if root == c_star:
            continue
        ys, xs = np.nonzero(lab == root)
        if xs.size == 1:
            continue
        if _l1_diameter(xs, ys) > two_ell:
            return False, lab, None, None
    # crossing-cluster density over the central M-box
    lo = m // 2
    central = c_mask[lo : lo + m, lo : lo + m]
    density = float(central.mean())
    return True, lab, c_mask, density


def labels_fk(
    bond: BondConfig,
    spin: SpinConfig,
    k: int,
    ell: int,
    zeta: float,
    theta_hat: float,
    m_star: Optional[float] = None,
) -> PhaseLabelField:
    """FK / Edwards-Sokal phase labels at scale k.

    A block gets the sign of its crossing cluster when (i) the doubled box
    has a unique crossing cluster, (ii) no other cluster in the doubled
    box has l1-diameter > 2^ell, (iii) the crossing-cluster density in the
    central box is within zeta of theta_hat, and (iv) the block
    magnetization is within 2*zeta of sign * m*; otherwise 0.
    """
    if ell > k - 3:
        raise ValueError("overlap connectivity needs ell <= k - 3")
    m_star = theta_hat if m_star is None else m_star
    hor, ver, n = _bond_grid(bond)
    m = 1 << k
    nb = n // m
    prof = local_magnetization(spin, k)
    sgrid = _spin_grid(spin)
    lab = np.zeros((nb, nb), dtype=np.int8)
    for by in range(nb):
        for bx in range(nb):
            ok, clab, c_mask, density = _block_events(hor, ver, n, bx, by, m, ell)
            if not ok or abs(density - theta_hat) > zeta:
                continue
            # color of the crossing cluster: spin at one of its sites
            ys, xs = np.nonzero(c_mask)
            x0 = bx * m - m // 2
            y0 = by * m - m // 2
            gx = (x0 + xs[0]) % n
            gy = (y0 + ys[0]) % n
            sign = int(sgrid[gy, gx])
            if abs(prof.values[by, bx] - sign * m_star) < 2.0 * zeta:
                lab[by, bx] = sign
    return PhaseLabelField(
        k=k, zeta=zeta, labels=lab, scheme="fk_crossing", c3_accuracy=2.0 * zeta
    )


def labels_percolation(
    bond: BondConfig, k: int, ell: int, theta_hat: float, zeta: float
) -> PhaseLabelField:
    """Bernoulli-percolation labels: regular blocks connected to the
    globally largest cluster get +1, regular blocks disjoint from it -1."""
    if ell > k - 3:
        raise ValueError("overlap connectivity needs ell <= k - 3")
    hor, ver, n = _bond_grid(bond)
    geom = bond.geom
    glabels = union_find_labels(
        geom.n_sites + 1, bond.edges, bond.bonds.astype(np.uint8)
    )[: geom.n_sites]
    roots, counts = np.unique(glabels, return_counts=True)
    largest_root = int(roots[np.argmax(counts)])
    site_of = {}
    for i in range(geom.n_sites):
        site_of[(int(geom.coords[i][0]), int(geom.coords[i][1]))] = i
    m = 1 << k
    nb = n // m
    lab = np.zeros((nb, nb), dtype=np.int8)
    for by in range(nb):
        for bx in range(nb):
            ok, clab, c_mask, density = _block_events(hor, ver, n, bx, by, m, ell)
            if not ok or abs(density - theta_hat) > zeta:
                continue
            ys, xs = np.nonzero(c_mask)
            x0 = bx * m - m // 2
            y0 = by * m - m // 2
            # connectivity of the crossing cluster to the global largest
            touched = False
            for t in range(min(xs.size, 64)):
                gx = (x0 + xs[t]) % n
                gy = (y0 + ys[t]) % n
                if int(glabels[site_of[(gx, gy)]]) == largest_root:
                    touched = True
                    break
            lab[by, bx] = 1 if touched else -1
    return PhaseLabelField(
        k=k, zeta=zeta, labels=lab, scheme="percolation", c3_accuracy=2.0 * zeta
    )


# ---------------------------------------------------------------------------
# metrics and conformance checks


def _values_of(f):
    if isinstance(f, MagnetizationProfile):
        return f.values.astype(np.float64)
    if isinstance(f, PhaseLabelField):
        return f.labels.astype(np.float64)
    return np.asarray(f, dtype=np.float64)


def l1_distance(f, g) -> float:
    """Normalized L1 distance over the torus (grids must match)."""
    a, b = _values_of(f), _values_of(g)
    if a.shape != b.shape:
        raise ValueError("grid mismatch")
    return float(np.mean(np.abs(a - b)))


def check_c3(prof: MagnetizationProfile, labels: PhaseLabelField, m_star: float) -> float:
    """max |M_k - m* u_k| over blocks with nonzero label (0 if none)."""
    if prof.values.shape != labels.labels.shape:
        raise ValueError("grid mismatch")
    mask = labels.labels != 0
    if not mask.any():
        return 0.0
    dev = np.abs(prof.values - m_star * labels.labels.astype(np.float64))
    return float(dev[mask].max())


def assumption_b_violations(labels: PhaseLabelField) -> int:
    """Number of *-adjacent block pairs with opposite signs."""
    lab = labels.labels
    count = 0
    for dx, dy in ((1, 0), (0, 1), (1, 1), (1, -1)):
        rolled = np.roll(np.roll(lab, -dy, axis=0), -dx, axis=1)
        count += int(np.sum(lab * rolled == -1))
    return count


def zero_fraction(labels: PhaseLabelField) -> float:
    return float(np.mean(labels.labels == 0))


def l1_label_bound_ok(
    prof: MagnetizationProfile, labels: PhaseLabelField, m_star: float
) -> Tuple[bool, float, float]:
    """Per-sample bound ||M_k - m* u_k||_1 <= accuracy + 2 zero-fraction."""
    lhs = l1_distance(prof,
                      MagnetizationProfile(labels.k, m_star * labels.labels.astype(float)))
    rhs = labels.c3_accuracy + 2.0 * zero_fraction(labels)
    return lhs <= rhs + 1e-12, lhs, rhs


def tightness_stats(
    fields_by_scale: Dict[int, List[PhaseLabelField]],
    delta: float,
    a: float,
) -> dict:
    """Empirical tightness diagnostics for families of phase labels.

    Per scale: the zero-block fraction (Bernoulli domination proxy
    rho_k), joint zero frequencies of well-separated block pairs against
    the product bound, Assumption-B violation counts (must be 0 for
    conforming schemes), and the frequency of samples outside the
    perimeter-compactness neighborhood: a sample is flagged unless its
    zero fraction is < delta and one of the +-1 thresholded fields has
    discrete perimeter <= a.
    """
    from .geometry import IndicatorField, perimeter_indicator

    report = {"scales": {}, "delta": delta, "a": a}
    for k, fields in sorted(fields_by_scale.items()):
        if len(fields) < 1:
            continue
        zf = [zero_fraction(f) for f in fields]
        rho = float(np.mean(zf))
        bviol = sum(assumption_b_violations(f) for f in fields)
        nb = fields[0].n_blocks
        # joint zeros for a fixed well-separated pair set
        pair_hits = 0
        pair_total = 0
        offsets = [(nb // 2, 0), (0, nb // 2), (nb // 2, nb // 2)]
        for f in fields:
            z = f.labels == 0
            for dx, dy in offsets:
                if dx == 0 and dy == 0:
                    continue
                rolled = np.roll(np.roll(z, dy, axis=0), dx, axis=1)
                pair_hits += int(np.sum(z & rolled))
                pair_total += z.size
        outside = 0
        for f in fields:
            if zero_fraction(f) >= delta:
                outside += 1
                continue
            ok = False
            for fill in (-1, 1):
                v = np.where(f.labels == 0, fill, f.labels).astype(np.int8)
                per = perimeter_indicator(IndicatorField(v, periodic=True))
                if per <= a:
                    ok = True
                    break
            outside += 0 if ok else 1
        report["scales"][k] = {
            "rho_hat": rho,
            "zero_fractions": zf,
            "assumption_b_violations": int(bviol),
            "pair_joint_zero_rate": pair_hits / pair_total if pair_total else 0.0,
            "pair_product_bound": rho * rho,
            "outside_neighborhood_fraction": outside / len(fields),
            "samples": len(fields),
        }
    rhos = [v["rho_hat"] for _, v in sorted(report["scales"].items())]
    report["rho_nonincreasing"] = all(
        rhos[i] >= rhos[i + 1] - 1e-12 for i in range(len(rhos) - 1)
    )
    return report
