"""Markov-chain and cluster samplers.

Chains implemented here:
  * glauber_sample      -- single-site heat bath for the Gibbs measure,
                           including uniform field h and wall field eta;
  * kawasaki_sample     -- magnetization-conserving exchange dynamics for
                           the canonical (conditioned) ensemble; proposals
                           are uniformly random opposite-spin pairs, which
                           leaves the conditioned law invariant and mixes
                           much faster than neighbor swaps;
  * fk_sample           -- random-cluster dynamics, either Swendsen-Wang
                           style alternation (default, q = 2) or the exact
                           single-bond heat bath (any q, small graphs);
  * edwards_sokal_color -- fair cluster coloring, wired cluster forced +1;
  * bernoulli_sample    -- i.i.d. bond percolation;
  * restricted_sample   -- Metropolis chain of the small-contour phase:
                           moves creating a contour of infinity-diameter
                           > s are rejected.

Every sampler consumes an RngStream and draws its randomness in fixed-size
chunks, so runs are reproducible from (seed, stream) alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import _kernels
from .lattice import (
    BondConfig,
    BoundaryCondition,
    LatticeGeometry,
    SpinConfig,
    fk_edges,
)
from .rng import RngStream

__all__ = [
    "SamplerReport",
    "glauber_sample",
    "kawasaki_sample",
    "fk_sample",
    "edwards_sokal_color",
    "bernoulli_sample",
    "restricted_sample",
    "susceptibility_estimate",
    "autocorrelation_time",
    "external_field",
    "glauber_law_keys",
    "kawasaki_law_keys",
    "es_law_keys",
    "fk_law_keys",
    "empirical_law",
]

_CHUNK_SWEEPS = 4096


@dataclass
class SamplerReport:
    """Run diagnostics attached to a finished chain."""

    sweeps: int
    burnin: int
    acceptance_rate: float
    tau_int: float
    effective_samples: float
    seed: int
    stream: str
    flags: list = field(default_factory=list)


def external_field(geom: LatticeGeometry, bc: BoundaryCondition, eta: float = 0.0):
    """Per-site fixed field: boundary-bond spins plus the wall term."""
    f = np.zeros(geom.n_sites, dtype=np.float64)
    if bc.has_exterior:
        for s, mu in geom.boundary:
            f[s] += bc.exterior_spin(geom.exterior_coord(int(s), int(mu)))
    if bc.tag == "wall_field" and eta == 0.0:
        eta = bc.eta
    if eta and geom.wall.size:
        f[geom.wall] += eta
    return f


def autocorrelation_time(series: np.ndarray) -> float:
    """Integrated autocorrelation time with the standard 5*tau window."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 8:
        return float("nan")
    x = x - x.mean()
    var = float(np.dot(x, x)) / n
    if var <= 0:
        return 0.5
    tau = 0.5
    for t in range(1, n // 2):
        rho = float(np.dot(x[:-t], x[t:])) / ((n - t) * var)
        tau += rho
        if t >= 5 * tau:
            break
    return max(tau, 0.5)


def _report(m_series, sweeps, burnin, acc, rng):
    tau = autocorrelation_time(np.asarray(m_series)) if len(m_series) else float("nan")
    ess = len(m_series) / (2 * tau) if tau and not math.isnan(tau) else 0.0
    return SamplerReport(
        sweeps=sweeps,
        burnin=burnin,
        acceptance_rate=acc,
        tau_int=tau,
        effective_samples=ess,
        seed=rng.seed,
        stream=rng.stream,
    )


# ---------------------------------------------------------------------------
# Glauber heat bath


def glauber_sample(
    geom: LatticeGeometry,
    bc: BoundaryCondition,
    beta: float,
    sweeps: int,
    rng: RngStream,
    h: float = 0.0,
    eta: float = 0.0,
    thin: int = 1,
    burnin: int = 0,
    init: Optional[SpinConfig] = None,
) -> Iterator[SpinConfig]:
    """Yield spin configurations every `thin` sweeps after `burnin`."""
    if beta < 0:
        raise ValueError("beta >= 0 required")
    gen = rng.generator()
    if init is not None:
        spins = init.spins.copy()
    else:
        spins = gen.integers(0, 2, size=geom.n_sites).astype(np.int8) * 2 - 1
    ext = external_field(geom, bc, eta)
    nbr = geom.nbr
    n = geom.n_sites
    total = burnin + sweeps
    done = 0
    while done < total:
        block = min(_CHUNK_SWEEPS, total - done)
        sites = gen.integers(0, n, size=block * n)
        unis = gen.random(block * n)
        for b in range(block):
            _kernels.glauber_sweeps(
                spins,
                nbr,
                ext,
                beta,
                h,
                sites[b * n : (b + 1) * n],
                unis[b * n : (b + 1) * n],
            )
            done += 1
            if done > burnin and (done - burnin) % thin == 0:
                yield SpinConfig(geom, spins.copy(), bc)


# ---------------------------------------------------------------------------
# Kawasaki (canonical) dynamics


def feasible_magnetizations(n_sites: int):
    return range(-n_sites, n_sites + 1, 2)


def kawasaki_sample(
    geom: LatticeGeometry,
    bc: BoundaryCondition,
    beta: float,
    m_target: int,
    sweeps: int,
    rng: RngStream,
    eta: float = 0.0,
    thin: int = 1,
    burnin: int = 0,
    init: str = "random",
) -> Iterator[SpinConfig]:
    """Yield configurations of the conditioned ensemble {M = m_target}.

    init "random" scatters the + sites uniformly; init "droplet" packs
    them around the region's center of mass, which shortens burn-in for
    phase-separated targets.
    """
    n = geom.n_sites
    if m_target < -n or m_target > n or (m_target - n) % 2 != 0:
        lo = max(-n, m_target - 1)
        nearest = sorted(
            feasible_magnetizations(n), key=lambda v: (abs(v - m_target), v)
        )[:2]
        raise ValueError(
            f"M_target={m_target} infeasible on {n} sites; nearest feasible: {nearest}"
        )
    n_plus = (n + m_target) // 2
    gen = rng.generator()
    spins = np.full(n, -1, dtype=np.int8)
    if init == "droplet":
        center = geom.coords.mean(axis=0)
        d2 = np.sum((geom.coords - center) ** 2, axis=1)
        order = np.argsort(d2, kind="stable")
        spins[order[:n_plus]] = 1
    else:
        order = gen.permutation(n)
        spins[order[:n_plus]] = 1
    ext = external_field(geom, bc, eta)
    plus_list = np.nonzero(spins == 1)[0].astype(np.int64)
    minus_list = np.nonzero(spins == -1)[0].astype(np.int64)
    if plus_list.size == 0 or minus_list.size == 0:
        # frozen chain: the conditioned law has a single configuration
        for _ in range(max(sweeps // max(thin, 1), 1)):
            yield SpinConfig(geom, spins.copy(), bc)
        return
    total = burnin + sweeps
    done = 0
    accepted = 0
    proposed = 0
    while done < total:
        block = min(_CHUNK_SWEEPS, total - done)
        picks_p = gen.integers(0, plus_list.size, size=block * n).astype(np.int64)
        picks_m = gen.integers(0, minus_list.size, size=block * n).astype(np.int64)
        unis = gen.random(block * n)
        for b in range(block):
            acc = _kernels.kawasaki_moves(
                spins,
                geom.nbr,
                ext,
                beta,
                plus_list,
                minus_list,
                picks_p[b * n : (b + 1) * n],
                picks_m[b * n : (b + 1) * n],
                unis[b * n : (b + 1) * n],
            )
            accepted += acc
            proposed += n
            done += 1
            if done > burnin and (done - burnin) % thin == 0:
                yield SpinConfig(geom, spins.copy(), bc)


# ---------------------------------------------------------------------------
# FK random cluster and Edwards-Sokal coloring


def _wiring_for(geom: LatticeGeometry, wiring: str) -> str:
    if wiring == "auto":
        return "periodic" if geom.shape == "torus" else "wired"
    return wiring


def fk_sample(
    geom: LatticeGeometry,
    wiring: str,
    p: float,
    sweeps: int,
    rng: RngStream,
    q: float = 2.0,
    thin: int = 1,
    burnin: int = 0,
    method: str = "sw",
) -> Iterator[BondConfig]:
    """Yield bond configurations of the random-cluster measure.

    method "sw" alternates cluster coloring and conditional bond updates
    (valid for q = 2); method "heatbath" runs the exact single-bond chain
    and works for any q > 0, at O(E) cost per bond update.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p in (0,1) required")
    wiring = _wiring_for(geom, wiring)
    edges = fk_edges(geom, wiring)
    has_ghost = bool(np.any(edges >= geom.n_sites))
    n_nodes = geom.n_sites + 1
    gen = rng.generator()
    bonds = (gen.random(edges.shape[0]) < p).astype(np.uint8)
    total = burnin + sweeps
    if method == "sw":
        if q != 2.0:
            raise ValueError("Swendsen-Wang alternation implemented for q = 2")
        node_spins = np.empty(n_nodes, dtype=np.int8)
        for t in range(total):
            labels = _kernels.union_find_labels(n_nodes, edges, bonds)
            node_u = gen.random(n_nodes)
            _kernels.color_clusters(
                labels, node_u, geom.n_sites if has_ghost else -1, node_spins
            )
            if has_ghost:
                node_spins[geom.n_sites] = 1
            edge_u = gen.random(edges.shape[0])
            _kernels.sw_resample_bonds(node_spins, edges, p, edge_u, bonds)
            if t >= burnin and (t - burnin + 1) % thin == 0:
                yield BondConfig(geom, edges.copy(), bonds.copy(), wiring)
    elif method == "heatbath":
        m = edges.shape[0]
        for t in range(total):
            picks = gen.integers(0, m, size=m).astype(np.int64)
            unis = gen.random(m)
            _kernels.fk_heatbath_sweep(bonds, edges, n_nodes, p, q, picks, unis)
            if t >= burnin and (t - burnin + 1) % thin == 0:
                yield BondConfig(geom, edges.copy(), bonds.copy(), wiring)
    else:
        raise ValueError(f"unknown method {method!r}")


def edwards_sokal_color(bond_config: BondConfig, rng: RngStream) -> SpinConfig:
    """Color clusters fair +-1 (wired cluster forced +1)."""
    geom = bond_config.geom
    n_nodes = geom.n_sites + 1
    labels = _kernels.union_find_labels(
        n_nodes, bond_config.edges, bond_config.bonds.astype(np.uint8)
    )
    gen = rng.generator() if hasattr(rng, "generator") else rng
    node_u = gen.random(n_nodes)
    node_spins = np.empty(n_nodes, dtype=np.int8)
    has_ghost = bool(np.any(bond_config.edges >= geom.n_sites))
    _kernels.color_clusters(
        labels, node_u, geom.n_sites if has_ghost else -1, node_spins
    )
    if bond_config.wiring == "periodic":
        bc = BoundaryCondition.periodic()
    elif has_ghost:
        bc = BoundaryCondition.plus()
    else:
        bc = BoundaryCondition.free()
    return SpinConfig(geom, node_spins[: geom.n_sites].copy(), bc)


def bernoulli_sample(geom: LatticeGeometry, p: float, rng: RngStream) -> BondConfig:
    """One i.i.d. bond configuration on the internal edges."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p in [0,1] required")
    gen = rng.generator() if hasattr(rng, "generator") else rng
    wiring = "periodic" if geom.shape == "torus" else "free"
    edges = fk_edges(geom, wiring)
    bonds = (gen.random(edges.shape[0]) < p).astype(np.uint8)
    return BondConfig(geom, edges, bonds, wiring)


# ---------------------------------------------------------------------------
# restricted (small-contour) phase


def restricted_sample(
    geom: LatticeGeometry,
    beta: float,
    s: int,
    sweeps: int,
    rng: RngStream,
    h: float = 0.0,
    thin: int = 1,
    burnin: int = 0,
) -> Iterator[SpinConfig]:
    """Metropolis chain of the s-restricted minus phase on a 2D box.

    The stationary law is the minus-bc Gibbs measure conditioned on all
    +- contours having infinity-diameter <= s.
    """
    if s < 2:
        raise ValueError("s >= 2 required")
    if geom.d != 2 or geom.shape not in ("box", "slab"):
        raise ValueError("restricted phase runs on 2D boxes")
    dims = geom.dims
    w, hgt = int(dims[0]), int(dims[1])
    lows = geom.coords.min(axis=0)
    grid = np.full((hgt + 2, w + 2), -1, dtype=np.int8)  # minus halo
    gen = rng.generator()
    grid[1 : hgt + 1, 1 : w + 1] = -1
    stamps = np.zeros((w + 1) * (hgt + 1), dtype=np.int64)
    queue = np.empty(((w + 1) * (hgt + 1), 2), dtype=np.int64)
    n = w * hgt
    total = burnin + sweeps
    done = 0
    stamp = 0
    bc = BoundaryCondition.minus()
    # site order on the geometry: coords sorted row-major by build_lattice
    def emit():
        sub = grid[1 : hgt + 1, 1 : w + 1]
        spins = np.empty(geom.n_sites, dtype=np.int8)
        for idx in range(geom.n_sites):
            x, y = geom.coords[idx] - lows
            spins[idx] = sub[y, x]
        return SpinConfig(geom, spins, bc)

    while done < total:
        block = min(_CHUNK_SWEEPS, total - done)
        sites = gen.integers(0, n, size=block * n).astype(np.int64)
        unis = gen.random(block * n)
        for b in range(block):
            stamp = _kernels.restricted_metropolis_sweeps(
                grid,
                w,
                hgt,
                beta,
                h,
                s,
                sites[b * n : (b + 1) * n],
                unis[b * n : (b + 1) * n],
                stamps,
                queue,
                stamp,
            )
            done += 1
            if done > burnin and (done - burnin) % thin == 0:
                yield emit()


# ---------------------------------------------------------------------------
# key-stream fast paths (tiny systems; one int64 config key per sweep)


def glauber_law_keys(geom, bc, beta, sweeps, rng, h=0.0, eta=0.0, burnin=0):
    """Configuration keys of a Glauber chain, for TV tests (n <= 62)."""
    if geom.n_sites > 62:
        raise ValueError("key stream limited to 62 sites")
    gen = rng.generator()
    spins = gen.integers(0, 2, size=geom.n_sites).astype(np.int8) * 2 - 1
    ext = external_field(geom, bc, eta)
    n = geom.n_sites
    out = np.empty(sweeps, dtype=np.int64)
    done = 0
    total = burnin + sweeps
    burned = 0
    while burned + done < total:
        block = min(_CHUNK_SWEEPS * 8, total - burned - done)
        sites = gen.integers(0, n, size=block * n)
        unis = gen.random(block * n)
        keys = np.empty(block, dtype=np.int64)
        _kernels.glauber_keys(spins, geom.nbr, ext, beta, h, sites, unis, keys)
        if burned < burnin:
            skip = min(burnin - burned, block)
            burned += skip
            keys = keys[skip:]
        take = min(keys.size, sweeps - done)
        out[done : done + take] = keys[:take]
        done += take
    return out


def kawasaki_law_keys(geom, bc, beta, m_target, sweeps, rng, eta=0.0, burnin=0):
    """Configuration keys of a Kawasaki chain at fixed magnetization."""
    if geom.n_sites > 62:
        raise ValueError("key stream limited to 62 sites")
    n = geom.n_sites
    if m_target < -n or m_target > n or (m_target - n) % 2 != 0:
        raise ValueError("infeasible target magnetization")
    gen = rng.generator()
    spins = np.full(n, -1, dtype=np.int8)
    order = gen.permutation(n)
    spins[order[: (n + m_target) // 2]] = 1
    ext = external_field(geom, bc, eta)
    plus_list = np.nonzero(spins == 1)[0].astype(np.int64)
    minus_list = np.nonzero(spins == -1)[0].astype(np.int64)
    if plus_list.size == 0 or minus_list.size == 0:
        key = int(np.sum(((spins > 0).astype(np.int64)) << np.arange(n)))
        return np.full(sweeps, key, dtype=np.int64)
    out = np.empty(sweeps, dtype=np.int64)
    done = 0
    burned = 0
    total = burnin + sweeps
    while burned + done < total:
        block = min(_CHUNK_SWEEPS * 8, total - burned - done)
        picks_p = gen.integers(0, plus_list.size, size=block * n).astype(np.int64)
        picks_m = gen.integers(0, minus_list.size, size=block * n).astype(np.int64)
        unis = gen.random(block * n)
        keys = np.empty(block, dtype=np.int64)
        _kernels.kawasaki_keys(
            spins, geom.nbr, ext, beta, plus_list, minus_list, picks_p, picks_m, unis, keys
        )
        if burned < burnin:
            skip = min(burnin - burned, block)
            burned += skip
            keys = keys[skip:]
        take = min(keys.size, sweeps - done)
        out[done : done + take] = keys[:take]
        done += take
    return out


def es_law_keys(geom, wiring, p, sweeps, rng, burnin=0):
    """Colored-spin keys of the FK + Edwards-Sokal composition (SW chain)."""
    if geom.n_sites > 62:
        raise ValueError("key stream limited to 62 sites")
    wiring = _wiring_for(geom, wiring)
    edges = fk_edges(geom, wiring)
    has_ghost = bool(np.any(edges >= geom.n_sites))
    gen = rng.generator()
    bonds = (gen.random(edges.shape[0]) < p).astype(np.uint8)
    n_nodes = geom.n_sites + 1
    out = np.empty(sweeps, dtype=np.int64)
    done = 0
    burned = 0
    total = burnin + sweeps
    while burned + done < total:
        block = min(_CHUNK_SWEEPS, total - burned - done)
        node_u = gen.random(block * n_nodes)
        edge_u = gen.random(block * edges.shape[0])
        keys = np.empty(block, dtype=np.int64)
        _kernels.sw_es_keys(
            bonds, edges, geom.n_sites, has_ghost, p, node_u, edge_u, keys
        )
        if burned < burnin:
            skip = min(burnin - burned, block)
            burned += skip
            keys = keys[skip:]
        take = min(keys.size, sweeps - done)
        out[done : done + take] = keys[:take]
        done += take
    return out


def fk_law_keys(geom, wiring, p, sweeps, rng, q=2.0, burnin=0):
    """Bond-mask keys of the exact heat-bath FK chain (small graphs)."""
    wiring = _wiring_for(geom, wiring)
    edges = fk_edges(geom, wiring)
    m = edges.shape[0]
    if m > 62:
        raise ValueError("key stream limited to 62 edges")
    gen = rng.generator()
    bonds = (gen.random(m) < p).astype(np.uint8)
    out = np.empty(sweeps, dtype=np.int64)
    done = 0
    burned = 0
    total = burnin + sweeps
    n_nodes = geom.n_sites + 1
    while burned + done < total:
        block = min(_CHUNK_SWEEPS, total - burned - done)
        picks = gen.integers(0, m, size=block * m).astype(np.int64)
        unis = gen.random(block * m)
        keys = np.empty(block, dtype=np.int64)
        _kernels.bond_mask_keys_heatbath(bonds, edges, n_nodes, p, q, picks, unis, keys)
        if burned < burnin:
            skip = min(burnin - burned, block)
            burned += skip
            keys = keys[skip:]
        take = min(keys.size, sweeps - done)
        out[done : done + take] = keys[:take]
        done += take
    return out


def empirical_law(keys) -> dict:
    """Configuration key -> empirical frequency."""
    keys = np.asarray(keys)
    uniq, counts = np.unique(keys, return_counts=True)
    n = keys.size
    return {int(k): c / n for k, c in zip(uniq, counts)}


# ---------------------------------------------------------------------------
# observables


def susceptibility_estimate(m_samples, n_sites: int, n_blocks: int = 20):
    """chi_hat = Var(M)/|A| with a jackknife error bar.

    Returns (chi_hat, err, low_confidence_flag); the flag is set when
    fewer than 100 effective samples back the estimate.
    """
    m = np.asarray(m_samples, dtype=np.float64)
    if m.size < 4:
        raise ValueError("need at least 4 samples")
    chi = float(np.var(m)) / n_sites
    k = min(n_blocks, m.size)
    blocks = np.array_split(m, k)
    jk = []
    for b in range(k):
        rest = np.concatenate([blocks[j] for j in range(k) if j != b])
        jk.append(np.var(rest) / n_sites)
    jk = np.asarray(jk)
    err = float(np.sqrt((k - 1) * np.mean((jk - jk.mean()) ** 2)))
    tau = autocorrelation_time(m)
    ess = m.size / (2 * tau) if not math.isnan(tau) else m.size
    return chi, err, bool(ess < 100)
