"""Numba kernels for the Monte Carlo samplers and cluster analysis.

All randomness is consumed from pre-drawn arrays produced by the package's
Philox streams, so the kernels are bitwise reproducible and never own RNG
state.  Spins are int8 +-1; sites are flat indices with an (n, 2d) neighbor
table holding -1 where the neighbor is not a site.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# union-find


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def union_find_labels(n_nodes, edges, bonds):
    """Root label per node for the open-edge graph."""
    parent = np.arange(n_nodes, dtype=np.int64)
    for e in range(edges.shape[0]):
        if bonds[e]:
            ra = _find(parent, edges[e, 0])
            rb = _find(parent, edges[e, 1])
            if ra != rb:
                if ra < rb:
                    parent[rb] = ra
                else:
                    parent[ra] = rb
    out = np.empty(n_nodes, dtype=np.int64)
    for x in range(n_nodes):
        out[x] = _find(parent, x)
    return out


# ---------------------------------------------------------------------------
# single-spin heat bath (Glauber)


@njit(cache=True)
def glauber_sweeps(spins, nbr, ext_field, beta, h, sites, uniforms):
    """Heat-bath updates at the given site sequence; mutates spins."""
    two_d = nbr.shape[1]
    for t in range(sites.shape[0]):
        i = sites[t]
        f = ext_field[i] + h
        for mu in range(two_d):
            j = nbr[i, mu]
            if j >= 0:
                f += spins[j]
        p_plus = 1.0 / (1.0 + np.exp(-2.0 * beta * f))
        spins[i] = 1 if uniforms[t] < p_plus else -1


# ---------------------------------------------------------------------------
# Kawasaki exchange dynamics (global opposite-spin swaps)


@njit(cache=True)
def kawasaki_moves(
    spins, nbr, ext_field, beta, plus_list, minus_list, picks_p, picks_m, uniforms
):
    """Metropolis exchange of uniformly chosen (+,-) site pairs.

    plus_list/minus_list are the current site inventories per sign; the
    proposal swaps one entry of each, so the pair counts never change and
    the proposal is symmetric.  Mutates spins and the inventories.
    """
    two_d = nbr.shape[1]
    n_plus = plus_list.shape[0]
    n_minus = minus_list.shape[0]
    if n_plus == 0 or n_minus == 0:
        return 0
    accepted = 0
    for t in range(picks_p.shape[0]):
        kp = picks_p[t] % n_plus
        km = picks_m[t] % n_minus
        i = plus_list[kp]
        j = minus_list[km]
        fi = ext_field[i]
        fj = ext_field[j]
        adj = 0
        for mu in range(two_d):
            a = nbr[i, mu]
            if a >= 0:
                fi += spins[a]
                if a == j:
                    adj += 1
            b = nbr[j, mu]
            if b >= 0:
                fj += spins[b]
        d_h = 2.0 * spins[i] * fi + 2.0 * spins[j] * fj - 4.0 * spins[i] * spins[j] * adj
        if d_h <= 0.0 or uniforms[t] < np.exp(-beta * d_h):
            spins[i] = -spins[i]
            spins[j] = -spins[j]
            plus_list[kp] = j
            minus_list[km] = i
            accepted += 1
    return accepted


# ---------------------------------------------------------------------------
# FK random-cluster: Swendsen-Wang style alternation and exact heat bath


@njit(cache=True)
def sw_resample_bonds(node_spins, edges, p, uniforms, bonds_out):
    """Open each satisfied edge with probability p (conditional FK law)."""
    for e in range(edges.shape[0]):
        a = edges[e, 0]
        b = edges[e, 1]
        if node_spins[a] == node_spins[b] and uniforms[e] < p:
            bonds_out[e] = 1
        else:
            bonds_out[e] = 0


@njit(cache=True)
def color_clusters(labels, node_uniforms, ghost, node_spins_out):
    """Fair +-1 color per cluster root; the ghost cluster is forced +1."""
    n = node_spins_out.shape[0]
    ghost_root = labels[ghost] if ghost >= 0 else -1
    for i in range(n):
        r = labels[i]
        if ghost >= 0 and r == ghost_root:
            node_spins_out[i] = 1
        else:
            node_spins_out[i] = 1 if node_uniforms[r] < 0.5 else -1


@njit(cache=True)
def fk_heatbath_sweep(bonds, edges, n_nodes, p, q, edge_picks, uniforms):
    """Exact single-bond heat bath for the random-cluster measure.

    Recomputes endpoint connectivity without the updated edge by a fresh
    union-find pass, so the cost is O(E) per update: intended for small
    graphs (oracle tests), not production sweeps.
    """
    parent = np.empty(n_nodes, dtype=np.int64)
    for t in range(edge_picks.shape[0]):
        e = edge_picks[t] % edges.shape[0]
        for x in range(n_nodes):
            parent[x] = x
        for e2 in range(edges.shape[0]):
            if e2 != e and bonds[e2]:
                ra = _find(parent, edges[e2, 0])
                rb = _find(parent, edges[e2, 1])
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        connected = _find(parent, edges[e, 0]) == _find(parent, edges[e, 1])
        if connected:
            p_open = p
        else:
            p_open = p / (p + q * (1.0 - p))
        bonds[e] = 1 if uniforms[t] < p_open else 0


# ---------------------------------------------------------------------------
# key-stream fast paths for total-variation tests on tiny systems
# (one int64 configuration key per sweep, no per-sweep Python objects)


@njit(cache=True)
def _spin_key(spins):
    key = np.int64(0)
    for i in range(spins.shape[0]):
        if spins[i] > 0:
            key |= np.int64(1) << i
    return key


@njit(cache=True)
def glauber_keys(spins, nbr, ext_field, beta, h, sites, uniforms, keys_out):
    n = spins.shape[0]
    two_d = nbr.shape[1]
    t = 0
    for sw in range(keys_out.shape[0]):
        for _ in range(n):
            i = sites[t]
            f = ext_field[i] + h
            for mu in range(two_d):
                j = nbr[i, mu]
                if j >= 0:
                    f += spins[j]
            p_plus = 1.0 / (1.0 + np.exp(-2.0 * beta * f))
            spins[i] = 1 if uniforms[t] < p_plus else -1
            t += 1
        keys_out[sw] = _spin_key(spins)


@njit(cache=True)
def kawasaki_keys(
    spins, nbr, ext_field, beta, plus_list, minus_list, picks_p, picks_m, uniforms, keys_out
):
    n = spins.shape[0]
    two_d = nbr.shape[1]
    n_plus = plus_list.shape[0]
    n_minus = minus_list.shape[0]
    t = 0
    for sw in range(keys_out.shape[0]):
        for _ in range(n):
            kp = picks_p[t] % n_plus
            km = picks_m[t] % n_minus
            i = plus_list[kp]
            j = minus_list[km]
            fi = ext_field[i]
            fj = ext_field[j]
            adj = 0
            for mu in range(two_d):
                a = nbr[i, mu]
                if a >= 0:
                    fi += spins[a]
                    if a == j:
                        adj += 1
                b = nbr[j, mu]
                if b >= 0:
                    fj += spins[b]
            d_h = (
                2.0 * spins[i] * fi
                + 2.0 * spins[j] * fj
                - 4.0 * spins[i] * spins[j] * adj
            )
            if d_h <= 0.0 or uniforms[t] < np.exp(-beta * d_h):
                spins[i] = -spins[i]
                spins[j] = -spins[j]
                plus_list[kp] = j
                minus_list[km] = i
            t += 1
        keys_out[sw] = _spin_key(spins)


@njit(cache=True)
def sw_es_keys(bonds, edges, n_sites, has_ghost, p, node_uniforms, edge_uniforms, keys_out):
    """Swendsen-Wang alternation emitting the colored-spin key per sweep."""
    n_nodes = n_sites + 1
    node_spins = np.empty(n_nodes, dtype=np.int8)
    ghost = n_sites if has_ghost else -1
    for sw in range(keys_out.shape[0]):
        labels = union_find_labels(n_nodes, edges, bonds)
        base = sw * n_nodes
        ghost_root = labels[ghost] if ghost >= 0 else -1
        for i in range(n_nodes):
            r = labels[i]
            if ghost >= 0 and r == ghost_root:
                node_spins[i] = 1
            else:
                node_spins[i] = 1 if node_uniforms[base + r] < 0.5 else -1
        eb = sw * edges.shape[0]
        for e in range(edges.shape[0]):
            a = edges[e, 0]
            b = edges[e, 1]
            if node_spins[a] == node_spins[b] and edge_uniforms[eb + e] < p:
                bonds[e] = 1
            else:
                bonds[e] = 0
        keys_out[sw] = _spin_key(node_spins[:n_sites])


@njit(cache=True)
def bond_mask_keys_heatbath(bonds, edges, n_nodes, p, q, edge_picks, uniforms, keys_out):
    m = edges.shape[0]
    per = edge_picks.shape[0] // keys_out.shape[0]
    t = 0
    for sw in range(keys_out.shape[0]):
        for _ in range(per):
            e = edge_picks[t] % m
            parent = np.arange(n_nodes, dtype=np.int64)
            for e2 in range(m):
                if e2 != e and bonds[e2]:
                    ra = _find(parent, edges[e2, 0])
                    rb = _find(parent, edges[e2, 1])
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
            connected = _find(parent, edges[e, 0]) == _find(parent, edges[e, 1])
            p_open = p if connected else p / (p + q * (1.0 - p))
            bonds[e] = 1 if uniforms[t] < p_open else 0
            t += 1
        key = np.int64(0)
        for e in range(m):
            if bonds[e]:
                key |= np.int64(1) << e
        keys_out[sw] = key


# ---------------------------------------------------------------------------
# restricted phase: Metropolis with a contour-diameter cutoff


@njit(cache=True)
def _contour_span_ok(grid, w, h, a0, b0, s, stamp, stamps, queue):
    """BFS over broken-bond dual edges from dual vertex (a0, b0).

    grid is the (h+2, w+2) spin array with boundary halo; dual vertex
    (a, b) sits at corner (a-1/2, b-1/2) in site coordinates relative to
    the halo-less origin.  Returns False when the component's infinity
    diameter exceeds s.  Dual coordinates run 0..w and 0..h.
    """
    head = 0
    tail = 0
    queue[tail, 0] = a0
    queue[tail, 1] = b0
    tail += 1
    stamps[b0 * (w + 1) + a0] = stamp
    amin = a0
    amax = a0
    bmin = b0
    bmax = b0
    while head < tail:
        a = queue[head, 0]
        b = queue[head, 1]
        head += 1
        # four incident dual edges; each crosses one primal bond
        for k in range(4):
            if k == 0:  # to (a, b+1): horizontal bond (a-1,b)-(a,b)
                a2, b2 = a, b + 1
                broken = b <= h - 1 and grid[b + 1, a] != grid[b + 1, a + 1]
            elif k == 1:  # to (a, b-1): horizontal bond (a-1,b-1)-(a,b-1)
                a2, b2 = a, b - 1
                broken = b >= 1 and grid[b, a] != grid[b, a + 1]
            elif k == 2:  # to (a+1, b): vertical bond (a,b-1)-(a,b)
                a2, b2 = a + 1, b
                broken = a <= w - 1 and grid[b, a + 1] != grid[b + 1, a + 1]
            else:  # to (a-1, b): vertical bond (a-1,b-1)-(a-1,b)
                a2, b2 = a - 1, b
                broken = a >= 1 and grid[b, a] != grid[b + 1, a]
            if not broken:
                continue
            idx = b2 * (w + 1) + a2
            if stamps[idx] == stamp:
                continue
            stamps[idx] = stamp
            queue[tail, 0] = a2
            queue[tail, 1] = b2
            tail += 1
            if a2 < amin:
                amin = a2
            if a2 > amax:
                amax = a2
            if b2 < bmin:
                bmin = b2
            if b2 > bmax:
                bmax = b2
            if amax - amin > s or bmax - bmin > s:
                return False
    return True


@njit(cache=True)
def restricted_metropolis_sweeps(grid, w, h, beta, hfield, s, sites, uniforms, stamps, queue, stamp_start):
    """Metropolis single flips on a (h+2, w+2) halo grid, rejecting any
    move that creates a +- contour of infinity-diameter > s.

    `grid` halo carries the fixed boundary spins.  Returns the stamp
    counter so successive calls keep the visited marks distinct.
    """
    stamp = stamp_start
    for t in range(sites.shape[0]):
        idx = sites[t]
        x = idx % w
        y = idx // w
        gy = y + 1
        gx = x + 1
        f = (
            grid[gy, gx - 1]
            + grid[gy, gx + 1]
            + grid[gy - 1, gx]
            + grid[gy + 1, gx]
            + hfield
        )
        d_h = 2.0 * grid[gy, gx] * f
        if d_h > 0.0 and uniforms[t] >= np.exp(-beta * d_h):
            continue
        # tentatively flip, then verify the cutoff on the four incident
        # dual edges (only components touching them can have changed)
        grid[gy, gx] = -grid[gy, gx]
        ok = True
        for k in range(4):
            if k == 0:
                a0, b0 = x, y  # dual edge (x,y)-(x+1,y) via corner (x,y)
                broken = y >= 1 and grid[gy, gx] != grid[gy - 1, gx]
            elif k == 1:
                a0, b0 = x, y + 1
                broken = y <= h - 2 and grid[gy, gx] != grid[gy + 1, gx]
            elif k == 2:
                a0, b0 = x, y
                broken = x >= 1 and grid[gy, gx] != grid[gy, gx - 1]
            else:
                a0, b0 = x + 1, y
                broken = x <= w - 2 and grid[gy, gx] != grid[gy, gx + 1]
            # boundary bonds: halo spins participate too
            if k == 0 and y == 0:
                broken = grid[gy, gx] != grid[0, gx]
            if k == 1 and y == h - 1:
                broken = grid[gy, gx] != grid[h + 1, gx]
            if k == 2 and x == 0:
                broken = grid[gy, gx] != grid[gy, 0]
            if k == 3 and x == w - 1:
                broken = grid[gy, gx] != grid[gy, w + 1]
            if not broken:
                continue
            stamp += 1
            if not _contour_span_ok(grid, w, h, a0, b0, s, stamp, stamps, queue):
                ok = False
                break
        if not ok:
            grid[gy, gx] = -grid[gy, gx]
    return stamp
