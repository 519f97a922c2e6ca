"""Hot numeric kernels.

Every kernel exists twice: a loop-style version compiled with numba and a
numpy version used when ``TSNPART_NUMBA=0``. The public names at the bottom
of the module are bound to one or the other at import time; both variants
stay importable (``*_nb`` / ``*_np``) so tests and the benchmark can compare
them directly.

Occupancy rows are int32 owner ids over one hypercycle, ``-1`` meaning free.
"""

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

FREE = -1


# ---------------------------------------------------------------------------
# all-pairs hop distances


@njit(cache=True)
def bfs_all_pairs_nb(indptr, indices, n):
    dist = np.full((n, n), -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for src in range(n):
        row = dist[src]
        row[src] = 0
        head = 0
        tail = 1
        queue[0] = src
        while head < tail:
            u = queue[head]
            head += 1
            du = row[u] + 1
            for p in range(indptr[u], indptr[u + 1]):
                v = indices[p]
                if row[v] < 0:
                    row[v] = du
                    queue[tail] = v
                    tail += 1
    return dist


def bfs_all_pairs_np(indptr, indices, n):
    adj = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    adj[rows, indices] = True
    dist = np.full((n, n), -1, dtype=np.int64)
    frontier = np.eye(n, dtype=bool)
    seen = frontier.copy()
    np.fill_diagonal(dist, 0)
    level = 0
    while frontier.any():
        level += 1
        nxt = (frontier.astype(np.int32) @ adj.astype(np.int32)) > 0
        nxt &= ~seen
        dist[nxt] = level
        seen |= nxt
        frontier = nxt
    return dist


# ---------------------------------------------------------------------------
# candidate phases for a rigid (no-wait) expansion


@njit(cache=True)
def feasible_phases_nb(occ, links, offsets, tx, period, latency, k_max):
    hyper = occ.shape[1]
    reps = hyper // period
    out = np.empty(k_max, dtype=np.int64)
    n_out = 0
    for phase in range(period - latency + 1):
        ok = True
        for e in range(links.shape[0]):
            row = occ[links[e]]
            base = phase + offsets[e]
            for k in range(reps):
                start = base + k * period
                for j in range(tx):
                    if row[start + j] != -1:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            out[n_out] = phase
            n_out += 1
            if n_out == k_max:
                break
    return out[:n_out]


def _folded_window_busy(row, period, tx):
    """busy[t] is True when ``[t, t+tx)`` collides in any period repetition."""
    folded = (row.reshape(-1, period) != FREE).any(axis=0).astype(np.int64)
    csum = np.concatenate(([0], np.cumsum(folded)))
    n = period - tx + 1
    if n <= 0:
        return np.ones(0, dtype=bool)
    return (csum[tx : tx + n] - csum[:n]) > 0


def feasible_phases_np(occ, links, offsets, tx, period, latency, k_max):
    n_phase = period - latency + 1
    if n_phase <= 0:
        return np.empty(0, dtype=np.int64)
    ok = np.ones(n_phase, dtype=bool)
    for link, off in zip(links, offsets):
        busy = _folded_window_busy(occ[link], period, tx)
        ok &= ~busy[off : off + n_phase]
    return np.flatnonzero(ok)[:k_max].astype(np.int64)


# ---------------------------------------------------------------------------
# as-soon-as-possible placement with queuing


@njit(cache=True)
def greedy_place_nb(occ, qocc, links, parent, queued, tail, tx, hop, period, deadline):
    """Place one frame pattern hop by hop.

    ``tail[e]`` is the least latency from the start of edge ``e`` to the
    deepest leaf below it, so ``start + tail[e] <= deadline`` must hold.
    ``hop`` is tx + propagation + processing.
    """
    m = links.shape[0]
    hyper = occ.shape[1]
    reps = hyper // period
    n_q = qocc.shape[1]
    starts = np.full(m, -1, dtype=np.int64)
    queues = np.full(m, -1, dtype=np.int64)
    for e in range(m):
        ready = 0 if parent[e] < 0 else starts[parent[e]] + hop
        latest = deadline - tail[e]
        if latest < ready:
            return starts, queues, False
        row = occ[links[e]]
        # Earliest link-feasible start; any later start only lengthens the
        # queue residency [ready, s), so only this one needs a queue check.
        s = ready
        found = False
        while s <= latest:
            blocked = -1
            for k in range(reps):
                base = s + k * period
                for j in range(tx - 1, -1, -1):
                    if row[base + j] != -1:
                        blocked = j
                        break
                if blocked >= 0:
                    break
            if blocked < 0:
                found = True
                break
            s += blocked + 1
        if not found:
            return starts, queues, False
        starts[e] = s
        if s > ready:
            if not queued[e]:
                continue
            best_q = -1
            for q in range(n_q):
                qrow = qocc[links[e], q]
                free = True
                for k in range(reps):
                    for t in range(ready + k * period, s + k * period):
                        if qrow[t] != -1:
                            free = False
                            break
                    if not free:
                        break
                if free:
                    best_q = q
                    break
            if best_q < 0:
                return starts, queues, False
            queues[e] = best_q
    return starts, queues, True


def greedy_place_np(occ, qocc, links, parent, queued, tail, tx, hop, period, deadline):
    m = len(links)
    n_q = qocc.shape[1]
    starts = np.full(m, -1, dtype=np.int64)
    queues = np.full(m, -1, dtype=np.int64)
    for e in range(m):
        ready = 0 if parent[e] < 0 else int(starts[parent[e]]) + hop
        latest = deadline - int(tail[e])
        if latest < ready:
            return starts, queues, False
        busy = _folded_window_busy(occ[links[e]], period, tx)
        free = np.flatnonzero(~busy[ready : latest + 1])
        if free.size == 0:
            return starts, queues, False
        s = ready + int(free[0])
        starts[e] = s
        if queued[e] and s > ready:
            qbusy = (qocc[links[e]].reshape(n_q, -1, period) != FREE).any(axis=1)
            ok = np.flatnonzero(~qbusy[:, ready:s].any(axis=1))
            if ok.size == 0:
                return starts, queues, False
            queues[e] = int(ok[0])
    return starts, queues, True


# ---------------------------------------------------------------------------
# conflict-graph edges


@njit(cache=True)
def _pair_hits_nb(cand_phase, color_ptr, period, tx, a, b, s0, s1, oa, ob, eu, ev, pos):
    ga = period[a]
    gb = period[b]
    while gb:
        ga, gb = gb, ga % gb
    g = ga
    la = tx[a]
    lb = tx[b]
    # bad[x]: a phase difference phi_b - phi_a = x (mod g) collides on some
    # shared link; per link the colliding residues form one circular run.
    bad = np.zeros(g, dtype=np.bool_)
    width = min(la + lb - 1, g)
    for s in range(s0, s1):
        lo = (g - lb + 1 - (ob[s] - oa[s])) % g
        for k in range(width):
            bad[(lo + k) % g] = True
    write = eu.shape[0] > 0
    n_found = 0
    for i in range(color_ptr[a], color_ptr[a + 1]):
        phi_a = cand_phase[i]
        for j in range(color_ptr[b], color_ptr[b + 1]):
            if bad[(cand_phase[j] - phi_a) % g]:
                if write:
                    eu[pos + n_found] = i
                    ev[pos + n_found] = j
                n_found += 1
    return n_found


@njit(cache=True)
def conflict_edges_nb(cand_phase, color_ptr, period, tx, pa, pb, shared_ptr, oa, ob):
    """Edges between candidates of colour pairs that share directed links.

    Two periodic intervals collide iff their start difference modulo the
    gcd of the periods falls in ``(-len_b, len_a)``.
    """
    n_pairs = pa.shape[0]
    dummy = np.empty(0, dtype=np.int64)
    total = 0
    for q in range(n_pairs):
        total += _pair_hits_nb(
            cand_phase, color_ptr, period, tx, pa[q], pb[q],
            shared_ptr[q], shared_ptr[q + 1], oa, ob, dummy, dummy, 0,
        )
    eu = np.empty(total, dtype=np.int64)
    ev = np.empty(total, dtype=np.int64)
    pos = 0
    if total == 0:
        return eu, ev
    for q in range(n_pairs):
        pos += _pair_hits_nb(
            cand_phase, color_ptr, period, tx, pa[q], pb[q],
            shared_ptr[q], shared_ptr[q + 1], oa, ob, eu, ev, pos,
        )
    return eu, ev


def conflict_edges_np(cand_phase, color_ptr, period, tx, pa, pb, shared_ptr, oa, ob):
    eus = []
    evs = []
    for q in range(len(pa)):
        a, b = int(pa[q]), int(pb[q])
        g = int(np.gcd(period[a], period[b]))
        ia = np.arange(color_ptr[a], color_ptr[a + 1])
        ib = np.arange(color_ptr[b], color_ptr[b + 1])
        phi_a = cand_phase[ia][:, None]
        phi_b = cand_phase[ib][None, :]
        hit = np.zeros((ia.size, ib.size), dtype=bool)
        for s in range(shared_ptr[q], shared_ptr[q + 1]):
            d = (phi_b + ob[s] - phi_a - oa[s]) % g
            hit |= (d < tx[a]) | (d > g - tx[b])
        r, c = np.nonzero(hit)
        eus.append(ia[r])
        evs.append(ib[c])
    if not eus:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return (
        np.concatenate(eus).astype(np.int64),
        np.concatenate(evs).astype(np.int64),
    )


@njit(cache=True)
def edges_to_csr_nb(eu, ev, n_v):
    """Symmetric CSR; row ``r`` lists partners where ``r`` is ``eu`` first."""
    m = eu.shape[0]
    indptr = np.zeros(n_v + 1, dtype=np.int64)
    for k in range(m):
        indptr[eu[k] + 1] += 1
        indptr[ev[k] + 1] += 1
    for v in range(n_v):
        indptr[v + 1] += indptr[v]
    fill = indptr[:-1].copy()
    indices = np.empty(2 * m, dtype=np.int64)
    for k in range(m):
        indices[fill[eu[k]]] = ev[k]
        fill[eu[k]] += 1
    for k in range(m):
        indices[fill[ev[k]]] = eu[k]
        fill[ev[k]] += 1
    return indptr, indices


def edges_to_csr_np(eu, ev, n_v):
    rows = np.concatenate([eu, ev])
    cols = np.concatenate([ev, eu])
    order = np.argsort(rows, kind="stable")
    indptr = np.zeros(n_v + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(np.bincount(rows, minlength=n_v))
    return indptr, cols[order].astype(np.int64)


# ---------------------------------------------------------------------------
# greedy heap heuristic for an independent colourful set


def _gfh_solve(indptr, indices, v_color, color_ptr, rank, group, group_ptr, group_colors):
    n_v = v_color.shape[0]
    n_c = color_ptr.shape[0] - 1
    alive = np.ones(n_v, dtype=np.bool_)
    deg = np.empty(n_v, dtype=np.int64)
    for v in range(n_v):
        deg[v] = indptr[v + 1] - indptr[v]
    remaining = np.empty(n_c, dtype=np.int64)
    for c in range(n_c):
        remaining[c] = color_ptr[c + 1] - color_ptr[c]
    resolved = np.zeros(n_c, dtype=np.bool_)
    chosen = np.full(n_c, -1, dtype=np.int64)
    log = np.empty(n_v, dtype=np.int64)
    n_log = 0
    active = -1
    checkpoint = 0
    n_left = n_c
    while n_left > 0:
        best = -1
        if active < 0:
            for c in range(n_c):
                if resolved[c]:
                    continue
                if best < 0 or remaining[c] < remaining[best] or (
                    remaining[c] == remaining[best] and rank[c] < rank[best]
                ):
                    best = c
            active = group[best]
            checkpoint = n_log
        else:
            for gi in range(group_ptr[active], group_ptr[active + 1]):
                c = group_colors[gi]
                if resolved[c]:
                    continue
                if best < 0 or remaining[c] < remaining[best] or (
                    remaining[c] == remaining[best] and rank[c] < rank[best]
                ):
                    best = c
        c = best
        if remaining[c] == 0:
            # Undo the group's commitments, then drop all of its candidates.
            while n_log > checkpoint:
                n_log -= 1
                w = log[n_log]
                alive[w] = True
                remaining[v_color[w]] += 1
                for p in range(indptr[w], indptr[w + 1]):
                    deg[indices[p]] += 1
            for gi in range(group_ptr[active], group_ptr[active + 1]):
                gc = group_colors[gi]
                chosen[gc] = -1
                if not resolved[gc]:
                    n_left -= 1
                resolved[gc] = True
                for w in range(color_ptr[gc], color_ptr[gc + 1]):
                    if alive[w]:
                        alive[w] = False
                        remaining[gc] -= 1
                        for p in range(indptr[w], indptr[w + 1]):
                            deg[indices[p]] -= 1
            checkpoint = n_log
            active = -1
            continue
        pick = -1
        for v in range(color_ptr[c], color_ptr[c + 1]):
            if alive[v] and (pick < 0 or deg[v] < deg[pick]):
                pick = v
        chosen[c] = pick
        resolved[c] = True
        n_left -= 1
        for v in range(color_ptr[c], color_ptr[c + 1]):
            if v != pick and alive[v]:
                alive[v] = False
                remaining[c] -= 1
                for p in range(indptr[v], indptr[v + 1]):
                    deg[indices[p]] -= 1
                log[n_log] = v
                n_log += 1
        for p in range(indptr[pick], indptr[pick + 1]):
            w = indices[p]
            if alive[w]:
                alive[w] = False
                remaining[v_color[w]] -= 1
                for p2 in range(indptr[w], indptr[w + 1]):
                    deg[indices[p2]] -= 1
                log[n_log] = w
                n_log += 1
        done = True
        for gi in range(group_ptr[active], group_ptr[active + 1]):
            if not resolved[group_colors[gi]]:
                done = False
                break
        if done:
            active = -1
    return chosen


gfh_solve_nb = njit(cache=True)(_gfh_solve)
gfh_solve_np = _gfh_solve


if USE_NUMBA:
    bfs_all_pairs = bfs_all_pairs_nb
    feasible_phases = feasible_phases_nb
    greedy_place = greedy_place_nb
    conflict_edges = conflict_edges_nb
    edges_to_csr = edges_to_csr_nb
    gfh_solve = gfh_solve_nb
else:
    bfs_all_pairs = bfs_all_pairs_np
    feasible_phases = feasible_phases_np
    greedy_place = greedy_place_np
    conflict_edges = conflict_edges_np
    edges_to_csr = edges_to_csr_np
    gfh_solve = gfh_solve_np

BACKEND = "numba" if USE_NUMBA else "numpy"


_warm = False


def warmup() -> None:
    """Compile every numba kernel on toy inputs so timings exclude JIT."""
    global _warm
    if _warm or not USE_NUMBA:
        return
    i64 = np.int64
    indptr = np.array([0, 1, 2], dtype=i64)
    indices = np.array([1, 0], dtype=i64)
    bfs_all_pairs_nb(indptr, indices, 2)
    occ = np.full((2, 8), FREE, dtype=np.int32)
    qocc = np.full((2, 2, 8), FREE, dtype=np.int32)
    links = np.array([0, 1], dtype=i64)
    feasible_phases_nb(occ, links, np.array([0, 3], dtype=i64), 1, 8, 5, 4)
    greedy_place_nb(occ, qocc, links, np.array([-1, 0], dtype=i64),
                    np.array([False, True]), np.array([5, 2], dtype=i64), 1, 3, 8, 8)
    phase = np.array([0, 1, 0, 1], dtype=i64)
    cptr = np.array([0, 2, 4], dtype=i64)
    two = np.array([8, 8], dtype=i64)
    conflict_edges_nb(phase, cptr, two, np.array([1, 1], dtype=i64),
                      np.array([0], dtype=i64), np.array([1], dtype=i64),
                      np.array([0, 1], dtype=i64), np.array([0], dtype=i64),
                      np.array([0], dtype=i64))
    edges_to_csr_nb(np.array([0], dtype=i64), np.array([1], dtype=i64), 2)
    gfh_solve_nb(np.array([0, 1, 2, 3, 4], dtype=i64), np.array([2, 3, 0, 1], dtype=i64),
                 np.array([0, 0, 1, 1], dtype=i64), cptr, np.array([0, 1], dtype=i64),
                 np.array([0, 1], dtype=i64), np.array([0, 1, 2], dtype=i64),
                 np.array([0, 1], dtype=i64))
    _warm = True
