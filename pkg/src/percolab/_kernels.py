"""Numba kernels behind the hot loops.

Everything here operates on packed edge keys and dense scratch grids so the
greedy growth loop, threshold BFS and cluster labeling run at array speed.
The weight mixing must stay bit-identical to ``lattice.WeightField``; tests
assert parity across the scalar, numpy and kernel paths.

Edge key packing (63 bits, numeric order == (x, y, orientation) order):
    key = (x + 2**30) << 32 | (y + 2**30) << 1 | o
"""

import numpy as np
from numba import njit

B30 = 1 << 30
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 2.0**-53

STOP_RADIUS = 0
STOP_STEPS = 1
STOP_WEIGHT_DROP = 2

STATUS_DONE = 0
STATUS_GRID_FULL = 1
STATUS_STEP_LIMIT = 2


@njit(inline="always")
def _key_of(x, y, o):
    return ((x + B30) << 32) | ((y + B30) << 1) | o


@njit(inline="always")
def _key_weight(mixed_seed, key):
    z = np.uint64(key) ^ mixed_seed
    z = z + _GOLD
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    z = z ^ (z >> np.uint64(31))
    return np.float64(z >> np.uint64(11)) * _INV53


@njit(cache=True, nogil=True)
def edge_weight(mixed_seed, x, y, o):
    return _key_weight(np.uint64(mixed_seed), _key_of(x, y, o))


@njit(inline="always")
def _heap_less(w1, k1, w2, k2):
    if w1 != w2:
        return w1 < w2
    return k1 < k2


@njit(inline="always")
def _heap_push(hw, hk, n, w, k):
    i = n
    hw[i] = w
    hk[i] = k
    while i > 0:
        p = (i - 1) >> 1
        if _heap_less(hw[i], hk[i], hw[p], hk[p]):
            hw[i], hw[p] = hw[p], hw[i]
            hk[i], hk[p] = hk[p], hk[i]
            i = p
        else:
            break
    return n + 1


@njit(inline="always")
def _heap_pop(hw, hk, n):
    n -= 1
    hw[0], hw[n] = hw[n], hw[0]
    hk[0], hk[n] = hk[n], hk[0]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= n:
            break
        r = l + 1
        m = l
        if r < n and _heap_less(hw[r], hk[r], hw[l], hk[l]):
            m = r
        if _heap_less(hw[m], hk[m], hw[i], hk[i]):
            hw[i], hw[m] = hw[m], hw[i]
            hk[i], hk[m] = hk[m], hk[i]
            i = m
        else:
            break
    return n


@njit(cache=True, nogil=True)
def invade_kernel(mixed_seed, ox, oy, stop_kind, stop_radius, stop_steps,
                  p_star, max_steps, grid_half):
    """Greedy invasion from (ox, oy); tree variant (cycle edges are skipped,
    not accepted, and remain part of the outer boundary).

    Returns (status, accepted keys, accepted weights, new-site coords,
    frontier keys/weights, skipped-internal keys/weights, reached_radius).
    """
    seed = np.uint64(mixed_seed)
    size = 2 * grid_half + 1
    visited = np.zeros((size, size), dtype=np.uint8)
    visited[grid_half, grid_half] = 1

    cap_h = 4096
    hw = np.empty(cap_h, np.float64)
    hk = np.empty(cap_h, np.int64)
    nh = 0
    cap_a = stop_steps if stop_kind == STOP_STEPS else 4096
    if cap_a < 16:
        cap_a = 16
    ak = np.empty(cap_a, np.int64)
    aw = np.empty(cap_a, np.float64)
    asx = np.empty(cap_a, np.int64)
    asy = np.empty(cap_a, np.int64)
    na = 0
    cap_s = 1024
    sk = np.empty(cap_s, np.int64)
    sw = np.empty(cap_s, np.float64)
    sn = np.empty(cap_s, np.int64)
    ns = 0

    reached = False
    status = STATUS_DONE

    # push the four edges at the origin
    for d in range(4):
        if d == 0:
            k = _key_of(ox, oy, 0)
        elif d == 1:
            k = _key_of(ox - 1, oy, 0)
        elif d == 2:
            k = _key_of(ox, oy, 1)
        else:
            k = _key_of(ox, oy - 1, 1)
        w = _key_weight(seed, k)
        nh = _heap_push(hw, hk, nh, w, k)

    while True:
        if nh == 0:
            break
        w = hw[0]
        k = hk[0]
        nh = _heap_pop(hw, hk, nh)
        kx = (k >> 32) - B30
        ky = ((k >> 1) & 0x7FFFFFFF) - B30
        ko = k & 1
        x2 = kx + 1 if ko == 0 else kx
        y2 = ky if ko == 0 else ky + 1
        v1 = visited[ky - oy + grid_half, kx - ox + grid_half]
        v2 = visited[y2 - oy + grid_half, x2 - ox + grid_half]
        if v1 and v2:
            # cycle-closing edge: stays on the outer boundary, never accepted
            if ns == cap_s:
                cap_s *= 2
                sk2 = np.empty(cap_s, np.int64)
                sw2 = np.empty(cap_s, np.float64)
                sn2 = np.empty(cap_s, np.int64)
                sk2[:ns] = sk[:ns]
                sw2[:ns] = sw[:ns]
                sn2[:ns] = sn[:ns]
                sk = sk2
                sw = sw2
                sn = sn2
            sk[ns] = k
            sw[ns] = w
            sn[ns] = na
            ns += 1
            continue
        if na >= max_steps:
            status = STATUS_STEP_LIMIT
            break
        if v1:
            nx, ny = x2, y2
        else:
            nx, ny = kx, ky
        if na == cap_a:
            cap_a *= 2
            ak2 = np.empty(cap_a, np.int64)
            aw2 = np.empty(cap_a, np.float64)
            asx2 = np.empty(cap_a, np.int64)
            asy2 = np.empty(cap_a, np.int64)
            ak2[:na] = ak[:na]
            aw2[:na] = aw[:na]
            asx2[:na] = asx[:na]
            asy2[:na] = asy[:na]
            ak, aw, asx, asy = ak2, aw2, asx2, asy2
        ak[na] = k
        aw[na] = w
        asx[na] = nx
        asy[na] = ny
        na += 1
        visited[ny - oy + grid_half, nx - ox + grid_half] = 1
        dx = nx - ox
        dy = ny - oy
        norm = max(abs(dx), abs(dy))
        if norm + 2 > grid_half:
            status = STATUS_GRID_FULL
            break
        # expose the new site's edges (except toward already-invaded sites)
        for d in range(4):
            if d == 0:
                tx, ty = nx + 1, ny
                ek = _key_of(nx, ny, 0)
            elif d == 1:
                tx, ty = nx - 1, ny
                ek = _key_of(nx - 1, ny, 0)
            elif d == 2:
                tx, ty = nx, ny + 1
                ek = _key_of(nx, ny, 1)
            else:
                tx, ty = nx, ny - 1
                ek = _key_of(nx, ny - 1, 1)
            if visited[ty - oy + grid_half, tx - ox + grid_half]:
                continue
            ew = _key_weight(seed, ek)
            if nh + 1 > cap_h:
                cap_h *= 2
                hw2 = np.empty(cap_h, np.float64)
                hk2 = np.empty(cap_h, np.int64)
                hw2[:nh] = hw[:nh]
                hk2[:nh] = hk[:nh]
                hw, hk = hw2, hk2
            nh = _heap_push(hw, hk, nh, ew, ek)
        if stop_kind == STOP_RADIUS:
            if norm >= stop_radius:
                break
        elif stop_kind == STOP_STEPS:
            if na >= stop_steps:
                break
        else:
            # weight-drop: end once a sub-p* acceptance lands a site on or
            # beyond the target boundary (the light growth escaped to R)
            if norm >= stop_radius:
                reached = True
                if w < p_star:
                    break

    return (status, ak[:na].copy(), aw[:na].copy(), asx[:na].copy(),
            asy[:na].copy(), hk[:nh].copy(), hw[:nh].copy(),
            sk[:ns].copy(), sw[:ns].copy(), sn[:ns].copy(), reached)


@njit(cache=True, nogil=True)
def threshold_reach_kernel(mixed_seed, cx, cy, radius, src_x, src_y,
                           inner_solid, thresholds):
    """Escape flags per threshold: can the source set reach the boundary of
    B((cx,cy), radius) through edges with weight < threshold?

    ``thresholds`` must be increasing; once a threshold succeeds all later
    ones do.  Sites with |s - c| <= inner_solid are pre-marked reached
    (treated as part of the source blob) without being expansion sources
    themselves unless listed in src.  Edges rejected at one threshold are
    kept in a heap and replayed for the next.
    """
    seed = np.uint64(mixed_seed)
    nt = len(thresholds)
    flags = np.zeros(nt, np.uint8)
    size = 2 * radius + 1
    visited = np.zeros((size, size), dtype=np.uint8)
    qx = np.empty(size * size, np.int64)
    qy = np.empty(size * size, np.int64)

    if inner_solid >= 0:
        for y in range(-inner_solid, inner_solid + 1):
            for x in range(-inner_solid, inner_solid + 1):
                visited[y + radius, x + radius] = 1

    head = 0
    tail = 0
    on_boundary = False
    for i in range(len(src_x)):
        rx = src_x[i] - cx
        ry = src_y[i] - cy
        if max(abs(rx), abs(ry)) >= radius:
            on_boundary = True
        if visited[ry + radius, rx + radius] and inner_solid < 0:
            continue
        visited[ry + radius, rx + radius] = 1
        qx[tail] = rx
        qy[tail] = ry
        tail += 1
    if on_boundary:
        for t in range(nt):
            flags[t] = 1
        return flags

    cap_d = 1024
    dw = np.empty(cap_d, np.float64)
    dk = np.empty(cap_d, np.int64)
    nd = 0

    for t in range(nt):
        thr = thresholds[t]
        last = t == nt - 1
        # re-admit previously rejected edges now under the threshold
        while nd > 0 and dw[0] < thr:
            k = dk[0]
            nd = _heap_pop(dw, dk, nd)
            kx = (k >> 32) - B30
            ky = ((k >> 1) & 0x7FFFFFFF) - B30
            ko = k & 1
            x2 = kx + 1 if ko == 0 else kx
            y2 = ky if ko == 0 else ky + 1
            ax = kx - cx
            ay = ky - cy
            bx = x2 - cx
            by = y2 - cy
            if not visited[ay + radius, ax + radius]:
                visited[ay + radius, ax + radius] = 1
                qx[tail] = ax
                qy[tail] = ay
                tail += 1
            if not visited[by + radius, bx + radius]:
                visited[by + radius, bx + radius] = 1
                qx[tail] = bx
                qy[tail] = by
                tail += 1
        reached = False
        while head < tail:
            ux = qx[head]
            uy = qy[head]
            head += 1
            if max(abs(ux), abs(uy)) >= radius:
                reached = True
                break
            for d in range(4):
                if d == 0:
                    vx, vy = ux + 1, uy
                    ek = _key_of(ux + cx, uy + cy, 0)
                elif d == 1:
                    vx, vy = ux - 1, uy
                    ek = _key_of(ux - 1 + cx, uy + cy, 0)
                elif d == 2:
                    vx, vy = ux, uy + 1
                    ek = _key_of(ux + cx, uy + cy, 1)
                else:
                    vx, vy = ux, uy - 1
                    ek = _key_of(ux + cx, uy - 1 + cy, 1)
                if visited[vy + radius, vx + radius]:
                    continue
                ew = _key_weight(seed, ek)
                if ew < thr:
                    visited[vy + radius, vx + radius] = 1
                    qx[tail] = vx
                    qy[tail] = vy
                    tail += 1
                elif not last:
                    if nd + 1 > cap_d:
                        cap_d *= 2
                        dw2 = np.empty(cap_d, np.float64)
                        dk2 = np.empty(cap_d, np.int64)
                        dw2[:nd] = dw[:nd]
                        dk2[:nd] = dk[:nd]
                        dw, dk = dw2, dk2
                    nd = _heap_push(dw, dk, nd, ew, ek)
        if reached:
            for tt in range(t, nt):
                flags[tt] = 1
            return flags
    return flags


@njit(inline="always")
def _find(parent, a):
    root = a
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


@njit(inline="always")
def _union(parent, rank, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if rank[ra] < rank[rb]:
        parent[ra] = rb
    elif rank[ra] > rank[rb]:
        parent[rb] = ra
    else:
        parent[rb] = ra
        rank[ra] += 1


@njit(cache=True, nogil=True)
def uf_label(h_open, v_open):
    """Cluster roots for a site grid joined by flagged edges.

    ``h_open[j, i]`` joins sites (j, i)-(j, i+1); ``v_open[j, i]`` joins
    (j, i)-(j+1, i).  Returns a flattened array mapping site index
    j * W + i to its cluster root.
    """
    hh, wm1 = h_open.shape
    hm1, ww = v_open.shape
    n = hh * ww
    parent = np.arange(n, dtype=np.int32)
    rank = np.zeros(n, dtype=np.int8)
    for j in range(hh):
        base = j * ww
        for i in range(wm1):
            if h_open[j, i]:
                _union(parent, rank, base + i, base + i + 1)
    for j in range(hm1):
        base = j * ww
        for i in range(ww):
            if v_open[j, i]:
                _union(parent, rank, base + i, base + i + ww)
    for k in range(n):
        parent[k] = _find(parent, k)
    return parent
