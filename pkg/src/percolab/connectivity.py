"""Bernoulli-percolation toolkit on the coupled weight field.

Thresholding the weight field at p gives the usual coupled Bernoulli
configuration: an edge is p-open iff tau_e < p, p-closed otherwise, and a
dual edge inherits its primal edge's state.  Everything here is window
local: weights for a box are generated in bulk, turned into boolean edge
masks, and clustered with a union-find kernel.

Boundary conventions for dual windows are fixed so that the planar
duality identity (open horizontal crossing XOR closed vertical dual
crossing) holds exactly on finite rectangles; the exhaustive tests pin
this down.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from . import _kernels as K
from .errors import DomainError, InvalidRegionError, UnsupportedSigmaError
from .lattice import (AnnulusRegion, BoxRegion, DualEdge, Edge, HORIZONTAL,
                      VERTICAL, Site, WeightField, site_norm)

OPEN = "open"
CLOSED = "closed"
PRIMAL = "primal"
DUAL = "dual"

SIGMA_ONE_ARM = ("open",)
SIGMA_TWO_ARM = ("open", "open")
SIGMA_FOUR_ARM = ("open", "closed", "open", "closed")
SUPPORTED_SIGMAS = (SIGMA_ONE_ARM, SIGMA_TWO_ARM, SIGMA_FOUR_ARM)


def normalize_sigma(sigma) -> tuple[str, ...]:
    t = tuple(str(s).lower() for s in sigma)
    if t not in SUPPORTED_SIGMAS:
        raise UnsupportedSigmaError(
            f"sigma {t} unsupported; use one of {SUPPORTED_SIGMAS}")
    return t


@dataclass(frozen=True)
class LevelConfig:
    """A weight field viewed at threshold p inside a window."""

    field: WeightField
    p: float
    window: BoxRegion

    def is_open(self, e: Edge | DualEdge) -> bool:
        return self.field.weight(e) < self.p


class WindowArrays:
    """Edge-weight arrays for B(center, n) and its shifted dual box.

    Primal sites are indexed (j, i) -> (x0 + i, y0 + j) with W = 2n+1;
    dual sites use the same indexing for their base coordinates (the dual
    site (x+1/2, y+1/2) is keyed by (x, y)).  The dual edge arrays read
    from a 1-padded primal box, because rim dual bonds cross primal bonds
    just outside B(center, n).
    """

    def __init__(self, field: WeightField, center: Site, n: int):
        if n < 1:
            raise InvalidRegionError(f"window radius must be >= 1, got {n}")
        self.center = center
        self.n = n
        self.W = 2 * n + 1
        self.x0 = center[0] - n
        self.y0 = center[1] - n
        Wp = self.W + 2
        hw = field.grid_weights(self.x0 - 1, self.y0 - 1, Wp - 1, Wp, HORIZONTAL)
        vw = field.grid_weights(self.x0 - 1, self.y0 - 1, Wp, Wp - 1, VERTICAL)
        self.hw = hw[1:Wp - 1, 1:Wp - 2]
        self.vw = vw[1:Wp - 2, 1:Wp - 1]
        self.dual_hw = vw[1:Wp - 1, 2:Wp - 1]
        self.dual_vw = hw[2:Wp - 1, 1:Wp - 1]

    def site_index(self, site: Site) -> int:
        i = site[0] - self.x0
        j = site[1] - self.y0
        if not (0 <= i < self.W and 0 <= j < self.W):
            raise DomainError(f"site {site} outside window")
        return j * self.W + i

    def norm_grid(self) -> np.ndarray:
        """|site - center| for every grid position."""
        d = np.abs(np.arange(self.W) - self.n)
        return np.maximum(d[None, :], d[:, None])


def _rim_roots(labels: np.ndarray, W: int, H: int) -> np.ndarray:
    lab = labels.reshape(H, W)
    rim = np.concatenate([lab[0, :], lab[-1, :], lab[:, 0], lab[:, -1]])
    return np.unique(rim)


def clusters(field: WeightField, window: Union[BoxRegion, AnnulusRegion],
             p: float, lattice: str = PRIMAL, sense: str = OPEN) -> "ClusterIndex":
    """Union-find connectivity over the window's sites at threshold p.

    ``lattice='dual'`` works on the shifted box: dual sites keyed by base
    coordinates, joined through (p-)closed or open dual bonds.
    """
    if lattice not in (PRIMAL, DUAL):
        raise DomainError(f"lattice must be primal or dual, got {lattice}")
    if sense not in (OPEN, CLOSED):
        raise DomainError(f"sense must be open or closed, got {sense}")
    if isinstance(window, BoxRegion):
        center, n = window.center, window.radius
        inner = -1
    elif isinstance(window, AnnulusRegion):
        center, n = window.center, window.outer
        inner = window.inner
    else:
        raise InvalidRegionError(f"unsupported window {window!r}")
    wa = WindowArrays(field, center, max(n, 1))
    if lattice == PRIMAL:
        h_w, v_w = wa.hw, wa.vw
    else:
        h_w, v_w = wa.dual_hw, wa.dual_vw
    if sense == OPEN:
        h_mask = h_w < p
        v_mask = v_w < p
    else:
        h_mask = h_w >= p
        v_mask = v_w >= p
    if inner >= 0:
        # annulus: only edges with both endpoints outside B(inner)
        g = wa.norm_grid() > inner
        h_mask = h_mask & g[:, :-1] & g[:, 1:]
        v_mask = v_mask & g[:-1, :] & g[1:, :]
    labels = K.uf_label(np.ascontiguousarray(h_mask, dtype=np.uint8),
                        np.ascontiguousarray(v_mask, dtype=np.uint8))
    return ClusterIndex(window=window, p=p, lattice=lattice, sense=sense,
                        labels=labels, arrays=wa)


@dataclass
class ClusterIndex:
    """Root labels for every site of a thresholded window."""

    window: Union[BoxRegion, AnnulusRegion]
    p: float
    lattice: str
    sense: str
    labels: np.ndarray
    arrays: WindowArrays

    def find(self, site: Site) -> int:
        """Cluster root of a site (dual sites keyed by base coordinates)."""
        if not self.window.contains(site):
            raise DomainError(f"site {site} outside window")
        return int(self.labels[self.arrays.site_index(site)])

    def same_cluster(self, a: Site, b: Site) -> bool:
        return self.find(a) == self.find(b)

    @property
    def n_clusters(self) -> int:
        if isinstance(self.window, AnnulusRegion):
            g = self.arrays.norm_grid().ravel() > self.window.inner
            return len(np.unique(self.labels[g]))
        return len(np.unique(self.labels))


def reaches(field: WeightField, origin: Site, n: int, p: float) -> bool:
    """True iff origin joins the boundary of B(origin, n) by a p-open path."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    src = np.array([origin[0]], dtype=np.int64), np.array([origin[1]], dtype=np.int64)
    flags = K.threshold_reach_kernel(
        np.uint64(field.mixed_seed), origin[0], origin[1], n,
        src[0], src[1], -1, np.array([p], dtype=np.float64))
    return bool(flags[0])


def _crossing_masks(h_open: np.ndarray, v_open: np.ndarray,
                    direction: str) -> bool:
    """Open crossing of a site grid from boolean edge masks."""
    labels = K.uf_label(np.ascontiguousarray(h_open, dtype=np.uint8),
                        np.ascontiguousarray(v_open, dtype=np.uint8))
    H = v_open.shape[0] + 1
    W = h_open.shape[1] + 1
    lab = labels.reshape(H, W)
    if direction == "horizontal":
        a, b = lab[:, 0], lab[:, -1]
    else:
        a, b = lab[0, :], lab[-1, :]
    return bool(np.isin(a, b).any())


def _dual_closed_masks(h_open: np.ndarray, v_open: np.ndarray
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Closed-dual edge masks for the dual rectangle of a W x H site grid.

    The dual grid has (W-1) columns and (H+1) rows; its vertical bonds are
    the duals of the primal horizontal bonds, its horizontal bonds the
    duals of interior primal vertical bonds (the top/bottom dual rows
    carry no horizontal bonds, leaving the crossing sides free).
    """
    H, Wm1 = h_open.shape
    dual_v = ~h_open                       # (H, W-1): joins dual rows j, j+1
    dual_h = np.zeros((H + 1, Wm1 - 1), dtype=bool)
    if Wm1 >= 2:
        dual_h[1:H, :] = ~v_open[:, 1:Wm1]
    return dual_h, dual_v


def crossing(field: WeightField, rect: tuple[int, int], p: float,
             direction: str = "horizontal", sense: str = "open-primal",
             origin: Site = (0, 0)) -> bool:
    """Crossing of the rectangle [0,w] x [0,h] (edge lengths), anchored at
    ``origin``, between its two opposite sides.

    ``sense='closed-dual'`` evaluates the closed crossing of the shifted
    dual rectangle in the perpendicular-free-sides convention; with
    ``direction`` naming the dual crossing's own direction.
    """
    w_edges, h_edges = rect
    if w_edges < 1 or h_edges < 1:
        raise InvalidRegionError(f"rectangle sides must be >= 1, got {rect}")
    if direction not in ("horizontal", "vertical"):
        raise DomainError(f"bad direction {direction}")
    W = w_edges + 1
    H = h_edges + 1
    hw = field.grid_weights(origin[0], origin[1], W - 1, H, HORIZONTAL)
    vw = field.grid_weights(origin[0], origin[1], W, H - 1, VERTICAL)
    h_open = hw < p
    v_open = vw < p
    if sense == "open-primal":
        return _crossing_masks(h_open, v_open, direction)
    if sense == "closed-dual":
        # dual grid is (W-1) wide and (H+1) tall; dual_h/dual_v are its
        # own horizontal/vertical bond masks
        dual_h, dual_v = _dual_closed_masks(h_open, v_open)
        return _crossing_masks(dual_h, dual_v, direction)
    raise DomainError(f"bad sense {sense}")


def dual_circuit_blocks(field: WeightField, m: int, R: int, p: float,
                        center: Site = (0, 0)) -> bool:
    """True iff no p-open primal path joins the two boundary rings of
    Ann(center; m, R); equivalently a p-closed dual circuit surrounds
    B(center, m) inside the annulus."""
    if not 1 <= m < R:
        raise InvalidRegionError(f"need 1 <= m < R, got ({m},{R})")
    ring = [s for s in BoxRegion(center, m).boundary_sites()]
    sx = np.array([s[0] for s in ring], dtype=np.int64)
    sy = np.array([s[1] for s in ring], dtype=np.int64)
    flags = K.threshold_reach_kernel(
        np.uint64(field.mixed_seed), center[0], center[1], R,
        sx, sy, m - 1, np.array([p], dtype=np.float64))
    return not bool(flags[0])


def _distinct_boundary_arms(h_mask, v_mask, a_idx, b_idx, W) -> bool:
    """Endpoints a and b reach the window rim in distinct clusters."""
    labels = K.uf_label(np.ascontiguousarray(h_mask, dtype=np.uint8),
                        np.ascontiguousarray(v_mask, dtype=np.uint8))
    ra = labels[a_idx]
    rb = labels[b_idx]
    if ra == rb:
        return False
    rim = _rim_roots(labels, W, W)
    return bool(np.isin(ra, rim)[()]) and bool(np.isin(rb, rim)[()])


def four_arm_alternating(field: WeightField, e: Edge, n: int,
                         p_open: float, p_closed: float = None) -> bool:
    """Alternating four-arm event at edge e to distance n.

    e's endpoints reach the rim of B(e_x, n) by open paths avoiding e and
    lie in distinct open clusters once e is removed; simultaneously the
    dual endpoints reach the dual rim by closed dual paths avoiding e*,
    in distinct closed dual clusters.  Planarity makes this the usual
    "four disjoint alternating arms" event.  The two-threshold form uses
    p_open for the open arms and p_closed for the closed ones.
    """
    if p_closed is None:
        p_closed = p_open
    if p_closed > p_open:
        raise DomainError("need p_closed <= p_open")
    center = e.endpoints[0]
    wa = WindowArrays(field, center, n)
    W = wa.W
    h_open = wa.hw < p_open
    v_open = wa.vw < p_open
    if e.o == HORIZONTAL:
        h_open[n, n] = False
        a_idx = n * W + n
        b_idx = n * W + n + 1
    else:
        v_open[n, n] = False
        a_idx = n * W + n
        b_idx = (n + 1) * W + n
    if not _distinct_boundary_arms(h_open, v_open, a_idx, b_idx, W):
        return False
    dh_closed = wa.dual_hw >= p_closed
    dv_closed = wa.dual_vw >= p_closed
    if e.o == HORIZONTAL:
        dv_closed[n - 1, n] = False
        da_idx = (n - 1) * W + n
        db_idx = n * W + n
    else:
        dh_closed[n, n - 1] = False
        da_idx = n * W + n - 1
        db_idx = n * W + n
    return _distinct_boundary_arms(dh_closed, dv_closed, da_idx, db_idx, W)


def pivotal_edges(field: WeightField, n: int, p: float) -> set[Edge]:
    """Edges of B(n) whose state flip changes the left-right open crossing.

    When the crossing is absent only closed edges can create it: both
    endpoint clusters must touch opposite sides.  When it is present only
    open edges can destroy it: the edge's dual endpoints must join closed
    dual clusters touching the top and bottom free rows of the dual
    rectangle (so closing the edge completes the blocking dual path).
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    wa = WindowArrays(field, (0, 0), n)
    W = wa.W
    h_open = wa.hw < p
    v_open = wa.vw < p
    labels = K.uf_label(np.ascontiguousarray(h_open, dtype=np.uint8),
                        np.ascontiguousarray(v_open, dtype=np.uint8))
    lab = labels.reshape(W, W)
    nsites = W * W
    tl = np.zeros(nsites, dtype=bool)
    tr = np.zeros(nsites, dtype=bool)
    tl[lab[:, 0]] = True
    tr[lab[:, -1]] = True
    has_crossing = bool((tl & tr).any())
    out: set[Edge] = set()
    if not has_crossing:
        ru = lab[:, :-1]
        rv = lab[:, 1:]
        piv_h = (~h_open) & ((tl[ru] & tr[rv]) | (tr[ru] & tl[rv]))
        ru = lab[:-1, :]
        rv = lab[1:, :]
        piv_v = (~v_open) & ((tl[ru] & tr[rv]) | (tr[ru] & tl[rv]))
    else:
        dual_h, dual_v = _dual_closed_masks(h_open, v_open)
        dlabels = K.uf_label(np.ascontiguousarray(dual_h, dtype=np.uint8),
                             np.ascontiguousarray(dual_v, dtype=np.uint8))
        dlab = dlabels.reshape(W + 1, W - 1)
        nd = (W + 1) * (W - 1)
        tb = np.zeros(nd, dtype=bool)
        tt = np.zeros(nd, dtype=bool)
        tb[dlab[0, :]] = True
        tt[dlab[-1, :]] = True
        rd1 = dlab[:W, :]
        rd2 = dlab[1:, :]
        piv_h = h_open & ((tb[rd1] & tt[rd2]) | (tt[rd1] & tb[rd2]))
        piv_v = np.zeros_like(v_open)
        if W >= 3:
            rd1 = dlab[1:W, :W - 2]
            rd2 = dlab[1:W, 1:W - 1]
            piv_v[:, 1:W - 1] = v_open[:, 1:W - 1] & (
                (tb[rd1] & tt[rd2]) | (tt[rd1] & tb[rd2]))
    for j, i in zip(*np.nonzero(piv_h)):
        out.add(Edge(wa.x0 + int(i), wa.y0 + int(j), HORIZONTAL))
    for j, i in zip(*np.nonzero(piv_v)):
        out.add(Edge(wa.x0 + int(i), wa.y0 + int(j), VERTICAL))
    return out


def _two_arm_flow(field: WeightField, l: int, n: int, p: float) -> int:
    """Max number of vertex-disjoint open paths B(l) -> boundary of B(n),
    capped at 2, via unit-capacity flow on the node-split annulus."""
    wa = WindowArrays(field, (0, 0), n)
    W = wa.W
    norm = wa.norm_grid()
    region = norm >= l            # sites allowed on arms (ring of B(l) included)
    idx = -np.ones((W, W), dtype=np.int64)
    ids = np.nonzero(region)
    m = len(ids[0])
    idx[ids] = np.arange(m)
    # node split: site k -> in node k, out node m + k
    S = 2 * m
    T = 2 * m + 1
    rows, cols, caps = [], [], []

    def arc(a, b, c):
        rows.append(a)
        cols.append(b)
        caps.append(c)

    for k in range(m):
        arc(k, m + k, 1)
    h_open = wa.hw < p
    v_open = wa.vw < p
    for j, i in zip(*np.nonzero(h_open)):
        a = idx[j, i]
        b = idx[j, i + 1]
        if a >= 0 and b >= 0:
            arc(m + a, b, 1)
            arc(m + b, a, 1)
    for j, i in zip(*np.nonzero(v_open)):
        a = idx[j, i]
        b = idx[j + 1, i]
        if a >= 0 and b >= 0:
            arc(m + a, b, 1)
            arc(m + b, a, 1)
    ring = norm == l
    for j, i in zip(*np.nonzero(ring)):
        arc(S, idx[j, i], 1)
    bdry = norm == n
    for j, i in zip(*np.nonzero(bdry)):
        arc(m + idx[j, i], T, 1)
    g = csr_matrix((np.array(caps, dtype=np.int32),
                    (np.array(rows), np.array(cols))),
                   shape=(2 * m + 2, 2 * m + 2))
    return int(maximum_flow(g, S, T).flow_value)


def _annulus_arm_clusters(h_mask, v_mask, norm, l: int, n: int) -> int:
    """Distinct clusters of {l+1 <= |x| <= n} joined to the B(l) ring by a
    flagged spoke and containing a |x| = n site."""
    region = norm >= l + 1
    h_use = h_mask & region[:, :-1] & region[:, 1:]
    v_use = v_mask & region[:-1, :] & region[1:, :]
    labels = K.uf_label(np.ascontiguousarray(h_use, dtype=np.uint8),
                        np.ascontiguousarray(v_use, dtype=np.uint8))
    W = norm.shape[0]
    lab = labels.reshape(W, W)
    src = np.zeros(W * W, dtype=bool)
    tgt = np.zeros(W * W, dtype=bool)
    ring_l = norm == l
    ring_l1 = norm == l + 1
    spokes_h = h_mask & ((ring_l[:, :-1] & ring_l1[:, 1:]) |
                         (ring_l1[:, :-1] & ring_l[:, 1:]))
    for j, i in zip(*np.nonzero(spokes_h)):
        if norm[j, i] == l + 1:
            src[lab[j, i]] = True
        else:
            src[lab[j, i + 1]] = True
    spokes_v = v_mask & ((ring_l[:-1, :] & ring_l1[1:, :]) |
                         (ring_l1[:-1, :] & ring_l[1:, :]))
    for j, i in zip(*np.nonzero(spokes_v)):
        if norm[j, i] == l + 1:
            src[lab[j, i]] = True
        else:
            src[lab[j + 1, i]] = True
    tgt[lab[norm == n]] = True
    return int(np.count_nonzero(src & tgt))


def sigma_connected(field: WeightField, l: int, n: int, p: float,
                    sigma) -> bool:
    """sigma-connection of B(l) to the boundary of B(n): |sigma| disjoint
    arms whose colours and cyclic arrangement follow sigma.

    Supported shapes: (open); (open,open) via vertex-capacity max-flow;
    (open,closed,open,closed) via the distinct-crossing-cluster
    characterization of the annulus (open clusters on the primal lattice,
    closed on the dual), which forces the alternating arrangement.
    """
    sig = normalize_sigma(sigma)
    if l < 0 or l >= n:
        raise DomainError(f"need 0 <= l < n, got ({l},{n})")
    boundary_count = 8 * l if l >= 1 else 1
    if boundary_count <= len(sig):
        raise DomainError(
            f"|boundary of B({l})| = {boundary_count} must exceed |sigma| = {len(sig)}")
    if sig == SIGMA_ONE_ARM:
        ring = list(BoxRegion((0, 0), l).boundary_sites())
        sx = np.array([s[0] for s in ring], dtype=np.int64)
        sy = np.array([s[1] for s in ring], dtype=np.int64)
        flags = K.threshold_reach_kernel(
            np.uint64(field.mixed_seed), 0, 0, n, sx, sy, l,
            np.array([p], dtype=np.float64))
        return bool(flags[0])
    if sig == SIGMA_TWO_ARM:
        return _two_arm_flow(field, l, n, p) >= 2
    wa = WindowArrays(field, (0, 0), n)
    norm = wa.norm_grid()
    n_open = _annulus_arm_clusters(wa.hw < p, wa.vw < p, norm, l, n)
    if n_open < 2:
        return False
    n_closed = _annulus_arm_clusters(wa.dual_hw >= p, wa.dual_vw >= p,
                                     norm, l, n)
    return n_closed >= 2
