"""Invasion percolation growth, truncation rules and pond/outlet structure.

The invasion grows greedily from an origin: at every step it takes the
minimum-weight edge on the outer boundary of the invaded region.  Edges
whose endpoints are both already invaded never get accepted (they stay on
the outer boundary), so on a finite window the accepted set is exactly the
minimum spanning tree.  Runs are truncated by a stop rule; outlets are the
suffix-maximum records of the accepted-weight sequence above p_c, ponds the
vertex batches between consecutive outlets.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional, Union

import numpy as np

from . import _kernels as K
from .errors import (DomainError, InvalidRegionError, NotCertifiableError,
                     ResourceLimitError)
from .lattice import (COORD_BOUND, Edge, HORIZONTAL, VERTICAL, AnnulusRegion,
                      BoxRegion, Site, WeightField, site_norm)

DEFAULT_P_C = 0.5
DEFAULT_MAX_STEPS = 20_000_000


@dataclass(frozen=True)
class ReachRadius:
    """Stop at the first step whose invaded vertex lies on the box boundary."""
    radius: int

    def __post_init__(self):
        if self.radius < 1:
            raise DomainError(f"stop radius must be >= 1, got {self.radius}")


@dataclass(frozen=True)
class StepCount:
    """Stop after a fixed number of accepted edges."""
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise DomainError(f"step count must be >= 1, got {self.steps}")


@dataclass(frozen=True)
class WeightDrop:
    """Run until a sub-p_star acceptance lands a site on or beyond the
    boundary of B(radius).

    The accepted weights have then dropped below p_star by the time the
    boundary is reached, so every record with weight >= p_star has a
    below-record escape to that boundary: those records are final in the
    certification sense.  Terminates almost surely for p_star > p_c.
    """
    p_star: float
    radius: int

    def __post_init__(self):
        if self.radius < 1:
            raise DomainError(f"stop radius must be >= 1, got {self.radius}")
        if not 0.0 < self.p_star <= 1.0:
            raise DomainError(f"p_star must be in (0, 1], got {self.p_star}")


StopRule = Union[ReachRadius, StepCount, WeightDrop]


def _orient_char(o: int) -> str:
    return "H" if o == HORIZONTAL else "V"


@dataclass
class InvasionRun:
    """Raw output of the invasion: accepted edges in order plus frontier.

    Large runs keep everything as numpy arrays; the list/set views are
    materialized lazily for inspection and small-scale tests.
    """

    origin: Site
    seed: int
    stop: StopRule
    acc_x: np.ndarray
    acc_y: np.ndarray
    acc_o: np.ndarray
    acc_w: np.ndarray
    site_x: np.ndarray
    site_y: np.ndarray
    heap_x: np.ndarray
    heap_y: np.ndarray
    heap_o: np.ndarray
    heap_w: np.ndarray
    skip_x: np.ndarray
    skip_y: np.ndarray
    skip_o: np.ndarray
    skip_w: np.ndarray
    skip_step: np.ndarray
    reached_radius: bool
    _invaded: Optional[set] = dc_field(default=None, repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.acc_w)

    @property
    def n_examined(self) -> int:
        """Accepted plus cycle-closing pops: the classical process counts
        both as invaded edges."""
        return len(self.acc_w) + len(self.skip_w)

    @property
    def accepted(self) -> list[tuple[int, Edge, float]]:
        return [
            (i + 1, Edge(int(self.acc_x[i]), int(self.acc_y[i]), int(self.acc_o[i])),
             float(self.acc_w[i]))
            for i in range(self.n_steps)
        ]

    @property
    def invaded_sites(self) -> set[Site]:
        if self._invaded is None:
            s = {self.origin}
            s.update(zip(self.site_x.tolist(), self.site_y.tolist()))
            self._invaded = s
        return self._invaded

    @property
    def frontier(self) -> set[Edge]:
        """Outer edge boundary at termination: unaccepted edges with an
        invaded endpoint (both the heap leftovers and the cycle closers)."""
        out = {
            Edge(int(x), int(y), int(o))
            for x, y, o in zip(self.heap_x.tolist(), self.heap_y.tolist(),
                               self.heap_o.tolist())
        }
        out.update(
            Edge(int(x), int(y), int(o))
            for x, y, o in zip(self.skip_x.tolist(), self.skip_y.tolist(),
                               self.skip_o.tolist())
        )
        return out

    def pop_weights(self) -> np.ndarray:
        """Weights of every popped (classically invaded) edge in pop order.

        A skipped edge recorded after s acceptances sits between accepted
        steps s and s+1; ties within a gap keep their pop order.
        """
        order_a = 2 * (np.arange(self.n_steps, dtype=np.int64) + 1)
        order_s = 2 * self.skip_step + 1
        merged = np.concatenate([self.acc_w, self.skip_w])
        keys = np.concatenate([order_a, order_s])
        return merged[np.argsort(keys, kind="stable")]

    @property
    def max_weight(self) -> float:
        return float(self.acc_w.max()) if self.n_steps else 0.0

    @property
    def final_radius(self) -> int:
        if not self.n_steps:
            return 0
        return int(np.maximum(np.abs(self.site_x - self.origin[0]),
                              np.abs(self.site_y - self.origin[1])).max())

    def site_norms(self) -> np.ndarray:
        """|new site - origin| per accepted step."""
        return np.maximum(np.abs(self.site_x - self.origin[0]),
                          np.abs(self.site_y - self.origin[1]))


def _unpack_keys(keys: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = (keys >> 32) - K.B30
    y = ((keys >> 1) & 0x7FFFFFFF) - K.B30
    o = (keys & 1).astype(np.int8)
    return x, y, o


def invade(field: WeightField, origin: Site = (0, 0),
           stop: StopRule = ReachRadius(64),
           max_steps: int = DEFAULT_MAX_STEPS) -> InvasionRun:
    """Run the greedy invasion until the stop rule fires.

    Deterministic in (field.seed, origin, stop).  Raises
    ResourceLimitError with the partial run attached if max_steps is hit.
    """
    ox, oy = origin
    if isinstance(stop, ReachRadius):
        kind, radius, steps, p_star = K.STOP_RADIUS, stop.radius, 0, 2.0
        grid_half = radius + 2
        growable = False
    elif isinstance(stop, StepCount):
        kind, radius, steps, p_star = K.STOP_STEPS, 0, stop.steps, 2.0
        grid_half = max(16, int(3.0 * stop.steps**0.54) + 4)
        growable = True
    elif isinstance(stop, WeightDrop):
        kind, radius, steps, p_star = (K.STOP_WEIGHT_DROP, stop.radius, 0,
                                       stop.p_star)
        grid_half = stop.radius + 2
        growable = True
    else:
        raise DomainError(f"unknown stop rule {stop!r}")
    if max(abs(ox), abs(oy)) + grid_half + 2 >= COORD_BOUND:
        raise DomainError("stop rule exceeds coordinate bounds")

    mixed = np.uint64(field.mixed_seed)
    while True:
        out = K.invade_kernel(mixed, ox, oy, kind, radius, steps, p_star,
                              max_steps, grid_half)
        status = out[0]
        if status == K.STATUS_GRID_FULL and growable:
            grid_half = int(grid_half * 1.6) + 8
            if max(abs(ox), abs(oy)) + grid_half + 2 >= COORD_BOUND:
                raise DomainError("run exceeds coordinate bounds")
            continue
        break

    (_, ak, aw, asx, asy, fk, fw, sk, sw, sn, reached) = out
    ax, ay, ao = _unpack_keys(ak)
    fx, fy, fo = _unpack_keys(fk)
    sx, sy, so = _unpack_keys(sk)
    run = InvasionRun(
        origin=origin, seed=field.seed, stop=stop,
        acc_x=ax, acc_y=ay, acc_o=ao, acc_w=aw,
        site_x=asx, site_y=asy,
        heap_x=fx, heap_y=fy, heap_o=fo, heap_w=fw,
        skip_x=sx, skip_y=sy, skip_o=so, skip_w=sw, skip_step=sn,
        reached_radius=bool(reached) or (isinstance(stop, ReachRadius)
                                         and status == K.STATUS_DONE),
    )
    if status == K.STATUS_STEP_LIMIT:
        raise ResourceLimitError(
            f"invasion hit max_steps={max_steps} before its stop rule",
            partial=run)
    return run


@dataclass(frozen=True)
class Outlet:
    k: int
    edge: Edge
    weight: float
    step: int
    certified: bool


@dataclass
class PondDecomposition:
    """Outlets (suffix-max records above p_c) and the ponds between them."""

    p_c: float
    origin: Site
    outlets: list[Outlet]
    ponds: list[set[Site]]
    radii: list[int]
    incomplete_pond: set[Site]
    stop: Optional[StopRule] = None

    @property
    def weights(self) -> list[float]:
        return [o.weight for o in self.outlets]

    @property
    def reported_ponds(self) -> list[set[Site]]:
        """Ponds whose closing record is safely inside the truncated run:
        pond k is reported when outlet k+1 is certified, or unconditionally
        for WeightDrop-stopped runs (no future acceptance can displace the
        records)."""
        if isinstance(self.stop, WeightDrop):
            return list(self.ponds)
        keep = 0
        for j in range(1, len(self.outlets)):
            if self.outlets[j].certified:
                keep = j
        return self.ponds[:keep]


def record_indices(weights: np.ndarray, p_c: float) -> np.ndarray:
    """Indices i with weights[i] > max(weights[i+1:]) and weights[i] > p_c.

    The strict comparison makes the result well-defined under ties (the
    last attaining index wins); real weight fields never tie.
    """
    w = np.asarray(weights, dtype=np.float64)
    if len(w) == 0:
        return np.empty(0, dtype=np.int64)
    suffix_after = np.empty(len(w))
    suffix_after[-1] = -np.inf
    if len(w) > 1:
        suffix_after[:-1] = np.maximum.accumulate(w[::-1])[::-1][1:]
    mask = (w > suffix_after) & (w > p_c)
    return np.nonzero(mask)[0]


def pond_decomposition(run: InvasionRun, p_c: float = DEFAULT_P_C,
                       certified: Optional[list[bool]] = None) -> PondDecomposition:
    """Decompose a run into outlets and ponds.

    ``certified`` flags (from certify_outlets) are attached per outlet;
    by default every outlet is marked tentative (False).
    """
    if run.n_steps == 0:
        raise DomainError("cannot decompose an empty run")
    idx = record_indices(run.acc_w, p_c)
    outlets = []
    for j, i in enumerate(idx):
        flag = bool(certified[j]) if certified is not None else False
        outlets.append(Outlet(
            k=j + 1,
            edge=Edge(int(run.acc_x[i]), int(run.acc_y[i]), int(run.acc_o[i])),
            weight=float(run.acc_w[i]),
            step=int(i) + 1,
            certified=flag,
        ))
    sites = list(zip(run.site_x.tolist(), run.site_y.tolist()))
    ponds: list[set[Site]] = []
    prev = 0
    for j, i in enumerate(idx):
        pond = set(sites[prev:i])
        if j == 0:
            pond.add(run.origin)
        ponds.append(pond)
        prev = int(i)
    incomplete = set(sites[prev:]) if len(idx) else set(sites) | {run.origin}
    norms = run.site_norms()
    cummax = np.maximum.accumulate(norms) if len(norms) else norms
    radii = []
    for i in idx:
        radii.append(int(cummax[i - 1]) if i > 0 else 0)
    return PondDecomposition(p_c=p_c, origin=run.origin, outlets=outlets,
                             ponds=ponds, radii=radii,
                             incomplete_pond=incomplete, stop=run.stop)


def certify_outlets(run: InvasionRun, field: WeightField, r_max: int,
                    p_c: float = DEFAULT_P_C) -> list[bool]:
    """Supercritical-escape flags for each outlet candidate.

    Candidate k is certified when the invaded set, extended through the
    tau_k-open edges of B(origin, r_max), touches the boundary of that
    box: the continuation of the invasion then never accepts a weight
    >= tau_k, so the record is final.  Runs that already touch the
    boundary certify trivially (the invaded set realizes the connection).
    """
    if not isinstance(run.stop, (ReachRadius, WeightDrop)):
        raise NotCertifiableError(
            "certification needs a radius-bounded stop rule")
    if r_max < run.stop.radius:
        raise DomainError(
            f"certification radius {r_max} below stop radius {run.stop.radius}")
    idx = record_indices(run.acc_w, p_c)
    if len(idx) == 0:
        return []
    if run.final_radius >= r_max:
        return [True] * len(idx)
    weights = run.acc_w[idx]           # strictly decreasing
    thresholds = weights[::-1].copy()  # increasing for the kernel
    src_x = np.concatenate([[run.origin[0]], run.site_x]).astype(np.int64)
    src_y = np.concatenate([[run.origin[1]], run.site_y]).astype(np.int64)
    flags_inc = K.threshold_reach_kernel(
        np.uint64(field.mixed_seed), run.origin[0], run.origin[1], r_max,
        src_x, src_y, -1, thresholds)
    return [bool(f) for f in flags_inc[::-1]]


def decompose(run: InvasionRun, field: WeightField, p_c: float = DEFAULT_P_C,
              r_cert: Optional[int] = None) -> PondDecomposition:
    """pond_decomposition with certification flags filled in.

    ``r_cert`` defaults to the run's stop radius, where a record's own
    survival to the boundary is the certificate.
    """
    if r_cert is None:
        if not isinstance(run.stop, (ReachRadius, WeightDrop)):
            raise NotCertifiableError(
                "certification needs a radius-bounded stop rule")
        r_cert = run.stop.radius
    flags = certify_outlets(run, field, r_cert, p_c)
    return pond_decomposition(run, p_c, certified=flags)


def outlet_count(decomp: PondDecomposition,
                 region: Union[BoxRegion, AnnulusRegion]) -> int:
    """Certified outlets whose edge lies in the region (both endpoints)."""
    if not isinstance(region, (BoxRegion, AnnulusRegion)):
        raise InvalidRegionError(f"unsupported region {region!r}")
    count = 0
    for o in decomp.outlets:
        if not o.certified:
            continue
        a, b = o.edge.endpoints
        if region.contains(a) and region.contains(b):
            count += 1
    return count


def format_snapshot(run: InvasionRun) -> str:
    """Line-oriented run export: step,x,y,orientation,weight per accepted
    edge, weights at 17 significant digits for bit-faithful replay."""
    lines = []
    for i in range(run.n_steps):
        lines.append("%d,%d,%d,%s,%.17g" % (
            i + 1, run.acc_x[i], run.acc_y[i],
            _orient_char(int(run.acc_o[i])), run.acc_w[i]))
    return "\n".join(lines) + ("\n" if lines else "")


def write_snapshot(run: InvasionRun, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(format_snapshot(run))


def read_snapshot(path: str) -> list[tuple[int, Edge, float]]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            step, x, y, oc, w = line.split(",")
            o = HORIZONTAL if oc == "H" else VERTICAL
            out.append((int(step), Edge(int(x), int(y), o), float(w)))
    return out
