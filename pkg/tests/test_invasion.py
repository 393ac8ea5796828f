"""Invasion growth, pond decomposition and certification contracts."""

import numpy as np
import pytest

from percolab.errors import (DomainError, NotCertifiableError,
                             ResourceLimitError)
from percolab.invasion import (InvasionRun, ReachRadius, StepCount,
                               WeightDrop, certify_outlets, decompose,
                               format_snapshot, invade, outlet_count,
                               pond_decomposition, read_snapshot,
                               record_indices, write_snapshot)
from percolab.lattice import (AnnulusRegion, BoxRegion, Edge, HORIZONTAL,
                              VERTICAL, WeightField, canonical_edge, edges_in,
                              site_norm)


def kruskal_mst(sites, weighted_edges):
    """Independent Kruskal oracle over an explicit weighted edge list."""
    parent = {s: s for s in sites}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = set()
    for w, e in sorted(weighted_edges):
        ra, rb = find(e.endpoints[0]), find(e.endpoints[1])
        if ra != rb:
            parent[ra] = rb
            tree.add(e)
    return tree


def window_invasion_edges(field, origin, box):
    """Complete invasion confined to a window: grow greedily from origin,
    never using edges outside the box, until every site is invaded.
    Reference implementation, deliberately naive."""
    sites = set(box.sites())
    allowed = set(edges_in(box))
    invaded = {origin}
    accepted = set()
    while invaded != sites:
        best = None
        for e in allowed:
            if e in accepted:
                continue
            a, b = e.endpoints
            if (a in invaded) != (b in invaded):
                w = field.weight(e)
                if best is None or w < best[0]:
                    best = (w, e)
        accepted.add(best[1])
        a, b = best[1].endpoints
        invaded.add(a if b in invaded else b)
    return accepted


class TestInvade:
    def test_first_step_takes_minimum_incident_edge(self):
        f = WeightField(3)
        run = invade(f, (0, 0), StepCount(1))
        incident = [canonical_edge((0, 0), nb)
                    for nb in [(1, 0), (-1, 0), (0, 1), (0, -1)]]
        best = min(incident, key=lambda e: (f.weight(e), e))
        assert run.accepted[0][1] == best
        assert run.accepted[0][2] == f.weight(best)

    def test_step_count_contract(self):
        run = invade(WeightField(11), (0, 0), StepCount(40))
        assert run.n_steps == 40
        assert 2 <= len(run.invaded_sites) <= 41
        # tree variant: every accepted edge adds exactly one site
        assert len(run.invaded_sites) == 41

    def test_greedy_minimum_replay(self):
        # replay with an O(T * deg) reference scan of the outer boundary
        f = WeightField(17)
        run = invade(f, (0, 0), StepCount(300))
        invaded = {(0, 0)}
        popped = set()
        merged = sorted(
            [(int(s), 0, i) for i, s in enumerate(
                2 * (np.arange(run.n_steps) + 1))] +
            [(int(s), 1, i) for i, s in enumerate(2 * run.skip_step + 1)])
        acc_i = 0
        for _, kind, i in merged:
            if kind == 1:
                continue
            # boundary scan: every edge touching an invaded site, not yet
            # popped (accepted or skipped with both ends invaded)
            cand = {}
            for (x, y) in invaded:
                for nb in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]:
                    e = canonical_edge((x, y), nb)
                    if e not in popped:
                        cand[e] = f.weight(e)
            e_acc = Edge(int(run.acc_x[acc_i]), int(run.acc_y[acc_i]),
                         int(run.acc_o[acc_i]))
            (a, b) = e_acc.endpoints
            new = a if b in invaded else b
            # no boundary edge (skips included) is strictly lighter than the
            # accepted one, except cycle edges popped earlier this step
            w_acc = cand.pop(e_acc)
            lighter = {e: w for e, w in cand.items() if (w, e) < (w_acc, e_acc)}
            for e in lighter:
                assert set(e.endpoints) <= invaded
                popped.add(e)
            popped.add(e_acc)
            invaded.add(new)
            assert w_acc == run.acc_w[acc_i]
            acc_i += 1

    def test_mst_equivalence_on_windows(self):
        # invasion confined to a finite window is Prim's algorithm, so the
        # full reference invasion must match Kruskal
        for seed in range(5):
            f = WeightField(seed)
            box = BoxRegion((0, 0), 2)
            edges = edges_in(box)
            tree = kruskal_mst(list(box.sites()),
                               [(f.weight(e), e) for e in edges])
            inv = window_invasion_edges(f, (0, 0), box)
            assert inv == tree

    def test_unbounded_invasion_prefix_matches_reference(self):
        # the kernel against the naive reference on the infinite lattice
        f = WeightField(23)
        run = invade(f, (1, -2), StepCount(50))
        invaded = {(1, -2)}
        accepted = set()
        for step, e, w in run.accepted:
            cand = []
            for (x, y) in invaded:
                for nb in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]:
                    if nb not in invaded:
                        ee = canonical_edge((x, y), nb)
                        if ee not in accepted:
                            cand.append((f.weight(ee), ee))
            assert min(cand) == (w, e)
            accepted.add(e)
            a, b = e.endpoints
            invaded.add(a if b in invaded else b)
        assert invaded == run.invaded_sites

    def test_determinism(self):
        r1 = invade(WeightField(5), (0, 0), ReachRadius(16))
        r2 = invade(WeightField(5), (0, 0), ReachRadius(16))
        assert np.array_equal(r1.acc_w, r2.acc_w)
        assert r1.frontier == r2.frontier

    def test_reach_radius_stops_on_boundary(self):
        run = invade(WeightField(8), (0, 0), ReachRadius(12))
        norms = run.site_norms()
        assert norms.max() == 12
        assert norms[:-1].max() < 12
        assert run.final_radius == 12

    def test_weight_drop_ends_on_light_boundary_acceptance(self):
        for seed in range(6):
            run = invade(WeightField(seed), (0, 0), WeightDrop(0.6, 8))
            assert run.reached_radius
            assert run.final_radius >= 8
            # final acceptance is the light escape step
            assert run.acc_w[-1] < 0.6
            assert run.site_norms()[-1] >= 8
            # records at or above p_star are certified at the drop radius
            f = WeightField(seed)
            d = pond_decomposition(run, 0.5)
            flags = certify_outlets(run, f, run.final_radius)
            for o, fl in zip(d.outlets, flags):
                if o.weight >= 0.6:
                    assert fl

    def test_resource_limit_attaches_partial(self):
        with pytest.raises(ResourceLimitError) as ei:
            invade(WeightField(4), (0, 0), ReachRadius(256), max_steps=500)
        assert ei.value.partial.n_steps == 500

    def test_frontier_edges_touch_invaded_and_unaccepted(self):
        run = invade(WeightField(19), (0, 0), StepCount(200))
        inv = run.invaded_sites
        acc = {e for _, e, _ in run.accepted}
        for e in run.frontier:
            a, b = e.endpoints
            assert a in inv or b in inv
            assert e not in acc

    def test_origin_offset(self):
        run = invade(WeightField(2), (40, -7), ReachRadius(6))
        assert site_norm(max(run.invaded_sites,
                             key=lambda s: site_norm(s, (40, -7))), (40, -7)) == 6


def brute_force_records(weights, p_c):
    """O(T^2) suffix-maximum oracle."""
    out = []
    for i, w in enumerate(weights):
        if w > p_c and all(w > v for v in weights[i + 1:]):
            out.append(i)
    return out


def synthetic_run(weights, sites=None):
    """Fabricate an InvasionRun carrying a prescribed accepted sequence."""
    t = len(weights)
    if sites is None:
        sites = [(i + 1, 0) for i in range(t)]
    return InvasionRun(
        origin=(0, 0), seed=0, stop=StepCount(t),
        acc_x=np.arange(t), acc_y=np.zeros(t, dtype=np.int64),
        acc_o=np.zeros(t, dtype=np.int8),
        acc_w=np.asarray(weights, dtype=np.float64),
        site_x=np.array([s[0] for s in sites]),
        site_y=np.array([s[1] for s in sites]),
        heap_x=np.empty(0, np.int64), heap_y=np.empty(0, np.int64),
        heap_o=np.empty(0, np.int8), heap_w=np.empty(0, np.float64),
        skip_x=np.empty(0, np.int64), skip_y=np.empty(0, np.int64),
        skip_o=np.empty(0, np.int8), skip_w=np.empty(0, np.float64),
        skip_step=np.empty(0, np.int64), reached_radius=False)


class TestPondDecomposition:
    def test_textbook_sequence(self):
        d = pond_decomposition(synthetic_run([0.7, 0.3, 0.6, 0.4, 0.55, 0.2]),
                               p_c=0.5)
        assert [o.step for o in d.outlets] == [1, 3, 5]
        assert d.weights == [0.7, 0.6, 0.55]

    def test_all_subcritical_gives_single_incomplete_pond(self):
        d = pond_decomposition(synthetic_run([0.3, 0.2, 0.4, 0.1]), p_c=0.5)
        assert d.outlets == []
        assert d.ponds == []
        assert len(d.incomplete_pond) == 5  # origin + 4 sites

    def test_oracle_thousand_sequences(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            t = int(rng.integers(1, 201))
            w = rng.random(t)
            d = pond_decomposition(synthetic_run(w.tolist()), p_c=0.5)
            expect = brute_force_records(w.tolist(), 0.5)
            assert [o.step - 1 for o in d.outlets] == expect
            assert d.weights == [float(w[i]) for i in expect]

    def test_ponds_partition_and_radii(self):
        checked = 0
        for seed in [31, 33, 34, 35, 36]:
            f = WeightField(seed)
            run = invade(f, (0, 0), ReachRadius(24))
            d = pond_decomposition(run, 0.5)
            # ponds are disjoint and their union is the invaded set up to
            # the last outlet step
            union = set()
            for pond in d.ponds:
                assert not (union & pond)
                union |= pond
            if d.outlets:
                last = d.outlets[-1].step
                expect = {(0, 0)} | set(
                    zip(run.site_x[:last - 1].tolist(),
                        run.site_y[:last - 1].tolist()))
                assert union == expect
                checked += 1
            else:
                assert union == set()
            assert union | d.incomplete_pond == run.invaded_sites
            # radii nondecreasing, equal to the max norm over the pond union
            assert d.radii == sorted(d.radii)
            for k in range(len(d.ponds)):
                sites = set().union(*d.ponds[:k + 1])
                assert d.radii[k] == max(site_norm(s) for s in sites)
        assert checked >= 2

    def test_outlets_strictly_decreasing_above_pc(self):
        for seed in range(5):
            run = invade(WeightField(seed), (0, 0), ReachRadius(32))
            d = pond_decomposition(run, 0.5)
            w = d.weights
            assert all(a > b for a, b in zip(w, w[1:]))
            assert all(x > 0.5 for x in w)
            steps = [o.step for o in d.outlets]
            assert steps == sorted(steps)

    def test_never_leave_property(self):
        # once the k-th outlet is invaded, no later edge weight exceeds it
        run = invade(WeightField(77), (0, 0), ReachRadius(48))
        d = pond_decomposition(run, 0.5)
        for o in d.outlets:
            assert (run.acc_w[o.step:] < o.weight).all()


class TestCertification:
    def test_touching_boundary_certifies_trivially(self):
        # seed 15 yields two outlets inside radius 16; the invaded set
        # already touches the boundary, realizing every escape
        f = WeightField(15)
        run = invade(f, (0, 0), ReachRadius(16))
        flags = certify_outlets(run, f, 16)
        assert len(flags) == 2 and all(flags)

    def test_step_stop_not_certifiable(self):
        f = WeightField(6)
        run = invade(f, (0, 0), StepCount(50))
        with pytest.raises(NotCertifiableError):
            certify_outlets(run, f, 64)

    def test_radius_below_stop_rejected(self):
        f = WeightField(6)
        run = invade(f, (0, 0), ReachRadius(16))
        with pytest.raises(DomainError):
            certify_outlets(run, f, 8)

    def test_monotone_in_k(self):
        # certified(k) uses a smaller threshold than certified(k-1), so a
        # certified late outlet certifies every earlier one
        f = WeightField(13)
        run = invade(f, (0, 0), ReachRadius(32))
        flags = certify_outlets(run, f, 64)
        seen_false = False
        for fl in flags:
            if not fl:
                seen_false = True
            else:
                assert not seen_false

    def test_escape_matches_bfs_oracle(self):
        # brute-force flood fill from the invaded set through tau < tau_k
        # edges inside B(r), per candidate
        f = WeightField(29)
        run = invade(f, (0, 0), ReachRadius(12))
        r = 24
        d = pond_decomposition(run, 0.5)
        flags = certify_outlets(run, f, r)
        box = BoxRegion((0, 0), r)
        for o, flag in zip(d.outlets, flags):
            seen = set(run.invaded_sites)
            stack = list(seen)
            hit = any(site_norm(s) >= r for s in seen)
            while stack and not hit:
                x, y = stack.pop()
                for nb in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]:
                    if nb in seen or not box.contains(nb):
                        continue
                    if f.weight(canonical_edge((x, y), nb)) < o.weight:
                        seen.add(nb)
                        if site_norm(nb) >= r:
                            hit = True
                            break
                        stack.append(nb)
            assert flag == hit

    def test_flip_rate_under_doubling(self):
        # first-outlet certification flips rarely when the certification
        # radius doubles
        flips = 0
        total = 0
        for seed in range(400):
            f = WeightField(seed)
            run = invade(f, (0, 0), ReachRadius(24))
            d = pond_decomposition(run, 0.5)
            if not d.outlets:
                continue
            f1 = certify_outlets(run, f, 24)[0]
            f2 = certify_outlets(run, f, 48)[0]
            total += 1
            flips += f1 != f2
        assert total > 40
        assert flips / total < 0.2


class TestOutletCount:
    def test_zero_outlets(self):
        d = pond_decomposition(synthetic_run([0.1, 0.2]), p_c=0.5)
        assert outlet_count(d, BoxRegion((0, 0), 100)) == 0

    def test_disjoint_region(self):
        f = WeightField(41)
        run = invade(f, (0, 0), ReachRadius(4))
        d = decompose(run, f, 0.5)
        assert outlet_count(d, AnnulusRegion((0, 0), 8, 16)) == 0

    def test_dyadic_partition(self):
        f = WeightField(43)
        run = invade(f, (0, 0), ReachRadius(64))
        d = decompose(run, f, 0.5)
        total = outlet_count(d, BoxRegion((0, 0), 64))
        parts = outlet_count(d, BoxRegion((0, 0), 1))
        for j in range(6):
            parts += outlet_count(d, AnnulusRegion((0, 0), 2**j, 2**(j + 1)))
        assert parts == total


class TestSnapshot:
    def test_roundtrip_bit_faithful(self, tmp_path):
        f = WeightField(59)
        run = invade(f, (0, 0), StepCount(25))
        path = tmp_path / "run.snap"
        write_snapshot(run, str(path))
        back = read_snapshot(str(path))
        assert back == run.accepted

    def test_format_shape(self):
        run = invade(WeightField(59), (0, 0), StepCount(3))
        lines = format_snapshot(run).strip().split("\n")
        assert len(lines) == 3
        step, x, y, o, w = lines[0].split(",")
        assert step == "1" and o in ("H", "V")
        assert float(w) == run.accepted[0][2]
