import numpy as np
import pytest

from zrpsim.coupling import ETA_XI, XI_ETA, CoupledState, DiscrepancyTracker, \
    coupled_apply_event, domination_run, init_coupled, run_coupling, verify_ledger
from zrpsim.dynamics import EventStream, EvolveAccumulators, GraphicalEvent, \
    evolve, truncate_configuration
from zrpsim.environment import EnvDistribution, JumpKernel, sample_environment, \
    slow_mask
from zrpsim.errors import StateError
from zrpsim.measures import GEOMETRIC, K_OVER_K1, INFINITE_OCCUPANCY, \
    RateFunction, sample_product_measure, sample_truncated_product


@pytest.fixture
def trunc_field():
    dist = EnvDistribution(c=0.2, beta=1.0)
    return sample_environment(dist, 32, seed=452)


def _pair(field, alpha, rng, mean=1.0, g=GEOMETRIC):
    xi = truncate_configuration(rng.poisson(mean, field.n_sites).astype(np.int64),
                                field, alpha)
    eta = sample_truncated_product(field, alpha, g, rng)
    return xi, eta


class TestInitCoupled:
    def test_equal_configurations_give_empty_ledger(self, trunc_field, rng):
        xi, _ = _pair(trunc_field, 0.2, rng)
        state = init_coupled(xi, xi.copy(), trunc_field, 0.2)
        assert state.tracker.totals() == {"active": 0, "coalesced": 0, "absorbed": 0}

    def test_count_difference_sets_types(self, trunc_field):
        mask = slow_mask(trunc_field, 0.2)
        fast = np.where(~mask)[0]
        xi = truncate_configuration(np.zeros(32, dtype=np.int64), trunc_field, 0.2)
        eta = xi.copy()
        y0, y1 = fast[0], fast[1]
        xi[y0] = 3
        eta[y0] = 1
        eta[y1] = 2
        state = init_coupled(xi, eta, trunc_field, 0.2)
        recs = state.tracker.records
        at_y0 = [r for r in recs if r.label[0] == y0]
        assert len(at_y0) == 2 and all(r.kind == XI_ETA for r in at_y0)
        at_y1 = [r for r in recs if r.label[0] == y1]
        assert len(at_y1) == 2 and all(r.kind == ETA_XI for r in at_y1)

    def test_bookkeeping_identity(self, trunc_field, rng):
        xi, eta = _pair(trunc_field, 0.2, rng)
        state = init_coupled(xi, eta, trunc_field, 0.2)
        n_xi = sum(1 for r in state.tracker.records if r.kind == XI_ETA)
        n_eta = sum(1 for r in state.tracker.records if r.kind == ETA_XI)
        finite = xi != INFINITE_OCCUPANCY
        assert n_xi - n_eta == int((xi[finite] - eta[finite]).sum())

    def test_mismatched_sentinels_rejected(self, trunc_field, rng):
        xi, eta = _pair(trunc_field, 0.2, rng)
        eta2 = eta.copy()
        eta2[np.where(eta2 == INFINITE_OCCUPANCY)[0][0]] = 0
        with pytest.raises(StateError):
            init_coupled(xi, eta2, trunc_field, 0.2)


class TestCoupledApplyEvent:
    @pytest.fixture
    def flat_state(self, trunc_field):
        # g == 1: thresholds coincide whenever both sides are occupied
        mask = slow_mask(trunc_field, 0.2)
        fast = np.where(~mask)[0]
        xi = truncate_configuration(np.zeros(32, dtype=np.int64), trunc_field, 0.2)
        eta = xi.copy()
        return fast, xi, eta

    def test_discrepancy_frozen_under_coupled_particles(self, trunc_field, flat_state):
        fast, xi, eta = flat_state
        x, y = int(fast[2]), int(fast[3])
        xi[x], eta[x] = 1, 2
        state = init_coupled(xi, eta, trunc_field, 0.2)
        ev = GraphicalEvent(0.5, x, y, mark=0.0)   # fires for both marginals
        coupled_apply_event(state, ev, GEOMETRIC)
        # the single eta-excess discrepancy stayed put; a coupled particle moved
        rec = state.tracker.records[0]
        assert rec.position == x and rec.status == "active"
        assert state.xi[x] == 0 and state.eta[x] == 1
        assert state.xi[y] == 1 and state.eta[y] == 1
        verify_ledger(state)

    def test_threshold_interval_moves_only_larger_marginal(self, trunc_field, flat_state):
        # g(1)=0.5, g(2)=0.8, lam=0.5: marks in [0.25, 0.4) move only xi
        fast, xi, eta = flat_state
        g = RateFunction("table", (0.5, 0.8))
        x, y = int(fast[4]), int(fast[5])
        trunc_field.rates[x] = 0.5
        xi[x], eta[x] = 2, 1
        state = init_coupled(xi, eta, trunc_field, 0.2)
        ev = GraphicalEvent(0.5, x, y, mark=0.3)
        coupled_apply_event(state, ev, g)
        assert state.xi[x] == 1 and state.eta[x] == 1
        assert state.xi[y] == 1 and state.eta[y] == 0
        rec = state.tracker.records[0]
        assert rec.kind == XI_ETA and rec.position == y and rec.jumps == 1
        verify_ledger(state)

    def test_opposite_types_coalesce_on_arrival(self, trunc_field, flat_state):
        fast, xi, eta = flat_state
        x, y = int(fast[6]), int(fast[7])
        xi[x] = 1          # one xi-excess discrepancy at x
        eta[y] = 1         # one eta-excess discrepancy at y
        state = init_coupled(xi, eta, trunc_field, 0.2)
        ev = GraphicalEvent(0.5, x, y, mark=0.0)
        coupled_apply_event(state, ev, GEOMETRIC)
        assert state.xi[y] == 1 and state.eta[y] == 1 and state.xi[x] == 0
        statuses = sorted(r.status for r in state.tracker.records)
        assert statuses == ["coalesced", "coalesced"]
        assert state.tracker.counts_at(y) == (0, 0)
        verify_ledger(state)

    def test_absorption_on_slow_site(self, trunc_field, flat_state):
        fast, xi, eta = flat_state
        slow = np.where(slow_mask(trunc_field, 0.2))[0]
        # find a fast site with a slow neighbor to its right
        x = next(int(s) for s in fast if (s + 1) % 32 in set(slow.tolist()))
        y = (x + 1) % 32
        xi[x] = 1
        state = init_coupled(xi, eta, trunc_field, 0.2)
        ev = GraphicalEvent(0.5, x, y, mark=0.0)
        coupled_apply_event(state, ev, GEOMETRIC)
        rec = state.tracker.records[0]
        assert rec.status == "absorbed" and rec.position == y
        assert state.xi[y] == INFINITE_OCCUPANCY
        verify_ledger(state)


class TestLedgerInvariants:
    def test_consistency_along_a_run(self, trunc_field, rng):
        alpha = 0.2
        xi, eta = _pair(trunc_field, alpha, rng)
        state = init_coupled(xi, eta, trunc_field, alpha, label_seed=3)
        stream = EventStream(8, 32, JumpKernel.nearest_neighbor(1))
        mask = slow_mask(trunc_field, alpha)
        totals = []
        for i in range(20000):
            coupled_apply_event(state, stream.next_event(), GEOMETRIC)
            if i % 500 == 0:
                verify_ledger(state)
                t = state.tracker.totals()
                totals.append(t["active"])
                # active discrepancies never sit on slow sites
                for site in state.tracker.active:
                    assert not mask[site]
        verify_ledger(state)
        assert all(b <= a for a, b in zip(totals, totals[1:]))

    def test_skeleton_increments_follow_kernel(self, rng):
        # aggregate discrepancy-path increments against the jump law
        dist = EnvDistribution(c=0.2, beta=1.0)
        field = sample_environment(dist, 64, seed=452)
        kernel = JumpKernel.from_entries([((1,), 0.7), ((-1,), 0.3)], 1)
        alpha = 0.2
        steps = []
        for rep in range(30):
            r = np.random.Generator(np.random.PCG64(rep))
            xi, eta = _pair(field, alpha, r, mean=0.7)
            state = init_coupled(xi, eta, field, alpha, label_seed=rep)
            stream = EventStream(100 + rep, 64, kernel)
            for _ in range(20000):
                coupled_apply_event(state, stream.next_event(), GEOMETRIC)
            for rec in state.tracker.records:
                for a, b in zip(rec.path, rec.path[1:]):
                    d = (b - a) % 64
                    steps.append(1 if d == 1 else -1)
        steps = np.array(steps)
        n = len(steps)
        assert n > 3000
        p_hat = float(np.mean(steps == 1))
        se = np.sqrt(0.7 * 0.3 / n)
        assert abs(p_hat - 0.7) <= 3.5 * se

    def test_jump_counts_bounded_by_first_slow_hit(self, trunc_field, rng):
        # a discrepancy's recorded path never crosses a slow site before its
        # removal, and an absorbed one ends exactly on its first slow hit
        alpha = 0.2
        mask = slow_mask(trunc_field, alpha)
        xi, eta = _pair(trunc_field, alpha, rng)
        state = init_coupled(xi, eta, trunc_field, alpha, label_seed=9)
        stream = EventStream(11, 32, JumpKernel.nearest_neighbor(1))
        for _ in range(40000):
            coupled_apply_event(state, stream.next_event(), GEOMETRIC)
        n_absorbed = 0
        for rec in state.tracker.records:
            interior = rec.path[:-1]
            assert not any(mask[s] for s in interior)
            assert rec.jumps == len(rec.path) - 1
            if rec.status == "absorbed":
                n_absorbed += 1
                assert mask[rec.path[-1]]
        assert n_absorbed > 0


class TestRunCoupling:
    def test_equal_start_stays_silent(self, trunc_field, rng):
        xi, _ = _pair(trunc_field, 0.2, rng)
        stream = EventStream(13, 32, JumpKernel.nearest_neighbor(1))
        probes = np.where(~slow_mask(trunc_field, 0.2))[0][:4]
        rep = run_coupling(xi, xi.copy(), trunc_field, 0.2, 50.0, probes, stream,
                           GEOMETRIC, sample_every=10.0)
        assert np.all(rep.probe_totals() == 0)
        assert np.all(rep.last_discrepancy_time == -np.inf)
        assert rep.n_coalesced == 0 and rep.n_absorbed == 0

    def test_ordered_start_never_grows_lower_type(self, trunc_field, rng):
        # xi0 >= eta0 sitewise: the eta-excess count stays zero forever
        alpha = 0.2
        eta = sample_truncated_product(trunc_field, alpha, GEOMETRIC, rng)
        extra = rng.integers(0, 3, 32).astype(np.int64)
        xi = eta.copy()
        finite = eta != INFINITE_OCCUPANCY
        xi[finite] += extra[finite]
        stream = EventStream(14, 32, JumpKernel.nearest_neighbor(1))
        probes = np.where(finite)[0][:6]
        rep = run_coupling(xi, eta, trunc_field, alpha, 200.0, probes, stream,
                           GEOMETRIC, sample_every=5.0)
        assert np.all(rep.eta_counts == 0)

    def test_small_instance_probes_clear(self):
        dist = EnvDistribution(c=0.2, beta=1.0)
        field = sample_environment(dist, 64, seed=452)
        alpha = 0.2
        rng = np.random.Generator(np.random.PCG64(3))
        xi = truncate_configuration(rng.poisson(1.0, 64).astype(np.int64),
                                    field, alpha)
        eta = sample_truncated_product(field, alpha, GEOMETRIC, rng)
        from zrpsim.experiments import _spread_fast_probes
        probes = _spread_fast_probes(field, alpha, 4)
        stream = EventStream(15, 64, JumpKernel.nearest_neighbor(1))
        t_end = 2000.0
        rep = run_coupling(xi, eta, field, alpha, t_end, probes, stream,
                           GEOMETRIC, sample_every=100.0)
        assert np.all(rep.probe_totals()[-1] == 0)
        assert np.all(rep.last_discrepancy_time <= 0.9 * t_end)

    def test_counts_match_occupancy_difference(self, trunc_field, rng):
        alpha = 0.2
        xi, eta = _pair(trunc_field, alpha, rng)
        probes = np.where(~slow_mask(trunc_field, alpha))[0][:5]
        stream = EventStream(16, 32, JumpKernel.nearest_neighbor(1))
        rep = run_coupling(xi, eta, trunc_field, alpha, 100.0, probes, stream,
                           GEOMETRIC, sample_every=100.0)
        d = rep.final_xi[probes] - rep.final_eta[probes]
        assert np.array_equal(rep.xi_counts[-1], np.maximum(d, 0))
        assert np.array_equal(rep.eta_counts[-1], np.maximum(-d, 0))


class TestDomination:
    def test_trivial_when_truncation_changes_nothing(self, rng):
        dist = EnvDistribution(c=0.2, beta=3.0)
        field = sample_environment(dist, 32, seed=17)
        alpha = 0.5 * (field.rates.min() - dist.c)   # no slow sites, rates equal
        occ = sample_product_measure(field, 0.15, GEOMETRIC, rng)
        stream = EventStream(18, 32, JumpKernel.nearest_neighbor(1))
        assert domination_run(occ, field, alpha, 200.0, stream, GEOMETRIC) == 0

    def test_no_violations_at_scale(self, rng):
        dist = EnvDistribution(c=0.2, beta=1.0)
        field = sample_environment(dist, 64, seed=19)
        occ = sample_product_measure(field, 0.18, GEOMETRIC, rng)
        stream = EventStream(20, 64, JumpKernel.nearest_neighbor(1))
        violations = domination_run(occ, field, 0.25, np.inf, stream, GEOMETRIC,
                                    max_events=10**6)
        assert violations == 0

    def test_nested_truncations_stay_ordered(self, rng):
        # alpha1 < alpha2: pointwise larger rates and a larger slow set, so
        # the same events keep the two truncated runs ordered
        from zrpsim import kernels
        from zrpsim.environment import truncate_rates
        dist = EnvDistribution(c=0.2, beta=1.0)
        field = sample_environment(dist, 48, seed=23)
        a1, a2 = 0.15, 0.35
        occ0 = sample_product_measure(field, 0.15, GEOMETRIC, rng)
        lo = truncate_configuration(occ0, field, a1)
        hi = truncate_configuration(occ0, field, a2)
        lam1 = truncate_rates(field, a1).rates
        lam2 = truncate_rates(field, a2).rates
        stream = EventStream(24, 48, JumpKernel.nearest_neighbor(1))
        g_table = GEOMETRIC.kernel_table()
        violations = 0
        while True:
            consumed, t_last, hit, viol = kernels.evolve_pair(
                lo, lam1, hi, lam2, GEOMETRIC.mode, g_table, stream.neighbor,
                stream.gaps, stream.origins, stream.disps, stream.marks,
                stream.cursor, stream.time, 400.0)
            stream.advance(consumed, t_last)
            violations += viol
            if hit:
                break
        assert violations == 0

    def test_truncated_time_average_dominates(self, rng):
        # same events twice: the truncated run's occupancy integral at every
        # fast site is at least the plain run's
        dist = EnvDistribution(c=0.2, beta=1.0)
        field = sample_environment(dist, 32, seed=21)
        alpha = 0.25
        occ0 = sample_product_measure(field, 0.15, GEOMETRIC, rng)

        s1 = EventStream(22, 32, JumpKernel.nearest_neighbor(1))
        acc1 = EvolveAccumulators(32, occupancy=True)
        evolve(occ0, field, None, 300.0, s1, GEOMETRIC, acc1)

        s2 = EventStream(22, 32, JumpKernel.nearest_neighbor(1))
        acc2 = EvolveAccumulators(32, occupancy=True)
        trunc0 = truncate_configuration(occ0, field, alpha)
        evolve(trunc0, field, alpha, 300.0, s2, GEOMETRIC, acc2)

        fast = ~slow_mask(field, alpha)
        assert np.all(acc2.occ_time[fast] >= acc1.occ_time[fast] - 1e-9)
