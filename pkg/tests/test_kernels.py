"""Backend equivalence: the compiled kernels must reproduce the pure-Python
reference bit for bit, and the batch kernels must match the single-event
reference updates."""

import numpy as np
import pytest

from zrpsim import _kernels_py
from zrpsim.dynamics import EventStream, EvolveAccumulators, apply_event, \
    apply_event_truncated, truncate_configuration
from zrpsim.environment import EnvDistribution, JumpKernel, sample_environment, \
    truncate_rates
from zrpsim.measures import GEOMETRIC, K_OVER_K1, RateFunction, \
    sample_product_measure, sample_truncated_product

cy = pytest.importorskip("zrpsim._kernels_cy")

G_CASES = [GEOMETRIC, K_OVER_K1, RateFunction("table", (0.3, 0.55, 0.8, 0.95))]


def _stream_arrays(seed, n_sites, kernel, n_events):
    stream = EventStream(seed, n_sites, kernel, batch_size=n_events)
    return stream


def _fresh_setup(g, alpha, seed=1000):
    dist = EnvDistribution(c=0.25, beta=1.5)
    field = sample_environment(dist, 48, seed=seed)
    rng = np.random.Generator(np.random.PCG64(seed + 1))
    if alpha:
        occ = sample_truncated_product(field, alpha, g, rng)
        lam = truncate_rates(field, alpha).rates
    else:
        occ = sample_product_measure(field, 0.2, g, rng)
        lam = field.rates
    return field, occ, lam


@pytest.mark.parametrize("g", G_CASES, ids=lambda g: g.kind)
@pytest.mark.parametrize("alpha", [0.0, 0.2])
def test_evolve_zrp_backends_bit_identical(g, alpha):
    field, occ0, lam = _fresh_setup(g, alpha)
    kernel = JumpKernel.nearest_neighbor(1, asymmetry=0.4)
    results = {}
    for name, impl in [("py", _kernels_py), ("cy", cy)]:
        stream = _stream_arrays(77, 48, kernel, 1 << 14)
        occ = occ0.copy()
        acc = EvolveAccumulators(48, occupancy=True, rate=True, counts=True,
                                 emptying=True, tagged_idx=5, hist_bins=16)
        consumed, t_last, hit = impl.evolve_zrp(
            occ, lam, g.mode, g.kernel_table(), stream.neighbor,
            stream.gaps, stream.origins, stream.disps, stream.marks,
            0, 0.0, 0.0, 30.0, acc)
        results[name] = (occ, consumed, t_last, hit, acc)
    a, b = results["py"], results["cy"]
    assert np.array_equal(a[0], b[0])
    assert a[1:4] == b[1:4]
    for attr in ("occ_time", "last_t", "rate_time", "attempts", "fired",
                 "emptying", "tagged_hist", "tagged_last"):
        assert np.array_equal(getattr(a[4], attr), getattr(b[4], attr)), attr


@pytest.mark.parametrize("g", G_CASES, ids=lambda g: g.kind)
def test_evolve_pair_backends_bit_identical(g):
    field, occ0, lam = _fresh_setup(g, 0.0)
    alpha = 0.15
    occ_b0 = truncate_configuration(occ0, field, alpha)
    lam_b = truncate_rates(field, alpha).rates
    kernel = JumpKernel.nearest_neighbor(1)
    results = {}
    for name, impl in [("py", _kernels_py), ("cy", cy)]:
        stream = _stream_arrays(78, 48, kernel, 1 << 14)
        a = occ0.copy()
        b = occ_b0.copy()
        out = impl.evolve_pair(a, lam, b, lam_b, g.mode, g.kernel_table(),
                               stream.neighbor, stream.gaps, stream.origins,
                               stream.disps, stream.marks, 0, 0.0, 40.0)
        results[name] = (a, b, out)
    assert np.array_equal(results["py"][0], results["cy"][0])
    assert np.array_equal(results["py"][1], results["cy"][1])
    assert results["py"][2] == results["cy"][2]


@pytest.mark.parametrize("g", G_CASES, ids=lambda g: g.kind)
def test_evolve_coupled_backends_bit_identical(g):
    alpha = 0.2
    field, xi0, lam = _fresh_setup(g, alpha)
    rng = np.random.Generator(np.random.PCG64(5))
    eta0 = sample_truncated_product(field, alpha, g, rng)
    kernel = JumpKernel.nearest_neighbor(1)
    probe_slot = np.full(48, -1, dtype=np.int32)
    probe_slot[[3, 17, 33]] = np.arange(3, dtype=np.int32)
    results = {}
    for name, impl in [("py", _kernels_py), ("cy", cy)]:
        stream = _stream_arrays(79, 48, kernel, 1 << 14)
        a, b = xi0.copy(), eta0.copy()
        last_pos = np.full(3, -np.inf)
        counters = np.zeros(2, dtype=np.int64)
        out = impl.evolve_coupled(a, b, lam, g.mode, g.kernel_table(),
                                  stream.neighbor, stream.gaps, stream.origins,
                                  stream.disps, stream.marks, 0, 0.0, 40.0,
                                  probe_slot, last_pos, counters)
        results[name] = (a, b, last_pos, counters, out)
    for i in range(5):
        assert np.array_equal(results["py"][i], results["cy"][i]), i


def test_run_walks_backends_bit_identical():
    kernel = JumpKernel.from_entries([((-1, 0), 0.3), ((1, 0), 0.3),
                                      ((0, -1), 0.2), ((0, 1), 0.2)], 2)
    n = 400
    starts = np.zeros((n, 2), dtype=np.int64)
    starts[:, 0] = 5
    env_seeds = np.arange(n, dtype=np.uint64) + 9
    walk_seeds = np.arange(n, dtype=np.uint64) + 1009
    outs = {}
    for name, impl in [("py", _kernels_py), ("cy", cy)]:
        res = [np.empty(n, dtype=np.int64), np.empty(n, dtype=np.uint8),
               np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64),
               np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64)]
        impl.run_walks(starts, env_seeds, walk_seeds, kernel.displacements(),
                       kernel.cdf(), 0.3, 500, *res)
        outs[name] = res
    for i in range(6):
        assert np.array_equal(outs["py"][i], outs["cy"][i]), i


@pytest.mark.parametrize("g", [GEOMETRIC, K_OVER_K1], ids=lambda g: g.kind)
@pytest.mark.parametrize("alpha", [0.0, 0.2])
def test_batch_kernel_matches_single_event_reference(g, alpha):
    dist = EnvDistribution(c=0.25, beta=1.5)
    field = sample_environment(dist, 24, seed=60)
    rng = np.random.Generator(np.random.PCG64(61))
    if alpha:
        occ0 = sample_truncated_product(field, alpha, g, rng)
        lam = truncate_rates(field, alpha).rates
    else:
        occ0 = sample_product_measure(field, 0.2, g, rng)
        lam = field.rates
    kernel = JumpKernel.nearest_neighbor(1)
    t_end = 80.0

    ref = occ0.copy()
    s_ref = EventStream(91, 24, kernel)
    while True:
        ev = s_ref.next_event()
        if ev.time > t_end:
            break
        if alpha:
            ref = apply_event_truncated(ref, ev, field, g, alpha)
        else:
            ref = apply_event(ref, ev, field, g)

    for impl in (_kernels_py, cy):
        stream = EventStream(91, 24, kernel)
        occ = occ0.copy()
        t_last = 0.0
        while True:
            consumed, t_last, hit = impl.evolve_zrp(
                occ, lam, g.mode, g.kernel_table(), stream.neighbor,
                stream.gaps, stream.origins, stream.disps, stream.marks,
                stream.cursor, stream.time, t_last, t_end, None)
            stream.advance(consumed, t_last)
            if hit:
                break
        assert np.array_equal(occ, ref)


def test_chunked_evolution_matches_one_shot():
    # consuming the stream in many small horizons must land on the same state
    from zrpsim.dynamics import evolve
    dist = EnvDistribution(c=0.2, beta=2.0)
    field = sample_environment(dist, 32, seed=70)
    rng = np.random.Generator(np.random.PCG64(71))
    occ0 = sample_product_measure(field, 0.15, GEOMETRIC, rng)
    kernel = JumpKernel.nearest_neighbor(1)

    s1 = EventStream(72, 32, kernel)
    one = evolve(occ0, field, None, 100.0, s1, GEOMETRIC)

    s2 = EventStream(72, 32, kernel)
    many = occ0.copy()
    for t in np.linspace(2.5, 100.0, 40):
        many = evolve(many, field, None, float(t), s2, GEOMETRIC)
    assert np.array_equal(one, many)
    assert s1.time == s2.time
