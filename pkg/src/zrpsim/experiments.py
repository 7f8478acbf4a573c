"""Runnable experiments behind the command line.

Every experiment consumes an ExperimentConfig, writes CSV artifacts plus a
`summary.txt` of PASS/FAIL lines into an output directory, and returns an
ExperimentReport.  Outputs contain no wall-clock data, so identical configs
reproduce identical bytes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .coupling import domination_run, run_coupling
from .dynamics import EventStream, EvolveAccumulators, evolve, truncate_configuration
from .environment import RateField, sample_environment
from .errors import ConfigError
from .measures import INFINITE_OCCUPANCY, fugacity_for_density, marginal_law, \
    mean_density, mean_occupancy, sample_product_measure, sample_truncated_product
from .oracle import exact_stationary
from .rng import derive_seed
from .walkers import cp_lower, cp_upper, default_max_steps, last_origin_visit, \
    run_walk_batch

_INIT_TAG = 31
_STREAM_TAG = 47
_ENV_TAG = 101
_WALK_TAG = 202


@dataclass
class Check:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class ExperimentReport:
    tag: str
    checks: list[Check] = dc_field(default_factory=list)
    artifacts: dict[str, Path] = dc_field(default_factory=dict)
    notes: list[str] = dc_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def add(self, name: str, ok: bool, detail: str) -> None:
        self.checks.append(Check(name, bool(ok), detail))

    def write_summary(self, outdir: Path) -> Path:
        path = Path(outdir) / "summary.txt"
        with open(path, "w") as fh:
            fh.write(f"experiment: {self.tag}\n")
            for note in self.notes:
                fh.write(f"# {note}\n")
            for c in self.checks:
                fh.write(c.line() + "\n")
        self.artifacts["summary"] = path
        return path

    def one_line(self) -> str:
        n_ok = sum(c.ok for c in self.checks)
        status = "PASS" if self.passed else "FAIL"
        return f"{self.tag}: {status} ({n_ok}/{len(self.checks)} checks)"


# ---------------------------------------------------------------------------
# analysis helpers

@dataclass(frozen=True)
class DensityEstimate:
    """Windowed mean occupancy around the origin site."""

    radius: int
    value: float
    n_infinite: int


def empirical_density(occ: np.ndarray, dims: tuple[int, ...],
                      radius: int) -> DensityEstimate:
    """Mean occupancy over the sup-norm ball of the given radius.

    Coordinates are taken centered (torus wrap), so the window must fit:
    2*radius + 1 <= min(dims).  Sentinel entries are left out of the sum
    and reported through n_infinite.
    """
    if 2 * radius + 1 > min(dims):
        raise ConfigError(f"window radius {radius} does not fit in dims {dims}")
    occ_nd = np.asarray(occ).reshape(dims)
    window = _window(occ_nd, radius)
    inf_mask = window == INFINITE_OCCUPANCY
    total = float(window[~inf_mask].sum())
    return DensityEstimate(radius=radius, value=total / window.size,
                           n_infinite=int(inf_mask.sum()))


def _window(occ_nd: np.ndarray, radius: int) -> np.ndarray:
    idx = np.arange(-radius, radius + 1)
    for ax in range(occ_nd.ndim):
        occ_nd = np.take(occ_nd, idx, axis=ax, mode="wrap")
    return occ_nd


def density_profile(occ: np.ndarray, dims: tuple[int, ...],
                    radii=None) -> list[DensityEstimate]:
    """Density sequence over a geometric grid of window radii."""
    if radii is None:
        r_max = (min(dims) - 1) // 2
        radii, r = [], 1
        while r <= r_max:
            radii.append(r)
            r *= 2
        if not radii:
            radii = [0]
    return [empirical_density(occ, dims, r) for r in radii]


def asymptotic_density_proxies(estimates: list[DensityEstimate]) -> tuple[float, float]:
    """(lower, upper) proxy: min/max of the top half of the radius grid."""
    top = estimates[len(estimates) // 2:]
    values = [e.value for e in top]
    return min(values), max(values)


@dataclass(frozen=True)
class GrowthCheck:
    beta: float
    passed: bool
    partial_sum: float
    n_terms: int


def growth_condition_check(shell_occupancy, betas, max_shells: int = 20_000,
                           ) -> list[GrowthCheck]:
    """Summability of sum_n exp(-beta n) * (occupancy on shell n).

    Plateau detection with a trailing ratio test: the series passes when
    terms decay below any relevance; it fails as soon as terms stop
    decaying for a sustained stretch.
    """
    out = []
    for beta in betas:
        total = 0.0
        prev = None
        growing = 0
        passed = None
        n = 0
        for n in range(1, max_shells + 1):
            try:
                term = math.exp(-beta * n) * float(shell_occupancy(n))
            except OverflowError:
                passed = False
                break
            total += term
            if prev is not None and prev > 0:
                # tolerate rounding jitter when deciding "stopped decaying"
                growing = growing + 1 if term >= prev * (1.0 - 1e-9) else 0
                if growing >= 50:
                    passed = False
                    break
            if term < 1e-15 * max(total, 1.0) and term < 1e-15:
                passed = True
                break
            prev = term
        if passed is None:
            passed = False
        out.append(GrowthCheck(beta=beta, passed=passed, partial_sum=total, n_terms=n))
    return out


def _parallel_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _build_field(cfg: ExperimentConfig) -> RateField:
    return sample_environment(cfg.distribution(), cfg.dims, cfg.env_seed)


def _fugacity(cfg: ExperimentConfig) -> float:
    if cfg.v is not None:
        return cfg.v
    if cfg.target_density is not None:
        return fugacity_for_density(cfg.target_density, cfg.g)
    raise ConfigError("measure section needs v or target_density")


def _fast_quantile_site(field: RateField, alpha_or_margin: float, q: float = 0.5) -> int:
    """Fast site whose rate sits at the q-quantile of the fast rates."""
    fast = np.where(field.rates > field.c + alpha_or_margin)[0]
    if len(fast) == 0:
        raise ConfigError("no fast sites at this truncation level")
    order = fast[np.argsort(field.rates[fast], kind="stable")]
    return int(order[int(q * (len(order) - 1))])


def _spread_fast_probes(field: RateField, alpha: float, n_probes: int) -> np.ndarray:
    """Probe sites spread over the upper half of the fast rates.

    Sites barely above the cutoff carry near-critical stationary loads and
    (for flat g) keep their discrepancies frozen under coupled particles;
    comfortably fast sites empty often, which is what the probes monitor.
    """
    fast = np.where(field.rates > field.c + alpha)[0]
    if len(fast) < n_probes:
        raise ConfigError(f"only {len(fast)} fast sites; need {n_probes} probes")
    order = fast[np.argsort(field.rates[fast], kind="stable")]
    pick = np.linspace(len(order) // 2, len(order) - 1, n_probes).astype(int)
    return np.sort(order[np.unique(pick)]) if len(np.unique(pick)) == n_probes \
        else np.sort(order[-n_probes:])


# ---------------------------------------------------------------------------
# oracle

def run_oracle(cfg: ExperimentConfig, outdir: Path) -> ExperimentReport:
    rep = ExperimentReport("oracle")
    n = cfg.extra_int("sites", 3)
    n_particles = cfg.extra_int("particles", 4)
    rates = cfg.extra_floats("rates", (0.6, 0.8, 1.0))
    tv_tol = cfg.extra_float("tv_tol", 1e-10)
    if len(rates) != n:
        raise ConfigError(f"need {n} rates, got {len(rates)}")
    res = exact_stationary(n, n_particles, rates, cfg.g, cfg.kernel)

    path = Path(outdir) / "oracle.csv"
    with open(path, "w") as fh:
        fh.write("state,prob_solved,prob_product\n")
        for s, eta in enumerate(res.states):
            label = "|".join(str(k) for k in eta)
            fh.write(f"{label},{float(res.stationary[s])!r},{float(res.product_weights[s])!r}\n")
    rep.artifacts["oracle"] = path
    rep.notes.append(f"states={len(res.states)} residual={res.residual:.3e}")
    rep.add("tv_below_tol", res.tv_distance < tv_tol,
            f"TV={res.tv_distance:.3e} tol={tv_tol:g}")
    rep.write_summary(outdir)
    return rep


# ---------------------------------------------------------------------------
# stationarity

def _stationarity_replica(args: dict) -> dict:
    cfg: ExperimentConfig = args["cfg"]
    field: RateField = args["field"]
    v = args["v"]
    r = args["replica"]
    rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, _INIT_TAG, r)))
    occ = sample_product_measure(field, v, cfg.g, rng)
    stream = EventStream(derive_seed(cfg.dynamics_seed, _STREAM_TAG, r),
                         cfg.dims, cfg.kernel)
    acc = EvolveAccumulators(field.n_sites, occupancy=True, rate=True, counts=True)
    times, snaps = [0.0], [occ.copy()]
    if r == 0:
        for t in np.linspace(0.0, cfg.t_end, 21)[1:]:
            occ = evolve(occ, field, None, float(t), stream, cfg.g, acc)
            times.append(float(t))
            snaps.append(occ.copy())
    else:
        occ = evolve(occ, field, None, cfg.t_end, stream, cfg.g, acc)
    return {"replica": r,
            "occ_mean": acc.occ_time / cfg.t_end,
            "rate_mean": acc.rate_time[0] / (cfg.t_end * field.n_sites),
            "times": times, "snaps": snaps}


def run_stationarity(cfg: ExperimentConfig, outdir: Path) -> ExperimentReport:
    """Replicated stationary runs; single-run time averages stay correlated
    through the slowest density mode, so per-site uncertainty comes from
    independent replicas (the product start is exactly stationary, making
    the replica mean unbiased for the predicted occupancy)."""
    rep = ExperimentReport("stationarity")
    field = _build_field(cfg)
    v = _fugacity(cfg)
    n = field.n_sites
    replicas = max(2, cfg.replicas)
    expected = np.array([mean_occupancy(v / lam, cfg.g) for lam in field.rates])

    args = [{"cfg": cfg, "field": field, "v": v, "replica": r}
            for r in range(replicas)]
    results = _parallel_map(_stationarity_replica, args, cfg.workers)

    occ_means = np.stack([res["occ_mean"] for res in results])
    rate_means = np.array([res["rate_mean"] for res in results])
    times, snaps = results[0]["times"], results[0]["snaps"]

    site_mean = occ_means.mean(axis=0)
    site_se = occ_means.std(axis=0, ddof=1) / math.sqrt(replicas)
    ok_site = np.abs(site_mean - expected) <= 3.0 * site_se
    frac = float(np.mean(ok_site))

    jr_mean = float(rate_means.mean())
    jr_se = float(rate_means.std(ddof=1)) / math.sqrt(replicas)
    jr_ok = abs(jr_mean - v) <= 3.0 * jr_se

    field.to_csv(Path(outdir) / "field.csv")
    rep.artifacts["field"] = Path(outdir) / "field.csv"
    path = Path(outdir) / "stationarity.csv"
    with open(path, "w") as fh:
        fh.write("site,lambda,expected,mean,se,ok\n")
        for i in range(n):
            fh.write(f"{i},{float(field.rates[i])!r},{float(expected[i])!r},{float(site_mean[i])!r},"
                     f"{float(site_se[i])!r},{int(ok_site[i])}\n")
    rep.artifacts["stationarity"] = path
    if cfg.extra_int("dump_trajectory", 1):
        from .dynamics import occupancy_to_csv
        tpath = Path(outdir) / "trajectory.csv"
        occupancy_to_csv(tpath, times, snaps)
        rep.artifacts["trajectory"] = tpath

    rep.add("occupancy_matches_expected_95pct", frac >= 0.95,
            f"{frac:.3f} of sites within 3 SE of expected occupancy")
    rep.add("jump_rate_identity", jr_ok,
            f"mean site exit rate {jr_mean:.5f} vs fugacity {v:.5f} "
            f"(3se={3 * jr_se:.5f})")
    rep.write_summary(outdir)
    return rep


# ---------------------------------------------------------------------------
# domination

def run_domination(cfg: ExperimentConfig, outdir: Path) -> ExperimentReport:
    rep = ExperimentReport("domination")
    if cfg.alpha <= 0:
        raise ConfigError("domination needs alpha > 0 in [dynamics]")
    field = _build_field(cfg)
    v = _fugacity(cfg)
    rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, _INIT_TAG)))
    occ0 = sample_product_measure(field, v, cfg.g, rng)
    stream = EventStream(cfg.dynamics_seed, cfg.dims, cfg.kernel)
    events = cfg.extra_int("events", 1_000_000)
    violations = domination_run(occ0, field, cfg.alpha, math.inf, stream, cfg.g,
                                max_events=events)
    path = Path(outdir) / "domination.csv"
    with open(path, "w") as fh:
        fh.write("events,violations\n")
        fh.write(f"{events},{violations}\n")
    rep.artifacts["domination"] = path
    rep.add("no_order_violations", violations == 0,
            f"violations={violations} over {events} events")
    rep.write_summary(outdir)
    return rep


# ---------------------------------------------------------------------------
# couple

def _couple_replica(args: dict) -> dict:
    cfg: ExperimentConfig = args["cfg"]
    field: RateField = args["field"]
    probes = args["probes"]
    r = args["replica"]
    rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, _INIT_TAG, r)))
    xi_plain = rng.poisson(args["init_mean"], field.n_sites).astype(np.int64)
    xi0 = truncate_configuration(xi_plain, field, cfg.alpha)
    eta0 = sample_truncated_product(field, cfg.alpha, cfg.g, rng)
    stream = EventStream(derive_seed(cfg.dynamics_seed, _STREAM_TAG, r),
                         cfg.dims, cfg.kernel)
    report = run_coupling(xi0, eta0, field, cfg.alpha, cfg.t_end, probes, stream,
                          cfg.g, cfg.sample_every)
    return {"replica": r, "last": report.last_discrepancy_time,
            "n_coalesced": report.n_coalesced, "n_absorbed": report.n_absorbed,
            "report": report if r == 0 else None}


def run_couple(cfg: ExperimentConfig, outdir: Path) -> ExperimentReport:
    rep = ExperimentReport("couple")
    if cfg.alpha <= 0:
        raise ConfigError("couple needs alpha > 0 in [dynamics]")
    field = _build_field(cfg)
    n_slow = int(np.sum(field.rates <= field.c + cfg.alpha))
    if n_slow == 0:
        rep.notes.append("environment has no slow sites: discrepancies can only "
                         "coalesce, never be absorbed")
    probes = _spread_fast_probes(field, cfg.alpha, cfg.extra_int("n_probes", 4))
    init_mean = cfg.extra_float("init_mean", 1.0)
    window_fraction = cfg.extra_float("window_fraction", 0.1)
    cutoff = (1.0 - window_fraction) * cfg.t_end

    args = [{"cfg": cfg, "field": field, "probes": probes, "replica": r,
             "init_mean": init_mean} for r in range(cfg.replicas)]
    results = _parallel_map(_couple_replica, args, cfg.workers)

    path = Path(outdir) / "couple.csv"
    n_pass = 0
    with open(path, "w") as fh:
        fh.write("replica,probe_site,last_discrepancy_time,ok\n")
        for res in results:
            ok_all = True
            for p, site in enumerate(probes):
                last = res["last"][p]
                ok = last <= cutoff
                ok_all = ok_all and ok
                last_str = "never" if last == -math.inf else repr(float(last))
                fh.write(f"{res['replica']},{int(site)},{last_str},{int(ok)}\n")
            n_pass += ok_all
    rep.artifacts["couple"] = path

    first = results[0]["report"]
    first.to_csv(Path(outdir) / "coupling_report.csv")
    rep.artifacts["coupling_report"] = Path(outdir) / "coupling_report.csv"
    summary = {
        "last_discrepancy_time": {
            str(int(site)): (None if first.last_discrepancy_time[p] == -math.inf
                             else float(first.last_discrepancy_time[p]))
            for p, site in enumerate(probes)},
        "n_coalesced": first.n_coalesced,
        "n_absorbed": first.n_absorbed,
        "violations": 0,
    }
    jpath = Path(outdir) / "coupling_summary.json"
    with open(jpath, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    rep.artifacts["coupling_summary"] = jpath

    frac = n_pass / cfg.replicas
    rep.add("probes_discrepancy_free_tail_95pct", frac >= 0.95,
            f"{n_pass}/{cfg.replicas} replicas with all probes clear after "
            f"t={cutoff:g}")
    rep.write_summary(outdir)
    return rep


# ---------------------------------------------------------------------------
# walkers

def run_walkers(cfg: ExperimentConfig, outdir: Path) -> ExperimentReport:
    rep = ExperimentReport("walkers")
    dist = cfg.distribution()
    alpha = cfg.extra_float("walk_alpha", cfg.alpha)
    if alpha <= 0:
        raise ConfigError("walkers need walk_alpha > 0")
    theta = dist.slow_fraction(alpha)
    max_steps = cfg.extra_int("max_steps", default_max_steps(theta))
    k = cfg.extra_int("start_norm", 8)
    levels = cfg.extra_ints("distinct_levels", (2, 4, 8, 16))
    replicas = cfg.replicas
    m = cfg.kernel.range

    starts = np.zeros((replicas, cfg.kernel.dimension), dtype=np.int64)
    starts[:, 0] = k
    env_seeds = np.array([derive_seed(cfg.env_seed, _ENV_TAG, r)
                          for r in range(replicas)], dtype=np.uint64)
    walk_seeds = np.array([derive_seed(cfg.seed, _WALK_TAG, r)
                           for r in range(replicas)], dtype=np.uint64)
    batch = run_walk_batch(starts, env_seeds, walk_seeds, cfg.kernel, theta, max_steps)

    batch.to_csv(Path(outdir) / "walks.csv")
    rep.artifacts["walks"] = Path(outdir) / "walks.csv"

    if k == 0:
        hits = replicas
    else:
        reached = batch.first_origin >= 0
        hits = int(np.sum(reached & ((batch.censored == 1)
                                     | (batch.first_origin < batch.tau))))
    upper = cp_upper(hits, replicas)
    bound = (1.0 - theta) ** (k / m)
    rep.add("origin_hit_upper99_below_bound", upper <= bound,
            f"hit={hits}/{replicas} upper99={upper:.5f} bound={bound:.5f}")

    censor = batch.censor_fraction()
    rep.add("censoring_below_1pct", censor < 0.01,
            f"censored fraction {censor:.5f} at max_steps={max_steps}")

    for level in levels:
        n_ge = int(np.sum(batch.distinct_sites >= level))
        lcb = cp_lower(n_ge, replicas)
        curve = (1.0 - theta) ** level
        rep.add(f"distinct_sites_bound_N{level}", lcb <= curve,
                f"P(|E|>={level})~{n_ge / replicas:.5f} lcb99={lcb:.5f} "
                f"curve={curve:.5f}")

    if "shell_cutoff" in cfg.extras:
        cutoff = cfg.extra_int("shell_cutoff", 40)
        occ2 = lambda coords: 2
        lov = last_origin_visit(occ2, dist, alpha, cutoff, cfg.kernel,
                                env_seed=derive_seed(cfg.env_seed, _ENV_TAG),
                                walk_seed=derive_seed(cfg.seed, _WALK_TAG),
                                max_steps=max_steps)
        rep.notes.append(
            f"last origin visit (constant occupancy 2, cutoff {cutoff}): "
            f"step={lov.last_visit_step:g} walks={lov.n_walks} "
            f"censored={lov.n_censored} ignored-shell bound={lov.tail_bound:.3e}")
        rep.notes.append("walk family averages over environments for statistical "
                         "power; single-environment runs use a fixed env seed")
        rep.add("shell_tail_bound_small", lov.tail_bound < 1e-3,
                f"ignored-shell bound {lov.tail_bound:.3e}")

    rep.write_summary(outdir)
    return rep


# ---------------------------------------------------------------------------
# escape of mass

def run_escape(cfg: ExperimentConfig, outdir: Path) -> ExperimentReport:
    rep = ExperimentReport("escape")
    dist = cfg.distribution()
    rho_c = mean_density(dist.c, dist, cfg.g)
    if math.isinf(rho_c):
        raise ConfigError(
            "escape experiment needs a finite critical density; this rate "
            f"family (beta={dist.beta}) has an infinite one")
    field = _build_field(cfg)
    n = field.n_sites
    margin = cfg.extra_float("fast_margin", 0.1)
    fast = field.rates > field.c + margin
    if not np.any(fast):
        raise ConfigError("no sites above the fast margin")
    factor = cfg.extra_float("density_factor", 2.0)
    init_mean = factor * rho_c

    target = float(np.mean([mean_occupancy(field.c / lam, cfg.g)
                            for lam in field.rates[fast]]))
    lam_min = float(field.rates.min())
    if lam_min <= field.c + margin:
        finite_target = float(np.mean([mean_occupancy(lam_min / lam, cfg.g)
                                       for lam in field.rates[fast]]))
        rep.notes.append(
            f"finite-torus equilibrium: bulk fugacity is pinned at the realized "
            f"minimum rate {lam_min:.4f} (> c={field.c}), giving fast-set "
            f"density {finite_target:.4f}; the infinite-volume target below "
            f"uses v=c")

    rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, _INIT_TAG)))
    occ = rng.poisson(init_mean, n).astype(np.int64)
    density0 = float(occ[fast].mean())

    tagged = _fast_quantile_site(field, margin, 0.5)
    hist_bins = cfg.extra_int("hist_bins", 64)
    law = marginal_law(float(field.rates[tagged]), field.c, cfg.g)
    pmf = np.zeros(hist_bins)
    upto = min(hist_bins - 1, len(law.probs))
    pmf[:upto] = law.probs[:upto]
    pmf[hist_bins - 1] = max(0.0, 1.0 - pmf[:hist_bins - 1].sum())
    law.to_csv(Path(outdir) / "tagged_marginal.csv")
    rep.artifacts["tagged_marginal"] = Path(outdir) / "tagged_marginal.csv"

    lam_rank = np.empty(n, dtype=np.int64)
    lam_rank[np.argsort(field.rates, kind="stable")] = np.arange(n)

    stream = EventStream(cfg.dynamics_seed, cfg.dims, cfg.kernel)
    acc = EvolveAccumulators(n, tagged_idx=tagged, hist_bins=hist_bins)
    n_checks = cfg.extra_int("checkpoints", 50)
    t_grid = np.linspace(0.0, cfg.t_end, n_checks + 1)[1:]
    windows = {"early": (cfg.t_end / 20.0, cfg.t_end / 10.0),
               "late": (cfg.t_end / 2.0, cfg.t_end)}

    rows = [(0.0, density0, int(occ.max()), int(lam_rank[int(np.argmax(occ))]))]
    hists: dict[str, np.ndarray] = {}
    boundaries = sorted({w[0] for w in windows.values()}
                        | {w[1] for w in windows.values()}
                        | set(t_grid.tolist()))
    for t in boundaries:
        occ = evolve(occ, field, None, float(t), stream, cfg.g, acc)
        for name, (lo, hi) in windows.items():
            if t == hi:
                hists[name] = acc.tagged_hist.copy()
                hists[name] /= hists[name].sum()
        if any(t == lo for lo, _ in windows.values()):
            acc.reset_window(t)
        if t in t_grid:
            rows.append((float(t), float(occ[fast].mean()), int(occ.max()),
                         int(lam_rank[int(np.argmax(occ))])))

    path = Path(outdir) / "escape.csv"
    with open(path, "w") as fh:
        fh.write("t,fast_density,max_occupancy,argmax_lambda_rank\n")
        for t, dens, mx, rk in rows:
            fh.write(f"{float(t)!r},{float(dens)!r},{mx},{rk}\n")
    rep.artifacts["escape"] = path

    hpath = Path(outdir) / "tagged_histograms.csv"
    with open(hpath, "w") as fh:
        fh.write("window,k,weight\n")
        for name in ("early", "late"):
            for kk, w in enumerate(hists[name]):
                fh.write(f"{name},{kk},{float(w)!r}\n")
    rep.artifacts["tagged_histograms"] = hpath
    field.to_csv(Path(outdir) / "field.csv")
    rep.artifacts["field"] = Path(outdir) / "field.csv"

    density_end = rows[-1][1]
    rank_end = rows[-1][3]
    tv_early = 0.5 * float(np.abs(hists["early"] - pmf).sum())
    tv_late = 0.5 * float(np.abs(hists["late"] - pmf).sum())
    slow_one_pct = max(1, math.ceil(0.01 * n))

    rep.add("fast_density_drops_to_target", density_end < density0
            and abs(density_end - target) <= 0.2 * target,
            f"fast density {density0:.4f} -> {density_end:.4f}, target {target:.4f}"
            f" (20% window [{0.8 * target:.4f}, {1.2 * target:.4f}])")
    rep.add("max_occupancy_at_slowest_sites", rank_end < slow_one_pct,
            f"argmax occupancy at lambda-rank {rank_end} (slowest 1% = "
            f"{slow_one_pct} sites)")
    rep.add("tagged_site_tv_decreases", tv_late < tv_early,
            f"TV to maximal marginal: {tv_early:.4f} (around t_end/10) -> "
            f"{tv_late:.4f} (around t_end)")
    rep.write_summary(outdir)
    return rep


# ---------------------------------------------------------------------------
# recurrence of empty probes under the truncated dynamics

def _recurrence_replica(args: dict) -> dict:
    cfg: ExperimentConfig = args["cfg"]
    field: RateField = args["field"]
    probe = args["probe"]
    t_early = args["t_early"]
    r = args["replica"]
    rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, _INIT_TAG, r)))
    occ = sample_truncated_product(field, cfg.alpha, cfg.g, rng)
    stream = EventStream(derive_seed(cfg.dynamics_seed, _STREAM_TAG, r),
                         cfg.dims, cfg.kernel)
    acc = EvolveAccumulators(field.n_sites, emptying=True)
    base = 1 if occ[probe] == 0 else 0
    series = []
    if r == 0:
        for t in np.linspace(0.0, cfg.t_end, 41)[1:]:
            occ = evolve(occ, field, cfg.alpha, float(t), stream, cfg.g, acc)
            series.append((float(t), base + int(acc.emptying[probe])))
        count_early = next(c for t, c in series if t >= t_early)
        count_end = series[-1][1]
    else:
        occ = evolve(occ, field, cfg.alpha, t_early, stream, cfg.g, acc)
        count_early = base + int(acc.emptying[probe])
        occ = evolve(occ, field, cfg.alpha, cfg.t_end, stream, cfg.g, acc)
        count_end = base + int(acc.emptying[probe])
    return {"replica": r, "early": count_early, "end": count_end, "series": series}


def run_recurrence(cfg: ExperimentConfig, outdir: Path) -> ExperimentReport:
    rep = ExperimentReport("recurrence")
    if cfg.alpha <= 0:
        raise ConfigError("recurrence needs alpha > 0 in [dynamics]")
    field = _build_field(cfg)
    probe = _fast_quantile_site(field, cfg.alpha, 0.5)
    early_fraction = cfg.extra_float("early_fraction", 0.1)
    t_early = early_fraction * cfg.t_end

    args = [{"cfg": cfg, "field": field, "probe": probe, "t_early": t_early,
             "replica": r} for r in range(cfg.replicas)]
    results = _parallel_map(_recurrence_replica, args, cfg.workers)

    path = Path(outdir) / "recurrence.csv"
    n_pass = 0
    with open(path, "w") as fh:
        fh.write("replica,count_early,count_end,ok\n")
        for res in results:
            ok = res["end"] > res["early"]
            n_pass += ok
            fh.write(f"{res['replica']},{res['early']},{res['end']},{int(ok)}\n")
    rep.artifacts["recurrence"] = path

    spath = Path(outdir) / "emptying_series.csv"
    with open(spath, "w") as fh:
        fh.write("t,count\n")
        for t, cnt in results[0]["series"]:
            fh.write(f"{float(t)!r},{cnt}\n")
    rep.artifacts["emptying_series"] = spath

    ends = np.array([res["end"] for res in results], dtype=float)
    gap = cfg.t_end / np.maximum(ends, 1.0)
    rep.notes.append(f"probe site {probe} (lambda={field.rates[probe]:.4f}); mean "
                     f"gap between emptying events {float(gap.mean()):.3f}")
    frac = n_pass / cfg.replicas
    rep.add("emptying_count_grows_95pct", frac >= 0.95,
            f"{n_pass}/{cfg.replicas} replicas with count(t_end) > count(t_early="
            f"{t_early:g})")
    rep.write_summary(outdir)
    return rep


RUNNERS = {
    "oracle": run_oracle,
    "stationarity": run_stationarity,
    "domination": run_domination,
    "couple": run_couple,
    "walkers": run_walkers,
    "escape": run_escape,
    "recurrence": run_recurrence,
}


def run_experiment(cfg: ExperimentConfig, outdir) -> ExperimentReport:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.tag](cfg, outdir)
