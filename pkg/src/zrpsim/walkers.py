"""Discrete-time kernel walks on the infinite lattice, absorbed at slow sites.

A walk's jumps come from its own counter-based stream, so its path never
depends on the environment; the environment only decides where it stops.
Slowness of a site is the pure function "site uniform <= theta", consistent
with the rate fields sampled in `zrpsim.environment`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import kernels
from .environment import EnvDistribution, JumpKernel
from .errors import DomainError, InputError
from .rng import derive_seed

_ENV_TAG = 101
_WALK_TAG = 202


@dataclass
class WalkBatchResult:
    """Per-walk outcome arrays for a family of independent walks."""

    starts: np.ndarray
    tau: np.ndarray            # absorption step; max_steps when censored
    censored: np.ndarray       # uint8
    first_origin: np.ndarray   # step of first origin visit, -1 if never
    last_origin: np.ndarray
    origin_visits: np.ndarray  # visits at steps 0..tau inclusive
    distinct_sites: np.ndarray  # distinct sites explored strictly before absorption

    def __len__(self) -> int:
        return len(self.tau)

    def censor_fraction(self) -> float:
        return float(np.mean(self.censored))

    def to_csv(self, path) -> None:
        d = self.starts.shape[1]
        with open(path, "w") as fh:
            fh.write("label_x,label_i,tau,censored,origin_visits,distinct_sites\n")
            for i in range(len(self.tau)):
                if d == 1:
                    lx = str(int(self.starts[i, 0]))
                else:
                    lx = "|".join(str(int(c)) for c in self.starts[i])
                fh.write(f"{lx},{i},{int(self.tau[i])},{int(self.censored[i])},"
                         f"{int(self.origin_visits[i])},{int(self.distinct_sites[i])}\n")


@dataclass(frozen=True)
class AbsorptionOutcome:
    """Summary of one absorbed walk."""

    label: tuple
    tau: int
    censored: bool
    origin_visits: int
    distinct_sites: int
    first_origin: int
    last_origin: int


def default_max_steps(theta: float) -> int:
    """Censoring horizon: absorption is geometric in fresh sites visited."""
    return int(math.ceil(200.0 / theta))


def run_walk_batch(starts, env_seeds, walk_seeds, kernel: JumpKernel, theta: float,
                   max_steps: int) -> WalkBatchResult:
    """Run independent walks (kernel-backed); every input row is one walk."""
    if max_steps <= 0:
        raise DomainError("max_steps must be positive")
    starts = np.atleast_2d(np.asarray(starts, dtype=np.int64))
    n = starts.shape[0]
    env_seeds = np.broadcast_to(np.asarray(env_seeds, dtype=np.uint64), (n,)).copy()
    walk_seeds = np.asarray(walk_seeds, dtype=np.uint64)
    out = WalkBatchResult(
        starts=starts,
        tau=np.empty(n, dtype=np.int64),
        censored=np.empty(n, dtype=np.uint8),
        first_origin=np.empty(n, dtype=np.int64),
        last_origin=np.empty(n, dtype=np.int64),
        origin_visits=np.empty(n, dtype=np.int64),
        distinct_sites=np.empty(n, dtype=np.int64),
    )
    kernels.run_walks(starts, env_seeds, walk_seeds, kernel.displacements(),
                      kernel.cdf(), float(theta), int(max_steps),
                      out.tau, out.censored, out.first_origin, out.last_origin,
                      out.origin_visits, out.distinct_sites)
    return out


def simulate_walk(start, kernel: JumpKernel, dist: EnvDistribution, alpha: float,
                  max_steps: int, env_seed: int, walk_seed: int,
                  label: tuple = (0, 0)) -> AbsorptionOutcome:
    """One walk against one environment; see WalkBatchResult for field meanings."""
    theta = dist.slow_fraction(alpha)
    batch = run_walk_batch([start], [env_seed], [walk_seed], kernel, theta, max_steps)
    return AbsorptionOutcome(label=label, tau=int(batch.tau[0]),
                             censored=bool(batch.censored[0]),
                             origin_visits=int(batch.origin_visits[0]),
                             distinct_sites=int(batch.distinct_sites[0]),
                             first_origin=int(batch.first_origin[0]),
                             last_origin=int(batch.last_origin[0]))


def cp_upper(successes: int, n: int, level: float = 0.99) -> float:
    """One-sided Clopper-Pearson upper confidence bound for a proportion."""
    if successes >= n:
        return 1.0
    return float(stats.beta.ppf(level, successes + 1, n - successes))


def cp_lower(successes: int, n: int, level: float = 0.99) -> float:
    """One-sided Clopper-Pearson lower confidence bound for a proportion."""
    if successes <= 0:
        return 0.0
    return float(stats.beta.ppf(1.0 - level, successes, n - successes + 1))


@dataclass(frozen=True)
class HitOriginEstimate:
    """Monte Carlo estimate of reaching the origin before absorption."""

    start_norm: int
    replicas: int
    hits: int
    estimate: float
    upper99: float
    bound: float          # (1 - theta)^(start_norm / range)
    censor_fraction: float


def hit_origin_probability(start_norm: int, kernel: JumpKernel, dist: EnvDistribution,
                           alpha: float, replicas: int, seed: int,
                           max_steps: int | None = None) -> HitOriginEstimate:
    """Fraction of fresh (environment, walk) pairs reaching the origin
    strictly before absorption, with its 99% upper confidence bound.

    A walk started at the origin counts as a hit outright.  The comparison
    bound decays in the number of distinct sites any origin-reaching path
    must cross, start_norm / range.
    """
    if start_norm < 0:
        raise DomainError("start norm must be nonnegative")
    theta = dist.slow_fraction(alpha)
    if max_steps is None:
        max_steps = default_max_steps(theta)
    start = np.zeros((replicas, kernel.dimension), dtype=np.int64)
    start[:, 0] = start_norm
    env_seeds = np.array([derive_seed(seed, _ENV_TAG, r) for r in range(replicas)],
                         dtype=np.uint64)
    walk_seeds = np.array([derive_seed(seed, _WALK_TAG, r) for r in range(replicas)],
                          dtype=np.uint64)
    batch = run_walk_batch(start, env_seeds, walk_seeds, kernel, theta, max_steps)
    if start_norm == 0:
        hit = np.ones(replicas, dtype=bool)
    else:
        reached = batch.first_origin >= 0
        hit = reached & ((batch.censored == 1) | (batch.first_origin < batch.tau))
    hits = int(np.sum(hit))
    return HitOriginEstimate(
        start_norm=start_norm, replicas=replicas, hits=hits,
        estimate=hits / replicas, upper99=cp_upper(hits, replicas),
        bound=(1.0 - theta) ** (start_norm / kernel.range),
        censor_fraction=batch.censor_fraction())


@dataclass(frozen=True)
class LastOriginVisit:
    """Censored estimate of the last origin visit over a walk family."""

    last_visit_step: float     # -inf when no walk visits the origin
    n_walks: int
    n_censored: int
    tail_bound: float          # ignored-shell contribution, Borel-Cantelli style


def last_origin_visit(occupancy_fn, dist: EnvDistribution, alpha: float,
                      shell_cutoff: int, kernel: JumpKernel, env_seed: int,
                      walk_seed: int, max_steps: int | None = None,
                      tail_shells: int = 100_000) -> LastOriginVisit:
    """Launch one walk per particle within the cutoff ball and report the
    latest origin-visit step, plus a certified bound on what the ignored
    shells could contribute.

    occupancy_fn(coords) -> particle count at that site; it must decay
    fast enough that sum_k (1-theta)^(k/M) * shell_total(k) converges,
    otherwise InputError is raised.
    """
    theta = dist.slow_fraction(alpha)
    if max_steps is None:
        max_steps = default_max_steps(theta)
    d = kernel.dimension
    m = kernel.range

    starts = []
    for coords in _ball(shell_cutoff, d):
        n_here = int(occupancy_fn(coords))
        starts.extend([coords] * n_here)
    if not starts:
        return LastOriginVisit(last_visit_step=-math.inf, n_walks=0, n_censored=0,
                               tail_bound=_shell_tail(occupancy_fn, theta, m, d,
                                                      shell_cutoff, tail_shells))

    walk_seeds = np.array([derive_seed(walk_seed, _WALK_TAG, i)
                           for i in range(len(starts))], dtype=np.uint64)
    batch = run_walk_batch(np.array(starts, dtype=np.int64), env_seed, walk_seeds,
                           kernel, theta, max_steps)
    visited = batch.last_origin >= 0
    last = float(np.max(batch.last_origin[visited])) if np.any(visited) else -math.inf
    return LastOriginVisit(last_visit_step=last, n_walks=len(starts),
                           n_censored=int(np.sum(batch.censored)),
                           tail_bound=_shell_tail(occupancy_fn, theta, m, d,
                                                  shell_cutoff, tail_shells))


def _ball(radius: int, d: int):
    """All lattice points with sup-norm <= radius."""
    if d == 1:
        for x in range(-radius, radius + 1):
            yield (x,)
        return
    import itertools
    rng = range(-radius, radius + 1)
    yield from itertools.product(*[rng] * d)


def _shell_total(occupancy_fn, k: int, d: int) -> float:
    """Total occupancy on the sup-norm shell of radius k."""
    if k == 0:
        return float(occupancy_fn((0,) * d))
    total = 0.0
    if d == 1:
        return float(occupancy_fn((k,))) + float(occupancy_fn((-k,)))
    for coords in _ball(k, d):
        if max(abs(c) for c in coords) == k:
            total += occupancy_fn(coords)
    return total


def _shell_tail(occupancy_fn, theta: float, m: int, d: int, cutoff: int,
                tail_shells: int) -> float:
    """sum_{k > cutoff} (1-theta)^(k/m) * shell_total(k), or InputError."""
    q = 1.0 - theta
    total = 0.0
    prev_term = None
    growing = 0
    for k in range(cutoff + 1, cutoff + 1 + tail_shells):
        term = q ** (k / m) * _shell_total(occupancy_fn, k, d)
        total += term
        if prev_term is not None and prev_term > 0:
            growing = growing + 1 if term >= prev_term else 0
            if growing >= 50:
                raise InputError(
                    "shell occupancies grow too fast: the ignored-shell bound diverges")
        if term < 1e-18 * max(total, 1.0) and term < 1e-18:
            break
        prev_term = term
    else:
        raise InputError("shell tail did not converge within the shell budget")
    return total
