"""Event-driven construction of the process.

All randomness of a run lives in one Poisson event stream: exponential
inter-event gaps at total rate n_sites (one unit-rate clock per site,
superposed), a uniform origin site, a kernel displacement and a uniform
mark per event.  Every process driven by the same stream sees the same
events, which is what makes exact couplings possible.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .environment import JumpKernel, RateField, slow_mask, truncate_rates
from .errors import DomainError, StateError
from .measures import INFINITE_OCCUPANCY, RateFunction

DEFAULT_BATCH = 1 << 15


@dataclass(frozen=True)
class GraphicalEvent:
    """One Poisson event: time, origin site, target site, uniform mark."""

    time: float
    origin: int
    target: int
    mark: float


@lru_cache(maxsize=32)
def neighbor_table(dims: tuple[int, ...], kernel: JumpKernel) -> np.ndarray:
    """neighbor[x, j]: flat index of site x shifted by displacement j (torus)."""
    disps = kernel.displacements()
    grids = np.meshgrid(*[np.arange(L, dtype=np.int64) for L in dims], indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    n = coords.shape[0]
    out = np.empty((n, len(disps)), dtype=np.int64)
    for j, dv in enumerate(disps):
        shifted = (coords + dv) % np.array(dims, dtype=np.int64)
        out[:, j] = np.ravel_multi_index(shifted.T, dims)
    return out


class EventStream:
    """Deterministic, replayable stream of graphical events on a torus.

    Gaps, origins, displacement indices and marks are drawn in fixed-size
    vectorized batches from one PCG64 generator, so the sequence depends
    only on (seed, dims, kernel, batch size).  Event times are accumulated
    sequentially by the consumers; `time` tracks the last event handed out.
    """

    def __init__(self, seed, dims, kernel: JumpKernel, batch_size: int = DEFAULT_BATCH):
        self.dims = tuple(int(L) for L in (dims if np.iterable(dims) else [dims]))
        self.kernel = kernel
        self.n_sites = int(np.prod(self.dims))
        self.batch_size = int(batch_size)
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._cdf = kernel.cdf()
        self.neighbor = neighbor_table(self.dims, kernel)
        self.time = 0.0
        self.cursor = 0
        self._refill()

    def _refill(self) -> None:
        b = self.batch_size
        self.gaps = self._rng.exponential(1.0 / self.n_sites, b)
        self.origins = self._rng.integers(0, self.n_sites, b, dtype=np.int64)
        self.disps = np.searchsorted(self._cdf, self._rng.random(b), side="right")
        np.minimum(self.disps, len(self._cdf) - 1, out=self.disps)
        self.marks = self._rng.random(b)
        self.cursor = 0

    def advance(self, consumed: int, t_last: float) -> None:
        """Commit a kernel call's consumption; refill when exhausted."""
        self.cursor += consumed
        self.time = t_last
        if self.cursor >= self.batch_size:
            self._refill()

    def next_event(self) -> GraphicalEvent:
        if self.cursor >= self.batch_size:
            self._refill()
        i = self.cursor
        self.time += float(self.gaps[i])
        x = int(self.origins[i])
        y = int(self.neighbor[x, self.disps[i]])
        ev = GraphicalEvent(self.time, x, y, float(self.marks[i]))
        self.cursor += 1
        return ev


class EvolveAccumulators:
    """Optional per-run observables integrated inside the kernels.

    occ_time[x]  - integral of the occupancy at x over time
    rate_time[0] - integral of sum_x lam_x g(occ_x) over time
    attempts/fired[x] - Poisson attempts at origin x / how many fired
    emptying[x]  - number of occupancy transitions 1 -> 0 at x
    tagged_hist  - time-weighted occupancy histogram at one site
                   (last bin collects the overflow)
    """

    def __init__(self, n_sites: int, t0: float = 0.0, *, occupancy: bool = False,
                 rate: bool = False, counts: bool = False, emptying: bool = False,
                 tagged_idx: int = -1, hist_bins: int = 64):
        self.t_flushed = float(t0)
        self.occ_time = np.zeros(n_sites) if occupancy else None
        self.last_t = np.full(n_sites, t0) if occupancy else None
        self.rate_time = np.zeros(1) if rate else None
        self.attempts = np.zeros(n_sites, dtype=np.int64) if counts else None
        self.fired = np.zeros(n_sites, dtype=np.int64) if counts else None
        self.emptying = np.zeros(n_sites, dtype=np.int64) if emptying else None
        self.tagged_idx = int(tagged_idx)
        self.tagged_hist = np.zeros(hist_bins) if tagged_idx >= 0 else None
        self.tagged_last = np.array([t0]) if tagged_idx >= 0 else None

    def reset_window(self, t: float) -> None:
        """Zero the integrals and restart them at time t."""
        self.t_flushed = float(t)
        if self.occ_time is not None:
            self.occ_time[:] = 0.0
            self.last_t[:] = t
        if self.rate_time is not None:
            self.rate_time[0] = 0.0
        if self.tagged_hist is not None:
            self.tagged_hist[:] = 0.0
            self.tagged_last[0] = t


def effective_rates(field: RateField, alpha: float | None) -> np.ndarray:
    """Rates seen by the dynamics: plain, or truncated when alpha > 0."""
    if alpha is None or alpha == 0:
        return field.rates
    return truncate_rates(field, alpha).rates


def truncate_configuration(occ: np.ndarray, field: RateField, alpha: float) -> np.ndarray:
    """Plant the infinite-occupancy sentinel on every slow site."""
    if np.any(occ == INFINITE_OCCUPANCY):
        raise StateError("input configuration already carries sentinels")
    out = occ.astype(np.int64, copy=True)
    out[slow_mask(field, alpha)] = INFINITE_OCCUPANCY
    return out


def check_truncated(occ: np.ndarray, field: RateField, alpha: float) -> None:
    """Raise unless sentinels sit exactly on the slow set."""
    sl = slow_mask(field, alpha)
    sent = occ == INFINITE_OCCUPANCY
    if not np.array_equal(sl, sent):
        raise StateError("sentinel pattern does not match the slow set")


def apply_event(occ: np.ndarray, event: GraphicalEvent, field: RateField,
                g: RateFunction) -> np.ndarray:
    """Single-event reference update of the plain process.

    Fires iff mark < lam_x g(occ_x); then one particle moves from origin to
    target.  Returns the input unchanged when nothing fires, else a copy.
    """
    if np.any(occ == INFINITE_OCCUPANCY):
        raise StateError("plain configurations cannot hold sentinels")
    x, y = event.origin, event.target
    if event.mark < field.rates[x] * g(int(occ[x])) and y != x:
        out = occ.copy()
        out[x] -= 1
        out[y] += 1
        return out
    return occ


def apply_event_truncated(occ: np.ndarray, event: GraphicalEvent, field: RateField,
                          g: RateFunction, alpha: float) -> np.ndarray:
    """Single-event reference update of the truncated process.

    Fast origins behave as the plain rule with the truncated rate; slow
    origins emit at rate (c + alpha) regardless of their (infinite) load,
    which acts as particle creation at the target.  Sentinels never change.
    """
    check_truncated(occ, field, alpha)
    lam = effective_rates(field, alpha)
    x, y = event.origin, event.target
    if event.mark < lam[x] * g(int(occ[x])) and y != x:
        out = occ.copy()
        if out[x] != INFINITE_OCCUPANCY:
            out[x] -= 1
        if out[y] != INFINITE_OCCUPANCY:
            out[y] += 1
        return out
    return occ


def evolve(occ: np.ndarray, field: RateField, alpha: float | None, t_end: float,
           stream: EventStream, g: RateFunction,
           acc: EvolveAccumulators | None = None) -> np.ndarray:
    """Fold all events up to t_end into the configuration (kernel-backed).

    alpha=None or 0 runs the plain process; otherwise the configuration
    must carry sentinels exactly on the slow set.  The input array is not
    modified.  The stream is left positioned at t_end.
    """
    if t_end < stream.time:
        raise DomainError(f"t_end={t_end} is before the stream time {stream.time}")
    out = np.asarray(occ, dtype=np.int64).copy()
    if alpha:
        check_truncated(out, field, alpha)
    elif np.any(out == INFINITE_OCCUPANCY):
        raise StateError("plain configurations cannot hold sentinels")
    lam = effective_rates(field, alpha)
    g_table = g.kernel_table()
    while True:
        t_acc = acc.t_flushed if acc is not None else stream.time
        consumed, t_last, hit = kernels.evolve_zrp(
            out, lam, g.mode, g_table, stream.neighbor,
            stream.gaps, stream.origins, stream.disps, stream.marks,
            stream.cursor, stream.time, t_acc, t_end, acc)
        stream.advance(consumed, t_last)
        if acc is not None:
            acc.t_flushed = t_end if hit else t_last
        if hit:
            return out


def occupancy_to_csv(path, times, snapshots) -> None:
    """Trajectory dump: one row per (t, site); sentinel written as `inf`."""
    with open(path, "w") as fh:
        fh.write("t,site_index,occupancy\n")
        for t, occ in zip(times, snapshots):
            for i, k in enumerate(occ):
                val = "inf" if k == INFINITE_OCCUPANCY else str(int(k))
                fh.write(f"{float(t)!r},{i},{val}\n")
