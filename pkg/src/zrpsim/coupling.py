"""Basic coupling and discrepancy (second-class particle) bookkeeping.

Two configurations driven by the same events and marks stay coupled: at
every site the surplus of one marginal over the other behaves as a
population of second-class particles.  The fast path (`run_coupling`,
`domination_run`) tracks only per-site counts inside the kernels; the
labeled `DiscrepancyTracker` replays single events in Python and follows
each discrepancy individually, which is what the skeleton and hitting-time
checks need.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .dynamics import EventStream, GraphicalEvent, check_truncated, effective_rates, \
    truncate_configuration
from .environment import RateField, slow_mask
from .errors import StateError
from .measures import INFINITE_OCCUPANCY, RateFunction

XI_ETA = "xi_eta"
ETA_XI = "eta_xi"


@dataclass
class DiscrepancyRecord:
    """One labeled discrepancy: (site, index) at time zero, then its life."""

    label: tuple[int, int]
    kind: str
    position: int
    status: str = "active"
    jumps: int = 0
    path: list[int] = dc_field(default_factory=list)

    def __post_init__(self):
        if not self.path:
            self.path = [self.position]


@dataclass
class CoupledState:
    """Pair of truncated configurations sharing one event stream.

    xi and eta carry the sentinel on exactly the slow set.  The tracker,
    when attached, holds the labeled ledger; per-site typed counts are
    always derivable as (xi - eta)^+ / (eta - xi)^+ at finite sites.
    """

    xi: np.ndarray
    eta: np.ndarray
    field: RateField
    alpha: float
    tracker: "DiscrepancyTracker | None" = None

    def coupled_count(self, x: int) -> int:
        return int(min(self.xi[x], self.eta[x]))

    def discrepancy_counts(self, x: int) -> tuple[int, int]:
        """(xi-type, eta-type) discrepancy counts at a finite site."""
        d = int(self.xi[x]) - int(self.eta[x])
        return (d, 0) if d >= 0 else (0, -d)


class DiscrepancyTracker:
    """Labeled ledger of discrepancies, updated one event at a time.

    Which same-type discrepancy at the firing site moves, and which
    opposite-type resident an arrival coalesces with, are chosen uniformly
    at random (exchangeable labels, so counts do not depend on the choice);
    the choices consume a private generator and never touch the dynamics.
    """

    def __init__(self, xi0, eta0, sentinel_mask, label_seed: int = 0):
        self.records: list[DiscrepancyRecord] = []
        self.active: dict[int, list[int]] = {}
        self.rng = np.random.Generator(np.random.PCG64(label_seed))
        for y in range(len(xi0)):
            if sentinel_mask[y]:
                continue
            d = int(xi0[y]) - int(eta0[y])
            kind = XI_ETA if d > 0 else ETA_XI
            for i in range(1, abs(d) + 1):
                rec = DiscrepancyRecord(label=(y, i), kind=kind, position=y)
                self.active.setdefault(y, []).append(len(self.records))
                self.records.append(rec)

    def _pick(self, site: int, kind: str) -> int:
        ids = [r for r in self.active.get(site, ()) if self.records[r].kind == kind]
        if not ids:
            raise StateError(f"ledger out of sync: no {kind} discrepancy at {site}")
        return ids[int(self.rng.integers(len(ids)))] if len(ids) > 1 else ids[0]

    def _drop(self, site: int, rec_id: int) -> None:
        self.active[site].remove(rec_id)
        if not self.active[site]:
            del self.active[site]

    def move(self, kind: str, x: int, y: int, y_is_slow: bool) -> None:
        rec_id = self._pick(x, kind)
        rec = self.records[rec_id]
        self._drop(x, rec_id)
        rec.position = y
        rec.jumps += 1
        rec.path.append(y)
        if y_is_slow:
            rec.status = "absorbed"
            return
        opposite = ETA_XI if kind == XI_ETA else XI_ETA
        resident_ids = [r for r in self.active.get(y, ())
                        if self.records[r].kind == opposite]
        if resident_ids:
            partner_id = (resident_ids[int(self.rng.integers(len(resident_ids)))]
                          if len(resident_ids) > 1 else resident_ids[0])
            self._drop(y, partner_id)
            self.records[partner_id].status = "coalesced"
            rec.status = "coalesced"
            return
        self.active.setdefault(y, []).append(rec_id)

    def counts_at(self, x: int) -> tuple[int, int]:
        n_xi = n_eta = 0
        for rec_id in self.active.get(x, ()):
            if self.records[rec_id].kind == XI_ETA:
                n_xi += 1
            else:
                n_eta += 1
        return n_xi, n_eta

    def totals(self) -> dict[str, int]:
        out = {"active": 0, "coalesced": 0, "absorbed": 0}
        for rec in self.records:
            out[rec.status] += 1
        return out


def init_coupled(xi0: np.ndarray, eta0: np.ndarray, field: RateField, alpha: float,
                 label_seed: int = 0, tracked: bool = True) -> CoupledState:
    """Pair two truncated configurations and build the discrepancy ledger."""
    check_truncated(xi0, field, alpha)
    check_truncated(eta0, field, alpha)
    mask = slow_mask(field, alpha)
    tracker = DiscrepancyTracker(xi0, eta0, mask, label_seed) if tracked else None
    return CoupledState(xi=np.asarray(xi0, dtype=np.int64).copy(),
                        eta=np.asarray(eta0, dtype=np.int64).copy(),
                        field=field, alpha=alpha, tracker=tracker)


def coupled_apply_event(state: CoupledState, event: GraphicalEvent,
                        g: RateFunction) -> CoupledState:
    """Reference single-event update of the coupled pair (mutates state).

    Both marginals test the same mark against their own threshold
    lam^alpha_x g(occ(x)).  When both fire a coupled particle moves; when
    exactly one fires (necessarily the larger marginal, g nondecreasing) a
    discrepancy of the corresponding type moves, coalescing with an
    opposite-type resident at the target or vanishing on a slow site.
    """
    x, y = event.origin, event.target
    if y == x:
        return state
    lam = effective_rates(state.field, state.alpha)
    ka, kb = int(state.xi[x]), int(state.eta[x])
    fired_xi = event.mark < lam[x] * g(ka)
    fired_eta = event.mark < lam[x] * g(kb)
    if not (fired_xi or fired_eta):
        return state
    y_slow = state.xi[y] == INFINITE_OCCUPANCY
    if state.tracker is not None and fired_xi != fired_eta:
        state.tracker.move(XI_ETA if fired_xi else ETA_XI, x, y, y_slow)
    if fired_xi:
        if ka != INFINITE_OCCUPANCY:
            state.xi[x] = ka - 1
        if state.xi[y] != INFINITE_OCCUPANCY:
            state.xi[y] += 1
    if fired_eta:
        if kb != INFINITE_OCCUPANCY:
            state.eta[x] = kb - 1
        if state.eta[y] != INFINITE_OCCUPANCY:
            state.eta[y] += 1
    return state


def verify_ledger(state: CoupledState) -> None:
    """Check ledger <-> occupancy consistency at every finite site."""
    if state.tracker is None:
        raise StateError("state has no tracker attached")
    mask = slow_mask(state.field, state.alpha)
    for x in range(len(state.xi)):
        if mask[x]:
            continue
        n_xi, n_eta = state.tracker.counts_at(x)
        if min(n_xi, n_eta) != 0:
            raise StateError(f"both discrepancy types present at site {x}")
        if int(state.xi[x]) - int(state.eta[x]) != n_xi - n_eta:
            raise StateError(f"ledger mismatch at site {x}")


@dataclass
class CouplingReport:
    """Output of a kernel-backed coupled run."""

    times: np.ndarray
    probe_sites: np.ndarray
    xi_counts: np.ndarray            # (n_samples, n_probes)
    eta_counts: np.ndarray
    last_discrepancy_time: np.ndarray
    n_coalesced: int
    n_absorbed: int
    final_xi: np.ndarray
    final_eta: np.ndarray

    def probe_totals(self) -> np.ndarray:
        return self.xi_counts + self.eta_counts

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,probe_site,n_xi_eta,n_eta_xi\n")
            for ti, t in enumerate(self.times):
                for pi, site in enumerate(self.probe_sites):
                    fh.write(f"{float(t)!r},{int(site)},{int(self.xi_counts[ti, pi])},"
                             f"{int(self.eta_counts[ti, pi])}\n")


def run_coupling(xi0: np.ndarray, eta0: np.ndarray, field: RateField, alpha: float,
                 t_end: float, probes, stream: EventStream, g: RateFunction,
                 sample_every: float = 1.0) -> CouplingReport:
    """Evolve the coupled pair to t_end recording probe discrepancy counts.

    Also reports, per probe, the last time the site held any discrepancy
    (t_end when one is still present), and global coalescence/absorption
    counters.
    """
    check_truncated(xi0, field, alpha)
    check_truncated(eta0, field, alpha)
    probes = np.asarray(probes, dtype=np.int64)
    a = np.asarray(xi0, dtype=np.int64).copy()
    b = np.asarray(eta0, dtype=np.int64).copy()
    lam = effective_rates(field, alpha)
    g_table = g.kernel_table()
    probe_slot = np.full(field.n_sites, -1, dtype=np.int32)
    probe_slot[probes] = np.arange(len(probes), dtype=np.int32)
    last_positive = np.full(len(probes), -np.inf)
    counters = np.zeros(2, dtype=np.int64)

    t0 = stream.time
    sample_times = [t0]
    xi_series = [np.maximum(a[probes] - b[probes], 0)]
    eta_series = [np.maximum(b[probes] - a[probes], 0)]
    t_next = t0 + sample_every
    while True:
        t_target = min(t_next, t_end)
        while True:
            consumed, t_last, hit = kernels.evolve_coupled(
                a, b, lam, g.mode, g_table, stream.neighbor,
                stream.gaps, stream.origins, stream.disps, stream.marks,
                stream.cursor, stream.time, t_target,
                probe_slot, last_positive, counters)
            stream.advance(consumed, t_last)
            if hit:
                break
        sample_times.append(t_target)
        xi_series.append(np.maximum(a[probes] - b[probes], 0))
        eta_series.append(np.maximum(b[probes] - a[probes], 0))
        if t_target >= t_end:
            break
        t_next += sample_every

    diff_end = a[probes] != b[probes]
    last = last_positive.copy()
    last[diff_end] = t_end
    return CouplingReport(times=np.array(sample_times), probe_sites=probes,
                          xi_counts=np.array(xi_series), eta_counts=np.array(eta_series),
                          last_discrepancy_time=last,
                          n_coalesced=int(counters[0]), n_absorbed=int(counters[1]),
                          final_xi=a, final_eta=b)


def domination_run(eta0: np.ndarray, field: RateField, alpha: float, t_end: float,
                   stream: EventStream, g: RateFunction,
                   max_events: int | None = None) -> int:
    """Drive (plain, truncated) from (eta0, truncation of eta0) and count
    sitewise order violations plain > truncated after every event.

    A correct implementation returns 0: each shared event preserves the
    order because the truncated marginal has the pointwise larger rate and
    g is monotone.
    """
    if np.any(np.asarray(eta0) == INFINITE_OCCUPANCY):
        raise StateError("initial configuration must be plain")
    a = np.asarray(eta0, dtype=np.int64).copy()
    b = truncate_configuration(a, field, alpha)
    lam_a = field.rates
    lam_b = effective_rates(field, alpha)
    g_table = g.kernel_table()
    violations = 0
    n_done = 0
    while True:
        consumed, t_last, hit, viol = kernels.evolve_pair(
            a, lam_a, b, lam_b, g.mode, g_table, stream.neighbor,
            stream.gaps, stream.origins, stream.disps, stream.marks,
            stream.cursor, stream.time, t_end)
        stream.advance(consumed, t_last)
        violations += viol
        n_done += consumed
        if hit or (max_events is not None and n_done >= max_events):
            return violations
