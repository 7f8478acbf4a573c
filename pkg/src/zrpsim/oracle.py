"""Exact stationary law of a small closed system, and its product-form twin.

On a cycle of n sites with N particles the generator is a finite matrix;
its stationary vector can be solved directly and compared against the
conditioned product weights  prod_x (1/lam_x)^(k_x) / (g(1)...g(k_x)),
which the fugacity drops out of under the fixed-total conditioning.  This
is the package's independent ground truth for invariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph, linalg as sp_linalg
from scipy.special import logsumexp

from .environment import JumpKernel
from .errors import ConfigError, StateError
from .measures import RateFunction

MAX_STATES = 100_000
_DENSE_LIMIT = 6_000


def compositions(n_sites: int, n_particles: int):
    """All occupancy tuples with the given total, in colexicographic order."""
    if n_sites == 1:
        yield (n_particles,)
        return
    for last in range(n_particles + 1):
        for rest in compositions(n_sites - 1, n_particles - last):
            yield rest + (last,)


def state_count(n_sites: int, n_particles: int) -> int:
    return math.comb(n_particles + n_sites - 1, n_sites - 1)


@dataclass
class OracleResult:
    states: list[tuple[int, ...]]
    stationary: np.ndarray
    product_weights: np.ndarray
    tv_distance: float
    residual: float

    def summary(self) -> str:
        return (f"states={len(self.states)} tv={self.tv_distance:.3e} "
                f"residual={self.residual:.3e}")


def build_generator(states, index, rates, g: RateFunction, kernel: JumpKernel,
                    n_sites: int):
    """Sparse off-diagonal rate triplets (row, col, rate) of the generator."""
    disps = [int(d[0]) for d, _ in kernel.support]
    probs = [p for _, p in kernel.support]
    rows, cols, vals = [], [], []
    for s, eta in enumerate(states):
        for x in range(n_sites):
            k = eta[x]
            if k == 0:
                continue
            base = rates[x] * g(k)
            for dx, p in zip(disps, probs):
                if p == 0.0:
                    continue
                y = (x + dx) % n_sites
                if y == x:
                    continue
                target = list(eta)
                target[x] -= 1
                target[y] += 1
                rows.append(s)
                cols.append(index[tuple(target)])
                vals.append(base * p)
    return rows, cols, vals


def exact_stationary(n_sites: int, n_particles: int, rates, g: RateFunction,
                     kernel: JumpKernel) -> OracleResult:
    """Solve pi L = 0 and compare against the conditioned product law.

    The linear system replaces one balance equation with the normalization
    row.  Dense solve up to a memory-safe size, sparse beyond.  Raises on
    oversized state spaces and on reducible chains.
    """
    if kernel.dimension != 1:
        raise ConfigError("the exact oracle runs on a cycle; use a 1-d kernel")
    n_states = state_count(n_sites, n_particles)
    if n_states > MAX_STATES:
        raise ConfigError(f"state space {n_states} exceeds the {MAX_STATES} cap")
    rates = np.asarray(rates, dtype=np.float64)
    if len(rates) != n_sites:
        raise ConfigError("need one rate per site")

    states = list(compositions(n_sites, n_particles))
    index = {eta: s for s, eta in enumerate(states)}
    rows, cols, vals = build_generator(states, index, rates, g, kernel, n_sites)

    q = sparse.coo_matrix((vals, (rows, cols)), shape=(n_states, n_states)).tocsr()
    if n_particles >= 1:
        n_comp, _ = csgraph.connected_components(q, directed=True, connection="strong")
        if n_comp != 1:
            raise StateError("the finite chain is reducible for this kernel")
    diag = np.asarray(q.sum(axis=1)).ravel()
    gen = q - sparse.diags(diag)

    # solve pi gen = 0 with the last balance equation swapped for sum(pi) = 1
    a = gen.T.tolil()
    a[-1, :] = 1.0
    b = np.zeros(n_states)
    b[-1] = 1.0
    if n_states <= _DENSE_LIMIT:
        pi = np.linalg.solve(a.toarray(), b)
    else:
        pi = sp_linalg.spsolve(a.tocsc(), b)

    residual = float(np.max(np.abs(pi @ gen)))
    if residual > 1e-8 or np.min(pi) < -1e-9:
        raise StateError("stationary solve failed; chain may be reducible")

    log_w = np.empty(n_states)
    log_g_fact = _log_g_factorials(g, n_particles)
    log_lam = np.log(rates)
    for s, eta in enumerate(states):
        acc = 0.0
        for x, k in enumerate(eta):
            acc += -k * log_lam[x] - log_g_fact[k]
        log_w[s] = acc
    weights = np.exp(log_w - logsumexp(log_w))

    tv = 0.5 * float(np.sum(np.abs(pi - weights)))
    return OracleResult(states=states, stationary=pi, product_weights=weights,
                        tv_distance=tv, residual=residual)


def _log_g_factorials(g: RateFunction, k_max: int) -> np.ndarray:
    out = np.zeros(k_max + 1)
    for k in range(1, k_max + 1):
        out[k] = out[k - 1] + math.log(g(k))
    return out
