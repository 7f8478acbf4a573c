"""Single-site stationary laws and their summary functions.

The stationary marginal at a site with rate lam and fugacity v puts mass
proportional to u^k / (g(1)...g(k)) on occupancy k, with u = v/lam.  All
series here are evaluated with a certified geometric tail bound: since g is
nondecreasing with limit 1 and u < 1, the terms beyond any index K are
dominated by a geometric sequence with ratio u/g(K+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .environment import EnvDistribution, RateField
from .errors import DomainError, InputError

#: occupancy sentinel for "infinitely many particles"
INFINITE_OCCUPANCY = -1

#: evaluations at u above this are refused: no affordable certified error
NEAR_CRITICAL_U = 1.0 - 1e-6

_MODE_GEOMETRIC = 0
_MODE_K_OVER_K1 = 1
_MODE_TABLE = 2


@dataclass(frozen=True)
class RateFunction:
    """Departure-rate profile g: occupancy -> [0, 1].

    Requirements: g(0) = 0 < g(1), nondecreasing, bounded by 1, and tending
    to 1 (the value used at infinitely occupied sites).  Two closed-form
    families ship by default; arbitrary monotone tables are accepted, with
    g == 1 beyond the table's end.
    """

    kind: str
    table: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("geometric", "k_over_k1", "table"):
            raise InputError(f"unknown rate function kind {self.kind!r}")
        if self.kind == "table":
            vals = self.table
            if not vals:
                raise InputError("table rate function needs at least g(1)")
            if vals[0] <= 0:
                raise InputError("g(1) must be positive")
            if any(b < a for a, b in zip(vals, vals[1:])):
                raise InputError("rate function must be nondecreasing")
            if vals[-1] > 1.0:
                raise InputError("rate function must be bounded by 1")

    def __call__(self, k: int) -> float:
        if k == INFINITE_OCCUPANCY:
            return 1.0
        if k <= 0:
            return 0.0
        if self.kind == "geometric":
            return 1.0
        if self.kind == "k_over_k1":
            return k / (k + 1.0)
        return self.table[k - 1] if k <= len(self.table) else 1.0

    @property
    def mode(self) -> int:
        """Integer tag used by the compiled kernels."""
        return {"geometric": _MODE_GEOMETRIC,
                "k_over_k1": _MODE_K_OVER_K1,
                "table": _MODE_TABLE}[self.kind]

    def kernel_table(self) -> np.ndarray:
        """Lookup array [g(0), g(1), ...] handed to the kernels."""
        return np.array((0.0,) + self.table, dtype=np.float64)


GEOMETRIC = RateFunction("geometric")
K_OVER_K1 = RateFunction("k_over_k1")


def _check_u(u: float) -> None:
    if u < 0:
        raise DomainError(f"fugacity ratio u={u} is negative")
    if u >= 1:
        raise DomainError(f"fugacity ratio u={u} >= 1: series may diverge")
    if u > NEAR_CRITICAL_U:
        raise DomainError(
            f"u={u} is within 1e-6 of the radius of convergence; "
            "a certified evaluation is refused at this proximity")


def _series(u: float, g: RateFunction, tol: float) -> tuple[float, float, float]:
    """(Z, first moment sum, tail bound) with both tails certified < tol."""
    _check_u(u)
    if tol <= 0:
        raise DomainError("tol must be positive")
    if u == 0.0:
        return 1.0, 0.0, 0.0
    if g.kind == "geometric":
        # plain geometric series; closed form, zero truncation error
        return 1.0 / (1.0 - u), u / (1.0 - u) ** 2, 0.0
    z = 1.0
    m1 = 0.0
    term = 1.0
    k = 0
    while True:
        k += 1
        gk = g(k)
        term *= u / gk
        z += term
        m1 += k * term
        gn = g(k + 1)
        r = u / gn
        if r < 1.0:
            q = r / (1.0 - r)
            tail0 = term * q
            tail1 = term * (k * q + q / (1.0 - r))
            if tail0 < tol and tail1 < tol:
                return z, m1, tail0
        if k > 10_000_000:
            raise DomainError(f"series did not certify below tol={tol} at u={u}")


def partition_function(u: float, g: RateFunction, tol: float = 1e-12) -> float:
    """Normalizer Z(u) = sum_k u^k / (g(1)...g(k)), truncation error < tol."""
    z, _, _ = _series(u, g, tol)
    return z


def mean_occupancy(u: float, g: RateFunction, tol: float = 1e-12) -> float:
    """R(u): expected occupancy at local fugacity u; strictly increasing."""
    z, m1, _ = _series(u, g, tol)
    return m1 / z


def fugacity_for_density(rho: float, g: RateFunction, tol: float = 1e-10) -> float:
    """Invert R by bisection: the u in [0,1) with |R(u) - rho| < tol."""
    if rho < 0:
        raise DomainError(f"density must be nonnegative, got {rho}")
    if rho == 0.0:
        return 0.0
    inner_tol = min(tol * 1e-3, 1e-12)
    lo, hi = 0.0, 0.9
    while mean_occupancy(hi, g, inner_tol) < rho:
        hi = 1.0 - (1.0 - hi) / 10.0
        if hi > NEAR_CRITICAL_U:
            raise DomainError(
                f"density {rho} not reachable below the refusal boundary")
    while True:
        mid = 0.5 * (lo + hi)
        r = mean_occupancy(mid, g, inner_tol)
        if abs(r - rho) < tol:
            return mid
        if r < rho:
            lo = mid
        else:
            hi = mid


@dataclass(frozen=True)
class MarginalLaw:
    """Certified-truncated stationary pmf of a single site."""

    lam: float
    fugacity: float
    u: float
    probs: np.ndarray
    normalizer: float
    tail_bound: float

    @property
    def truncation_index(self) -> int:
        return len(self.probs) - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.probs)), self.probs))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,prob\n")
            for k, p in enumerate(self.probs):
                fh.write(f"{k},{float(p)!r}\n")


def marginal_law(lam: float, v: float, g: RateFunction, tol: float = 1e-12) -> MarginalLaw:
    """Build the site law for rate lam and fugacity v (requires v < lam)."""
    if v < 0:
        raise DomainError(f"fugacity must be nonnegative, got {v}")
    if v >= lam:
        raise DomainError(f"fugacity v={v} must be below the site rate lam={lam}")
    u = v / lam
    _check_u(u)
    if u == 0.0:
        return MarginalLaw(lam, v, 0.0, np.array([1.0]), 1.0, 0.0)
    if g.kind == "geometric":
        k_max = int(math.ceil(math.log(tol) / math.log(u)))
        probs = (1.0 - u) * np.power(u, np.arange(k_max + 1))
        return MarginalLaw(lam, v, u, probs, 1.0 / (1.0 - u), u ** (k_max + 1))
    terms = [1.0]
    term = 1.0
    k = 0
    while True:
        k += 1
        term *= u / g(k)
        terms.append(term)
        r = u / g(k + 1)
        if r < 1.0:
            tail = term * r / (1.0 - r)
            if tail < tol:
                break
        if k > 10_000_000:
            raise DomainError(f"marginal pmf did not certify below tol={tol}")
    z = math.fsum(terms) + 0.0
    probs = np.array(terms) / z
    return MarginalLaw(lam, v, u, probs, z, tail / z)


def sample_marginal(lam: float, v: float, g: RateFunction, rng: np.random.Generator,
                    size: int | None = None, tol: float = 1e-12):
    """Occupancy draws from the site law, by inverse CDF on the pmf."""
    law = marginal_law(lam, v, g, tol)
    cdf = law.cdf()
    u = rng.random() if size is None else rng.random(size)
    k = np.searchsorted(cdf, u, side="right")
    return int(k) if size is None else k.astype(np.int64)


def sample_product_measure(field: RateField, v: float, g: RateFunction,
                           rng: np.random.Generator, tol: float = 1e-12) -> np.ndarray:
    """One configuration from the product invariant measure at fugacity v.

    Independent per-site draws with local ratio u_x = v / lambda_x.  The
    geometric family short-circuits to the closed-form inverse CDF.
    """
    if v < 0 or v > field.c:
        raise DomainError(f"fugacity must lie in [0, c]=[0, {field.c}], got {v}")
    n = field.n_sites
    if v == 0.0:
        rng.random(n)  # keep the stream advance identical across branches
        return np.zeros(n, dtype=np.int64)
    u_x = v / field.rates
    draws = rng.random(n)
    if g.kind == "geometric":
        return np.floor(np.log1p(-draws) / np.log(u_x)).astype(np.int64)
    occ = np.empty(n, dtype=np.int64)
    cache: dict[float, np.ndarray] = {}
    for i in range(n):
        lam = float(field.rates[i])
        cdf = cache.get(lam)
        if cdf is None:
            cdf = marginal_law(lam, v, g, tol).cdf()
            cache[lam] = cdf
        occ[i] = np.searchsorted(cdf, draws[i], side="right")
    return occ


def mean_density(v: float, dist: EnvDistribution, g: RateFunction,
                 tol: float = 1e-8) -> float:
    """Environment-averaged density: integral of R(v/lambda) over the rate law.

    Returns math.inf when the integrand is non-integrable at lambda = c,
    which can only happen at v = c; detected by quadrature over shrinking
    cutoffs whose increments fail to decay.
    """
    if v < 0 or v > dist.c:
        raise DomainError(f"v must lie in [0, c]=[0, {dist.c}], got {v}")
    if v == 0.0:
        return 0.0

    def integrand(b: float) -> float:
        lam = dist.c + (1.0 - dist.c) * b ** (1.0 / dist.beta)
        return mean_occupancy(v / lam, g, tol * 1e-3)

    # substitute b = B^beta so the density of the integration variable is
    # uniform on (0,1]; lambda = c + (1-c) b^(1/beta)
    if v < dist.c:
        val, _ = integrate.quad(integrand, 0.0, 1.0, limit=200, epsabs=tol, epsrel=tol)
        return float(val)

    cutoffs = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
    vals = [integrate.quad(integrand, eps, 1.0, limit=400, epsabs=tol, epsrel=tol)[0]
            for eps in cutoffs]
    increments = np.diff(vals)
    if increments[-1] <= tol:
        return float(vals[-1])
    ratios = increments[1:] / increments[:-1]
    if np.any(ratios >= 0.95):
        return math.inf
    r = float(ratios[-1])
    return float(vals[-1] + increments[-1] * r / (1.0 - r))


def truncated_invariant_marginals(field: RateField, alpha: float, g: RateFunction,
                                  tol: float = 1e-12) -> list[MarginalLaw | None]:
    """Per-site stationary laws of the truncated dynamics.

    Fast sites (lambda > c + alpha) get the usual law at ratio
    (c+alpha)/lambda; slow sites hold infinitely many particles forever and
    are reported as None (point mass at infinity).
    """
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    cap = field.c + alpha
    out: list[MarginalLaw | None] = []
    cache: dict[float, MarginalLaw] = {}
    for lam in field.rates:
        lam = float(lam)
        if lam <= cap:
            out.append(None)
        else:
            law = cache.get(lam)
            if law is None:
                law = marginal_law(lam, cap, g, tol)
                cache[lam] = law
            out.append(law)
    return out


def sample_truncated_product(field: RateField, alpha: float, g: RateFunction,
                             rng: np.random.Generator, tol: float = 1e-12) -> np.ndarray:
    """A configuration from the truncated invariant measure (sentinel at slow sites)."""
    laws = truncated_invariant_marginals(field, alpha, g, tol)
    draws = rng.random(field.n_sites)
    occ = np.empty(field.n_sites, dtype=np.int64)
    cdfs: dict[int, np.ndarray] = {}
    for i, law in enumerate(laws):
        if law is None:
            occ[i] = INFINITE_OCCUPANCY
        else:
            cdf = cdfs.get(id(law))
            if cdf is None:
                cdf = law.cdf()
                cdfs[id(law)] = cdf
            occ[i] = np.searchsorted(cdf, draws[i], side="right")
    return occ
