"""Random rate fields and jump kernels.

Each lattice site x carries a rate multiplier lambda_x drawn i.i.d. from a
distribution on (c, 1] that puts mass arbitrarily close to the infimum c.
Rates are a pure function of (seed, coordinates) so that off-torus code
(the absorbed-walk module) can query the same environment lazily at any
coordinate of the infinite lattice.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .rng import key_hash, key_hash_array, uniform_open_low, uniform_open_low_array


@dataclass(frozen=True)
class JumpKernel:
    """Finite-range translation-invariant jump law on Z^d.

    ``support`` maps displacement vectors to probabilities.  The
    displacements must span Z^d as a lattice (validated below), and the
    probabilities must sum to one.
    """

    support: tuple[tuple[tuple[int, ...], float], ...]
    dimension: int

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("kernel dimension must be >= 1")
        if not self.support:
            raise ConfigError("kernel support is empty")
        total = 0.0
        for disp, prob in self.support:
            if len(disp) != self.dimension:
                raise ConfigError(f"displacement {disp} has wrong dimension")
            if prob < 0:
                raise ConfigError("kernel probabilities must be nonnegative")
            total += prob
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"kernel probabilities sum to {total!r}, not 1")
        if not _spans_lattice([d for d, _ in self.support], self.dimension):
            raise ConfigError(
                "kernel displacements do not generate Z^d; the walk would be reducible")

    @property
    def range(self) -> int:
        """Sup-norm radius M of the support."""
        return max(max(abs(c) for c in disp) for disp, _ in self.support)

    def displacements(self) -> np.ndarray:
        return np.array([d for d, _ in self.support], dtype=np.int64)

    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.support], dtype=np.float64)

    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.probabilities())
        c[-1] = 1.0
        return c

    @staticmethod
    def from_entries(entries, dimension: int) -> "JumpKernel":
        sup = tuple((tuple(int(x) for x in disp), float(p)) for disp, p in entries)
        return JumpKernel(support=sup, dimension=dimension)

    @staticmethod
    def nearest_neighbor(dimension: int, asymmetry: float = 0.0) -> "JumpKernel":
        """Symmetric NN kernel; ``asymmetry`` q in [-1,1] biases axis 0."""
        per_axis = 1.0 / (2 * dimension)
        entries = []
        for axis in range(dimension):
            for sign in (+1, -1):
                disp = tuple(sign if i == axis else 0 for i in range(dimension))
                p = per_axis
                if axis == 0:
                    p *= (1 + asymmetry) if sign > 0 else (1 - asymmetry)
                entries.append((disp, p))
        return JumpKernel.from_entries(entries, dimension)


def _spans_lattice(displacements, d: int) -> bool:
    """True iff the integer span of the displacements is all of Z^d.

    Classic criterion: the gcd of all d x d minors of the displacement
    matrix equals 1.  Determinants are taken over exact integers.
    """
    rows = [list(v) for v in displacements if any(v)]
    if len(rows) < d:
        return False
    g = 0
    for combo in itertools.combinations(rows, d):
        g = math.gcd(g, abs(_int_det([list(r) for r in combo])))
        if g == 1:
            return True
    return g == 1


def _int_det(m: list[list[int]]) -> int:
    """Fraction-free Gaussian elimination (Bareiss) for an integer matrix."""
    n = len(m)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for r in range(k + 1, n):
                if m[r][k] != 0:
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


@dataclass(frozen=True)
class EnvDistribution:
    """Rate law lambda = c + (1-c) * B with B ~ density beta * b^(beta-1) on (0,1].

    Near the infimum, P(lambda <= c + eps) = (eps/(1-c))^beta, so ``beta``
    controls how much mass sits next to c (beta=1 is uniform on (c,1]).
    """

    c: float
    beta: float

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ConfigError(f"c must be in (0,1), got {self.c}")
        if self.beta <= 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")

    def cdf(self, x):
        """P(lambda_0 <= x); accepts scalars or arrays."""
        t = np.clip((np.asarray(x, dtype=np.float64) - self.c) / (1.0 - self.c),
                    0.0, 1.0)
        out = np.power(t, self.beta)
        return float(out) if np.isscalar(x) else out

    def slow_fraction(self, alpha: float) -> float:
        """theta = P(lambda_0 <= c + alpha), the density of slow sites."""
        if alpha <= 0:
            raise DomainError(f"alpha must be positive, got {alpha}")
        return self.cdf(self.c + alpha)

    def quantile(self, u: float) -> float:
        """Inverse CDF on (0, 1]."""
        return self.c + (1.0 - self.c) * float(np.power(u, 1.0 / self.beta))

    def rate_from_uniform(self, u: np.ndarray | float):
        """Transform uniform(0,1] draws into rates; vectorized."""
        return self.c + (1.0 - self.c) * np.power(u, 1.0 / self.beta)

    def pdf(self, x: float) -> float:
        if x <= self.c or x > 1.0:
            return 0.0
        return self.beta * ((x - self.c) / (1.0 - self.c)) ** (self.beta - 1.0) / (1.0 - self.c)


class RateOracle:
    """Lazy environment accessor: rate at any coordinate of Z^d.

    Pure function of (seed, coordinates); consistent between bulk field
    generation and the walk kernels.
    """

    def __init__(self, dist: EnvDistribution, seed: int):
        self.dist = dist
        self.seed = int(seed)

    def uniform_at(self, coords) -> float:
        return uniform_open_low(key_hash(self.seed, *[int(c) for c in coords]))

    def rate_at(self, coords) -> float:
        return float(self.dist.rate_from_uniform(self.uniform_at(coords)))

    def is_slow(self, coords, alpha: float) -> bool:
        return self.uniform_at(coords) <= self.dist.slow_fraction(alpha)


@dataclass(frozen=True)
class RateField:
    """The environment restricted to a finite torus.

    ``rates[i]`` is lambda at the site with flat (C-order) index i.  The
    raw uniforms are retained so truncation thresholds can be compared
    without round-off surprises.
    """

    dims: tuple[int, ...]
    rates: np.ndarray
    c: float
    seed: int
    dist: EnvDistribution | None = None
    uniforms: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.dims))

    @property
    def dimension(self) -> int:
        return len(self.dims)

    def coords(self) -> np.ndarray:
        """(n_sites, d) array of site coordinates in C order."""
        grids = np.meshgrid(*[np.arange(L) for L in self.dims], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    def oracle(self) -> RateOracle:
        if self.dist is None:
            raise ConfigError("field has no attached distribution")
        return RateOracle(self.dist, self.seed)

    def to_csv(self, path) -> None:
        coords = self.coords()
        with open(path, "w") as fh:
            cols = ",".join(f"coord{i}" for i in range(self.dimension))
            fh.write(f"site_index,{cols},lambda\n")
            for i in range(self.n_sites):
                cs = ",".join(str(int(c)) for c in coords[i])
                fh.write(f"{i},{cs},{float(self.rates[i])!r}\n")


def sample_environment(dist: EnvDistribution, dims, seed: int) -> RateField:
    """Draw the i.i.d. environment on a torus of the given side lengths.

    Deterministic in (dist, dims, seed): per-site uniforms come from the
    counter-based hash of (seed, coordinates).
    """
    dims = tuple(int(L) for L in (dims if np.iterable(dims) else [dims]))
    if not dims or any(L < 1 for L in dims):
        raise ConfigError(f"invalid torus dims {dims}")
    grids = np.meshgrid(*[np.arange(L, dtype=np.int64) for L in dims], indexing="ij")
    columns = [g.ravel() for g in grids]
    h = key_hash_array(int(seed), columns)
    u = uniform_open_low_array(h)
    rates = dist.rate_from_uniform(u)
    return RateField(dims=dims, rates=rates, c=dist.c, seed=int(seed),
                     dist=dist, uniforms=u)


def truncate_rates(field: RateField, alpha: float) -> RateField:
    """Lift every rate at or below c + alpha up to exactly c + alpha."""
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    cap = field.c + alpha
    rates = np.where(field.rates <= cap, cap, field.rates)
    return RateField(dims=field.dims, rates=rates, c=field.c, seed=field.seed,
                     dist=field.dist, uniforms=field.uniforms)


def partition_sites(field: RateField, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Split the torus into (fast, slow) flat-index arrays at level alpha."""
    if alpha < 0:
        raise DomainError(f"alpha must be nonnegative, got {alpha}")
    fast = field.rates > field.c + alpha
    idx = np.arange(field.n_sites)
    return idx[fast], idx[~fast]


def slow_mask(field: RateField, alpha: float) -> np.ndarray:
    """Boolean mask of slow sites (lambda <= c + alpha); alpha=0 -> none."""
    if alpha <= 0:
        return np.zeros(field.n_sites, dtype=bool)
    return field.rates <= field.c + alpha
