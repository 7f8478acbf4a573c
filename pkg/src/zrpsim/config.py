"""Experiment configuration: flat INI files with four sections.

[environment]  c, beta, dims, seed, kernel
[measure]      g, and exactly one of v / target_density
[dynamics]     t_end, sample_every, alpha, dynamics_seed
[experiment]   seed, replicas, workers, plus per-experiment keys

Kernel entries are comma-separated, each "dx [dy ...] prob".  Unknown keys
are rejected so typos fail loudly.  A config plus the experiment tag fully
determines a run.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .environment import EnvDistribution, JumpKernel
from .errors import ConfigError
from .measures import GEOMETRIC, K_OVER_K1, RateFunction

_ENV_KEYS = {"c", "beta", "dims", "seed", "kernel"}
_MEASURE_KEYS = {"g", "v", "target_density"}
_DYNAMICS_KEYS = {"t_end", "sample_every", "alpha", "dynamics_seed"}
_COMMON_EXP_KEYS = {"seed", "replicas", "workers"}

EXPERIMENT_KEYS: dict[str, set[str]] = {
    "oracle": {"sites", "particles", "rates", "tv_tol"},
    "stationarity": {"dump_trajectory"},
    "domination": {"events"},
    "couple": {"n_probes", "init_mean", "window_fraction"},
    "walkers": {"walk_alpha", "start_norm", "max_steps", "distinct_levels",
                "shell_cutoff"},
    "escape": {"fast_margin", "density_factor", "hist_bins", "checkpoints"},
    "recurrence": {"early_fraction"},
}

TAG_ALIASES = {"lemma2": "recurrence"}


@dataclass
class ExperimentConfig:
    tag: str
    c: float = 0.2
    beta: float = 3.0
    dims: tuple[int, ...] = (64,)
    env_seed: int = 1
    kernel: JumpKernel | None = None
    g: RateFunction = GEOMETRIC
    v: float | None = None
    target_density: float | None = None
    t_end: float = 100.0
    sample_every: float = 1.0
    alpha: float = 0.0
    dynamics_seed: int = 2
    seed: int = 3
    replicas: int = 1
    workers: int = 1
    extras: dict[str, str] = dc_field(default_factory=dict)

    def __post_init__(self):
        self.tag = TAG_ALIASES.get(self.tag, self.tag)
        if self.tag not in EXPERIMENT_KEYS:
            raise ConfigError(f"unknown experiment tag {self.tag!r}")
        if self.kernel is None:
            self.kernel = JumpKernel.nearest_neighbor(len(self.dims))
        if self.kernel.dimension != len(self.dims):
            raise ConfigError("kernel dimension does not match dims")
        if self.v is not None and self.target_density is not None:
            raise ConfigError("v and target_density are mutually exclusive")
        bad = set(self.extras) - EXPERIMENT_KEYS[self.tag]
        if bad:
            raise ConfigError(f"unknown [experiment] keys for {self.tag}: {sorted(bad)}")

    def distribution(self) -> EnvDistribution:
        return EnvDistribution(c=self.c, beta=self.beta)

    # typed access to per-experiment extras
    def extra_int(self, key: str, default: int) -> int:
        return int(self.extras.get(key, default))

    def extra_float(self, key: str, default: float) -> float:
        return float(self.extras.get(key, default))

    def extra_str(self, key: str, default: str) -> str:
        return self.extras.get(key, default)

    def extra_ints(self, key: str, default: tuple[int, ...]) -> tuple[int, ...]:
        raw = self.extras.get(key)
        if raw is None:
            return default
        return tuple(int(tok) for tok in raw.replace(",", " ").split())

    def extra_floats(self, key: str, default: tuple[float, ...]) -> tuple[float, ...]:
        raw = self.extras.get(key)
        if raw is None:
            return default
        return tuple(float(tok) for tok in raw.replace(",", " ").split())


def parse_kernel(text: str, dimension: int) -> JumpKernel:
    entries = []
    for chunk in text.replace("\n", ",").split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        toks = chunk.split()
        if len(toks) != dimension + 1:
            raise ConfigError(f"kernel entry {chunk!r} needs {dimension} displacements "
                              "and one probability")
        disp = tuple(int(t) for t in toks[:-1])
        entries.append((disp, float(toks[-1])))
    return JumpKernel.from_entries(entries, dimension)


def parse_rate_function(text: str) -> RateFunction:
    toks = text.split()
    if toks[0] == "geometric":
        return GEOMETRIC
    if toks[0] == "k_over_k1":
        return K_OVER_K1
    if toks[0] == "table":
        if len(toks) < 2:
            raise ConfigError("table rate function needs values")
        return RateFunction("table", tuple(float(t) for t in toks[1:]))
    raise ConfigError(f"unknown rate function {text!r}")


def load_config(path, tag: str, seed_override: int | None = None) -> ExperimentConfig:
    """Read and validate an INI config for the given experiment tag."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    def section(name) -> dict[str, str]:
        return dict(parser[name]) if parser.has_section(name) else {}

    env = section("environment")
    meas = section("measure")
    dyn = section("dynamics")
    exp = section("experiment")
    for name, seen, allowed in [("environment", env, _ENV_KEYS),
                                ("measure", meas, _MEASURE_KEYS),
                                ("dynamics", dyn, _DYNAMICS_KEYS)]:
        bad = set(seen) - allowed
        if bad:
            raise ConfigError(f"unknown [{name}] keys: {sorted(bad)}")
    known = set(parser.sections()) - {"environment", "measure", "dynamics", "experiment"}
    if known:
        raise ConfigError(f"unknown sections: {sorted(known)}")

    try:
        dims = tuple(int(t) for t in env.get("dims", "64").replace(",", " ").split())
        kernel = (parse_kernel(env["kernel"], len(dims)) if "kernel" in env else None)
        cfg = ExperimentConfig(
            tag=tag,
            c=float(env.get("c", 0.2)),
            beta=float(env.get("beta", 3.0)),
            dims=dims,
            env_seed=int(env.get("seed", 1)),
            kernel=kernel,
            g=parse_rate_function(meas.get("g", "geometric")),
            v=float(meas["v"]) if "v" in meas else None,
            target_density=(float(meas["target_density"])
                            if "target_density" in meas else None),
            t_end=float(dyn.get("t_end", 100.0)),
            sample_every=float(dyn.get("sample_every", 1.0)),
            alpha=float(dyn.get("alpha", 0.0)),
            dynamics_seed=int(dyn.get("dynamics_seed", 2)),
            seed=int(exp.get("seed", 3)),
            replicas=int(exp.get("replicas", 1)),
            workers=int(exp.get("workers", 1)),
            extras={k: v for k, v in exp.items() if k not in _COMMON_EXP_KEYS},
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad value in {path}: {exc}") from exc
    if seed_override is not None:
        cfg.seed = int(seed_override)
    return cfg
