"""Experiment configuration files.

A config is a JSON object::

    {
      "name": "coord-separable",
      "problem": {"kind": "separable", "n": 10, "seed": 0},
      "oracle": {"variant": "coord", "level": 0.0, "noise": "none", "tau": null},
      "delta": null,
      "rho": null,
      "iters": 1000,
      "epsilon": null,
      "regime": "uncontrolled",
      "schedule": "horizon",
      "P0": null,
      "seeds": [0, 1, 2],
      "output": "runs/coord-separable"
    }

Unknown keys are rejected at every level. The prox setup is the one the
oracle variant requires (global or per-block weights). ``rho`` defaults to
the variant's normalising coefficient. ``output`` is the directory for
traces and the summary (``--out-dir`` overrides it; default
``runs/<name>``). ``delta``, when set, overrides
``oracle.level`` with the level whose bias bound equals ``delta``
(derivative-free variants then use ``tau = "optimal"``). Problem kinds and
their keys (missing keys take the defaults below):

* ``separable``: ``n``, ``seed``, ``low``, ``high`` generate ``L_i`` uniform
  in ``[low, high]`` and a Gaussian centre; ``lipschitz``, ``center``,
  ``dims``, ``lower``, ``upper`` may be given inline; ``normalize`` scales
  the centre so that ``f(0) - f* = 1`` (unconstrained), holding ``P0``
  nearly fixed when sweeping ``n``.
* ``coupled``: inline ``A``, ``b`` (at most 64 x 64) or a random SPD
  matrix of size ``p`` with spectrum in ``[low, high]``; ``dims``.
* ``chain``: tridiagonal instance of size ``p`` split into ``blocks``
  equal blocks, optimum shaped by ``profile``.
* ``simplex``: ``blocks`` simplexes of size ``dim`` with a seeded ``M`` and
  an interior target (``f* = 0``), or inline ``M``, ``b``, ``dims``.

Serialisation is canonical: defaults filled in, keys sorted, two-space
indentation.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .oracles import VARIANTS, OracleConfig, calibrate, setup_for
from .problems import (
    NOISE_MODELS,
    Problem,
    make_chain_quadratic,
    make_coupled_quadratic,
    make_separable_quadratic,
    make_simplex_quadratic,
)
from .rstm import REGIMES, RunConfig

INLINE_LIMIT = 64

PROBLEM_KEYS: dict[str, dict[str, Any]] = {
    "separable": {"n": 10, "seed": 0, "low": 1.0, "high": 10.0, "lipschitz": None, "center": None,
                  "dims": None, "lower": None, "upper": None, "normalize": False},
    "coupled": {"p": 6, "seed": 0, "low": 0.5, "high": 2.0, "A": None, "b": None, "dims": None},
    "chain": {"p": 256, "blocks": 4, "profile": 0.5},
    "simplex": {"blocks": 5, "dim": 3, "seed": 0, "M": None, "b": None, "dims": None},
}

# config field -> size key per problem kind, used by the "n" sweep
SIZE_KEY = {"separable": "n", "coupled": "p", "chain": "p", "simplex": "blocks"}


class ConfigError(ValueError):
    pass


def _reject_unknown(given: dict, allowed, where: str) -> None:
    extra = sorted(set(given) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    options: dict

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("problem needs a 'kind'")
        kind = d["kind"]
        if kind not in PROBLEM_KEYS:
            raise ConfigError(f"unknown problem kind {kind!r}")
        rest = {k: v for k, v in d.items() if k != "kind"}
        _reject_unknown(rest, PROBLEM_KEYS[kind], f"problem ({kind})")
        opts = dict(PROBLEM_KEYS[kind])
        opts.update(rest)
        for key in ("A", "M"):
            mat = opts.get(key)
            if mat is not None and (len(mat) > INLINE_LIMIT or any(len(r) > INLINE_LIMIT for r in mat)):
                raise ConfigError(f"inline matrix {key} exceeds {INLINE_LIMIT}x{INLINE_LIMIT}; use a generator")
        return cls(kind, opts)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.options}

    def with_size(self, size: int) -> "ProblemSpec":
        opts = dict(self.options)
        opts[SIZE_KEY[self.kind]] = int(size)
        for key in ("lipschitz", "center", "A", "b", "M", "dims"):
            if key in opts:
                opts[key] = None
        return ProblemSpec(self.kind, opts)

    def build(self) -> Problem:
        o = self.options
        try:
            if self.kind == "separable":
                rng = np.random.default_rng(o["seed"])
                L = o["lipschitz"]
                if L is None:
                    L = rng.uniform(o["low"], o["high"], o["n"]).tolist()
                dims = o["dims"] or [1] * len(L)
                c = o["center"]
                c = rng.standard_normal(sum(dims)) if c is None else np.asarray(c, dtype=float)
                if o["normalize"]:
                    # f(0) - f* = 1, which keeps P0 nearly constant across sizes
                    c = c / np.sqrt(0.5 * np.sum(np.repeat(L, dims) * c * c))
                return make_separable_quadratic(L, c, dims, o["lower"], o["upper"])
            if self.kind == "coupled":
                if o["A"] is not None:
                    A = np.asarray(o["A"], dtype=float)
                    b = np.asarray(o["b"] if o["b"] is not None else np.zeros(A.shape[0]), dtype=float)
                else:
                    from .verify import random_spd

                    rng = np.random.default_rng(o["seed"])
                    A = random_spd(o["p"], rng, o["low"], o["high"])
                    b = rng.standard_normal(o["p"]) if o["b"] is None else np.asarray(o["b"], dtype=float)
                return make_coupled_quadratic(A, b, o["dims"])
            if self.kind == "chain":
                p, nb = o["p"], o["blocks"]
                if p % nb:
                    raise ConfigError("chain size must be divisible by the block count")
                return make_chain_quadratic(p, (p // nb,) * nb, o["profile"])
            if o["M"] is not None:
                return make_simplex_quadratic(np.asarray(o["M"], dtype=float), np.asarray(o["b"], dtype=float), o["dims"])
            rng = np.random.default_rng(o["seed"])
            nb, d = o["blocks"], o["dim"]
            M = rng.standard_normal((nb * d + 5, nb * d))
            target = np.concatenate([rng.dirichlet(2.0 * np.ones(d)) for _ in range(nb)])
            return make_simplex_quadratic(M, M @ target, (d,) * nb)
        except ConfigError:
            raise
        except (ValueError, TypeError, np.linalg.LinAlgError) as exc:
            raise ConfigError(f"cannot build problem: {exc}") from exc


@dataclass(frozen=True)
class OracleSpec:
    variant: str = "coord"
    level: float = 0.0
    noise: str = "none"
    tau: float | str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "OracleSpec":
        if not isinstance(d, dict):
            raise ConfigError("oracle must be an object")
        _reject_unknown(d, [f.name for f in dataclasses.fields(cls)], "oracle")
        spec = cls(**d)
        if spec.variant not in VARIANTS:
            raise ConfigError(f"unknown oracle variant {spec.variant!r}")
        if spec.noise not in NOISE_MODELS:
            raise ConfigError(f"unknown noise model {spec.noise!r}")
        return spec


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    oracle: OracleSpec = field(default_factory=OracleSpec)
    name: str = "experiment"
    delta: float | None = None
    rho: float | None = None
    iters: int | None = 100
    epsilon: float | None = None
    regime: str = "uncontrolled"
    schedule: str = "horizon"
    P0: float | None = None
    seeds: tuple[int, ...] = (0,)
    output: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(d, [f.name for f in dataclasses.fields(cls)], "config")
        if "problem" not in d:
            raise ConfigError("config needs a 'problem'")
        kw = dict(d)
        kw["problem"] = ProblemSpec.from_dict(d["problem"])
        kw["oracle"] = OracleSpec.from_dict(d.get("oracle", {}))
        if "seeds" in kw:
            seeds = kw["seeds"]
            if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
                raise ConfigError("seeds must be a non-empty list of non-negative integers")
            kw["seeds"] = tuple(seeds)
        if "epsilon" in kw and kw["epsilon"] is not None and "iters" not in kw:
            kw["iters"] = None
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.schedule not in ("horizon", "per_step"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if (self.iters is None) == (self.epsilon is None):
            raise ConfigError("give exactly one of 'iters' and 'epsilon'")
        if self.iters is not None and (not isinstance(self.iters, int) or self.iters < 0):
            raise ConfigError("iters must be a non-negative integer")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be non-negative")
        if self.rho is not None and self.rho < 1:
            raise ConfigError("rho must be at least 1")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "problem": self.problem.to_dict(),
            "oracle": dataclasses.asdict(self.oracle),
            "delta": self.delta,
            "rho": self.rho,
            "iters": self.iters,
            "epsilon": self.epsilon,
            "regime": self.regime,
            "schedule": self.schedule,
            "P0": self.P0,
            "seeds": list(self.seeds),
            "output": self.output,
        }

    def dumps(self) -> str:
        return canonical_json(self.to_dict())

    def replace(self, **changes) -> "ExperimentConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def oracle_config(self, problem: Problem, seed: int = 0) -> OracleConfig:
        o = self.oracle
        level, tau = o.level, o.tau
        if self.delta is not None:
            level = calibrate(o.variant, self.delta, setup_for(problem, o.variant).structure)
            if o.variant.startswith("df_") and self.delta > 0:
                tau = "optimal"
        try:
            return OracleConfig(o.variant, level=level, noise=o.noise, tau=tau, seed=seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def run_config(self, problem: Problem, seed: int) -> RunConfig:
        try:
            return RunConfig(problem, self.oracle_config(problem, seed), rho=self.rho, iters=self.iters,
                             epsilon=self.epsilon, regime=self.regime, schedule=self.schedule, P0=self.P0, seed=seed)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def canonical_json(d: dict) -> str:
    return json.dumps(d, sort_keys=True, indent=2) + "\n"


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
