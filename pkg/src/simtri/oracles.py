"""Randomized inexact gradient oracles.

Every sample has the form ``ghat = rho * R_b (R_f^T grad f(x) + xi)``.
The projection ``R_b R_f^T grad f(x)`` is kept in :attr:`OracleSample.projected`
(when the exact gradient is available) so that tests can separate the
unbiased part from the bias ``R_b xi``.

Variants
--------
``dir``            random direction on the unit sphere, first-order, ``rho = p``
``coord``          random coordinate, first-order, ``rho = n``
``block``          random block, first-order, ``rho = n``
``df_dir``         forward difference along a random direction
``df_coord``       forward difference along a random coordinate
``df_block``       ``p_i`` forward differences inside a random block
``df_block_rand``  block ``i`` with probability ``p_i / p``, then a sphere
                   direction (free block) or a coordinate (otherwise), ``rho = p``
``block_rand``     first-order twin of ``df_block_rand``
``full``           exact gradient plus bounded noise, ``rho = 1``

Two generators drive each draw: ``rng`` picks directions, coordinates and
blocks, ``noise_rng`` draws the noise. Keeping them apart lets a
derivative-free run and its first-order twin visit the same directions.
"""
from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .block_space import BlockDual, BlockPoint, BlockStructure, SparseBlockDual, block_dual_norm, dual_norm
from .problems import NOISE_MODELS, NoisyValueOracle, Problem
from .prox import ProxSetup, make_setup

VARIANTS = ("dir", "coord", "block", "df_dir", "df_coord", "df_block", "df_block_rand", "block_rand", "full")
DF_VARIANTS = ("df_dir", "df_coord", "df_block", "df_block_rand")
# derivative-free variant -> first-order twin drawing the same random choices
TWINS = {"df_dir": "dir", "df_coord": "coord", "df_block": "block", "df_block_rand": "block_rand"}
ENUMERABLE = ("coord", "block", "df_coord", "df_block", "full")


class IncompatibleOracle(ValueError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    """Oracle variant and its inexactness.

    ``level`` is the raw error bound ``Delta``. ``tau`` is the finite-difference
    step of derivative-free variants: a number, one number per block, or
    ``"optimal"`` for ``tau_i = 2 sqrt(Delta / L_i)``.
    """

    variant: str = "coord"
    level: float = 0.0
    noise: str = "none"
    tau: float | tuple | str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown oracle variant {self.variant!r}")
        if self.noise not in NOISE_MODELS:
            raise ValueError(f"unknown noise model {self.noise!r}")
        if not (np.isfinite(self.level) and self.level >= 0):
            raise ValueError("noise level must be finite and non-negative")
        if self.variant in DF_VARIANTS:
            if self.tau is None:
                raise ValueError(f"{self.variant} needs a finite-difference step tau")
            if isinstance(self.tau, str):
                if self.tau != "optimal":
                    raise ValueError(f"unknown tau policy {self.tau!r}")
            else:
                taus = np.atleast_1d(np.asarray(self.tau, dtype=float))
                if not np.all(np.isfinite(taus) & (taus > 0)):
                    raise ValueError("tau must be positive")
                if isinstance(self.tau, (list, np.ndarray)):
                    object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))

    @property
    def derivative_free(self) -> bool:
        return self.variant in DF_VARIANTS

    def with_level(self, level: float) -> "OracleConfig":
        return dataclasses.replace(self, level=float(level))


@dataclass(frozen=True)
class OracleSample:
    """One realisation of the oracle.

    ``kind`` is one of ``direction``, ``coordinate``, ``block``,
    ``block_direction``, ``block_coordinate`` or ``full``; ``block``,
    ``index`` and ``direction`` locate the sample inside that kind.
    """

    ghat: SparseBlockDual
    rho: float
    kind: str
    block: int | None = None
    index: int | None = None
    direction: np.ndarray | None = None
    projected: SparseBlockDual | None = None
    delta: float = 0.0

    @property
    def unbiased_part(self) -> SparseBlockDual | None:
        return None if self.projected is None else self.projected.scaled(self.rho)

    def bias(self) -> BlockDual:
        """``R_b xi = ghat / rho - R_b R_f^T grad f(x)``."""
        if self.projected is None:
            raise ValueError("sample was drawn without the exact projection")
        s = self.ghat.structure
        return BlockDual(s, self.ghat.dense().data / self.rho - self.projected.dense().data)

    def bias_norm(self) -> float:
        return dual_norm(self.bias())

    @property
    def label(self) -> str:
        if self.kind == "direction":
            return "dir"
        if self.kind == "coordinate":
            return f"c{self.block}"
        if self.kind == "block":
            return f"b{self.block}"
        if self.kind == "block_direction":
            return f"b{self.block}:dir"
        if self.kind == "block_coordinate":
            return f"b{self.block}:c{self.index}"
        return "full"


@dataclass(frozen=True)
class BiasBound:
    delta: float

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError("bias bound must be non-negative")

    def __float__(self):
        return float(self.delta)


# ---------------------------------------------------------------- setups


def setup_for(problem: Problem, variant: str) -> ProxSetup:
    """Prox setup with the weights each variant is analysed under: the global
    constant ``L`` for the direction and full-gradient variants, blockwise
    ``L_i`` otherwise."""
    if variant in ("dir", "df_dir", "full"):
        return problem.setup([problem.global_lipschitz] * problem.n)
    return problem.setup()


def rho_for(variant: str, structure: BlockStructure) -> float:
    if variant == "full":
        return 1.0
    if variant in ("dir", "df_dir", "block_rand", "df_block_rand"):
        return float(structure.p)
    return float(structure.n)


@functools.lru_cache(maxsize=256)
def _checked(variant: str, setup: ProxSetup) -> None:
    # samplers run once per step; failures are not cached and re-raise
    check_compatible(variant, setup)


def _sphere_block(setup: ProxSetup, i: int) -> bool:
    return setup.sets[i].kind == "free" and setup.structure.dims[i] > 1


def check_compatible(variant: str, setup: ProxSetup) -> None:
    """Raise :class:`IncompatibleOracle` unless ``variant`` can run on ``setup``
    with the prox-mapping staying regular."""
    s = setup.structure
    kinds = setup.kinds
    if variant in ("dir", "df_dir"):
        if any(k != "free" for k in kinds) or len(set(s.weights)) != 1:
            raise IncompatibleOracle(f"{variant} needs an unconstrained Euclidean space with one weight")
    elif variant in ("coord", "df_coord"):
        if any(d != 1 for d in s.dims):
            raise IncompatibleOracle(f"{variant} needs scalar blocks")
        if any(k not in ("free", "box") for k in kinds):
            raise IncompatibleOracle(f"{variant} needs free or interval blocks")
    elif variant == "df_block":
        if "matrix" in kinds:
            raise IncompatibleOracle("df_block does not support matrix-norm blocks")
    elif variant in ("block_rand", "df_block_rand"):
        if any(k not in ("free", "box") for k in kinds):
            raise IncompatibleOracle(f"{variant} needs free or interval blocks")
    elif variant not in ("block", "full"):
        raise ValueError(f"unknown oracle variant {variant!r}")


def taus_for(config: OracleConfig, structure: BlockStructure) -> np.ndarray:
    """Per-block finite-difference steps (read-only)."""
    try:
        return _taus_cached(config, structure)
    except TypeError:  # unhashable tau
        return _taus(config, structure)


@functools.lru_cache(maxsize=256)
def _taus_cached(config: OracleConfig, structure: BlockStructure) -> np.ndarray:
    out = np.array(_taus(config, structure), dtype=float)
    out.setflags(write=False)
    return out


def _taus(config: OracleConfig, structure: BlockStructure) -> np.ndarray:
    L = np.asarray(structure.weights)
    if config.tau == "optimal":
        if config.level <= 0:
            raise ValueError("tau='optimal' needs a positive noise level")
        return 2.0 * np.sqrt(config.level / L)
    taus = np.atleast_1d(np.asarray(config.tau, dtype=float))
    if taus.size == 1:
        return np.full(structure.n, float(taus[0]))
    if taus.size != structure.n:
        raise ValueError("one tau per block required")
    return taus


def _df_term(level: float, tau: np.ndarray, L: np.ndarray) -> np.ndarray:
    return 2.0 * level / (tau * np.sqrt(L)) + tau * np.sqrt(L) / 2.0


def bias_bound(config: OracleConfig, structure: BlockStructure) -> BiasBound:
    """Oracle error level ``delta`` for ``config`` on ``structure``.

    The weights of ``structure`` are taken as the Lipschitz constants the
    variant is analysed under (see :func:`setup_for`).
    """
    try:
        return _bias_bound_cached(config, structure)
    except TypeError:  # unhashable tau
        return _bias_bound(config, structure)


@functools.lru_cache(maxsize=256)
def _bias_bound_cached(config: OracleConfig, structure: BlockStructure) -> BiasBound:
    return _bias_bound(config, structure)


def _bias_bound(config: OracleConfig, structure: BlockStructure) -> BiasBound:
    v = config.variant
    level = config.level
    L = np.asarray(structure.weights)
    if v == "full":
        return BiasBound(level)
    if v in ("dir", "coord", "block", "block_rand"):
        return BiasBound(level / np.sqrt(L.min()))
    tau = taus_for(config, structure)
    if v == "df_dir":
        return BiasBound(float(_df_term(level, tau[:1], L[:1])[0]))
    terms = _df_term(level, tau, L)
    if v == "df_block":
        return BiasBound(float(np.sqrt(structure.p_max) * terms.max()))
    return BiasBound(float(terms.max()))


def calibrate(variant: str, delta: float, structure: BlockStructure) -> float:
    """Largest ``Delta`` whose bias bound equals ``delta``; derivative-free
    variants assume ``tau = 'optimal'``."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    L = np.asarray(structure.weights)
    if variant == "full":
        return delta
    if variant in ("dir", "coord", "block", "block_rand"):
        return delta * float(np.sqrt(L.min()))
    if variant in ("df_dir", "df_coord", "df_block_rand"):
        return delta**2 / 4.0
    if variant == "df_block":
        return delta**2 / (4.0 * structure.p_max)
    raise ValueError(f"unknown oracle variant {variant!r}")


# ---------------------------------------------------------------- noise


def _scalar_noise(config: OracleConfig, derivative: float, noise_rng) -> float:
    if config.level == 0 or config.noise == "none":
        return 0.0
    if config.noise == "adversarial":
        return config.level if derivative >= 0 else -config.level
    return float(noise_rng.uniform(-config.level, config.level))


def _block_noise(structure: BlockStructure, i: int, config: OracleConfig, g: np.ndarray, noise_rng,
                 level: float | None = None) -> np.ndarray:
    """Noise vector with ``||xi||_{i,*} <= level``."""
    level = config.level if level is None else level
    d = g.size
    if level == 0 or config.noise == "none":
        return np.zeros(d)
    kind = structure.norms[i]
    if config.noise == "adversarial":
        if kind == "l1":
            return level * np.where(g >= 0, 1.0, -1.0)
        v = g if np.any(g != 0) else np.eye(d)[0]
        return level * v / block_dual_norm(structure, i, v)
    if kind == "l1":
        return noise_rng.uniform(-level, level, size=d)
    v = noise_rng.standard_normal(d)
    while not np.any(v != 0):
        v = noise_rng.standard_normal(d)
    return level * noise_rng.uniform() * v / block_dual_norm(structure, i, v)


# ---------------------------------------------------------------- sampling helpers


def sphere_direction(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on the unit sphere of ``R^dim`` (normalised Gaussian)."""
    while True:
        v = rng.standard_normal(dim)
        nrm = np.linalg.norm(v)
        if nrm > 0:
            return v / nrm


def _random_block_by_size(structure: BlockStructure, rng) -> tuple[int, int]:
    """Block ``i`` with probability ``p_i / p`` and a uniform coordinate in it."""
    j = int(rng.integers(structure.p))
    i = int(np.searchsorted(structure.offsets, j, side="right") - 1)
    return i, j - structure.offsets[i]


def _point(setup: ProxSetup, x) -> BlockPoint:
    if isinstance(x, BlockPoint):
        if x.structure != setup.structure:
            return BlockPoint(setup.structure, x.data)
        return x
    return BlockPoint(setup.structure, x)


def _values(problem: Problem, config: OracleConfig) -> NoisyValueOracle:
    return NoisyValueOracle(problem, config.level, config.noise)


def _forward_difference(values: NoisyValueOracle, x: np.ndarray, base: float, step: np.ndarray, tau: float, noise_rng) -> float:
    return (values.value(x + tau * step, noise_rng, side=1) - base) / tau


# ---------------------------------------------------------------- the seven variants


def sample_directional(problem, setup, x, config, rng, noise_rng=None, choice=None, exact=True) -> OracleSample:
    """``p (<grad f(x), e> + xi) e`` with ``e`` uniform on the sphere."""
    _checked("dir", setup)
    x = _point(setup, x)
    s = setup.structure
    e = sphere_direction(s.p, rng) if choice is None else np.asarray(choice, dtype=float)
    deriv = problem.dir_deriv(x, e)
    xi = _scalar_noise(config, deriv, noise_rng if noise_rng is not None else rng)
    rho = float(s.p)
    ghat = SparseBlockDual.from_flat(s, rho * (deriv + xi) * e)
    proj = SparseBlockDual.from_flat(s, deriv * e) if exact else None
    return OracleSample(ghat, rho, "direction", direction=e, projected=proj,
                        delta=bias_bound(config, s).delta)


def sample_coordinate(problem, setup, x, config, rng, noise_rng=None, choice=None, exact=True) -> OracleSample:
    """``n (d_i f(x) + xi) e_i`` with ``i`` uniform."""
    _checked("coord", setup)
    x = _point(setup, x)
    s = setup.structure
    i = int(rng.integers(s.n)) if choice is None else int(choice)
    s.check_index(i)
    deriv = float(problem.block_grad(i, x)[0])
    xi = _scalar_noise(config, deriv, noise_rng if noise_rng is not None else rng)
    rho = float(s.n)
    ghat = SparseBlockDual(s, (i,), (np.array([rho * (deriv + xi)]),))
    proj = SparseBlockDual(s, (i,), (np.array([deriv]),))
    return OracleSample(ghat, rho, "coordinate", block=i, index=0, projected=proj,
                        delta=bias_bound(config, s).delta)


def sample_block(problem, setup, x, config, rng, noise_rng=None, choice=None, exact=True) -> OracleSample:
    """``n U~_i (U_i^T grad f(x) + xi)`` with ``i`` uniform."""
    _checked("block", setup)
    x = _point(setup, x)
    s = setup.structure
    i = int(rng.integers(s.n)) if choice is None else int(choice)
    s.check_index(i)
    g = problem.block_grad(i, x)
    xi = _block_noise(s, i, config, g, noise_rng if noise_rng is not None else rng)
    rho = float(s.n)
    ghat = SparseBlockDual(s, (i,), (rho * (g + xi),))
    proj = SparseBlockDual(s, (i,), (g,))
    return OracleSample(ghat, rho, "block", block=i, projected=proj, delta=bias_bound(config, s).delta)


def sample_block_rand(problem, setup, x, config, rng, noise_rng=None, choice=None, exact=True) -> OracleSample:
    """First-order twin of :func:`sample_df_block_rand`."""
    _checked("block_rand", setup)
    x = _point(setup, x)
    s = setup.structure
    i, j, e = _block_rand_choice(setup, rng, choice)
    g = problem.block_grad(i, x)
    deriv = float(np.dot(g, e))
    xi = _scalar_noise(config, deriv, noise_rng if noise_rng is not None else rng)
    rho = float(s.p)
    ghat = SparseBlockDual(s, (i,), (rho * (deriv + xi) * e,))
    proj = SparseBlockDual(s, (i,), (deriv * e,))
    kind = "block_direction" if j is None else "block_coordinate"
    return OracleSample(ghat, rho, kind, block=i, index=j, direction=e, projected=proj,
                        delta=bias_bound(config, s).delta)


def _block_rand_choice(setup: ProxSetup, rng, choice):
    """Returns ``(block, coordinate or None, unit vector in the block)``."""
    s = setup.structure
    if choice is None:
        i, j = _random_block_by_size(s, rng)
        if _sphere_block(setup, i):
            return i, None, sphere_direction(s.dims[i], rng)
    else:
        i, j = choice
        s.check_index(i)
        if _sphere_block(setup, i):
            e = np.asarray(j, dtype=float)
            return i, None, e
        j = int(j)
    e = np.zeros(s.dims[i])
    e[j] = 1.0
    return i, int(j), e


def sample_full(problem, setup, x, config, rng, noise_rng=None, choice=None, exact=True) -> OracleSample:
    """Exact gradient plus noise with ``||xi||_{E,*} <= Delta`` (deterministic reference mode)."""
    x = _point(setup, x)
    s = setup.structure
    g = problem.grad(x)
    delta = bias_bound(config, s).delta
    if config.level == 0 or config.noise == "none":
        full = SparseBlockDual.from_flat(s, g.data)
        return OracleSample(full, 1.0, "full", projected=full, delta=delta)
    nrng = noise_rng if noise_rng is not None else rng
    scale = np.sqrt(np.asarray(s.weights) / s.n)
    vals = []
    for i in range(s.n):
        gi = g.block(i)
        vals.append(gi + _block_noise(s, i, config, gi, nrng, level=config.level * scale[i]))
    ghat = SparseBlockDual(s, range(s.n), vals)
    return OracleSample(ghat, 1.0, "full", projected=SparseBlockDual.from_flat(s, g.data), delta=delta)


def _exact_projection(problem, x, s, i, e=None, exact=True):
    if not exact:
        return None
    g = problem.block_grad(i, x)
    return SparseBlockDual(s, (i,), (g if e is None else float(np.dot(g, e)) * e,))


def sample_df_directional(problem, setup, x, config, rng, noise_rng=None, choice=None, exact=True) -> OracleSample:
    """``p (f~(x + tau e) - f~(x)) / tau * e``."""
    _checked("df_dir", setup)
    x = _point(setup, x)
    s = setup.structure
    e = sphere_direction(s.p, rng) if choice is None else np.asarray(choice, dtype=float)
    tau = float(taus_for(config, s)[0])
    nrng = noise_rng if noise_rng is not None else rng
    vals = _values(problem, config)
    base = vals.value(x.data, nrng, side=-1)
    fd = _forward_difference(vals, x.data, base, e, tau, nrng)
    rho = float(s.p)
    ghat = SparseBlockDual.from_flat(s, rho * fd * e)
    proj = SparseBlockDual.from_flat(s, problem.dir_deriv(x, e) * e) if exact else None
    return OracleSample(ghat, rho, "direction", direction=e, projected=proj, delta=bias_bound(config, s).delta)


def sample_df_coordinate(problem, setup, x, config, rng, noise_rng=None, choice=None, exact=True) -> OracleSample:
    """``n (f~(x + tau e_i) - f~(x)) / tau * e_i``."""
    _checked("df_coord", setup)
    x = _point(setup, x)
    s = setup.structure
    i = int(rng.integers(s.n)) if choice is None else int(choice)
    s.check_index(i)
    tau = float(taus_for(config, s)[i])
    nrng = noise_rng if noise_rng is not None else rng
    vals = _values(problem, config)
    base = vals.value(x.data, nrng, side=-1)
    step = np.zeros(s.p)
    step[s.offsets[i]] = 1.0
    fd = _forward_difference(vals, x.data, base, step, tau, nrng)
    rho = float(s.n)
    ghat = SparseBlockDual(s, (i,), (np.array([rho * fd]),))
    return OracleSample(ghat, rho, "coordinate", block=i, index=0,
                        projected=_exact_projection(problem, x, s, i, exact=exact),
                        delta=bias_bound(config, s).delta)


def sample_df_block(problem, setup, x, config, rng, noise_rng=None, choice=None, exact=True) -> OracleSample:
    """``n U~_i`` applied to the ``p_i`` forward differences inside block ``i``."""
    _checked("df_block", setup)
    x = _point(setup, x)
    s = setup.structure
    i = int(rng.integers(s.n)) if choice is None else int(choice)
    s.check_index(i)
    tau = float(taus_for(config, s)[i])
    nrng = noise_rng if noise_rng is not None else rng
    vals = _values(problem, config)
    base = vals.value(x.data, nrng, side=-1)
    fd = np.empty(s.dims[i])
    step = np.zeros(s.p)
    for j in range(s.dims[i]):
        step[:] = 0.0
        step[s.offsets[i] + j] = 1.0
        fd[j] = _forward_difference(vals, x.data, base, step, tau, nrng)
    rho = float(s.n)
    ghat = SparseBlockDual(s, (i,), (rho * fd,))
    return OracleSample(ghat, rho, "block", block=i, projected=_exact_projection(problem, x, s, i, exact=exact),
                        delta=bias_bound(config, s).delta)


def sample_df_block_rand(problem, setup, x, config, rng, noise_rng=None, choice=None, exact=True) -> OracleSample:
    """Block ``i`` with probability ``p_i / p``; one forward difference along a
    sphere direction (free block) or a coordinate (interval block)."""
    _checked("df_block_rand", setup)
    x = _point(setup, x)
    s = setup.structure
    i, j, e = _block_rand_choice(setup, rng, choice)
    tau = float(taus_for(config, s)[i])
    nrng = noise_rng if noise_rng is not None else rng
    vals = _values(problem, config)
    base = vals.value(x.data, nrng, side=-1)
    step = np.zeros(s.p)
    step[s.span(i)] = e
    fd = _forward_difference(vals, x.data, base, step, tau, nrng)
    rho = float(s.p)
    ghat = SparseBlockDual(s, (i,), (rho * fd * e,))
    kind = "block_direction" if j is None else "block_coordinate"
    return OracleSample(ghat, rho, kind, block=i, index=j, direction=e,
                        projected=_exact_projection(problem, x, s, i, e, exact=exact),
                        delta=bias_bound(config, s).delta)


SAMPLERS = {
    "dir": sample_directional,
    "coord": sample_coordinate,
    "block": sample_block,
    "df_dir": sample_df_directional,
    "df_coord": sample_df_coordinate,
    "df_block": sample_df_block,
    "df_block_rand": sample_df_block_rand,
    "block_rand": sample_block_rand,
    "full": sample_full,
}


def draw(problem, setup, x, config: OracleConfig, rng, noise_rng=None, choice=None, exact=True) -> OracleSample:
    return SAMPLERS[config.variant](problem, setup, x, config, rng, noise_rng, choice, exact)


# ---------------------------------------------------------------- unbiasedness


def outcomes(config: OracleConfig, setup: ProxSetup) -> list[tuple[Fraction, object]] | None:
    """All ``(probability, choice)`` pairs of a finite-outcome oracle, or
    ``None`` when the oracle samples from a sphere."""
    s = setup.structure
    v = config.variant
    if v == "full":
        return [(Fraction(1), None)]
    if v in ("coord", "block", "df_coord", "df_block"):
        return [(Fraction(1, s.n), i) for i in range(s.n)]
    if v in ("block_rand", "df_block_rand"):
        if any(_sphere_block(setup, i) for i in range(s.n)):
            return None
        return [(Fraction(1, s.p), (i, j)) for i in range(s.n) for j in range(s.dims[i])]
    return None


@dataclass(frozen=True)
class UnbiasedReport:
    mean_error: float
    stat_bound: float
    exact: bool
    samples: int

    @property
    def passed(self) -> bool:
        return self.mean_error <= self.stat_bound


def _fraction_expectation(terms: Sequence[tuple[Fraction, np.ndarray]], scale: float) -> list[Fraction]:
    size = terms[0][1].size
    acc = [Fraction(0)] * size
    for prob, vec in terms:
        w = prob * Fraction(scale)
        for k in range(size):
            if vec[k] != 0.0:
                acc[k] += w * Fraction(float(vec[k]))
    return acc


def reference_gradient(problem: Problem, setup: ProxSetup, x, variant: str) -> np.ndarray:
    """The gradient the variant projects: assembled from ``block_grad`` for
    block-based variants (so the comparison is free of summation-order
    differences between ``grad`` and ``block_grad``), ``grad`` otherwise."""
    x = _point(setup, x)
    if variant in ("dir", "df_dir", "full"):
        return problem.grad(x).data
    return np.concatenate([problem.block_grad(i, x) for i in range(setup.structure.n)])


def verify_unbiased(config: OracleConfig, problem: Problem, setup: ProxSetup, x, n_samples: int = 100_000,
                    rng: np.random.Generator | None = None) -> UnbiasedReport:
    """Deviation of ``E ghat`` from ``grad f(x)`` in the max-norm.

    Finite-outcome oracles are enumerated. For first-order variants the
    expectation of ``rho R_b R_f^T grad f(x)`` is summed in exact rational
    arithmetic, so the reported deviation is exactly zero for an unbiased
    oracle. For derivative-free variants the enumerated ``ghat`` is compared
    instead and the allowed deviation is ``tau max_i L_i``.

    Sphere-based oracles are estimated by Monte Carlo with a ``5 sigma``
    bound (plus ``rho tau max_i L_i / 2`` for derivative-free ones).
    """
    if config.level != 0:
        raise ValueError("unbiasedness is checked with a zero noise level")
    x = _point(setup, x)
    s = setup.structure
    grad = reference_gradient(problem, setup, x, config.variant)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    outs = outcomes(config, setup)
    slack = 0.0
    if config.derivative_free:
        slack = float(np.max(taus_for(config, s) * np.asarray(problem.lipschitz)))
    if outs is not None:
        terms = []
        for prob, choice in outs:
            smp = draw(problem, setup, x, config, rng, choice=choice)
            part = smp.ghat if config.derivative_free else smp.projected
            terms.append((prob, part.dense().data))
        rho = 1.0 if config.derivative_free else rho_for(config.variant, s)
        expect = _fraction_expectation(terms, rho)
        dev = max(abs(e - Fraction(float(g))) for e, g in zip(expect, grad))
        return UnbiasedReport(float(dev), slack, True, len(outs))
    acc = np.zeros(s.p)
    acc2 = np.zeros(s.p)
    for _ in range(n_samples):
        g = draw(problem, setup, x, config, rng, exact=False).ghat.dense().data
        acc += g
        acc2 += g * g
    mean = acc / n_samples
    var = np.maximum(acc2 / n_samples - mean**2, 0.0)
    bound = 5.0 * float(np.sqrt(var.max() / n_samples))
    if config.derivative_free:
        bound += rho_for(config.variant, s) * slack / 2.0
    return UnbiasedReport(float(np.max(np.abs(mean - grad))), bound, False, n_samples)


def sphere_second_moment(dim: int, n_samples: int, rng: np.random.Generator) -> tuple[float, float]:
    """Largest entry-wise z-score of the empirical ``E[e e^T]`` against ``I / dim``.

    Returns ``(max |mean - target| / (sigma / sqrt(N)), 5.0)``.
    """
    v = rng.standard_normal((n_samples, dim))
    e = v / np.linalg.norm(v, axis=1, keepdims=True)
    outer = e[:, :, None] * e[:, None, :]
    mean = outer.mean(axis=0)
    sd = outer.std(axis=0)
    z = np.abs(mean - np.eye(dim) / dim) / (sd / np.sqrt(n_samples))
    return float(z.max()), 5.0
