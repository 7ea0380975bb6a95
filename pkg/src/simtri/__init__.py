"""Accelerated randomized similar triangles method with inexact oracles."""
from .block_space import (
    BlockDual,
    BlockPoint,
    BlockStructure,
    SparseBlockDual,
    dual_embed,
    dual_norm,
    embed,
    extract,
    pairing,
    primal_norm,
)
from .oracles import OracleConfig, OracleSample, bias_bound, draw, verify_unbiased
from .problems import (
    NoisyValueOracle,
    make_chain_quadratic,
    make_coupled_quadratic,
    make_separable_quadratic,
    make_simplex_quadratic,
)
from .prox import BlockSet, ProxSetup, bregman, make_setup, prox_map, prox_value
from .rstm import RunConfig, Trace, init_state, iterate, next_coefficients, solve

__all__ = [
    "BlockDual", "BlockPoint", "BlockSet", "BlockStructure", "NoisyValueOracle", "OracleConfig",
    "OracleSample", "ProxSetup", "RunConfig", "SparseBlockDual", "Trace", "bias_bound", "bregman",
    "draw", "dual_embed", "dual_norm", "embed", "extract", "init_state", "iterate",
    "make_chain_quadratic", "make_coupled_quadratic", "make_separable_quadratic", "make_setup",
    "make_simplex_quadratic", "next_coefficients", "pairing", "primal_norm", "prox_map",
    "prox_value", "solve", "verify_unbiased",
]
