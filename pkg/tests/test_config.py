import json
from pathlib import Path

import numpy as np
import pytest

from simtri.config import ConfigError, ExperimentConfig, ProblemSpec, canonical_json, load_config

GOLDEN = Path(__file__).parent / "golden"
CONFIGS = Path(__file__).parent.parent / "configs"


def cfg(**overrides):
    base = {"problem": {"kind": "separable", "n": 3}, "iters": 5}
    base.update(overrides)
    return ExperimentConfig.from_dict(base)


def test_golden_canonical_form():
    parsed = load_config(GOLDEN / "simplex_input.json")
    assert parsed.dumps() == (GOLDEN / "simplex_canonical.json").read_text()


def test_canonical_round_trip_is_fixed_point():
    text = (GOLDEN / "simplex_canonical.json").read_text()
    again = ExperimentConfig.from_dict(json.loads(text)).dumps()
    assert again == text


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_parse_and_build(path):
    config = load_config(path)
    problem = config.problem.build()
    config.run_config(problem, config.seeds[0])


@pytest.mark.parametrize("bad", [
    {"problem": {"kind": "separable"}, "iters": 5, "colour": "red"},
    {"problem": {"kind": "separable", "size": 3}, "iters": 5},
    {"problem": {"kind": "separable"}, "oracle": {"variant": "coord", "bias": 1}, "iters": 5},
])
def test_unknown_keys_rejected(bad):
    with pytest.raises(ConfigError, match="unknown key"):
        ExperimentConfig.from_dict(bad)


@pytest.mark.parametrize("bad", [
    {"iters": 5},
    {"problem": {"kind": "torus"}, "iters": 5},
    {"problem": {"kind": "separable"}, "oracle": {"variant": "spiral"}, "iters": 5},
    {"problem": {"kind": "separable"}, "oracle": {"noise": "pink"}, "iters": 5},
    {"problem": {"kind": "separable"}, "iters": 5, "epsilon": 0.1},
    {"problem": {"kind": "separable"}, "iters": None},
    {"problem": {"kind": "separable"}, "iters": -1},
    {"problem": {"kind": "separable"}, "iters": 5, "regime": "chaotic"},
    {"problem": {"kind": "separable"}, "iters": 5, "seeds": []},
    {"problem": {"kind": "separable"}, "iters": 5, "seeds": [-1]},
    {"problem": {"kind": "separable"}, "iters": 5, "rho": 0.5},
    {"problem": {"kind": "separable"}, "iters": 5, "delta": -1.0},
])
def test_invalid_values_rejected(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_epsilon_alone_is_a_stopping_rule():
    c = ExperimentConfig.from_dict({"problem": {"kind": "separable"}, "epsilon": 1e-3})
    assert c.iters is None and c.epsilon == 1e-3


def test_inline_matrix_cap():
    big = np.eye(65).tolist()
    with pytest.raises(ConfigError, match="64x64"):
        ExperimentConfig.from_dict({"problem": {"kind": "coupled", "A": big, "b": [0.0] * 65}, "iters": 1})


def test_inline_coupled_problem():
    c = ExperimentConfig.from_dict({"problem": {"kind": "coupled", "A": [[2.0, 1.0], [1.0, 2.0]], "b": [1.0, 1.0]},
                                    "iters": 1})
    prob = c.problem.build()
    assert prob.f_star == pytest.approx(-1 / 3)


def test_bad_inline_matrix_is_config_error():
    c = ExperimentConfig.from_dict({"problem": {"kind": "coupled", "A": [[1.0, 2.0], [2.0, 1.0]]}, "iters": 1})
    with pytest.raises(ConfigError):
        c.problem.build()


def test_generators_are_seeded():
    for kind in ("separable", "coupled", "simplex"):
        a = ProblemSpec.from_dict({"kind": kind, "seed": 4}).build()
        b = ProblemSpec.from_dict({"kind": kind, "seed": 4}).build()
        assert a.f_star == b.f_star and a.lipschitz == b.lipschitz
    chain = ProblemSpec.from_dict({"kind": "chain", "p": 64, "blocks": 4}).build()
    assert chain.dims == (16,) * 4
    with pytest.raises(ConfigError):
        ProblemSpec.from_dict({"kind": "chain", "p": 10, "blocks": 4}).build()


def test_with_size_regenerates():
    spec = ProblemSpec.from_dict({"kind": "separable", "n": 3, "lipschitz": [1.0, 2.0, 3.0]})
    assert spec.with_size(7).build().n == 7


def test_delta_calibrates_level():
    c = cfg(oracle={"variant": "coord"}, delta=0.01)
    prob = c.problem.build()
    oc = c.oracle_config(prob)
    from simtri.oracles import bias_bound, setup_for

    assert bias_bound(oc, setup_for(prob, "coord").structure).delta == pytest.approx(0.01)
    df = cfg(oracle={"variant": "df_coord", "tau": 1e-3}, delta=0.01)
    assert df.oracle_config(prob).tau == "optimal"


def test_incompatible_oracle_is_config_error():
    c = cfg(problem={"kind": "simplex", "blocks": 2}, oracle={"variant": "dir"})
    with pytest.raises(ConfigError):
        c.run_config(c.problem.build(), 0)


def test_canonical_json_sorted():
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    wrong = tmp_path / "wrong.json"
    wrong.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(wrong)
