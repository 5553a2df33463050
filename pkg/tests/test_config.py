import json

import pytest
from hypothesis import given, strategies as st

from mmsldl.config import Hyperparams, RunConfig, SynthSpec
from mmsldl.errors import InvalidConfigurationError


def test_defaults_match_solver_constants():
    h = Hyperparams()
    assert (h.mu0, h.rho, h.mu_max, h.eps_solver, h.eps_dict) == (1e-6, 1.1, 1e30, 1e-8, 1e-5)
    assert (h.max_inner_iters, h.max_dict_iters, h.max_outer_alternations, h.ksvd_iters) == (500, 20, 10, 10)
    assert RunConfig().split.repeats == 10


@pytest.mark.parametrize("bad", [dict(alpha=-1), dict(gamma=1.5), dict(rho=1.0), dict(mu0=0),
                                 dict(eps_solver=0), dict(max_inner_iters=0), dict(lambda_ridge=-1)])
def test_invalid_hyperparams(bad):
    with pytest.raises(InvalidConfigurationError):
        Hyperparams(**bad)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 1))
def test_hyperparams_dict_round_trip(a, b, l, g):
    h = Hyperparams(alpha=a, beta=b, lam=l, gamma=g)
    assert Hyperparams.from_dict(h.to_dict()) == h


def test_run_config_file_round_trip(tmp_path):
    cfg = RunConfig(command="eval", synthetic=SynthSpec(classes=4), hyperparams=Hyperparams(alpha=0.3))
    cfg.split.repeats = 3
    cfg.dump(tmp_path / "c.json")
    assert RunConfig.load(tmp_path / "c.json") == cfg


def test_run_config_rejects_unknown_and_malformed(tmp_path):
    with pytest.raises(InvalidConfigurationError):
        RunConfig.from_dict({"hyperparams": {"alpah": 1}})
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(InvalidConfigurationError):
        RunConfig.load(tmp_path / "bad.json")
    (tmp_path / "list.json").write_text(json.dumps([1, 2]))
    with pytest.raises(InvalidConfigurationError):
        RunConfig.load(tmp_path / "list.json")
    with pytest.raises(InvalidConfigurationError):
        RunConfig.load(tmp_path / "absent.json")
