import pytest

from sddc.config import THREADS_ENV, ChainConfig, RuntimeConfig, SddcConfig, SolverConfig
from sddc.exceptions import ValidationError


def test_defaults():
    config = SddcConfig()
    assert config.solver.tol == 1e-9
    assert config.solver.strict_slack == 1e-9
    assert config.chain.tol == 1e-12
    assert config.chain.max_iter == 1_000_000


def test_dotted_update_revalidates():
    config = SddcConfig()
    config.update({"solver.grid_budget": 2000, "chain.tol": 1e-10})
    assert config.solver.grid_budget == 2000
    assert config.chain.tol == 1e-10
    with pytest.raises(ValidationError):
        config.update({"solver.grid_resolution": 1.5})


def test_unknown_key_rejected():
    with pytest.raises(ValidationError):
        SddcConfig().update({"solver.nonexistent": 1})
    with pytest.raises(ValidationError):
        SddcConfig().update({"plotting.dpi": 300})


@pytest.mark.parametrize("config", [SolverConfig(tol=0.0), SolverConfig(incumbents=0), SolverConfig(polish_iter=-1),
                                    ChainConfig(max_iter=0)])
def test_invalid_values(config):
    with pytest.raises(ValidationError):
        config.validate()


def test_threads_from_env(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert RuntimeConfig.from_env().threads == 3
    assert SddcConfig().runtime.threads == 3
    monkeypatch.delenv(THREADS_ENV)
    assert RuntimeConfig.from_env().threads == 1


@pytest.mark.parametrize("raw", ["zero", "0", "-2"])
def test_bad_threads_env(monkeypatch, raw):
    monkeypatch.setenv(THREADS_ENV, raw)
    with pytest.raises(ValidationError):
        RuntimeConfig.from_env()
