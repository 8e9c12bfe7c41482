from pathlib import Path

import pytest

from penflow import GridSpec, Horizon, MeanFunction, OUParams, Sinusoid

#: Seed of the shipped baseline configuration; study tests reuse it.
BASELINE_SEED = 20260809


@pytest.fixture(scope="session")
def case_mu() -> MeanFunction:
    return MeanFunction(offset=2.0, sinusoids=(Sinusoid(3.0, 1.0, 0.0),))


@pytest.fixture(scope="session")
def case_ou(case_mu) -> OUParams:
    return OUParams(kappa=3.0, sigma=2.0, y0=1.0, mu=case_mu)


@pytest.fixture(scope="session")
def case_grid() -> GridSpec:
    return GridSpec(dx=0.1, lam=4.0, dt=0.025, T=1.0)


@pytest.fixture(scope="session")
def case_horizon() -> Horizon:
    return Horizon(T=1.0, lam=4.0)


@pytest.fixture(scope="session")
def baseline_config_path() -> Path:
    return Path(__file__).resolve().parent.parent / "configs" / "paper_s3.json"
