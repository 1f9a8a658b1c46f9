import numpy as np
import pytest

import common.iniconfig
from common.gaussianmodel import ConditionalState, ModelParams, prepare_state


@pytest.fixture(autouse=True)
def no_user_config(tmp_path, monkeypatch):
    monkeypatch.setattr(common.iniconfig, "default_config_path", lambda: tmp_path / "absent.ini")


@pytest.fixture
def reference_params():
    return ModelParams()


@pytest.fixture
def reference_state(reference_params):
    return prepare_state(reference_params)


@pytest.fixture
def vacuum_state():
    return ConditionalState(gammaI=np.eye(2), gamma0=np.eye(2), P0prime=0.0)
