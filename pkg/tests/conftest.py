import json
from pathlib import Path

import pytest

from fedsched.core import config_from_dict

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def default_dict():
    return json.loads((ROOT / "configs" / "default.json").read_text())


@pytest.fixture
def cfg(default_dict):
    return config_from_dict(default_dict)


@pytest.fixture
def small_cfg(default_dict):
    d = dict(default_dict, n_users=6, n_subcarriers=12, max_rounds=8)
    return config_from_dict(d)
