"""Shared test fixtures for ringqed tests."""

import json
import os
import sys

import pytest

# Add project root to path so `ringqed` is importable
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from ringqed.cavity import CavityMode, RingGeometry  # noqa: E402
from ringqed.config import DEFAULT_CONFIG_PATH, load_config  # noqa: E402


@pytest.fixture
def default_config():
    """The shipped scenario."""
    return load_config(DEFAULT_CONFIG_PATH)


@pytest.fixture
def sample_config_dict():
    """Minimal valid config dict: a seed plus a couple of overrides."""
    return {
        "seed": 7,
        "decay": {"total_counts": 200000, "n_bins": 200},
        "spin": {"repetitions": 100000},
    }


@pytest.fixture
def tmp_config_file(tmp_path, sample_config_dict):
    """Write a temporary config JSON file and return its path."""
    config_path = tmp_path / "scenario.json"
    config_path.write_text(json.dumps(sample_config_dict))
    return str(config_path)


@pytest.fixture
def tuned_ring():
    """The 8.1 um ring used for gas tuning."""
    return RingGeometry(diameter_um=8.1, n_eff=2.30, n_g=2.996)


@pytest.fixture
def zpl_mode():
    """A Q=1261 mode sitting on the PL4 zero-phonon line."""
    return CavityMode(azimuthal_order=55, center_wavelength_nm=1078.6, q_factor=1261)
