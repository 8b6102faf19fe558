import warnings
from pathlib import Path

import pytest

from memsnn import (ArrayConfig, Biasing, CoreParams, DeviceParams,
                    ProgramConfig, PulseMenu, PulseSpec)

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "mnist"

# fitted device constants used throughout (positive/negative scale, exponent
# and boundary-line coefficients)
FITTED = dict(A_p=0.21389, A_n=-0.81302, t_p=1.6591, t_n=1.5148,
              a0_p=37087.0, a1_p=-20193.0, a0_n=43430.0, a1_n=34333.0)

MENU_PAIRS = [(0.9, 1e-6), (-0.9, 1e-6), (1.1, 1e-6), (-1.1, 1e-6),
              (1.2, 1e-6), (-1.2, 1e-6), (1.2, 5e-6), (-1.2, 5e-6),
              (1.2, 1e-5), (-1.2, 1e-5), (1.2, 5e-5), (-1.2, 5e-5)]


@pytest.fixture(scope="session")
def params():
    return DeviceParams(**FITTED)


@pytest.fixture(scope="session")
def menu():
    return PulseMenu(tuple(PulseSpec(v, pw) for v, pw in MENU_PAIRS))


@pytest.fixture
def prog_cfg(menu):
    return ProgramConfig(r_tolerance=0.001, max_steps=5, dt=1e-6, menu=menu)


def make_array_config(params, rows=4, cols=4, biasing=Biasing.SELECTOR_BASED,
                      noise=0.0, init_R=11000.0, var=0.0, seed=1):
    return ArrayConfig(rows=rows, cols=cols, biasing=biasing,
                       read_noise_frac=noise, init_R=init_R,
                       init_R_variation=var, dt=1e-6, device_params=params,
                       seed=seed)


@pytest.fixture
def array_config(params):
    return make_array_config(params)


def make_core_params(V_th=25.16, alpha=0.0, eta=3.5e-6, noise_scale=1e-6, seed=1):
    return CoreParams(V_th=V_th, alpha=alpha, eta=eta,
                      noise_scale=noise_scale, seed=seed)


@pytest.fixture(autouse=True)
def _quiet_alpha_warning():
    # the reference leakage -0.3 is deliberately outside [0, 1]; tests that
    # assert on the warning re-enable it locally
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="leakage alpha")
        yield


def mnist_available() -> bool:
    return all((DATA_DIR / f).exists() for f in (
        "train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz",
        "t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"))


needs_mnist = pytest.mark.skipif(
    not mnist_available(), reason="MNIST IDX files missing from data/mnist")
