import pytest

from featesn import LorenzParams, RosslerParams, generate_lorenz, generate_rossler
from featesn.data import add_noise, channel_std


def _noisy_pair(series, n_train, seed=0):
    clean = series.values
    noisy = add_noise(series.slice(0, n_train + 1), 0.01 * channel_std(series.slice(0, n_train + 1)),
                      seed).values
    return noisy[:n_train], noisy[1:n_train + 1], clean


@pytest.fixture(scope="session")
def lorenz_train():
    """Reference Lorenz training pair (noisy) plus the clean trajectory."""
    series = generate_lorenz(LorenzParams(n_samples=5000 + 502))
    return _noisy_pair(series, 5000)


@pytest.fixture(scope="session")
def rossler_train():
    series = generate_rossler(RosslerParams(n_samples=1000 + 302))
    return _noisy_pair(series, 1000)
