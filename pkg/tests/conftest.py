import numpy as np
import pytest

from platescatter import WaveContext, preset, sample_cluster


@pytest.fixture(scope="session")
def nearfar_instance():
    """One representative solved-size nearfar draw shared across tests."""
    spec = preset("nearfar")
    rng = np.random.default_rng(2024)
    cluster, force, k = sample_cluster(spec, rng)
    ctx = WaveContext.from_wavenumber(spec.plate, k)
    return spec, ctx, cluster, force


def instance_of(name, seed):
    spec = preset(name)
    rng = np.random.default_rng(seed)
    cluster, force, k = sample_cluster(spec, rng)
    ctx = WaveContext.from_wavenumber(spec.plate, k)
    return spec, ctx, cluster, force
