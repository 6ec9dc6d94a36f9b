import numpy as np
import pytest

from arealaw import build_model, diagonalize
from arealaw.agsp import build_agsp

# Pauli matrices for building oracle Hamiltonians independently of the package
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])


def kron_chain(ops):
    out = ops[0]
    for o in ops[1:]:
        out = np.kron(out, o)
    return out


def site_op(op, i, n):
    mats = [np.eye(2)] * n
    mats[i - 1] = op
    return kron_chain(mats)


def tfim_dense_oracle(n, h):
    """Independent dense TFIM with uniform transverse field."""
    ham = np.zeros((2**n, 2**n))
    for i in range(1, n):
        ham -= site_op(SZ, i, n) @ site_op(SZ, i + 1, n)
    for i in range(1, n + 1):
        ham -= h * site_op(SX, i, n)
    return ham


_MODELS = {}
_SPECTRA = {}
_AGSP = {}


def get_model(n, h):
    key = (n, h)
    if key not in _MODELS:
        _MODELS[key] = build_model("transverse_ising", n, {"h": h})
    return _MODELS[key]


def get_spectrum(n, h):
    key = (n, h)
    if key not in _SPECTRA:
        _SPECTRA[key] = diagonalize(get_model(n, h))
    return _SPECTRA[key]


def get_agsp(n, h, j, l, v=1.0, **kwargs):
    """Session-cached construction records shared across tests."""
    key = (n, h, j, l, v, tuple(sorted(kwargs.items())))
    if key not in _AGSP:
        _AGSP[key] = build_agsp(get_model(n, h), get_spectrum(n, h), j, l, v=v, **kwargs)
    return _AGSP[key]


@pytest.fixture(scope="session")
def tfim_models():
    return get_model


@pytest.fixture(scope="session")
def tfim_spectra():
    return get_spectrum


@pytest.fixture(scope="session")
def agsp_records():
    return get_agsp
