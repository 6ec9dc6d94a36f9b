import numpy as np
import pytest

from arealaw.lattice import (
    Hamiltonian1D,
    block_sites,
    build_model,
    load_model,
    load_terms,
    save_model,
    save_terms,
)

from conftest import tfim_dense_oracle


def test_tfim_classical_limit_single_term():
    h = build_model("transverse_ising", 2, {"h": 0.0})
    assert len(h.terms) == 1
    zz = np.diag([1.0, -1.0, -1.0, 1.0])
    assert np.allclose(h.terms[0], -zz)
    assert h.j_bound == pytest.approx(1.0)


def test_tfim_term_norms_and_j_bound():
    n, field = 10, 2.0
    h = build_model("transverse_ising", n, {"h": field})
    assert len(h.terms) == n - 1
    norms = [np.max(np.abs(np.linalg.eigvalsh(t))) for t in h.terms]
    # interior bonds: coupling plus two half fields
    for k in range(1, n - 2):
        assert norms[k] <= 1.0 + field + 1e-12
    assert h.j_bound == pytest.approx(max(norms))


def test_tfim_matches_uniform_field_oracle():
    n, field = 6, 1.7
    h = build_model("transverse_ising", n, {"h": field})
    assert np.allclose(h.to_dense(), tfim_dense_oracle(n, field), atol=1e-12)


def test_custom_round_trip_and_hermiticity():
    rng = np.random.default_rng(3)
    terms = []
    for _ in range(2):
        t = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        terms.append(0.5 * (t + t.conj().T))
    h = build_model("custom", 3, terms=terms)
    for given, stored in zip(terms, h.terms):
        assert np.allclose(given, stored, atol=1e-12)
    bad = terms[0].copy()
    bad[0, 1] += 1.0  # breaks Hermiticity
    with pytest.raises(ValueError, match="Hermitian"):
        build_model("custom", 3, terms=[bad, terms[1]])


def test_unknown_family_and_missing_params():
    with pytest.raises(ValueError, match="unknown model family"):
        build_model("heisenberg3d", 4)
    with pytest.raises(ValueError, match="requires parameter"):
        build_model("transverse_ising", 4)
    with pytest.raises(ValueError, match="n_sites"):
        build_model("transverse_ising", 1, {"h": 1.0})


def test_terms_are_immutable():
    h = build_model("transverse_ising", 4, {"h": 1.0})
    with pytest.raises(ValueError):
        h.terms[0][0, 0] = 99.0


def test_xxz_hermitian_and_shape():
    h = build_model("xxz", 5, {"delta": 1.5})
    assert len(h.terms) == 4
    for t in h.terms:
        assert np.allclose(t, t.conj().T)


def test_random_gapped_deterministic():
    h1 = build_model("random_gapped", 5, {"g": 1.0, "lam": 0.1, "seed": 11})
    h2 = build_model("random_gapped", 5, {"g": 1.0, "lam": 0.1, "seed": 11})
    for a, b in zip(h1.terms, h2.terms):
        assert np.array_equal(a, b)


def test_block_sites_identity():
    h = build_model("transverse_ising", 6, {"h": 1.3})
    assert block_sites(h, 1) is h


@pytest.mark.parametrize("n,b", [(4, 2), (6, 3)])
def test_block_sites_preserves_spectrum(n, b):
    h = build_model("transverse_ising", n, {"h": 2.0})
    hb = block_sites(h, b)
    assert hb.n_sites == n // b
    assert hb.local_dim == 2**b
    w1 = np.linalg.eigvalsh(h.to_dense())
    w2 = np.linalg.eigvalsh(hb.to_dense())
    assert np.allclose(w1, w2, atol=1e-10)


def test_block_sites_rejects_non_divisor():
    h = build_model("transverse_ising", 6, {"h": 1.0})
    with pytest.raises(ValueError, match="divide"):
        block_sites(h, 4)


def test_model_file_round_trip(tmp_path):
    path = tmp_path / "model.cfg"
    save_model(
        build_model("transverse_ising", 6, {"h": 1.5}),
        path,
        family="transverse_ising",
        params={"h": 1.5},
    )
    h = load_model(path)
    assert h.n_sites == 6
    assert np.allclose(h.to_dense(), build_model("transverse_ising", 6, {"h": 1.5}).to_dense())


@pytest.mark.parametrize("suffix", [".txt", ".bin"])
def test_terms_file_round_trip(tmp_path, suffix):
    rng = np.random.default_rng(0)
    t = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    terms = [0.5 * (t + t.conj().T)]
    path = tmp_path / f"terms{suffix}"
    save_terms(terms, path)
    loaded = load_terms(path)
    assert np.allclose(loaded[0], terms[0], atol=1e-15)


def test_custom_model_file_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    t = rng.standard_normal((4, 4))
    terms = [0.5 * (t + t.T)] * 3
    h = build_model("custom", 4, terms=terms)
    path = tmp_path / "custom.cfg"
    save_model(h, path)
    h2 = load_model(path)
    assert np.allclose(h.to_dense(), h2.to_dense(), atol=1e-14)


def test_blocked_ground_energy_matches():
    h = build_model("transverse_ising", 6, {"h": 2.0})
    hb = block_sites(h, 3)
    e1 = np.linalg.eigvalsh(h.to_dense())[0]
    e2 = np.linalg.eigvalsh(hb.to_dense())[0]
    assert e1 == pytest.approx(e2, abs=1e-10)
