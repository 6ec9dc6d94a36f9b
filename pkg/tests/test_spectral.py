import numpy as np
import pytest
import scipy.linalg as sla

from arealaw.lattice import build_model
from arealaw.spectral import (
    DegenerateGroundStateError,
    DimensionBudgetError,
    SpectralCache,
    diagonalize,
    evolve,
    gaussian_filter_operator,
    gaussian_filter_projector,
    projector_filter_error,
    quadrature_filter_operator,
    quadrature_filter_projector,
)
from arealaw.util import embed_operator

from conftest import SX, SZ, get_model, get_spectrum, site_op


def two_site_tfim_oracle(field):
    """Hand-built 4x4 transverse Ising matrix for the 2-site chain."""
    zz = np.diag([1.0, -1.0, -1.0, 1.0])
    xi = np.kron(SX, np.eye(2))
    ix = np.kron(np.eye(2), SX)
    return -zz - field * (xi + ix)


def test_two_site_eigenvalues_match_hand_matrix():
    sd = get_spectrum(2, 2.0)
    oracle = np.linalg.eigvalsh(two_site_tfim_oracle(2.0))
    assert np.allclose(sd.energies + sd.energy_shift, oracle, atol=1e-12)


def test_degenerate_ground_state_is_rejected():
    # zero Hamiltonian on a single site: every energy equal
    h = build_model("custom", 2, terms=[np.zeros((4, 4))])
    with pytest.raises(DegenerateGroundStateError):
        diagonalize(h)


def test_budget_guard():
    h = get_model(6, 1.5)
    with pytest.raises(DimensionBudgetError):
        diagonalize(h, max_dim=2**5)


def test_lowest_m_matches_full_gap():
    h = get_model(10, 1.5)
    full = get_spectrum(10, 1.5)
    low = diagonalize(h, mode="lowest_m", m=4)
    assert low.gap == pytest.approx(full.gap, abs=1e-8)
    assert low.energies[0] == 0.0
    overlap = abs(np.vdot(low.ground_state, full.ground_state))
    assert overlap == pytest.approx(1.0, abs=1e-8)


def test_spectral_data_invariants():
    sd = get_spectrum(6, 2.0)
    sd.validate(tol=1e-10)
    assert np.all(np.diff(sd.energies) >= -1e-12)


def test_evolve_identity_and_time_zero():
    sd = get_spectrum(4, 1.2)
    eye = np.eye(sd.hilbert_dim)
    assert np.allclose(evolve(sd, eye, 0.83), eye, atol=1e-12)
    a = site_op(SZ, 1, 4)
    assert np.allclose(evolve(sd, a, 0.0), a, atol=1e-12)


def test_evolve_against_expm_oracle():
    n, field, t = 6, 1.5, 0.7
    sd = get_spectrum(n, field)
    a = site_op(SZ, 1, n)
    got = evolve(sd, a, t)
    hm = get_model(n, field).to_dense()
    u = sla.expm(1j * t * hm)
    want = u @ a @ u.conj().T
    assert np.linalg.norm(got - want, 2) < 1e-7


def test_evolve_preserves_singular_values():
    n = 5
    sd = get_spectrum(n, 2.0)
    rng = np.random.default_rng(0)
    a = rng.standard_normal((2**n, 2**n))
    sv0 = np.linalg.svd(a, compute_uv=False)
    sv1 = np.linalg.svd(evolve(sd, a, 1.3), compute_uv=False)
    assert np.allclose(sv0, sv1, atol=1e-9)


def test_evolve_dimension_mismatch():
    sd = get_spectrum(4, 1.0)
    with pytest.raises(ValueError, match="dimension"):
        evolve(sd, np.eye(7), 0.1)


def test_filter_fixes_diagonal_operator():
    sd = get_spectrum(4, 2.0)
    v = sd.eigenvectors
    diag_op = v @ np.diag(np.arange(sd.hilbert_dim, dtype=float)) @ v.T
    out = gaussian_filter_operator(sd, diag_op, 3.0)
    assert np.allclose(out, diag_op, atol=1e-10)


def test_two_level_offdiagonal_damping():
    # two-level system with splitting equal to the gap: off-diagonal elements
    # pick up exactly exp(-q/2) at q = 2 ... exponent q (E1-E0)^2/(2 gap^2) = 1
    delta = 0.9
    h = build_model("custom", 2, terms=[np.diag([0.0, delta, delta + 7.0, delta + 9.0])])
    sd = diagonalize(h)
    a = np.zeros((4, 4))
    a[0, 1] = a[1, 0] = 1.0
    a_eig = sd.eigenvectors @ a @ sd.eigenvectors.T
    out = gaussian_filter_operator(sd, a_eig, 2.0)
    back = sd.eigenvectors.T @ out @ sd.eigenvectors
    assert back[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_filter_sum_reproduces_hamiltonian():
    n, field = 6, 2.0
    sd = get_spectrum(n, field)
    model = get_model(n, field)
    thirds = [model.term_embedded(i) for i in range(1, n)]
    h_l = sum(thirds[:2])
    h_b = sum(thirds[2:4])
    h_r = sum(thirds[4:])
    q = 2.5
    total = (
        gaussian_filter_operator(sd, h_l, q)
        + gaussian_filter_operator(sd, h_b, q)
        + gaussian_filter_operator(sd, h_r, q)
    )
    assert np.linalg.norm(total - (h_l + h_b + h_r), 2) < 1e-9


def test_projector_filter_spectral_form():
    sd = get_spectrum(6, 2.0)
    q = 2.0
    p_q = gaussian_filter_projector(sd, q)
    v = sd.eigenvectors
    want = (v * np.exp(-q * sd.energies**2 / (2 * sd.gap**2))) @ v.T
    assert np.allclose(p_q, want, atol=1e-10)
    err = np.linalg.norm(p_q - sd.ground_projector, 2)
    assert err == pytest.approx(projector_filter_error(sd, q), abs=1e-10)
    assert err <= np.exp(-q / 2.0) + 1e-12


def test_two_level_projector_error():
    delta = 1.3
    h = build_model("custom", 2, terms=[np.diag([0.0, delta, 5.0, 9.0])])
    sd = diagonalize(h)
    p_q = gaussian_filter_projector(sd, 2.0)
    err = np.linalg.norm(p_q - sd.ground_projector, 2)
    assert err == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_single_level_system_projector_is_identity():
    h = build_model("custom", 2, terms=[np.array([[2.5]])], local_dim=1)
    sd = diagonalize(h)
    assert sd.gap == np.inf
    assert np.allclose(gaussian_filter_projector(sd, 3.0), np.eye(1))
    assert np.allclose(sd.ground_projector, np.eye(1))


def test_projector_error_decays_with_q():
    sd = get_spectrum(8, 2.0)
    qs = np.array([1.0, 2.0, 4.0, 6.0])
    errs = [np.linalg.norm(gaussian_filter_projector(sd, q) - sd.ground_projector, 2) for q in qs]
    assert np.all(np.diff(errs) < 0)
    # log-linear in q with slope -1/2 once the first excited level dominates
    slopes = np.diff(np.log(errs)) / np.diff(qs)
    assert slopes[-1] == pytest.approx(-0.5, abs=1e-3)


@pytest.mark.parametrize("n,field,q", [(4, 2.0, 3.0), (6, 2.0, 3.0)])
def test_spectral_vs_quadrature_operator(n, field, q):
    sd = get_spectrum(n, field)
    model = get_model(n, field)
    h_l = sum(model.term_embedded(i) for i in range(1, n // 2))
    spec = gaussian_filter_operator(sd, h_l, q)
    hm = model.to_dense()
    quad = quadrature_filter_operator(hm, sd.gap, h_l, q)
    assert np.linalg.norm(spec - quad, 2) < 1e-6


def test_spectral_vs_quadrature_projector():
    # 64 nodes resolve the full many-body bandwidth only for moderate q;
    # the operator filter (local matrix elements) is the wide-q use case
    n = 6
    sd = get_spectrum(n, 2.0)
    hm = get_model(n, 2.0).to_dense() - sd.energy_shift * np.eye(2**n)
    q = 0.75
    spec = gaussian_filter_projector(sd, q)
    quad = quadrature_filter_projector(hm, sd.gap, q)
    assert np.linalg.norm(spec - quad, 2) < 1e-6


def test_cache_round_trip(tmp_path):
    cache = SpectralCache(tmp_path)
    h = get_model(6, 1.5)
    sd = diagonalize(h, cache=cache)
    again = diagonalize(h, cache=cache)
    assert np.array_equal(sd.energies, again.energies)
    assert np.allclose(sd.eigenvectors, again.eigenvectors, atol=0)
    assert again.gap == sd.gap
    assert again.energy_shift == sd.energy_shift


def test_cache_distinguishes_models(tmp_path):
    cache = SpectralCache(tmp_path)
    diagonalize(get_model(4, 1.5), cache=cache)
    sd = diagonalize(get_model(4, 2.5), cache=cache)
    assert sd.gap == pytest.approx(get_spectrum(4, 2.5).gap, abs=1e-12)
