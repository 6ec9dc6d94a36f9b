"""Reduced density matrices, Schmidt decompositions, and entropy functionals.

Entropies follow the standard non-negative convention S = -tr(rho ln rho),
in nats.  Schmidt data is obtained from an SVD of the state reshaped across
the cut, which realizes the orthonormal-product expansion directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .util import write_csv

EIG_CLIP = 1e-10  # reduced-density eigenvalues in [-EIG_CLIP, 0) are noise
TRACE_TOL = 1e-8
SUPPORT_MASS_TOL = 1e-8  # rho mass on exact zeros of sigma that forces +inf


@dataclass
class CutData:
    """Schmidt decomposition of a pure state across the cut between sites
    j and j+1: descending coefficients and orthonormal product bases."""

    cut: int
    coefficients: np.ndarray = field(repr=False)
    left_basis: np.ndarray = field(repr=False)   # columns on sites 1..j
    right_basis: np.ndarray = field(repr=False)  # rows on sites j+1..N

    def validate(self, tol=1e-10):
        c = self.coefficients
        if np.any(np.diff(c) > tol):
            raise AssertionError("Schmidt coefficients not descending")
        if abs(np.sum(c**2) - 1.0) > tol:
            raise AssertionError("Schmidt coefficients not normalized")
        gl = self.left_basis.conj().T @ self.left_basis
        gr = self.right_basis @ self.right_basis.conj().T
        if np.linalg.norm(gl - np.eye(gl.shape[0]), 2) > tol:
            raise AssertionError("left Schmidt basis not orthonormal")
        if np.linalg.norm(gr - np.eye(gr.shape[0]), 2) > tol:
            raise AssertionError("right Schmidt basis not orthonormal")
        return True

    def reconstruct(self):
        """Reassemble the state vector from the decomposition."""
        m = (self.left_basis * self.coefficients) @ self.right_basis
        return m.reshape(-1)

    @property
    def squared(self):
        return self.coefficients**2

    def entropy(self):
        p = self.squared
        p = p[p > 0]
        return float(-np.sum(p * np.log(p)))


def reduced_density(state, interval, n_sites, local_dim):
    """Reduced density matrix of a pure state on sites interval=(a, b)."""
    a, b = interval
    if not (1 <= a <= b <= n_sites):
        raise ValueError(f"interval {interval} out of range")
    psi = np.asarray(state).reshape(
        local_dim ** (a - 1), local_dim ** (b - a + 1), local_dim ** (n_sites - b)
    )
    rho = np.einsum("lmr,lnr->mn", psi, psi.conj())
    return rho


def schmidt_cut(state, j, n_sites, local_dim):
    """Schmidt decomposition across the cut between sites j and j+1."""
    if not (1 <= j <= n_sites - 1):
        raise ValueError(f"cut {j} out of range for {n_sites} sites")
    m = np.asarray(state).reshape(local_dim**j, local_dim ** (n_sites - j))
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return CutData(cut=j, coefficients=s, left_basis=u, right_basis=vh)


def _spectrum(rho, clip=EIG_CLIP, check_trace=True):
    rho = np.asarray(rho)
    tr = float(np.trace(rho).real)
    if check_trace and abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix trace {tr} deviates from 1")
    w = np.linalg.eigvalsh(rho)
    if np.min(w) < -clip:
        raise ValueError(f"density matrix has eigenvalue {np.min(w):.3e} below -{clip}")
    return np.clip(w, 0.0, None)


def von_neumann_entropy(rho):
    """S = -tr(rho ln rho), with 0 ln 0 = 0."""
    p = _spectrum(rho)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def renyi_entropy(rho, alpha):
    """S_alpha = ln(tr rho^alpha) / (1 - alpha) for alpha > 0, alpha != 1."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if alpha == 1.0:
        raise ValueError("alpha = 1 is the von Neumann limit; use von_neumann_entropy")
    p = _spectrum(rho)
    p = p[p > 0]
    return float(np.log(np.sum(p**alpha)) / (1.0 - alpha))


def relative_entropy(rho, sigma):
    """S(rho || sigma) = tr rho (ln rho - ln sigma); +inf outside sigma's support."""
    p = _spectrum(rho)
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    w, v = np.linalg.eigh(sigma)
    w = np.clip(w, 0.0, None)
    # only exactly-vanishing (clipped) eigenvalues count as outside the
    # support; tiny positive ones carry their logarithms, whose weight in
    # rho is comparably tiny whenever the inputs are consistent
    support = w > 0.0
    if not np.all(support):
        v_null = v[:, ~support]
        outside = float(np.trace(v_null.conj().T @ rho @ v_null).real)
        if outside > SUPPORT_MASS_TOL:
            return float("inf")
    pv = p[p > 0]
    term1 = float(np.sum(pv * np.log(pv)))
    v_sup = v[:, support]
    diag = np.einsum("ij,jk,ki->i", v_sup.conj().T, rho, v_sup).real
    term2 = float(np.sum(diag * np.log(w[support])))
    return max(term1 - term2, 0.0)


def mutual_information(state, left, right, n_sites, local_dim):
    """I = S(A) + S(B) - S(AB) for adjacent intervals left=(a,j), right=(j+1,b)."""
    sa = von_neumann_entropy(reduced_density(state, left, n_sites, local_dim))
    sb = von_neumann_entropy(reduced_density(state, right, n_sites, local_dim))
    sab = von_neumann_entropy(reduced_density(state, (left[0], right[1]), n_sites, local_dim))
    return sa + sb - sab


@dataclass
class MeasurementBoundReport:
    """Two-outcome data-processing check: the quantum relative entropy must
    dominate the binary divergence of the outcome probabilities."""

    p: float
    x: float
    relative_entropy: float
    classical_bound: float
    slack: float


def _binary_divergence(p, x):
    terms = 0.0
    if p > 0:
        if x == 0:
            return float("inf")
        terms += p * np.log(p / x)
    if p < 1:
        if x == 1:
            return float("inf")
        terms += (1 - p) * np.log((1 - p) / (1 - x))
    return float(terms)


def lindblad_uhlmann_check(rho, sigma, m, operator_tol=1e-10):
    """Check S(rho||sigma) >= d(p||x) for the POVM {m, 1-m} with
    p = tr(rho m), x = tr(sigma m).  Requires 0 <= m <= 1."""
    m = np.asarray(m)
    w = np.linalg.eigvalsh(m)
    if np.min(w) < -operator_tol or np.max(w) > 1 + operator_tol:
        raise ValueError(
            f"measurement operator eigenvalues in [{np.min(w):.3e}, {np.max(w):.3e}] "
            "are outside [0, 1]"
        )
    p = float(np.clip(np.trace(rho @ m).real, 0.0, 1.0))
    x = float(np.clip(np.trace(sigma @ m).real, 0.0, 1.0))
    if x in (0.0, 1.0) and abs(p - x) > 1e-12:
        raise ValueError(
            f"outcome probability x={x} is deterministic under sigma while p={p}: "
            "classical divergence infinite, numerical inconsistency"
        )
    s_rel = relative_entropy(rho, sigma)
    bound = _binary_divergence(p, x)
    slack = float("inf") if np.isinf(s_rel) else s_rel - bound
    return MeasurementBoundReport(p, x, s_rel, bound, float(slack))


# ---------------------------------------------------------------------------
# entropy profiles
# ---------------------------------------------------------------------------

PROFILE_SCHMIDT_COUNT = 32


def entropy_profile(state, n_sites, local_dim, alphas=(0.5, 2.0)):
    """Per-cut entropies and leading Schmidt coefficients of a pure state.

    Returns a list of dict rows: cut, entropy, renyi_<alpha>..., and the
    largest 32 Schmidt coefficients (zero-padded).
    """
    rows = []
    for j in range(1, n_sites):
        cut = schmidt_cut(state, j, n_sites, local_dim)
        p = cut.squared
        p = p[p > 0]
        row = {"cut": j, "entropy": float(-np.sum(p * np.log(p)))}
        for a in alphas:
            row[f"renyi_{a:g}"] = float(np.log(np.sum(p**a)) / (1.0 - a))
        coeffs = np.zeros(PROFILE_SCHMIDT_COUNT)
        top = cut.coefficients[:PROFILE_SCHMIDT_COUNT]
        coeffs[: len(top)] = top
        for k in range(PROFILE_SCHMIDT_COUNT):
            row[f"schmidt_{k + 1:02d}"] = float(coeffs[k])
        rows.append(row)
    return rows


def write_entropy_profile(path, rows, extra_columns=None):
    """Write an entropy profile to CSV; extra_columns prefixes provenance."""
    extra = extra_columns or {}
    header = list(extra) + list(rows[0].keys()) if rows else list(extra)
    out = [{**extra, **r} for r in rows]
    write_csv(path, header, out)
