"""Matrix product state truncation, Schmidt-tail estimates, and the
forward-backward correlation functional with its randomized probe.

Truncation is a left-to-right sweep of singular value decompositions.  The
kept subspaces are nested, which makes the infidelity of the normalized
truncated state exactly the sum of the discarded squared singular values;
the bound checked downstream is that identity relaxed to an inequality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .entanglement import schmidt_cut
from .expander import ExpanderMPS, expander_to_statevector
from .locality import LocalOperator, interval_distance
from .util import write_csv


@dataclass
class MatrixProductState:
    """Site tensors with shape (bond_left, physical, bond_right)."""

    n_sites: int
    local_dim: int
    tensors: list = field(repr=False)
    canonical_form: str = "none"
    discarded_weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def bond_dims(self):
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def total_discarded(self):
        if self.discarded_weights is None:
            return 0.0
        return float(np.sum(self.discarded_weights))

    def to_statevector(self):
        acc = np.ones((1, 1))
        for t in self.tensors:
            acc = np.einsum("pa,asb->psb", acc, t)
            acc = acc.reshape(-1, t.shape[2])
        return acc.reshape(-1)

    def check_left_canonical(self, tol=1e-10):
        """All but the last tensor must be isometries: sum_s A(s)^dag A(s) = 1."""
        for idx, t in enumerate(self.tensors[:-1]):
            g = np.einsum("asb,asc->bc", t.conj(), t)
            if np.linalg.norm(g - np.eye(g.shape[0]), 2) > tol:
                raise AssertionError(f"tensor {idx} is not left-orthonormal")
        return True


def state_to_mps(state, max_bond, cut_tolerance=0.0, local_dim=2, max_elements=2**24):
    """Truncate a state vector to an MPS by successive SVDs, keeping at most
    max_bond values per cut and dropping squared singular values at or below
    cut_tolerance.  Discarded weights are recorded in the original norm
    units, so their sum equals the infidelity of the normalized result."""
    psi = np.asarray(state)
    if psi.size > max_elements:
        raise ValueError("state exceeds the element budget")
    n_sites = int(round(np.log(psi.size) / np.log(local_dim)))
    if local_dim**n_sites != psi.size:
        raise ValueError("state size is not a power of local_dim")
    if max_bond < 1:
        raise ValueError("max_bond must be >= 1")
    tensors = []
    discarded = []
    chi = 1
    rest = psi.reshape(1, -1)
    for site in range(n_sites - 1):
        m = rest.reshape(chi * local_dim, -1)
        u, s, vh = np.linalg.svd(m, full_matrices=False)
        keep = min(max_bond, int(np.sum(s**2 > cut_tolerance)))
        keep = max(keep, 1)
        discarded.append(float(np.sum(s[keep:] ** 2)))
        u = u[:, :keep]
        tensors.append(u.reshape(chi, local_dim, keep))
        rest = s[:keep, None] * vh[:keep]
        chi = keep
    last = rest.reshape(chi, local_dim, 1)
    norm = np.linalg.norm(last)
    if norm > 0:
        last = last / norm
    tensors.append(last)
    return MatrixProductState(
        n_sites=n_sites,
        local_dim=local_dim,
        tensors=tensors,
        canonical_form="left",
        discarded_weights=np.array(discarded),
    )


def mps_infidelity(mps, state):
    """1 - |<mps|state>|^2 for a normalized reference state."""
    overlap = np.vdot(mps.to_statevector(), np.asarray(state))
    return float(1.0 - np.abs(overlap) ** 2)


def product_mps(n_sites, local_dim, site_vector=None):
    """Bond-dimension-1 product state, |0...0> by default."""
    if site_vector is None:
        site_vector = np.zeros(local_dim)
        site_vector[0] = 1.0
    site_vector = np.asarray(site_vector, dtype=float)
    site_vector = site_vector / np.linalg.norm(site_vector)
    t = site_vector.reshape(1, local_dim, 1)
    return MatrixProductState(
        n_sites=n_sites, local_dim=local_dim,
        tensors=[t.copy() for _ in range(n_sites)],
        canonical_form="left",
        discarded_weights=np.zeros(n_sites - 1),
    )


# ---------------------------------------------------------------------------
# Schmidt tails and the entropy-rank relation
# ---------------------------------------------------------------------------


def schmidt_tail(cut, k_prime):
    """Total squared weight of Schmidt coefficients with index >= k_prime
    (1-based)."""
    if k_prime < 1:
        raise ValueError("k_prime must be >= 1")
    lam = cut.squared
    if k_prime > len(lam):
        return 0.0
    return float(np.sum(lam[k_prime - 1 :]))


def k0_from_entropy(s):
    """Rank scale exp(2S)/2 below which at least half the weight must sit."""
    if s < 0:
        raise ValueError("entropy must be non-negative")
    return float(np.exp(2.0 * s) / 2.0)


def k0_mass_check(cut, s=None):
    """Check sum_{alpha <= ceil(k0)} weight >= 1/2 for k0 = exp(2S)/2.

    Returns (k0, mass, ok)."""
    if s is None:
        s = cut.entropy()
    k0 = k0_from_entropy(s)
    top = int(np.ceil(k0))
    lam = cut.squared
    mass = float(np.sum(lam[: min(top, len(lam))]))
    return k0, mass, mass >= 0.5 - 1e-12


def schmidt_tail_profile(cut, k_primes, k0=None):
    """Rows (k_prime, tail, floor_log_D(k'/k0)) for the tail-shape fit."""
    if k0 is None:
        k0 = k0_from_entropy(cut.entropy())
    d = None
    rows = []
    for kp in k_primes:
        rows.append({"k_prime": int(kp), "tail": schmidt_tail(cut, int(kp)), "k0": k0})
    return rows


def tail_floor_index(k_prime, k0, local_dim):
    """floor(log_D(k'/k0)), the step index of the tail bound."""
    return int(np.floor(np.log(k_prime / k0) / np.log(local_dim)))


def geometric_tail_sequence(cut, local_dim, m_list, k0=None):
    """Tails at the geometric ranks k0 * D^(2m), one row per m; the weight
    beyond rank floor(k0 D^(2m)) decays exponentially in m for gapped
    ground states."""
    if k0 is None:
        k0 = k0_from_entropy(cut.entropy())
    rows = []
    for m in m_list:
        k_prime = int(np.floor(k0 * local_dim ** (2 * m))) + 1
        rows.append({"m": int(m), "k_prime": k_prime, "tail": schmidt_tail(cut, k_prime)})
    return rows


# ---------------------------------------------------------------------------
# forward-backward correlation functional
# ---------------------------------------------------------------------------


def apply_local(vec, op, interval, n_sites, local_dim):
    """Apply an operator on sites interval=(a, b) to a state vector."""
    a, b = interval
    dl = local_dim ** (a - 1)
    dm = local_dim ** (b - a + 1)
    dr = local_dim ** (n_sites - b)
    v3 = vec.reshape(dl, dm, dr)
    return np.einsum("mk,lkr->lmr", op, v3).reshape(-1)


def _as_state(source, n_sites, local_dim):
    if isinstance(source, ExpanderMPS):
        return expander_to_statevector(source, n_sites)
    if isinstance(source, MatrixProductState):
        return source.to_statevector()
    psi = np.asarray(source)
    if psi.size != local_dim**n_sites:
        raise ValueError("state size does not match the chain")
    return psi / np.linalg.norm(psi)


def fwdback_functional(state, j, l, a_ops, o_weights, n_sites, local_dim, norm_tol=1e-9):
    """Connected correlator <A B_L> - <A><B_L> of the ground state, where
    B_L = sum_a O(a) |L_a><L_a| x 1 is diagonal in the cut-j left Schmidt
    basis and A = A_left x A_right acts outside the window [j-l+1, j+l].

    a_ops is (LocalOperator or None, LocalOperator or None) for the far-left
    and far-right factors; ||A|| <= 1 and |O(a)| <= 1 are enforced.  Returns
    the real part (states and weights here are real)."""
    psi = np.asarray(state)
    window = (max(1, j - l + 1), min(n_sites, j + l))
    a_left, a_right = a_ops if isinstance(a_ops, tuple) else (a_ops, None)
    for part in (a_left, a_right):
        if part is None:
            continue
        if interval_distance(part.interval, window) == 0:
            raise ValueError(
                f"support {part.interval} of A intersects the window {window}"
            )
        if part.norm > 1.0 + norm_tol:
            raise ValueError(f"||A factor|| = {part.norm} exceeds 1")
    cut = schmidt_cut(psi, j, n_sites, local_dim)
    o = np.asarray(o_weights, dtype=float)
    if len(o) < len(cut.coefficients):
        o = np.concatenate([o, np.zeros(len(cut.coefficients) - len(o))])
    o = o[: len(cut.coefficients)]
    if np.max(np.abs(o)) > 1.0 + norm_tol:
        raise ValueError("|O(alpha)| must not exceed 1")

    bl_psi = ((cut.left_basis * (o * cut.coefficients)) @ cut.right_basis).reshape(-1)
    a_psi = psi
    a_bl_psi = bl_psi
    for part in (a_left, a_right):
        if part is not None:
            a_psi = apply_local(a_psi, part.matrix, part.interval, n_sites, local_dim)
            a_bl_psi = apply_local(a_bl_psi, part.matrix, part.interval, n_sites, local_dim)
    exp_a = np.vdot(psi, a_psi)
    exp_bl = float(np.sum(o * cut.squared))
    connected = np.vdot(psi, a_bl_psi) - exp_a * exp_bl
    return float(np.real(connected))


@dataclass
class ProbeResult:
    rows: list

    def max_functional(self, l):
        return max(r["functional"] for r in self.rows if r["l"] == l)

    def violations(self):
        return sum(1 for r in self.rows if r.get("violation", False))


def conjecture_probe(
    source,
    n_sites,
    l_list,
    trials,
    seed,
    local_dim=None,
    j=None,
    xi_prime_sweep=(2.0, 4.0, 6.0),
    c1=1.0,
    epsilon_by_l=None,
):
    """Randomized search for large values of the forward-backward functional.

    For each l: sample random far-region product operators A, take the
    exactly optimal sign pattern O(alpha) for each sample (the functional is
    linear in O), and record the largest value found.  The value is compared
    against 3 sqrt(2 eps) + eps with eps either measured (epsilon_by_l) or
    the exponential ansatz c1 exp(-l/xi') over the swept xi'.  Returns a
    report; it never raises on violations (that is the point of probing)."""
    if isinstance(source, ExpanderMPS):
        local_dim = source.degree
    elif local_dim is None:
        raise ValueError("local_dim required for non-expander sources")
    psi = _as_state(source, n_sites, local_dim)
    if j is None:
        j = n_sites // 2
    rng = np.random.default_rng(int(seed))
    cut = schmidt_cut(psi, j, n_sites, local_dim)
    lam = cut.squared
    mid_entropy = cut.entropy()
    rows = []
    for l in l_list:
        window = (max(1, j - l + 1), min(n_sites, j + l))
        far_left = (1, j - l) if j - l >= 1 else None
        far_right = (j + l + 1, n_sites) if j + l + 1 <= n_sites else None
        best = 0.0
        for _ in range(max(int(trials), 1)):
            a_ops = []
            for region in (far_left, far_right):
                if region is None:
                    a_ops.append(None)
                    continue
                lo = int(rng.integers(region[0], region[1] + 1))
                hi = int(rng.integers(lo, region[1] + 1))
                dm = local_dim ** (hi - lo + 1)
                r = rng.standard_normal((dm, dm))
                r = 0.5 * (r + r.T)
                r /= max(np.linalg.norm(r, 2), 1e-300)
                a_ops.append(LocalOperator(matrix=r, interval=(lo, hi)))
            # the functional is linear in O: value = sum_a O(a) coeff(a) with
            # coeff(a) = A0(a) <L_a R_a|A psi> - <A> |A0(a)|^2, so the optimal
            # sign pattern is exact
            a_psi = psi
            for part in a_ops:
                if part is not None:
                    a_psi = apply_local(a_psi, part.matrix, part.interval, n_sites, local_dim)
            exp_a = float(np.real(np.vdot(psi, a_psi)))
            amp = np.einsum(
                "la,lr,ar->a",
                cut.left_basis.conj(),
                a_psi.reshape(cut.left_basis.shape[0], -1),
                cut.right_basis.conj(),
            )
            coeff = np.real(cut.coefficients * amp) - exp_a * lam
            o_opt = np.sign(coeff)
            value = float(np.sum(coeff * o_opt))
            best = max(best, value)
        if epsilon_by_l is not None and l in epsilon_by_l:
            eps = float(epsilon_by_l[l])
            bound = 3.0 * np.sqrt(2.0 * eps) + eps
            rows.append(
                {
                    "l": int(l), "trials": int(trials), "functional": best,
                    "xi_prime": 0.0, "epsilon": eps, "bound": bound,
                    "margin": best - bound, "violation": best > bound,
                    "entropy": mid_entropy,
                }
            )
        else:
            for xp in xi_prime_sweep:
                eps = float(c1 * np.exp(-l / xp))
                bound = 3.0 * np.sqrt(2.0 * eps) + eps
                rows.append(
                    {
                        "l": int(l), "trials": int(trials), "functional": best,
                        "xi_prime": float(xp), "epsilon": eps, "bound": bound,
                        "margin": best - bound, "violation": best > bound,
                        "entropy": mid_entropy,
                    }
                )
    return ProbeResult(rows)


def write_probe_report(path, result, extra_columns=None):
    extra = extra_columns or {}
    header = list(extra) + [
        "l", "trials", "functional", "xi_prime", "epsilon", "bound",
        "margin", "violation", "entropy",
    ]
    write_csv(path, header, [{**extra, **r} for r in result.rows])
