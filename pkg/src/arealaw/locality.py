"""Light-cone measurements on finite chains and operator support truncation.

Commutator norms ||[A(t), B]|| are computed by dense evolution and collected
into profiles over (time, distance).  A velocity and a spatial decay length
are then extracted: the velocity from the earliest threshold crossings of
the commutator front, the decay length from a log-linear fit of the
outside-the-cone envelope against distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral import diagonalize, evolve
from .util import embed_operator, log_linear_fit, operator_norm, write_csv

CONE_THRESHOLD_FRACTION = 0.1  # norms above this fraction of ||A|| ||B|| are "inside"
NORM_FLOOR = 1e-14


@dataclass(frozen=True)
class LocalOperator:
    """An operator together with the chain interval (a, b) it acts on."""

    matrix: np.ndarray = field(repr=False)
    interval: tuple

    @property
    def norm(self):
        return float(np.linalg.norm(self.matrix, 2))

    def embedded(self, n_sites, local_dim):
        return embed_operator(self.matrix, self.interval, n_sites, local_dim)


def interval_distance(x, y):
    """min |i - j| over i in x, j in y; zero when the intervals overlap."""
    if x[0] > y[1]:
        return x[0] - y[1]
    if y[0] > x[1]:
        return y[0] - x[1]
    return 0


@dataclass
class ProfileRow:
    t: float
    distance: int
    norm: float
    norm_product: float  # ||A|| ||B||
    support_size: int    # |X|
    overlapping: bool


@dataclass
class CommutatorProfile:
    rows: list

    def distances(self):
        return sorted({r.distance for r in self.rows})

    def times(self):
        return sorted({r.t for r in self.rows})

    def extend(self, other):
        return CommutatorProfile(self.rows + other.rows)

    def write_csv(self, path, extra_columns=None):
        extra = extra_columns or {}
        header = list(extra) + ["t", "distance", "norm", "norm_product", "support_size", "overlapping"]
        rows = [
            {**extra, "t": r.t, "distance": r.distance, "norm": r.norm,
             "norm_product": r.norm_product, "support_size": r.support_size,
             "overlapping": r.overlapping}
            for r in self.rows
        ]
        write_csv(path, header, rows)


def commutator_norm_profile(h, a, b_ops, times, sd=None):
    """Measure ||[A(t), B]|| for one probe operator A and one or more B's.

    a and b_ops are LocalOperator instances (b_ops may be a single one).
    Overlapping supports are permitted but flagged in the rows.
    """
    if isinstance(b_ops, LocalOperator):
        b_ops = [b_ops]
    if sd is None:
        sd = diagonalize(h)
    n, d = h.n_sites, h.local_dim
    a_full = a.embedded(n, d)
    a_norm = a.norm
    support_size = a.interval[1] - a.interval[0] + 1
    rows = []
    b_data = []
    for b in b_ops:
        dist = interval_distance(a.interval, b.interval)
        b_data.append((b.embedded(n, d), b.norm, dist))
    for t in times:
        a_t = evolve(sd, a_full, t)
        for b_full, b_norm, dist in b_data:
            comm = a_t @ b_full - b_full @ a_t
            rows.append(
                ProfileRow(
                    t=float(t),
                    distance=int(dist),
                    norm=float(operator_norm(comm)),
                    norm_product=float(a_norm * b_norm),
                    support_size=support_size,
                    overlapping=dist == 0,
                )
            )
    return CommutatorProfile(rows)


class LocalityFitError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class LocalityConstants:
    """Fitted light-cone constants and the lengths derived from them."""

    v: float
    xi_c: float
    xi: float
    xi_prime: float
    fit_diagnostics: dict

    @classmethod
    def from_fit(cls, v, xi_c, delta_e, diagnostics=None):
        xi = max(2.0 * v / delta_e, xi_c)
        return cls(
            v=float(v),
            xi_c=float(xi_c),
            xi=float(xi),
            xi_prime=6.0 * xi,
            fit_diagnostics=diagnostics or {},
        )


def fit_locality_constants(profile, delta_e, threshold_fraction=CONE_THRESHOLD_FRACTION, r2_min=0.8):
    """Extract (v, xi_c) from a commutator profile.

    v is the smallest velocity whose cone contains every above-threshold row
    (equivalently max distance/|t| over threshold crossings).  xi_c comes
    from a log-linear fit of the per-distance envelope of below-threshold
    rows; its R^2 must reach r2_min.
    """
    rows = [r for r in profile.rows if not r.overlapping]
    if len({r.distance for r in rows}) < 3 or len({r.t for r in rows}) < 3:
        raise LocalityFitError("profile must span at least 3 distances and 3 times")
    if all(r.norm <= NORM_FLOOR for r in rows):
        raise LocalityFitError("degenerate fit: all commutator norms vanish")

    inside = [r for r in rows if r.norm > threshold_fraction * r.norm_product and r.t != 0.0]
    if inside:
        v = max(r.distance / abs(r.t) for r in inside)
        ballistic = True
    else:
        # nothing crossed the threshold on the sampled grid; bound v from it
        v = min(r.distance for r in rows) / max(abs(r.t) for r in rows if r.t != 0.0)
        ballistic = False

    envelope = {}
    for r in rows:
        if r.t == 0.0 or r.norm <= NORM_FLOOR:
            continue
        if r.norm > threshold_fraction * r.norm_product:
            continue
        envelope[r.distance] = max(envelope.get(r.distance, 0.0), r.norm)
    if len(envelope) < 2:
        raise LocalityFitError(
            "not enough below-threshold distances for a decay fit",
            {"v": v, "envelope_points": len(envelope)},
        )
    dists = np.array(sorted(envelope))
    norms = np.array([envelope[d] for d in dists])
    fit = log_linear_fit(dists, norms)
    if fit.slope >= 0:
        raise LocalityFitError(
            "commutator envelope does not decay with distance",
            {"slope": fit.slope, "r_squared": fit.r_squared},
        )
    if fit.r_squared < r2_min:
        raise LocalityFitError(
            f"envelope fit R^2 {fit.r_squared:.3f} below minimum {r2_min}",
            {"slope": fit.slope, "r_squared": fit.r_squared},
        )
    xi_c = -1.0 / fit.slope
    support = max((r.support_size for r in rows), default=1)
    c_fit = float(np.exp(fit.intercept)) / max(support, 1)
    diagnostics = {
        "r_squared": fit.r_squared,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residuals": [float(x) for x in fit.residuals],
        "c_fit": c_fit,
        "threshold_fraction": threshold_fraction,
        "ballistic_signal": ballistic,
        "n_rows": len(rows),
    }
    return LocalityConstants.from_fit(v, xi_c, delta_e, diagnostics)


def truncate_support(a, interval, n_sites, local_dim):
    """Conditional expectation onto operators supported on interval=(a, b):
    normalized partial trace over the complement tensored with identity.
    Unital, idempotent, and norm non-increasing."""
    lo, hi = interval
    if not (1 <= lo <= hi <= n_sites):
        raise ValueError(f"interval {interval} out of range")
    a = np.asarray(a)
    dl = local_dim ** (lo - 1)
    dm = local_dim ** (hi - lo + 1)
    dr = local_dim ** (n_sites - hi)
    a6 = a.reshape(dl, dm, dr, dl, dm, dr)
    core = np.einsum("lmrlnr->mn", a6) / (dl * dr)
    out = core
    if dl > 1:
        out = np.kron(np.eye(dl), out)
    if dr > 1:
        out = np.kron(out, np.eye(dr))
    return out


def support_factor(a, interval, n_sites, local_dim, tol=1e-9):
    """Extract the on-interval factor of an operator known to act as
    factor (x) identity; raises if the factorization error exceeds tol."""
    lo, hi = interval
    dl = local_dim ** (lo - 1)
    dm = local_dim ** (hi - lo + 1)
    dr = local_dim ** (n_sites - hi)
    a = np.asarray(a)
    a6 = a.reshape(dl, dm, dr, dl, dm, dr)
    core = np.einsum("lmrlnr->mn", a6) / (dl * dr)
    rebuilt = core
    if dl > 1:
        rebuilt = np.kron(np.eye(dl), rebuilt)
    if dr > 1:
        rebuilt = np.kron(rebuilt, np.eye(dr))
    err = np.linalg.norm(rebuilt - a) / max(np.linalg.norm(a), 1e-300)
    if err > tol:
        raise ValueError(f"operator is not supported on {interval} (error {err:.2e})")
    return core


def commutes_outside(a, interval, n_sites, local_dim, n_samples=8, seed=0, tol=1e-10):
    """Verify support by commuting with random Hermitian operators on single
    sites outside the interval; returns the largest commutator norm."""
    rng = np.random.default_rng(seed)
    lo, hi = interval
    worst = 0.0
    outside = [s for s in range(1, n_sites + 1) if s < lo or s > hi]
    if not outside:
        return 0.0
    a = np.asarray(a)
    for _ in range(n_samples):
        site = outside[rng.integers(len(outside))]
        r = rng.standard_normal((local_dim, local_dim)) + 1j * rng.standard_normal(
            (local_dim, local_dim)
        )
        r = 0.5 * (r + r.conj().T)
        r /= np.linalg.norm(r, 2)
        rb = embed_operator(r, (site, site), n_sites, local_dim)
        worst = max(worst, float(operator_norm(a @ rb - rb @ a)))
    return worst
