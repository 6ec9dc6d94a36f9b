"""Shared linear-algebra and bookkeeping helpers used across the package."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np


def kron_all(mats):
    """Kronecker product of a sequence of matrices, left factor most significant."""
    out = np.asarray(mats[0])
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def embed_operator(op, interval, n_sites, local_dim):
    """Embed an operator living on sites ``interval=(a, b)`` (1-based, inclusive)
    into the full chain Hilbert space by tensoring with identities."""
    a, b = interval
    if not (1 <= a <= b <= n_sites):
        raise ValueError(f"interval {interval} out of range for n_sites={n_sites}")
    op = np.asarray(op)
    dm = local_dim ** (b - a + 1)
    if op.shape != (dm, dm):
        raise ValueError(f"operator shape {op.shape} does not match interval {interval}")
    dl = local_dim ** (a - 1)
    dr = local_dim ** (n_sites - b)
    out = op
    if dl > 1:
        out = np.kron(np.eye(dl), out)
    if dr > 1:
        out = np.kron(out, np.eye(dr))
    return out


def right_kron_apply(a, f_left, f_right):
    """Compute A @ (F_left kron F_right) without materializing the Kronecker
    factor; a is (n, dl*dr) with dl, dr the factor dimensions."""
    dl, dlc = f_left.shape
    dr, drc = f_right.shape
    n = a.shape[0]
    # contract the left factor: (n, dl, dr) x (dl, c) over dl
    x = a.reshape(n, dl, dr)
    x = np.swapaxes(x, 1, 2).reshape(n * dr, dl) @ f_left  # (n*dr, c)
    x = x.reshape(n, dr, dlc)
    # contract the right factor over dr
    x = np.swapaxes(x, 1, 2).reshape(n * dlc, dr) @ f_right  # (n*dlc, d)
    return x.reshape(n, dlc * drc)


def left_kron_apply(f_left, f_right, a):
    """Compute (F_left kron F_right) @ A without materializing the factor."""
    return right_kron_apply(a.T, f_left.T, f_right.T).T


def is_hermitian(a, tol=1e-12):
    a = np.asarray(a)
    return bool(np.linalg.norm(a - a.conj().T, 2) <= tol * max(1.0, np.linalg.norm(a, 2)))


def gram(a):
    """A^dag A, through the symmetric rank-k BLAS update for real input."""
    a = np.asarray(a)
    if not np.iscomplexobj(a):
        from scipy.linalg.blas import dsyrk

        c = dsyrk(1.0, np.asfortranarray(a), trans=1)
        c = c + np.triu(c, 1).T
        return c
    return a.conj().T @ a


def hermitize(a):
    return 0.5 * (a + np.asarray(a).conj().T)


def _lanczos_start(dim):
    idx = np.arange(dim)
    v0 = np.ones(dim) + 1e-3 * np.cos(idx)
    return v0 / np.linalg.norm(v0)


def operator_norm(a, tol=1e-12, dense_cutoff=1200):
    """Spectral (largest singular value) norm.

    Small matrices go through LAPACK directly; larger ones run a Lanczos
    iteration on A^dag A with a fixed start vector, which is deterministic
    and handles clustered top singular values."""
    import scipy.sparse.linalg as spla

    a = np.asarray(a)
    n = min(a.shape)
    if n <= dense_cutoff:
        return float(np.linalg.norm(a, 2))
    ah = a.conj().T
    gram = spla.LinearOperator(
        (a.shape[1], a.shape[1]),
        matvec=lambda x: ah @ (a @ x),
        dtype=complex if np.iscomplexobj(a) else float,
    )
    try:
        w = spla.eigsh(
            gram, k=1, which="LA", v0=_lanczos_start(a.shape[1]), tol=tol,
            return_eigenvectors=False,
        )
        return float(np.sqrt(max(float(w[0]), 0.0)))
    except spla.ArpackNoConvergence:
        return float(np.linalg.norm(a, 2))


def hermitian_operator_norm(a, tol=1e-12, dense_cutoff=1200):
    """Largest |eigenvalue| of a Hermitian matrix, from both algebraic ends
    of the spectrum (Lanczos with magnitude targets stalls on symmetric
    +/- pairs).  Deterministic through the fixed start vector."""
    import scipy.sparse.linalg as spla

    a = np.asarray(a)
    n = a.shape[0]
    if n <= dense_cutoff:
        return float(np.max(np.abs(np.linalg.eigvalsh(a))))
    v0 = _lanczos_start(n)
    try:
        top = spla.eigsh(a, k=1, which="LA", v0=v0, tol=tol, return_eigenvectors=False)
        bot = spla.eigsh(a, k=1, which="SA", v0=v0, tol=tol, return_eigenvectors=False)
        return float(max(abs(top[0]), abs(bot[0])))
    except spla.ArpackNoConvergence:
        return float(np.max(np.abs(np.linalg.eigvalsh(a))))


@dataclass
class LogLinearFit:
    """Least-squares fit of ``log(y) = intercept + slope * x``."""

    slope: float
    intercept: float
    r_squared: float
    residuals: np.ndarray = field(repr=False)

    @property
    def decay_length(self):
        """Length scale ``-1/slope``; infinite for non-negative slope."""
        return float(-1.0 / self.slope) if self.slope < 0 else float("inf")


def log_linear_fit(x, y):
    """Fit log(y) against x.  Requires positive y and at least 2 distinct x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.unique(x).size < 2:
        raise ValueError("need at least two distinct x values for a fit")
    if np.any(y <= 0):
        raise ValueError("log-linear fit requires positive y values")
    ly = np.log(y)
    slope, intercept = np.polyfit(x, ly, 1)
    pred = intercept + slope * x
    res = ly - pred
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(res**2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return LogLinearFit(float(slope), float(intercept), float(r2), res)


def format_value(x):
    """Deterministic, round-trip-exact CSV formatting."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, complex):
        return repr(complex(x))
    return str(x)


def write_csv(path, header, rows):
    """Write rows (sequences or dicts) with deterministic formatting."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(h, "") for h in header]
            w.writerow([format_value(v) for v in row])


def read_csv(path):
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        return header, [dict(zip(header, row)) for row in r]


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
