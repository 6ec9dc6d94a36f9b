"""Finite-range one-dimensional Hamiltonians built from nearest-neighbor bond terms.

A chain of N sites with local dimension D is represented by the N-1 bond
matrices H_{i,i+1} (each D^2 x D^2).  Single-site fields are folded onto the
adjacent bonds: interior sites contribute half of their field to each
neighboring bond, boundary sites put the whole field on their only bond.
This keeps every model strictly a sum of two-site terms.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .util import embed_operator, hermitize, sha256_hex

HERMITICITY_TOL = 1e-12

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def _term_norm(t):
    # Hermitian bond term: spectral norm = max |eigenvalue|
    return float(np.max(np.abs(np.linalg.eigvalsh(t))))


@dataclass(frozen=True)
class Hamiltonian1D:
    """Nearest-neighbor chain Hamiltonian H = sum_i H_{i,i+1}.

    terms[i-1] acts on sites (i, i+1), 1-based.  All terms are Hermitian and
    bounded in operator norm by j_bound.  Instances are immutable.
    """

    n_sites: int
    local_dim: int
    terms: tuple = field(repr=False)
    j_bound: float = 0.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be >= 1")
        if self.local_dim < 1:
            raise ValueError("local_dim must be >= 1")
        if len(self.terms) != self.n_sites - 1:
            raise ValueError(
                f"expected {self.n_sites - 1} bond terms, got {len(self.terms)}"
            )
        d2 = self.local_dim**2
        frozen = []
        max_norm = 0.0
        for k, t in enumerate(self.terms):
            t = np.asarray(t, dtype=complex)
            if t.shape != (d2, d2):
                raise ValueError(f"term {k} has shape {t.shape}, expected {(d2, d2)}")
            dev = np.linalg.norm(t - t.conj().T, 2)
            if dev > HERMITICITY_TOL * max(1.0, np.linalg.norm(t, 2)):
                raise ValueError(f"term {k} is not Hermitian (deviation {dev:.2e})")
            t = hermitize(t)
            t.setflags(write=False)
            frozen.append(t)
            max_norm = max(max_norm, _term_norm(t))
        object.__setattr__(self, "terms", tuple(frozen))
        if self.j_bound == 0.0:
            object.__setattr__(self, "j_bound", max_norm)
        elif self.j_bound < max_norm - 1e-12:
            raise ValueError(
                f"j_bound {self.j_bound} below largest term norm {max_norm}"
            )

    @property
    def hilbert_dim(self):
        return self.local_dim**self.n_sites

    def term_embedded(self, i):
        """Bond term i (1-based) embedded in the full Hilbert space."""
        return embed_operator(self.terms[i - 1], (i, i + 1), self.n_sites, self.local_dim)

    def to_dense(self):
        """Full Hamiltonian matrix; real dtype when every term is real."""
        dim = self.hilbert_dim
        real = self.is_real()
        h = np.zeros((dim, dim), dtype=float if real else complex)
        for i in range(1, self.n_sites):
            t = self.terms[i - 1]
            h += embed_operator(t.real if real else t, (i, i + 1), self.n_sites, self.local_dim)
        return h

    def to_sparse(self):
        dim = self.hilbert_dim
        h = sp.csr_matrix((dim, dim), dtype=complex)
        d = self.local_dim
        eye = sp.identity
        for i in range(1, self.n_sites):
            t = sp.csr_matrix(self.terms[i - 1])
            left = eye(d ** (i - 1), format="csr")
            right = eye(d ** (self.n_sites - i - 1), format="csr")
            h = h + sp.kron(sp.kron(left, t), right, format="csr")
        return h

    def is_real(self):
        return all(np.linalg.norm(t.imag) == 0.0 for t in self.terms)

    def content_hash(self):
        """Stable hash of (N, D, terms) used as an eigendecomposition cache key."""
        blobs = [struct.pack("<qq", self.n_sites, self.local_dim)]
        for t in self.terms:
            blobs.append(np.ascontiguousarray(t, dtype=complex).tobytes())
        return sha256_hex(b"".join(blobs))


def _field_weights(n_sites):
    """Per-bond (left, right) weights distributing single-site fields."""
    weights = []
    for i in range(1, n_sites):
        wl = 1.0 if i == 1 else 0.5
        wr = 1.0 if i == n_sites - 1 else 0.5
        weights.append((wl, wr))
    return weights


def _tfim_terms(n_sites, h):
    eye = np.eye(2)
    zz = np.kron(PAULI_Z, PAULI_Z).real
    terms = []
    for wl, wr in _field_weights(n_sites):
        t = -zz - h * wl * np.kron(PAULI_X.real, eye) - h * wr * np.kron(eye, PAULI_X.real)
        terms.append(t.astype(complex))
    return terms


def _xxz_terms(n_sites, delta):
    xx = np.kron(PAULI_X, PAULI_X)
    yy = np.kron(PAULI_Y, PAULI_Y).real
    zz = np.kron(PAULI_Z, PAULI_Z)
    t = (xx + yy + delta * zz).astype(complex)
    return [t.copy() for _ in range(n_sites - 1)]


def _random_gapped_terms(n_sites, g, lam, seed):
    """Strong uniform transverse field plus a weak random Hermitian bond
    perturbation; the field keeps a gap open for lam well below g."""
    rng = np.random.default_rng(int(seed))
    eye = np.eye(2)
    terms = []
    for wl, wr in _field_weights(n_sites):
        r = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        r = hermitize(r)
        r *= lam / max(np.linalg.norm(r, 2), 1e-30)
        t = -g * wl * np.kron(PAULI_X, eye) - g * wr * np.kron(eye, PAULI_X) + r
        terms.append(t)
    return terms


MODEL_FAMILIES = ("transverse_ising", "xxz", "random_gapped", "custom")


def build_model(family, n_sites, params=None, terms=None, local_dim=None):
    """Construct a named model family on an open chain.

    transverse_ising: params {h}; H = -sum Z Z - h sum X, critical at h = 1.
    xxz:              params {delta}; H = sum (XX + YY + delta ZZ).
    random_gapped:    params {g, lam, seed}; gapped paramagnet with weak
                      random bond disorder.
    custom:           terms passed explicitly (local_dim inferred or given).
    """
    params = dict(params or {})
    if n_sites < 2:
        raise ValueError("build_model requires n_sites >= 2")
    if family == "transverse_ising":
        if "h" not in params:
            raise ValueError("transverse_ising requires parameter 'h'")
        return Hamiltonian1D(n_sites, 2, tuple(_tfim_terms(n_sites, float(params["h"]))))
    if family == "xxz":
        if "delta" not in params:
            raise ValueError("xxz requires parameter 'delta'")
        return Hamiltonian1D(n_sites, 2, tuple(_xxz_terms(n_sites, float(params["delta"]))))
    if family == "random_gapped":
        missing = {"g", "lam", "seed"} - set(params)
        if missing:
            raise ValueError(f"random_gapped requires parameters {sorted(missing)}")
        return Hamiltonian1D(
            n_sites,
            2,
            tuple(_random_gapped_terms(n_sites, float(params["g"]), float(params["lam"]), params["seed"])),
        )
    if family == "custom":
        if terms is None:
            raise ValueError("custom model requires terms")
        terms = [np.asarray(t, dtype=complex) for t in terms]
        if local_dim is None:
            d2 = terms[0].shape[0]
            local_dim = int(round(np.sqrt(d2)))
            if local_dim**2 != d2:
                raise ValueError("cannot infer local_dim from term shape")
        return Hamiltonian1D(n_sites, int(local_dim), tuple(terms))
    raise ValueError(f"unknown model family {family!r}; choose from {MODEL_FAMILIES}")


def block_sites(h, block):
    """Group `block` consecutive sites into one site of dimension D**block.

    The spectrum is unchanged: intra-block terms become one-site operators
    folded half/half onto the adjacent new bonds (boundary blocks absorb
    fully), crossing terms act on the last/first site of adjacent blocks.
    """
    b = int(block)
    if b < 1:
        raise ValueError("block must be >= 1")
    if b == 1:
        return h
    if h.n_sites % b != 0:
        raise ValueError(f"block {b} does not divide n_sites {h.n_sites}")
    n_new = h.n_sites // b
    if n_new < 2:
        raise ValueError("blocked chain must keep at least 2 sites")
    d = h.local_dim
    d_new = d**b

    # one-site operators per block from interior terms
    intra = [np.zeros((d_new, d_new), dtype=complex) for _ in range(n_new)]
    # crossing term between block k and k+1 acts on site pair (b-1, b) of the
    # 2b sites spanned by the new bond
    cross = [np.zeros((d_new * d_new, d_new * d_new), dtype=complex) for _ in range(n_new - 1)]
    for i in range(1, h.n_sites):  # term on sites (i, i+1)
        blk = (i - 1) // b  # 0-based block of site i
        t = h.terms[i - 1]
        if (i - 1) % b == b - 1:
            # crossing: site i is last of blk, i+1 first of blk+1
            left_pad = d ** (b - 1)
            op = np.kron(np.kron(np.eye(left_pad), t), np.eye(d ** (b - 1)))
            cross[blk] += op
        else:
            pos = (i - 1) % b  # position of site i within its block
            op = np.kron(
                np.kron(np.eye(d**pos), t), np.eye(d ** (b - pos - 2))
            )
            intra[blk] += op

    new_terms = []
    eye = np.eye(d_new)
    for k in range(n_new - 1):
        wl = 1.0 if k == 0 else 0.5
        wr = 1.0 if k + 1 == n_new - 1 else 0.5
        t = cross[k] + wl * np.kron(intra[k], eye) + wr * np.kron(eye, intra[k + 1])
        new_terms.append(t)
    return Hamiltonian1D(n_new, d_new, tuple(new_terms))


# ---------------------------------------------------------------------------
# model definition files: key = value text, terms in a matrix side-file
# ---------------------------------------------------------------------------

_TERMS_MAGIC = b"H1DTERMS"


def save_terms(terms, path):
    """Write bond terms as row-major complex pairs; .txt is plain text,
    anything else is the binary container."""
    path = Path(path)
    terms = [np.asarray(t, dtype=complex) for t in terms]
    dim = terms[0].shape[0]
    if path.suffix == ".txt":
        with open(path, "w") as f:
            f.write(f"{len(terms)} {dim}\n")
            for t in terms:
                for row in t:
                    f.write(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row) + "\n")
    else:
        with open(path, "wb") as f:
            f.write(_TERMS_MAGIC)
            f.write(struct.pack("<Iqq", 1, len(terms), dim))
            for t in terms:
                f.write(np.ascontiguousarray(t, dtype=complex).tobytes())


def load_terms(path):
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(len(_TERMS_MAGIC))
    if head == _TERMS_MAGIC:
        with open(path, "rb") as f:
            f.read(len(_TERMS_MAGIC))
            _, n_terms, dim = struct.unpack("<Iqq", f.read(4 + 16))
            out = []
            for _ in range(n_terms):
                raw = f.read(dim * dim * 16)
                out.append(np.frombuffer(raw, dtype=complex).reshape(dim, dim).copy())
            return out
    with open(path) as f:
        n_terms, dim = map(int, f.readline().split())
        out = []
        for _ in range(n_terms):
            rows = []
            for _ in range(dim):
                vals = list(map(float, f.readline().split()))
                rows.append([complex(vals[2 * k], vals[2 * k + 1]) for k in range(dim)])
            out.append(np.array(rows, dtype=complex))
        return out


def save_model(h, path, family="custom", params=None, terms_format="bin"):
    """Write a key=value model file; custom terms go to a sibling matrix file."""
    path = Path(path)
    lines = [f"family = {family}", f"n_sites = {h.n_sites}", f"local_dim = {h.local_dim}"]
    for k, v in (params or {}).items():
        lines.append(f"{k} = {v!r}")
    if family == "custom":
        terms_path = path.with_suffix(f".terms.{terms_format}")
        save_terms(h.terms, terms_path)
        lines.append(f"terms_file = {terms_path.name}")
    path.write_text("\n".join(lines) + "\n")


def load_model(path):
    path = Path(path)
    kv = {}
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition("=")
        kv[key.strip()] = val.strip()
    family = kv.pop("family")
    n_sites = int(kv.pop("n_sites"))
    local_dim = int(kv.pop("local_dim", 2))
    if family == "custom":
        terms = load_terms(path.parent / kv.pop("terms_file"))
        return build_model("custom", n_sites, terms=terms, local_dim=local_dim)
    params = {k: float(v) for k, v in kv.items()}
    return build_model(family, n_sites, params)
