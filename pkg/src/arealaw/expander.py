"""Expander-graph matrix product states and their interval density matrices.

A D-regular graph on k nodes with a proper D-edge-coloring (every node sees
every color exactly once) induces site tensors A_{ab}(s) that are nonzero
only on color-s edges.  Each color class is a perfect matching, so every
A(s) is a scaled symmetric permutation matrix; interval reduced density
matrices are contracted exactly in that permutation representation without
ever materializing the D^N amplitudes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .util import write_csv

COLORING_ATTEMPTS = 24
GRAPH_RETRIES = 40
SIMPLE_GRAPH_MIN_NODES = 8  # below this, multi-edges are accepted


class ColoringError(RuntimeError):
    pass


def _configuration_model_edges(k, d, rng, allow_multi):
    """One attempt at a d-regular (multi)graph by stub pairing; self-loops
    always rejected, multi-edges only below the simple-graph size."""
    for _ in range(200):
        stubs = np.repeat(np.arange(k), d)
        rng.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        edges = [tuple(sorted(p)) for p in pairs]
        if not allow_multi and len(set(edges)) != len(edges):
            continue
        return edges
    return None


def _color_by_matchings(edges, k, d, rng):
    """Strip d perfect matchings off a simple d-regular graph; randomized
    weights diversify the matchings across attempts."""
    import networkx as nx

    for _ in range(COLORING_ATTEMPTS):
        g = nx.Graph()
        g.add_nodes_from(range(k))
        g.add_edges_from(edges)
        coloring = {}
        ok = True
        for color in range(d):
            for e in g.edges:
                g.edges[e]["weight"] = rng.random()
            m = nx.max_weight_matching(g, maxcardinality=True)
            if 2 * len(m) < k:
                ok = False
                break
            for u, v in m:
                coloring[tuple(sorted((u, v)))] = color
            g.remove_edges_from(m)
        if ok and g.number_of_edges() == 0:
            return coloring
    return None


def _color_by_backtracking(edges, k, d):
    """Exact proper coloring for tiny (multi)graphs; each node must see each
    color exactly once, so per-node color sets are bitmasks."""
    n_edges = len(edges)
    used = [0] * k  # bitmask of colors present at node
    assignment = [-1] * n_edges
    order = sorted(range(n_edges), key=lambda i: edges[i])

    def rec(pos):
        if pos == n_edges:
            return True
        idx = order[pos]
        u, v = edges[idx]
        for c in range(d):
            bit = 1 << c
            if used[u] & bit or used[v] & bit:
                continue
            used[u] |= bit
            used[v] |= bit
            assignment[idx] = c
            if rec(pos + 1):
                return True
            used[u] &= ~bit
            used[v] &= ~bit
            assignment[idx] = -1
        return False

    if rec(0):
        return {i: assignment[i] for i in range(n_edges)}
    return None


@dataclass
class ExpanderMPS:
    """Edge-colored regular graph with the induced translation-invariant MPS
    tensors, stored in permutation form: for color s, perms[s] is the
    involution of the color-s matching and amps[s][u] the amplitude on the
    edge leaving node u."""

    k: int
    degree: int
    edges: list = field(repr=False)          # (u, v, color)
    perms: np.ndarray = field(repr=False)    # (D, k) int
    amps: np.ndarray = field(repr=False)     # (D, k) float
    amplitude_rule: str = "uniform"
    seed: int = 0

    @property
    def local_dim(self):
        return self.degree

    def tensor(self, s):
        """Dense A(s) as a k x k matrix."""
        a = np.zeros((self.k, self.k))
        a[np.arange(self.k), self.perms[s]] = self.amps[s]
        return a

    def tensors(self):
        return [self.tensor(s) for s in range(self.degree)]

    def validate(self):
        deg = np.zeros(self.k, dtype=int)
        seen = np.zeros((self.k, self.degree), dtype=int)
        for u, v, c in self.edges:
            deg[u] += 1
            deg[v] += 1
            seen[u, c] += 1
            seen[v, c] += 1
        if not np.all(deg == self.degree):
            raise AssertionError("graph is not regular of the declared degree")
        if not np.all(seen == 1):
            raise AssertionError("edge coloring is not proper at every node")
        for s in range(self.degree):
            p = self.perms[s]
            if not np.all(p[p] == np.arange(self.k)):
                raise AssertionError(f"color {s} is not a perfect matching")
            if np.any(p == np.arange(self.k)):
                raise AssertionError(f"color {s} contains a self-loop")
            if not np.allclose(self.amps[s], self.amps[s][p]):
                raise AssertionError(f"color {s} amplitudes not symmetric")
        return True


def build_expander_mps(k, d, seed, amplitude_rule="uniform"):
    """Random d-regular graph on k nodes with a proper d-edge-coloring and
    the induced MPS tensors.

    Every color class must be a perfect matching, so k must be even (and
    k*d even follows); d >= 3 is required for expansion.  Graph generation
    retries until a colorable instance is found, within bounded attempts.
    """
    k, d = int(k), int(d)
    if d < 3:
        raise ValueError("degree d >= 3 required for an expander")
    if (k * d) % 2 != 0:
        raise ValueError("k*d must be even")
    if k % 2 != 0:
        raise ValueError(
            "k must be even: every color class is a perfect matching"
        )
    if k >= SIMPLE_GRAPH_MIN_NODES and d >= k:
        raise ValueError(f"degree {d} too large for a simple graph on {k} nodes")
    if amplitude_rule not in ("uniform", "signed"):
        raise ValueError(f"unknown amplitude rule {amplitude_rule!r}")
    rng = np.random.default_rng(int(seed))
    allow_multi = k < SIMPLE_GRAPH_MIN_NODES
    for _ in range(GRAPH_RETRIES):
        edges = _configuration_model_edges(k, d, rng, allow_multi)
        if edges is None:
            continue
        if allow_multi or k * d <= 40:
            coloring = _color_by_backtracking(edges, k, d)
            colored = (
                [(u, v, coloring[i]) for i, (u, v) in enumerate(edges)]
                if coloring is not None
                else None
            )
        else:
            coloring = _color_by_matchings(edges, k, d, rng)
            colored = (
                [(u, v, coloring[tuple(sorted((u, v)))]) for u, v in edges]
                if coloring is not None
                else None
            )
        if colored is None:
            continue
        perms = np.zeros((d, k), dtype=np.int64)
        amps = np.zeros((d, k))
        base = 1.0 / np.sqrt(d)
        for u, v, c in colored:
            perms[c, u] = v
            perms[c, v] = u
            amp = base if amplitude_rule == "uniform" else base * (1.0 if rng.random() < 0.5 else -1.0)
            amps[c, u] = amp
            amps[c, v] = amp
        e = ExpanderMPS(
            k=k, degree=d, edges=colored, perms=perms, amps=amps,
            amplitude_rule=amplitude_rule, seed=int(seed),
        )
        e.validate()
        return e
    raise ColoringError(
        f"could not generate a properly colorable {d}-regular graph on {k} nodes"
    )


def write_expander_edges(path, e):
    write_csv(path, ["node_a", "node_b", "color"], [(u, v, c) for u, v, c in e.edges])


# ---------------------------------------------------------------------------
# interval reduced density matrices on the ring
# ---------------------------------------------------------------------------


@dataclass
class RdmReport:
    rho: np.ndarray = field(repr=False)
    interval: tuple = ()
    n_sites: int = 0
    k: int = 0
    deviation_trace_norm: float = 0.0
    regime_ok: bool = True
    method: str = "perm"


def _arc_products(e, length):
    """Permutations and amplitude signs of all D^length arc products, built
    level by level: composing matrices left-to-right composes permutations
    and gathers amplitudes."""
    d, k = e.degree, e.k
    base = 1.0 / np.sqrt(d)
    perms = np.arange(k, dtype=np.int64)[None, :]
    amps = np.ones((1, k))
    for _ in range(length):
        n = perms.shape[0]
        new_p = np.empty((n * d, k), dtype=np.int64)
        new_a = np.empty((n * d, k))
        for s in range(d):
            # (M A(s))[u, :] : follow the existing permutation, then color s
            new_p[s * n : (s + 1) * n] = e.perms[s][perms]
            new_a[s * n : (s + 1) * n] = amps * e.amps[s][perms] / base
        perms, amps = new_p, new_a
    return perms, amps  # amplitudes in units of base**length


def _interval_products(e, length):
    """Dense list of (perm, amp) for all D^length interval strings, ordered
    with the first site's index slowest (row-major over strings)."""
    d, k = e.degree, e.k
    base = 1.0 / np.sqrt(d)
    perms = np.arange(k, dtype=np.int64)[None, :]
    amps = np.ones((1, k))
    for _ in range(length):
        n = perms.shape[0]
        new_p = np.empty((n * d, k), dtype=np.int64)
        new_a = np.empty((n * d, k))
        # row-major over strings: new index = old_index * d + s
        for s in range(d):
            new_p[s::d] = e.perms[s][perms]
            new_a[s::d] = amps * e.amps[s][perms] / base
        perms, amps = new_p, new_a
    return perms, amps


def expander_interval_rdm(e, n_sites, interval, method="perm"):
    """Reduced density matrix of the ring state on interval=(a, b), by
    transfer contraction in the permutation representation ('perm') or
    through the dense doubled transfer matrix ('dense', oracle for small k).

    Reports the trace-norm deviation from maximal mixing; intervals with
    D^len not well below k violate the mixing regime and are flagged."""
    a, b = interval
    if not (1 <= a <= b <= n_sites):
        raise ValueError(f"interval {interval} out of range")
    length = b - a + 1
    d, k = e.degree, e.k
    dm = d**length
    m = n_sites - length
    if m < 1:
        raise ValueError("interval must leave at least one traced site")
    regime_ok = dm * 4 <= k
    if not regime_ok:
        warnings.warn(
            f"interval dimension {dm} is not well below bond range {k}; "
            "maximal-mixing regime violated",
            stacklevel=2,
        )

    if method == "perm":
        arc_p, arc_a = _arc_products(e, m)
        int_p, int_a = _interval_products(e, length)
        idx = np.arange(k)[None, :]
        t = np.empty((dm, arc_p.shape[0]))
        for s in range(dm):
            q, bamp = int_p[s], int_a[s]
            # tr[B_s K_sigma] = sum_u b[u] K[q[u], u]
            match = arc_p[:, q] == idx
            t[s] = (arc_a[:, q] * match) @ bamp
        rho = t @ t.T
    elif method == "dense":
        tensors = e.tensors()
        emat = np.zeros((k * k, k * k))
        for s in range(d):
            emat += np.kron(tensors[s], tensors[s])
        env = np.linalg.matrix_power(emat, m).reshape(k, k, k, k)
        rho = np.zeros((dm, dm))
        mats = [np.eye(k)]
        for _ in range(length):
            mats = [mm @ t for mm in mats for t in tensors]
        for i, bi in enumerate(mats):
            for jdx, bj in enumerate(mats):
                rho[i, jdx] = np.einsum("ac,bd,cdab->", bi, bj, env, optimize=True)
    else:
        raise ValueError(f"unknown method {method!r}")

    tr = np.trace(rho)
    if tr <= 0:
        raise RuntimeError("contracted state has zero norm")
    rho = rho / tr
    dev = np.linalg.eigvalsh(rho - np.eye(dm) / dm)
    deviation = float(np.sum(np.abs(dev)))
    return RdmReport(
        rho=rho, interval=(a, b), n_sites=n_sites, k=k,
        deviation_trace_norm=deviation, regime_ok=bool(regime_ok), method=method,
    )


def expander_to_statevector(e, n_sites, max_elements=2**24):
    """Dense ring amplitudes tr[A(s_1) ... A(s_N)] via a half-split
    contraction; refuses when the intermediate exceeds the element budget."""
    d, k = e.degree, e.k
    if d**n_sites > max_elements:
        raise ValueError("statevector exceeds the element budget")
    n1 = n_sites // 2
    n2 = n_sites - n1
    if (d**n1) * k * k > max_elements or (d**n2) * k * k > max_elements:
        raise ValueError("half-chain contraction exceeds the element budget")

    def half(nh):
        mats = np.eye(k)[None, :, :]
        for _ in range(nh):
            s1 = mats.shape[0]
            out = np.empty((s1 * d, k, k))
            # row-major over strings: new index = old * d + s
            for s in range(d):
                out[s::d] = np.einsum("nij,jm->nim", mats, e.tensor(s))
            mats = out
        return mats

    left = half(n1)
    right = half(n2)
    l2 = left.reshape(len(left), k * k)
    r2 = np.transpose(right, (0, 2, 1)).reshape(len(right), k * k)
    psi = (l2 @ r2.T).reshape(-1)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise RuntimeError("contracted state has zero norm")
    return psi / norm
