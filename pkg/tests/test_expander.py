import warnings

import numpy as np
import pytest

from arealaw.entanglement import reduced_density, von_neumann_entropy
from arealaw.expander import (
    build_expander_mps,
    expander_interval_rdm,
    expander_to_statevector,
    write_expander_edges,
)
from arealaw.mps import conjecture_probe
from arealaw.util import read_csv


def test_smallest_case_parallel_edges():
    e = build_expander_mps(2, 3, seed=0)
    e.validate()
    assert len(e.edges) == 3
    assert sorted(c for _, _, c in e.edges) == [0, 1, 2]
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    for s in range(3):
        assert np.allclose(e.tensor(s), swap / np.sqrt(3))


def test_structpo_64_nodes():
    e = build_expander_mps(64, 3, seed=7)
    e.validate()
    degrees = np.zeros(64, dtype=int)
    colors_seen = {u: set() for u in range(64)}
    for u, v, c in e.edges:
        degrees[u] += 1
        degrees[v] += 1
        colors_seen[u].add(c)
        colors_seen[v].add(c)
    assert np.all(degrees == 3)
    assert all(s == {0, 1, 2} for s in colors_seen.values())


def test_parameter_guards():
    with pytest.raises(ValueError, match="d >= 3"):
        build_expander_mps(64, 2, seed=0)
    with pytest.raises(ValueError, match="even"):
        build_expander_mps(5, 4, seed=0)
    with pytest.raises(ValueError, match="even"):
        build_expander_mps(5, 3, seed=0)


def test_determinism():
    e1 = build_expander_mps(16, 3, seed=5)
    e2 = build_expander_mps(16, 3, seed=5)
    assert e1.edges == e2.edges
    assert np.array_equal(e1.amps, e2.amps)


def test_signed_rule():
    e = build_expander_mps(16, 3, seed=5, amplitude_rule="signed")
    e.validate()
    signs = np.sign(e.amps[e.amps != 0])
    assert set(signs.tolist()) == {-1.0, 1.0}


def test_rdm_perm_matches_dense():
    e = build_expander_mps(16, 3, seed=7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r1 = expander_interval_rdm(e, 10, (2, 3), method="perm")
        r2 = expander_interval_rdm(e, 10, (2, 3), method="dense")
    assert np.allclose(r1.rho, r2.rho, atol=1e-12)
    assert r1.deviation_trace_norm == pytest.approx(r2.deviation_trace_norm, abs=1e-10)


def test_rdm_perm_matches_statevector_oracle():
    e = build_expander_mps(4, 3, seed=3)
    psi = expander_to_statevector(e, 8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for interval in ((2, 2), (2, 3), (3, 5)):
            r = expander_interval_rdm(e, 8, interval, method="perm")
            oracle = reduced_density(psi, interval, 8, 3)
            assert np.allclose(r.rho, oracle, atol=1e-12)


def test_single_site_mixing_improves_with_k():
    devs = []
    for k in (16, 64):
        e = build_expander_mps(k, 3, seed=7)
        r = expander_interval_rdm(e, 12, (2, 2))
        assert r.regime_ok
        devs.append(r.deviation_trace_norm)
    assert devs[1] < devs[0]
    assert devs[1] < 0.05


def test_degenerate_small_graph_regime_flag():
    e = build_expander_mps(2, 3, seed=0)
    with pytest.warns(UserWarning, match="regime"):
        r = expander_interval_rdm(e, 8, (2, 2))
    assert not r.regime_ok
    assert r.deviation_trace_norm > 0.5


def test_two_site_window_entropy_reported():
    # color classes are involutions, so equal-color pairs (s, s) act as the
    # identity on the bond and stay mutually coherent at any k: the two-site
    # window is not maximally mixed, and the deviation records this
    e = build_expander_mps(64, 3, seed=7)
    r = expander_interval_rdm(e, 12, (2, 3))
    diag = np.real(np.diag(r.rho))
    same = [diag[s * 3 + s] for s in range(3)]
    mixed = [diag[a * 3 + b] for a in range(3) for b in range(3) if a != b]
    assert np.allclose(same, 4.0 / 27.0, atol=0.01)
    assert np.allclose(mixed, 5.0 / 54.0, atol=0.01)
    s = von_neumann_entropy(r.rho)
    assert 1.4 < s < 2 * np.log(3.0)
    assert r.deviation_trace_norm > 0.3


def test_interval_validation():
    e = build_expander_mps(8, 3, seed=1)
    with pytest.raises(ValueError, match="range"):
        expander_interval_rdm(e, 8, (0, 2))
    with pytest.raises(ValueError, match="traced"):
        expander_interval_rdm(e, 4, (1, 4))


def test_statevector_budget_guard():
    e = build_expander_mps(256, 3, seed=7)
    with pytest.raises(ValueError, match="budget"):
        expander_to_statevector(e, 12)


def test_edge_export(tmp_path):
    e = build_expander_mps(8, 3, seed=2)
    path = tmp_path / "edges.csv"
    write_expander_edges(path, e)
    header, rows = read_csv(path)
    assert header == ["node_a", "node_b", "color"]
    assert len(rows) == 12


def test_probe_on_expander_reports_entropy():
    e = build_expander_mps(16, 3, seed=7)
    result = conjecture_probe(e, 8, [2], trials=10, seed=4)
    assert result.rows
    for row in result.rows:
        assert row["entropy"] > 1.0  # large mid-cut entanglement
        assert row["functional"] >= 0.0
