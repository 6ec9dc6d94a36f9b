"""Configuration-driven batch experiments with reproducible persisted output.

A run directory holds: config.snapshot (the exact config text), one entropy
CSV per chain instance, agsp.csv, expander.csv, probe.csv, bounds.csv,
skips.csv for sweep points refused by preconditions or budget, and a
key=value summary of bound-vs-measured margins.  Every data row carries the
config hash and package version; fixed seed means byte-identical output.
"""

from __future__ import annotations

import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .agsp import agsp_sweep_rows, build_agsp
from .bounds import (
    BoundParameters,
    bounds_report_rows,
    fit_c1_from_sweep,
    write_bounds_report,
)
from .entanglement import entropy_profile, write_entropy_profile
from .expander import build_expander_mps, expander_interval_rdm, write_expander_edges
from .lattice import build_model
from .mps import conjecture_probe, write_probe_report
from .spectral import DegenerateGroundStateError, DimensionBudgetError, diagonalize
from .util import read_csv, sha256_hex, write_csv


class ConfigError(ValueError):
    pass


def _parse_list(val, cast):
    return [cast(x) for x in str(val).split(",") if x.strip() != ""]


@dataclass
class ExperimentConfig:
    family: str = "transverse_ising"
    n_sites: list = field(default_factory=lambda: [8, 10])
    coupling: list = field(default_factory=lambda: [2.0])
    cuts: str = "mid"
    l_values: list = field(default_factory=list)
    k_prime: list = field(default_factory=list)
    alpha: list = field(default_factory=lambda: [0.5, 2.0])
    expander_k: list = field(default_factory=list)
    expander_d: int = 3
    expander_seed: int = 7
    expander_trials: int = 0
    expander_interval_len: int = 1
    expander_n_sites: int = 12
    expander_rule: str = "uniform"
    probe_l: list = field(default_factory=lambda: [2])
    agsp_v: float = 1.0
    agsp_xi_c: float = 1.0
    agsp_clip: bool = True
    bounds_c0: float = 1.0
    bounds_c1: float = 0.0  # 0 means: fit from the sweep when possible
    bounds_c2: float = 1.0
    output_dir: str = "runs/out"
    seed: int = 1234
    max_dense_dim: int = 2**14
    workers: int = 1
    raw_text: str = field(default="", repr=False)

    @property
    def config_hash(self):
        return sha256_hex(self.raw_text.encode())[:12]


_KEY_MAP = {
    "family": ("family", str),
    "n_sites": ("n_sites", lambda v: _parse_list(v, int)),
    "coupling": ("coupling", lambda v: _parse_list(v, float)),
    "cuts": ("cuts", str),
    "l": ("l_values", lambda v: _parse_list(v, int)),
    "k_prime": ("k_prime", lambda v: _parse_list(v, int)),
    "alpha": ("alpha", lambda v: _parse_list(v, float)),
    "expander.k": ("expander_k", lambda v: _parse_list(v, int)),
    "expander.d": ("expander_d", int),
    "expander.seed": ("expander_seed", int),
    "expander.trials": ("expander_trials", int),
    "expander.interval_len": ("expander_interval_len", int),
    "expander.n_sites": ("expander_n_sites", int),
    "expander.rule": ("expander_rule", str),
    "probe.l": ("probe_l", lambda v: _parse_list(v, int)),
    "agsp.v": ("agsp_v", float),
    "agsp.xi_c": ("agsp_xi_c", float),
    "agsp.clip": ("agsp_clip", lambda v: v.strip().lower() in ("1", "true", "yes")),
    "bounds.c0": ("bounds_c0", float),
    "bounds.c1": ("bounds_c1", float),
    "bounds.c2": ("bounds_c2", float),
    "output_dir": ("output_dir", str),
    "seed": ("seed", int),
    "max_dense_dim": ("max_dense_dim", int),
    "workers": ("workers", int),
}


def parse_config(text, overrides=None):
    cfg = ExperimentConfig(raw_text=text)
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, val = body.partition("=")
        pairs.append((key.strip(), val.strip()))
    for key, val in list(overrides or []):
        pairs.append((key, val))
        cfg.raw_text += f"\n# override: {key} = {val}"
    for key, val in pairs:
        if key not in _KEY_MAP:
            raise ConfigError(f"unknown configuration key {key!r}")
        attr, cast = _KEY_MAP[key]
        try:
            setattr(cfg, attr, cast(val))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {val!r} ({exc})") from exc
    validate_config(cfg)
    return cfg


def load_config(path, overrides=None):
    return parse_config(Path(path).read_text(), overrides)


def validate_config(cfg):
    if cfg.family not in ("transverse_ising", "xxz", "random_gapped"):
        raise ConfigError(f"unsupported sweep family {cfg.family!r}")
    if any(n < 2 for n in cfg.n_sites):
        raise ConfigError("all n_sites must be >= 2")
    if cfg.cuts != "mid":
        try:
            _parse_list(cfg.cuts, int)
        except ValueError as exc:
            raise ConfigError(f"cuts must be 'mid' or a list of integers") from exc
    if any(l < 1 for l in cfg.l_values):
        raise ConfigError("all l values must be >= 1")
    if cfg.expander_k and cfg.expander_d < 2:
        raise ConfigError("expander degree must be >= 2")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.max_dense_dim < 4:
        raise ConfigError("max_dense_dim too small")
    if any(a <= 0 or a == 1.0 for a in cfg.alpha):
        raise ConfigError("alpha values must be positive and != 1")
    return cfg


def _cut_list(cfg, n):
    if cfg.cuts == "mid":
        return [n // 2]
    return [j for j in _parse_list(cfg.cuts, int) if 1 <= j <= n - 1]


def _model_params(cfg, coupling):
    if cfg.family == "transverse_ising":
        return {"h": coupling}
    if cfg.family == "xxz":
        return {"delta": coupling}
    return {"g": coupling, "lam": 0.1 * coupling, "seed": cfg.seed}


@dataclass
class RunData:
    entropy_rows: dict = field(default_factory=dict)  # (n, coupling) -> rows
    agsp_rows: list = field(default_factory=list)
    agsp_records: list = field(default_factory=list)
    expander_rows: list = field(default_factory=list)
    probe_rows: list = field(default_factory=list)
    bounds_rows: list = field(default_factory=list)
    skips: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _provenance(cfg):
    return {"config_hash": cfg.config_hash, "version": __version__}


def run_area_law_sweep(cfg, data=None, spectral=None):
    """Ground state, gap, and entropy profiles for every (N, coupling)."""
    data = data if data is not None else RunData()
    spectral = spectral if spectral is not None else {}

    def point(task):
        n, coupling = task
        if cfg.max_dense_dim and 2**n > cfg.max_dense_dim:
            return ("skip", task, f"hilbert dimension 2^{n} exceeds budget")
        model = build_model(cfg.family, n, _model_params(cfg, coupling))
        try:
            sd = diagonalize(model, max_dim=cfg.max_dense_dim)
        except (DegenerateGroundStateError, DimensionBudgetError) as exc:
            return ("skip", task, str(exc))
        rows = entropy_profile(sd.ground_state, n, model.local_dim, tuple(cfg.alpha))
        for r in rows:
            r["n_sites"] = n
            r["coupling"] = coupling
            r["gap"] = sd.gap
        return ("ok", task, (model, sd, rows))

    tasks = [(n, c) for n in cfg.n_sites for c in cfg.coupling]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(point, tasks))
    else:
        results = [point(t) for t in tasks]
    for status, task, payload in results:
        if status == "skip":
            data.skips.append({"stage": "area_law", "point": str(task), "reason": payload})
            continue
        model, sd, rows = payload
        spectral[task] = (model, sd)
        data.entropy_rows[task] = rows
    return data, spectral


def run_agsp_sweep(cfg, data=None, spectral=None):
    """Projector-triple constructions over (N, coupling, cut, l)."""
    data = data if data is not None else RunData()
    spectral = spectral if spectral is not None else {}
    if not cfg.l_values:
        return data, spectral
    for n in cfg.n_sites:
        for coupling in cfg.coupling:
            key = (n, coupling)
            if key not in spectral:
                if cfg.max_dense_dim and 2**n > cfg.max_dense_dim:
                    data.skips.append(
                        {"stage": "agsp", "point": str(key), "reason": "dimension budget"}
                    )
                    continue
                model = build_model(cfg.family, n, _model_params(cfg, coupling))
                try:
                    spectral[key] = (model, diagonalize(model, max_dim=cfg.max_dense_dim))
                except (DegenerateGroundStateError, DimensionBudgetError) as exc:
                    data.skips.append({"stage": "agsp", "point": str(key), "reason": str(exc)})
                    continue
            model, sd = spectral[key]
            for j in _cut_list(cfg, n):
                for l in cfg.l_values:
                    if not cfg.agsp_clip and (j - l + 1 < 1 or j + l > n):
                        data.skips.append(
                            {
                                "stage": "agsp",
                                "point": str((n, coupling, j, l)),
                                "reason": "window exceeds chain (strict mode)",
                            }
                        )
                        continue
                    record = build_agsp(
                        model, sd, j, l, v=cfg.agsp_v, xi_c=cfg.agsp_xi_c,
                        clip=cfg.agsp_clip,
                    )
                    data.agsp_records.append((key, record))
    rows = agsp_sweep_rows([r for _, r in data.agsp_records])
    for (key, _), row in zip(data.agsp_records, rows):
        row["coupling"] = key[1]
    data.agsp_rows = rows
    return data, spectral


def run_expander_suite(cfg, data=None):
    """Structural checks, interval mixing, and functional probes for the
    expander states."""
    data = data if data is not None else RunData()
    for k in cfg.expander_k:
        base = {
            "k": k, "d": cfg.expander_d, "seed": cfg.expander_seed,
            "n_sites": cfg.expander_n_sites,
            "interval_len": cfg.expander_interval_len,
        }
        try:
            e = build_expander_mps(k, cfg.expander_d, cfg.expander_seed, cfg.expander_rule)
        except (ValueError, RuntimeError) as exc:
            data.expander_rows.append(
                {**base, "status": f"error: {exc}", "deviation": "", "regime_ok": ""}
            )
            continue
        interval = (2, 1 + cfg.expander_interval_len)
        import warnings as _warnings

        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            report = expander_interval_rdm(e, cfg.expander_n_sites, interval)
        data.expander_rows.append(
            {
                **base, "status": "ok",
                "deviation": report.deviation_trace_norm,
                "regime_ok": report.regime_ok,
            }
        )
        if cfg.expander_trials > 0:
            try:
                probe = conjecture_probe(
                    e, cfg.expander_n_sites, cfg.probe_l, cfg.expander_trials,
                    cfg.seed,
                )
            except ValueError as exc:
                data.skips.append(
                    {"stage": "probe", "point": str(k), "reason": str(exc)}
                )
                continue
            for r in probe.rows:
                data.probe_rows.append({"k": k, **r})
    return data


def _bounds_stage(cfg, data):
    """Assemble bound parameters (fitting C1 from the sweep when requested)
    and tabulate formula-vs-measured margins."""
    xi = max(2.0 * cfg.agsp_v, cfg.agsp_xi_c)  # delta_e-free fallback scale
    c1 = cfg.bounds_c1
    fit_note = "configured"
    if data.agsp_rows:
        ls = [r["l"] for r in data.agsp_rows]
        eps = [r["epsilon"] for r in data.agsp_rows]
        by_l = {}
        for l, e in zip(ls, eps):
            by_l.setdefault(l, []).append(e)
        if c1 == 0.0 and len(by_l) >= 2:
            med_l = sorted(by_l)
            med_e = [float(np.median(by_l[l])) for l in med_l]
            try:
                c1, xi_prime_fit, _ = fit_c1_from_sweep(med_l, med_e)
                fit_note = f"fitted (xi'={xi_prime_fit:.3g})"
            except ValueError:
                c1 = 1.0
                fit_note = "fit failed, default"
    if c1 == 0.0:
        c1 = 1.0
    params = BoundParameters(
        xi=xi, xi_prime=6.0 * xi, d=2, c0=cfg.bounds_c0, c1=c1, c2=cfg.bounds_c2,
        v=cfg.agsp_v,
    )
    measured = {}
    if data.entropy_rows:
        measured["s_max"] = max(
            r["entropy"] for rows in data.entropy_rows.values() for r in rows
        )
        measured["s_max_from_iteration"] = measured["s_max"]
    data.bounds_rows = bounds_report_rows(params, measured)
    data.summary["bounds.c1"] = c1
    data.summary["bounds.c1_source"] = fit_note
    return data


def _write_outputs(cfg, data, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.snapshot").write_text(cfg.raw_text)
    prov = _provenance(cfg)
    for (n, coupling), rows in sorted(data.entropy_rows.items()):
        name = f"entropy_N{n}_c{coupling:g}.csv"
        write_entropy_profile(out / name, rows, extra_columns=prov)
    if data.agsp_rows:
        header = list(prov) + ["coupling"] + [
            k for k in data.agsp_rows[0] if k != "coupling"
        ]
        write_csv(out / "agsp.csv", header, [{**prov, **r} for r in data.agsp_rows])
    if data.expander_rows:
        header = list(prov) + list(data.expander_rows[0].keys())
        write_csv(out / "expander.csv", header, [{**prov, **r} for r in data.expander_rows])
    if data.probe_rows:
        header = list(prov) + list(data.probe_rows[0].keys())
        write_csv(out / "probe.csv", header, [{**prov, **r} for r in data.probe_rows])
    if data.bounds_rows:
        write_bounds_report(out / "bounds.csv", data.bounds_rows, extra_columns=prov)
    if data.skips:
        write_csv(
            out / "skips.csv",
            list(prov) + ["stage", "point", "reason"],
            [{**prov, **r} for r in data.skips],
        )
    lines = [f"{k} = {v}" for k, v in sorted(data.summary.items())]
    (out / "summary").write_text("\n".join(lines) + "\n")
    return out


def _summarize(data):
    if data.agsp_rows:
        data.summary["agsp.min_lu_slack"] = min(r["lu_slack"] for r in data.agsp_rows)
        data.summary["agsp.max_epsilon"] = max(r["epsilon"] for r in data.agsp_rows)
        data.summary["agsp.min_positivization_slack"] = min(
            r["positivization_bound"] - r["positivization_measured"] for r in data.agsp_rows
        )
    for (n, c), rows in sorted(data.entropy_rows.items()):
        mid = [r for r in rows if r["cut"] == n // 2]
        if mid:
            data.summary[f"entropy.mid.N{n}.c{c:g}"] = mid[0]["entropy"]
    ok_rows = [r for r in data.expander_rows if r.get("status") == "ok"]
    for r in ok_rows:
        data.summary[f"expander.deviation.k{r['k']}"] = r["deviation"]
    data.summary["skips"] = len(data.skips)
    return data


def run_experiment(cfg, out_dir=None):
    """Execute every configured stage; returns (RunData, output path)."""
    data = RunData()
    spectral = {}
    data, spectral = run_area_law_sweep(cfg, data, spectral)
    data, spectral = run_agsp_sweep(cfg, data, spectral)
    data = run_expander_suite(cfg, data)
    data = _bounds_stage(cfg, data)
    data = _summarize(data)
    out = _write_outputs(cfg, data, out_dir or cfg.output_dir)
    return data, out


# ---------------------------------------------------------------------------
# re-verification of persisted runs
# ---------------------------------------------------------------------------

SLACK_TOL = 1e-9


def check_run(run_dir):
    """Re-verify invariants from the persisted CSVs; returns a list of
    violation messages (empty means the run checks out)."""
    run = Path(run_dir)
    problems = []
    snapshot = run / "config.snapshot"
    if not snapshot.exists():
        return [f"missing config.snapshot in {run}"]
    cfg_hash = sha256_hex(snapshot.read_text().encode())[:12]

    def check_hash(rows, name):
        for r in rows:
            if r.get("config_hash") and r["config_hash"] != cfg_hash:
                problems.append(f"{name}: config hash mismatch")
                return

    for path in sorted(run.glob("entropy_*.csv")):
        header, rows = read_csv(path)
        check_hash(rows, path.name)
        if not rows:
            continue
        n = int(rows[0]["n_sites"])
        ln_d = np.log(2.0)
        ent = {int(r["cut"]): float(r["entropy"]) for r in rows}
        alphas = sorted(
            float(h.split("_", 1)[1]) for h in header if h.startswith("renyi_")
        )
        for r in rows:
            j = int(r["cut"])
            s = float(r["entropy"])
            cap = min(j, n - j) * ln_d
            if not (-SLACK_TOL <= s <= cap + 1e-8):
                problems.append(f"{path.name}: cut {j} entropy {s} outside [0, {cap}]")
            prev = None
            for a in alphas:
                val = float(r[f"renyi_{a:g}"])
                if prev is not None and val > prev + 1e-8:
                    problems.append(f"{path.name}: cut {j} Renyi not monotone in alpha")
                prev = val
            coeffs = [float(r[f"schmidt_{k:02d}"]) for k in range(1, 33)]
            if any(c2 > c1 + 1e-10 for c1, c2 in zip(coeffs, coeffs[1:])):
                problems.append(f"{path.name}: cut {j} Schmidt coefficients not sorted")
            if sum(c * c for c in coeffs) > 1.0 + 1e-8:
                problems.append(f"{path.name}: cut {j} Schmidt weight exceeds 1")
        for j, s in ent.items():
            if (n - j) in ent and abs(ent[n - j] - s) > 1e-9:
                problems.append(f"{path.name}: cut symmetry violated at {j}")
            if (j + 1) in ent and abs(ent[j + 1] - s) > ln_d + 1e-8:
                problems.append(f"{path.name}: entropy jump at cut {j} exceeds ln D")

    agsp_path = run / "agsp.csv"
    if agsp_path.exists():
        _, rows = read_csv(agsp_path)
        check_hash(rows, "agsp.csv")
        for r in rows:
            eps = float(r["epsilon"])
            # ||O_B O_L O_R - P0|| <= ||O_B O_L O_R|| + 1 <= 2 for contractions
            if not (-SLACK_TOL <= eps <= 2.0 + 1e-6):
                problems.append(f"agsp.csv: epsilon {eps} outside [0, 2]")
            if float(r["positivization_measured"]) > float(r["positivization_bound"]) + SLACK_TOL:
                problems.append("agsp.csv: positivization bound violated")
            if float(r["lu_slack"]) < -SLACK_TOL:
                problems.append("agsp.csv: measurement bound slack negative")
            if float(r["exp_ob_gs"]) < 1.0 - 2.0 * eps - SLACK_TOL:
                problems.append("agsp.csv: <O_B> consistency violated")
            if float(r["exp_olr_gs"]) < 1.0 - 2.0 * eps - SLACK_TOL:
                problems.append("agsp.csv: <O_L O_R> consistency violated")

    exp_path = run / "expander.csv"
    if exp_path.exists():
        _, rows = read_csv(exp_path)
        check_hash(rows, "expander.csv")
        ok_rows = [r for r in rows if r["status"] == "ok"]
        by_group = {}
        for r in ok_rows:
            dev = float(r["deviation"])
            if dev < -SLACK_TOL:
                problems.append("expander.csv: negative deviation")
            key = (r["seed"], r["interval_len"], r["n_sites"], r["d"])
            by_group.setdefault(key, []).append((int(r["k"]), dev))
        for key, vals in by_group.items():
            vals.sort()
            devs = [d for _, d in vals]
            if any(d2 > d1 + 1e-12 for d1, d2 in zip(devs, devs[1:])):
                problems.append(
                    f"expander.csv: deviation not decreasing in k for group {key}"
                )

    probe_path = run / "probe.csv"
    if probe_path.exists():
        _, rows = read_csv(probe_path)
        check_hash(rows, "probe.csv")
        for r in rows:
            flagged = r["violation"] == "1"
            actual = float(r["functional"]) > float(r["bound"])
            if flagged != actual:
                problems.append("probe.csv: violation flag inconsistent")

    return problems


def export_run(run_dir, fmt="csv", output=None):
    """Concatenate every CSV of a run into one stream with a table column."""
    if fmt != "csv":
        raise ConfigError(f"unsupported export format {fmt!r}")
    run = Path(run_dir)
    lines = []
    for path in sorted(run.glob("*.csv")):
        header, rows = read_csv(path)
        for r in rows:
            lines.append(
                ",".join(["table=" + path.stem] + [r.get(h, "") for h in header])
            )
    text = "\n".join(lines) + ("\n" if lines else "")
    if output:
        Path(output).write_text(text)
    return text
