"""Closed-form entropy bounds and the inequality-chain checks they feed.

Two families live here: pure arithmetic (the saturation entropy, the
bootstrap bound, the doubling iteration with its contradiction length) and
propositional checks on quantities measured from real chains (the
Cauchy-Schwarz expectation chain and the relative-entropy gap).  Formula
constants of order unity are configuration, never asserted; only exact
inequalities are meant to be enforced by callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .util import log_linear_fit, write_csv


@dataclass
class BoundParameters:
    """Inputs to every closed-form bound.

    c0 and c2 are order-unity constants (default 1); c1 is the prefactor of
    the projector-error decay, fitted from construction sweeps by default.
    """

    xi: float
    xi_prime: float
    d: int
    c0: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    j_coupling: float = 1.0
    delta_e: float = 1.0
    v: float = 1.0

    def __post_init__(self):
        for name in ("xi", "xi_prime", "d", "j_coupling", "delta_e", "v"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_locality(cls, constants, d, **overrides):
        kwargs = dict(
            xi=constants.xi,
            xi_prime=constants.xi_prime,
            d=d,
            v=constants.v,
        )
        kwargs.update(overrides)
        return cls(**kwargs)


def s_max(p):
    """Saturation entropy c0 xi' ln(xi') ln(D) 2^(xi' ln D)."""
    if p.xi_prime <= 1.0:
        raise ValueError("xi_prime must exceed 1 for the saturation entropy")
    return float(p.c0 * p.xi_prime * np.log(p.xi_prime) * np.log(p.d) * 2.0 ** (p.xi_prime * np.log(p.d)))


def f_term(xi_prime, d):
    """Additive constant of the bootstrap bound:
    (xi'+4) ln D + 1 + ln(D^2-1) + ln(xi'/2+1)."""
    if d < 2:
        raise ValueError("local dimension must be at least 2")
    return float(
        (xi_prime + 4.0) * np.log(d)
        + 1.0
        + np.log(d**2 - 1.0)
        + np.log(xi_prime / 2.0 + 1.0)
    )


def bootstrap_bound(k, p_overlap, p):
    """Entropy bound from a rank-k approximant with ground overlap P:
    ln k + xi' ln(2 C1^2 / P) ln D + F(xi', D)."""
    if p_overlap <= 0 or p_overlap > 1:
        raise ValueError("overlap must lie in (0, 1]")
    if k < 1:
        raise ValueError("rank must be >= 1")
    return float(
        np.log(k)
        + p.xi_prime * np.log(2.0 * p.c1**2 / p_overlap) * np.log(p.d)
        + f_term(p.xi_prime, p.d)
    )


def renyi_convergence_ok(alpha, p):
    """Whether the Renyi-entropy extension converges at this order:
    exp(-2 alpha / xi') (D^2)^(1-alpha) < 1.  Returns (ok, alpha_star) with
    alpha_star the boundary order where equality holds."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    value = np.exp(-2.0 * alpha / p.xi_prime) * (p.d**2) ** (1.0 - alpha)
    ln_d = np.log(p.d)
    alpha_star = ln_d / (ln_d + 1.0 / p.xi_prime) if ln_d > 0 else 0.0
    return bool(value < 1.0), float(alpha_star)


# ---------------------------------------------------------------------------
# doubling iteration
# ---------------------------------------------------------------------------


@dataclass
class ClaimIteration:
    """Doubling-grid entropy bounds and the contradiction length.

    sequence holds (l, bound) pairs of the closed-form bound
    ln(D) l - l floor(log2(l/xi0))/xi' + (2 + ln C1 + C2) l / xi0,
    emitted by running the doubling recursion B(2l) = 2 B(l) - 2l/xi'.
    eq_sequence holds the per-step relative-entropy recursion
    S(2l) <= 2 S(l) - (1 - 2 C1 e^(-l/xi')) l/xi' + ln C1 + C2 from the
    caller's starting entropy, as a tighter diagnostic.  The iteration stops
    at the positivity trigger; l0_formula is
    xi' ln(2 C1) 2^ceil(xi' ln D + (2+C2) xi'/xi0 + 1/2) and coincides with
    the last grid length before the trigger.
    """

    xi0: float
    trigger: float
    sequence: list
    eq_sequence: list
    l0_formula: float
    contradiction_l: float
    triggered_at: int
    initial_bound: float


def eq8_closed_form(l, p, xi0=None):
    """Closed-form doubling bound at window length l."""
    if xi0 is None:
        xi0 = claim_xi0(p)
    n = np.floor(np.log2(l / xi0))
    return float(
        np.log(p.d) * l - l * n / p.xi_prime + (2.0 + np.log(p.c1) + p.c2) * l / xi0
    )


def claim_xi0(p):
    """Starting grid length xi0 = xi' * 2 ln(2 C1); requires 2 C1 > 1."""
    if 2.0 * p.c1 <= 1.0:
        raise ValueError("2 C1 must exceed 1 for the iteration to start")
    return float(p.xi_prime * 2.0 * np.log(2.0 * p.c1))


def l0_formula(p):
    """Contradiction length xi' ln(2C1) 2^ceil(xi' ln D + (2+C2) xi'/xi0 + 1/2)."""
    xi0 = claim_xi0(p)
    cond = p.xi_prime * np.log(p.d) + (2.0 + p.c2) * p.xi_prime / xi0 + 0.5
    return float(p.xi_prime * np.log(2.0 * p.c1) * 2.0 ** np.ceil(cond))


def claim_iteration(s_initial, l_cap, p, max_steps=64):
    """Iterate the doubling bound from l = xi0, doubling while l <= l_cap
    and the positivity trigger has not fired.

    s_initial seeds the per-step (diagnostic) recursion at the first grid
    point; pass ln(D) * xi0 for the generic start.  Returns the emitted
    closed-form sequence, the diagnostic sequence, the contradiction point
    of the explicit iteration, and the analytic contradiction length (the
    two agree exactly).
    """
    xi0 = claim_xi0(p)
    cond = p.xi_prime * np.log(p.d) + (2.0 + p.c2) * p.xi_prime / xi0 + 0.5
    if cond < 0:
        cond = 0.0
    c_sum = 2.0 + np.log(p.c1) + p.c2
    ln_d = np.log(p.d)
    sequence = []
    eq_sequence = []
    if s_initial is None:
        s_initial = ln_d * xi0
    initial_bound = min(float(s_initial), ln_d * xi0)
    running = ln_d * xi0 + c_sum  # closed form at l = xi0
    tight = float(s_initial)
    n = 0
    l = xi0
    while n < max_steps:
        if n >= cond:
            break
        if l > l_cap:
            break
        sequence.append((float(l), float(running)))
        eq_sequence.append((float(l), float(tight)))
        # doubling updates: closed-form recursion and the per-step bound
        decrement = (1.0 - 2.0 * p.c1 * np.exp(-l / p.xi_prime)) * l / p.xi_prime
        tight = 2.0 * tight - decrement + np.log(p.c1) + p.c2
        running = 2.0 * running - 2.0 * l / p.xi_prime
        l = 2.0 * l
        n += 1
    n_trigger = int(max(np.ceil(cond), 0.0))
    contradiction = float(xi0 * 2.0 ** (n_trigger - 1))
    return ClaimIteration(
        xi0=xi0,
        trigger=float(cond),
        sequence=sequence,
        eq_sequence=eq_sequence,
        l0_formula=l0_formula(p),
        contradiction_l=contradiction,
        triggered_at=n_trigger,
        initial_bound=initial_bound,
    )


def s_max_from_iteration(p):
    """Saturation entropy implied by the contradiction length, 3 ln(D) l0;
    reported alongside the direct closed form (they differ by bookkeeping
    absorbed into c0)."""
    return float(3.0 * np.log(p.d) * l0_formula(p))


# ---------------------------------------------------------------------------
# measured-quantity chain checks
# ---------------------------------------------------------------------------


@dataclass
class ChainReport:
    """Slack ledger for one inequality chain; slacks must be >= -1e-9 when
    the inputs come from a real chain."""

    inputs: dict
    slacks: dict
    flags: dict = field(default_factory=dict)

    def min_slack(self):
        finite = [v for v in self.slacks.values() if np.isfinite(v)]
        return float(min(finite)) if finite else float("inf")


def _check_unit_interval(**kwargs):
    for name, val in kwargs.items():
        if not (-1e-12 <= val <= 1.0 + 1e-12):
            raise ValueError(f"{name} = {val} outside [0, 1]")


def xbd_chain_check(p_overlap, x, y, epsilon):
    """Expectation chain for the product state across the cut.

    Verifies, with all quantities measured:
      P >= x y - sqrt(x - x^2) sqrt(y - y^2) - eps   (operator Cauchy-Schwarz)
      P >= x (1 - 2 eps) - sqrt(x) sqrt(2 eps) - eps (using y >= 1 - 2 eps)
      x <= (P + sqrt(x) sqrt(2 eps) + eps) / (1 - 2 eps)  (rearranged)
    """
    _check_unit_interval(p_overlap=p_overlap, x=x, y=y)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    var_x = max(x - x**2, 0.0)
    var_y = max(y - y**2, 0.0)
    cs_rhs = x * y - np.sqrt(var_x) * np.sqrt(var_y) - epsilon
    eq24_rhs = x * (1.0 - 2.0 * epsilon) - np.sqrt(x) * np.sqrt(2.0 * epsilon) - epsilon
    slacks = {
        "cauchy_schwarz": float(p_overlap - cs_rhs),
        "eq_chain": float(p_overlap - eq24_rhs),
    }
    flags = {"y_ok": bool(y >= 1.0 - 2.0 * epsilon - 1e-12)}
    if epsilon < 0.5:
        x_bound = (p_overlap + np.sqrt(x) * np.sqrt(2.0 * epsilon) + epsilon) / (
            1.0 - 2.0 * epsilon
        )
        slacks["x_bound"] = float(x_bound - x)
    else:
        slacks["x_bound"] = float("inf")
        flags["epsilon_large"] = True
    return ChainReport(
        inputs={"P": p_overlap, "x": x, "y": y, "epsilon": epsilon},
        slacks=slacks,
        flags=flags,
    )


def relent_gap_check(entropies, x, epsilon, c2=1.0):
    """Relative-entropy gap across the cut.

    entropies = (S_left, S_right, S_joint) on the construction windows; the
    mutual information S_left + S_right - S_joint must dominate the
    substituted measurement bound
      (1 - 2 eps) ln((1 - 2 eps)/x) + 2 eps ln(2 eps / (1 - x))
    and, with the configurable constant, (1 - 2 eps) ln(1/eps) - C2.
    Substituted forms are only defined for eps < 1/2 (flagged otherwise).
    """
    s_left, s_right, s_joint = entropies
    mi = s_left + s_right - s_joint
    slacks = {}
    flags = {}
    if epsilon < 0.5 and 0.0 < x < 1.0:
        one = 1.0 - 2.0 * epsilon
        term2 = 0.0 if epsilon == 0.0 else 2.0 * epsilon * np.log(2.0 * epsilon / (1.0 - x))
        rhs22 = one * np.log(one / x) + term2
        slacks["measurement_bound"] = float(mi - rhs22)
        flags["x_in_monotone_region"] = bool(x <= one + 1e-12)
    else:
        slacks["measurement_bound"] = float("inf")
        flags["epsilon_large"] = True
    if 0.0 < epsilon < 0.5:
        rhs26 = (1.0 - 2.0 * epsilon) * np.log(1.0 / epsilon) - c2
        slacks["gap_form"] = float(mi - rhs26)
    else:
        slacks["gap_form"] = float("inf")
    return ChainReport(
        inputs={
            "s_left": s_left, "s_right": s_right, "s_joint": s_joint,
            "x": x, "epsilon": epsilon, "c2": c2,
        },
        slacks=slacks,
        flags=flags,
    )


def fit_c1_from_sweep(lengths, epsilons):
    """Fit epsilon(l) = C1 exp(-l / xi') from a construction sweep; returns
    (c1, xi_prime_fit, fit)."""
    fit = log_linear_fit(lengths, epsilons)
    if fit.slope >= 0:
        raise ValueError("projector errors do not decay over the sweep")
    return float(np.exp(fit.intercept)), float(-1.0 / fit.slope), fit


def bounds_report_rows(p, measured=None):
    """Formula-vs-measured rows for the report CSV."""
    measured = measured or {}
    rows = []

    def add(name, formula_value):
        meas = measured.get(name)
        slack = (formula_value - meas) if meas is not None else ""
        rows.append(
            {
                "quantity": name,
                "formula_value": formula_value,
                "measured_value": meas if meas is not None else "",
                "slack": slack,
            }
        )

    add("s_max", s_max(p) if p.xi_prime > 1 else float("nan"))
    add("s_max_from_iteration", s_max_from_iteration(p) if 2 * p.c1 > 1 else float("nan"))
    add("f_term", f_term(p.xi_prime, p.d))
    if 2 * p.c1 > 1:
        add("l0", l0_formula(p))
        add("xi0", claim_xi0(p))
    return rows


def write_bounds_report(path, rows, extra_columns=None):
    extra = extra_columns or {}
    header = list(extra) + ["quantity", "formula_value", "measured_value", "slack"]
    write_csv(path, header, [{**extra, **r} for r in rows])
