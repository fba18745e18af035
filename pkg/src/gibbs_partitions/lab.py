"""Monte Carlo checks of limit shapes, condensation and the critical Poisson limit."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from .analytics import (
    LimitShape,
    critical_rate,
    expected_F,
    expected_monomers,
    first_index,
    occupation_sum,
    poisson_window_mean,
    variance_F,
)
from .energy import EnergyModel, ground_state
from .sampler import (
    PartitionSample,
    SamplerConfig,
    sample_classical_gc,
    sample_quantum_gc,
)

P_THRESHOLD = 0.01


def geometric_grid(y: float, x_max: float, n: int = 256) -> np.ndarray:
    return np.geomspace(y, x_max, n)


def grid_for_shape(F: Callable, y: float, n: int = 256, cutoff: float = 1e-6) -> np.ndarray:
    """Geometric grid on [y, x_max] with F(x_max) < cutoff."""
    x_max = max(2.0 * y, 1.0)
    while float(np.asarray(F(np.array([x_max])))[0]) >= cutoff:
        x_max *= 1.5
    return geometric_grid(y, x_max, n)


@dataclass
class EmpiricalShape:
    grid: np.ndarray
    mean_F: np.ndarray
    var_F: np.ndarray
    replicas: int
    mu: float
    scaling: tuple[float, float]  # (cell width, cell height)
    values: Optional[np.ndarray] = field(default=None, repr=False)
    model: Optional[EnergyModel] = field(default=None, repr=False)

    def to_rows(self, analytic: Optional[Callable] = None):
        Fa = np.asarray(analytic(self.grid)) if analytic is not None else np.full(len(self.grid), np.nan)
        return [(float(x), float(m), float(v), float(a))
                for x, m, v, a in zip(self.grid, self.mean_F, self.var_F, Fa)]


def empirical_scaled_F(samples: PartitionSample, model: EnergyModel, mu: float, grid,
                       keep_values: bool = True) -> EmpiricalShape:
    """Per-grid-point mean and variance of f(x/mu; p) / (mu E Mon).

    E Mon is the analytic series value at (model, mu), not a sample mean.
    """
    if samples.replicas == 0:
        raise ValueError("empty sample set")
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be positive and increasing")
    em = expected_monomers(model, mu).value
    height = 1.0 / (mu * em)
    thresholds = np.array([first_index(x, mu) for x in grid])
    f = samples.tail_counts(thresholds)
    F = f * height
    var = F.var(axis=0, ddof=1) if samples.replicas > 1 else np.zeros(len(grid))
    return EmpiricalShape(grid, F.mean(axis=0), var, samples.replicas, mu, (mu, height),
                          F if keep_values else None, model)


@dataclass
class DeviationReport:
    sup_deviation: float  # mean over replicas of sup_{x >= y} |F_mu - F|
    epsilon: float
    empirical_exceed_prob: float
    kolmogorov_bound: float
    sigma: float
    verdict: bool
    y: float
    mu: float
    replicas: int

    def to_dict(self):
        return {
            "mu": self.mu,
            "y": self.y,
            "epsilon": self.epsilon,
            "replicas": self.replicas,
            "mean_sup_deviation": self.sup_deviation,
            "empirical_exceed_prob": self.empirical_exceed_prob,
            "kolmogorov_bound": self.kolmogorov_bound,
            "binomial_sigma": self.sigma,
            "verdict": "pass" if self.verdict else "fail",
        }


def deviation_report(shape: EmpiricalShape, analytic, y: float, epsilon: float,
                     model: Optional[EnergyModel] = None) -> DeviationReport:
    """Empirical P{sup_{x>=y} |F_mu - F| >= eps} with the Kolmogorov-type bound 4 Var F_mu(y) / eps^2."""
    if y <= 0:
        raise ValueError("y must be positive")
    if shape.values is None:
        raise ValueError("shape was built without per-replica values")
    if shape.grid[0] > y * (1 + 1e-12):
        raise ValueError(f"grid starts at {shape.grid[0]} > y={y}")
    model = model or shape.model
    if model is None:
        raise ValueError("model needed for the variance bound")
    sel = shape.grid >= y * (1 - 1e-12)
    F = analytic.F if isinstance(analytic, LimitShape) else analytic
    target = np.asarray(F(shape.grid[sel]), float)
    sup = np.max(np.abs(shape.values[:, sel] - target[None, :]), axis=1)
    p = float(np.mean(sup >= epsilon))
    n = shape.replicas
    sigma = math.sqrt(p * (1 - p) / n)
    bound = 4.0 * variance_F(model, shape.mu, y).value / epsilon ** 2
    return DeviationReport(float(sup.mean()), epsilon, p, bound, sigma, p <= bound + 3 * sigma, y, shape.mu, n)


def convergence_study(model: EnergyModel, mus: Sequence[float], replicas: int, analytic,
                      y: float, epsilon: float, seed: int = 0, grid_n: int = 256,
                      threads: int = 1, tol: float = 1e-9):
    """Deviation reports along a mu sequence (each mu gets its own seed offset)."""
    F = analytic.F if isinstance(analytic, LimitShape) else analytic
    grid = grid_for_shape(F, y, grid_n)
    out = []
    for i, mu in enumerate(mus):
        cfg = SamplerConfig(model, mu, replicas=replicas, seed=seed + i, truncation_tol=tol, threads=threads)
        s = sample_quantum_gc(cfg)
        shape = empirical_scaled_F(s, model, mu, grid)
        out.append((shape, deviation_report(shape, F, y, epsilon, model)))
    return out


def variance_trend(model: EnergyModel, mus: Sequence[float], x: float) -> list[float]:
    return [variance_F(model, mu, x).value for mu in mus]


# -- condensation -------------------------------------------------------------------


def condensation_report(model: EnergyModel, mu_sequence: Sequence[float], samples_per_mu: int,
                        seed: int = 0, threads: int = 1, tol: float = 1e-9) -> dict:
    """Occupations of the condensate states as mu -> mu_*.

    The model is renormalized so that eps_* = 0 (mu values refer to the
    renormalized model, i.e. they are mu - mu_*).
    """
    gs = ground_state(model)
    if gs.scenario != "S2" or not gs.attained_at:
        raise ValueError("no condensate state: model is not in scenario S2")
    m = model.renormalized()
    states = sorted(gs.attained_at)
    rows = []
    for i, mu in enumerate(mu_sequence):
        s = sample_quantum_gc(SamplerConfig(m, mu, replicas=samples_per_mu, seed=seed + i,
                                            truncation_tol=tol, threads=threads))
        masses = s.masses()
        cond_mass = np.zeros(s.replicas)
        per_state = []
        for k0 in states:
            pk = s.occupation(k0)
            cond_mass += k0 * pk
            scaled = mu * pk
            ks = stats.kstest(scaled, stats.expon(scale=1.0 / k0).cdf)
            mean_kp = float(np.mean(k0 * pk)) * mu
            se = float(np.std(k0 * pk, ddof=1)) * mu / math.sqrt(s.replicas)
            exact = mu * k0 * occupation_sum(m, mu, k0, kmax=k0 + 1)
            per_state.append({
                "k": k0,
                "mu_times_mean_k_pk": mean_kp,
                "stderr": se,
                "exact": exact,
                "ks_distance_vs_exp": float(ks.statistic),
                "ks_pvalue": float(ks.pvalue),
            })
        rest = masses - cond_mass
        rows.append({
            "mu": mu,
            "samples": s.replicas,
            "states": per_state,
            "noncondensate_mass_mean": float(rest.mean()),
            "noncondensate_mass_sd": float(rest.std(ddof=1)) if s.replicas > 1 else 0.0,
        })
    return {"model": model.to_config(), "condensate_states": states, "eps_star": gs.eps_star,
            "mu_star": gs.mu_star, "rows": rows}


# -- critical Poisson process ----------------------------------------------------------


def critical_model(beta: float = 1.0) -> EnergyModel:
    """E_k = ln k with the k = 1 (condensate) state removed."""
    return EnergyModel("log", beta=beta, e1_override=0.0, excluded=frozenset({1}))


def _poisson_chisquare(counts: np.ndarray, lam: float) -> tuple[float, float, int]:
    """Chi-square of counts against Poisson(lam); cells {0}, {1}, ..., {J-1}, {>= J}
    with every expected cell count >= 5."""
    n = len(counts)
    J = 0
    while n * stats.poisson.pmf(J, lam) >= 5 and n * stats.poisson.sf(J, lam) >= 5:
        J += 1
    if J == 0:
        return 0.0, 1.0, 0
    obs = [np.sum(counts == j) for j in range(J)] + [np.sum(counts >= J)]
    exp = [stats.poisson.pmf(j, lam) for j in range(J)] + [stats.poisson.sf(J - 1, lam)]
    obs = np.array(obs, float)
    exp = np.array(exp) * n
    exp *= obs.sum() / exp.sum()
    res = stats.chisquare(obs, exp)
    return float(res.statistic), float(res.pvalue), len(obs) - 1


def critical_process_report(mu_sequence: Sequence[float], samples_per_mu: int,
                            intervals: Sequence[tuple[float, float]], seed: int = 0,
                            beta: float = 1.0, threads: int = 1, tol: float = 1e-6) -> dict:
    """Window counts sum_{x/mu <= k < y/mu} p_k against Poisson(E1(x) - E1(y))."""
    for x, y in intervals:
        if not 0 < x < y:
            raise ValueError(f"interval [{x}, {y}) must satisfy 0 < x < y")
    model = critical_model(beta)
    alpha = P_THRESHOLD / max(1, len(intervals))
    rows = []
    all_ok = True
    for i, mu in enumerate(mu_sequence):
        s = sample_quantum_gc(SamplerConfig(model, mu, replicas=samples_per_mu, seed=seed + i,
                                            truncation_tol=tol, threads=threads))
        n = s.replicas
        counts = {}
        win = []
        for x, y in intervals:
            c = s.window_counts(first_index(x, mu), first_index(y, mu))
            counts[(x, y)] = c
            lam = critical_rate(x, y)
            mean, var = float(c.mean()), float(c.var(ddof=1))
            se_mean = math.sqrt(lam / n)
            se_var = math.sqrt((lam + 2 * lam * lam) / n)
            chi, pv, dof = _poisson_chisquare(c, lam)
            ok = abs(mean - lam) <= 3 * se_mean and abs(var - lam) <= 3 * se_var and pv > alpha
            all_ok &= ok
            win.append({
                "x": x, "y": y, "lambda": lam,
                "exact_finite_mu_mean": poisson_window_mean(model, mu, x, y),
                "mean": mean, "mean_se": se_mean,
                "variance": var, "variance_se": se_var,
                "dispersion": var / mean if mean else float("nan"),
                "chi2": chi, "chi2_dof": dof, "chi2_pvalue": pv,
                "pass": bool(ok),
            })
        corr = []
        keys = list(counts)
        for a in range(len(keys)):
            for b in range(a + 1, len(keys)):
                (x1, y1), (x2, y2) = keys[a], keys[b]
                if y1 <= x2 or y2 <= x1:
                    ca, cb = counts[keys[a]], counts[keys[b]]
                    r = float(np.corrcoef(ca, cb)[0, 1]) if ca.std() > 0 and cb.std() > 0 else 0.0
                    ok = abs(r) <= 3.0 / math.sqrt(n)
                    all_ok &= ok
                    corr.append({"a": list(keys[a]), "b": list(keys[b]), "corr": r,
                                 "sigma": 1.0 / math.sqrt(n), "pass": bool(ok)})
        rows.append({"mu": mu, "samples": n, "windows": win, "correlations": corr,
                     "atom_at_zero_mean": float(mu * s.occupation(1).mean())})
    return {"beta": beta, "rows": rows, "bonferroni_alpha": alpha, "verdict": "pass" if all_ok else "fail"}


# -- Bell statistics ---------------------------------------------------------------------


def bell_nu(M: float) -> float:
    """Root of nu e^nu = M."""
    if M <= 0:
        raise ValueError("M must be positive")
    return brentq(lambda v: v * math.exp(v) - M, 0.0, max(1.0, math.log(M) + 1.0), xtol=1e-15, rtol=1e-15)


def bell_expected(nu: float, x: float) -> float:
    """Exact e^-nu E f(nu x) at beta = 0, mu = -ln nu (alpha_k = nu^k / k!)."""
    kmin = max(1, math.ceil(round(nu * x, 9)))
    return float(stats.poisson.sf(kmin - 1, nu)) if kmin > 1 else float(-math.expm1(-nu))


def bell_step_report(M_targets: Sequence[float], samples: int, xs: Sequence[float] = (0.5, 1.5),
                     seed: int = 0, threads: int = 1, tol: float = 1e-9) -> dict:
    """Rescaled e^-nu f(nu x) from classical draws compared with the step 1{x <= 1}."""
    model = EnergyModel("const", beta=0.0)
    rows = []
    for i, M in enumerate(M_targets):
        nu = bell_nu(M)
        mu = -math.log(nu)
        s = sample_classical_gc(SamplerConfig(model, mu, ensemble="classical", replicas=samples,
                                              seed=seed + i, truncation_tol=tol, threads=threads))
        thresholds = np.array([max(1, math.ceil(round(nu * x, 9))) for x in xs])
        order = np.argsort(thresholds)
        f = np.empty((s.replicas, len(xs)))
        f[:, order] = s.tail_counts(thresholds[order])
        vals = f * math.exp(-nu)
        rows.append({
            "M": M, "nu": nu, "mu": mu, "samples": s.replicas,
            "mean_mass": float(s.masses().mean()),
            "points": [{"x": x, "mean": float(vals[:, j].mean()),
                        "se": float(vals[:, j].std(ddof=1) / math.sqrt(s.replicas)) if s.replicas > 1 else 0.0,
                        "exact": bell_expected(nu, x), "step": 1.0 if x <= 1 else 0.0}
                       for j, x in enumerate(xs)],
        })
    verdicts = {}
    for j, x in enumerate(xs):
        series = [r["points"][j]["mean"] for r in rows]
        last = series[-1]
        if x > 1:
            verdicts[f"x={x}"] = bool(all(b < a for a, b in zip(series, series[1:])) and last < 0.05)
        else:
            verdicts[f"x={x}"] = bool(0.9 <= last <= 1.1)
    return {"rows": rows, "verdicts": verdicts, "verdict": "pass" if all(verdicts.values()) else "fail"}


def analytic_curve(model: EnergyModel, mu: float, grid) -> np.ndarray:
    return np.array([expected_F(model, mu, x).value for x in grid])
