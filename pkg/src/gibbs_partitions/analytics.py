"""Truncated-series evaluation of grand canonical quantities and limit shapes.

Every series over states k is cut at an index K chosen so that the omitted
tail is bounded by a certificate.  The certificate uses

    beta*E_k + mu*k >= beta*L_K + delta*k   for k > K,

with ``delta = mu - mu_*`` and ``L_K`` a lower bound of ``E_k - eps_* k`` past
K (0 in general, larger for increasing energies), so ``theta_k <= r q^k``
with ``q = exp(-delta)``, ``r = exp(-beta L_K)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .energy import EnergyModel, RegimeTag, classify_regime, ground_state, log_thetas
from .partitions import enumerate_partitions, partition_number
from .special import dilog, exp_integral_e1, upper_gamma, vgammaincc

DEFAULT_TOL = 1e-9
_CHUNK_START = 1 << 16
_MAX_K = 1 << 27


class SeriesDivergence(ValueError):
    """mu is at or below mu_*, or the ground state is -inf."""


@dataclass(frozen=True)
class TruncatedSeriesValue:
    value: float
    truncation_index: int
    tail_bound: float
    requested_tol: float

    def __float__(self):
        return self.value

    def to_dict(self):
        return {"value": self.value, "K": self.truncation_index, "tail_bound": self.tail_bound}


def _delta(model: EnergyModel, mu: float) -> float:
    gs = ground_state(model)
    if gs.scenario == "S1" and model.beta > 0:
        raise SeriesDivergence("eps_* = -inf: the grand partition function diverges")
    d = mu - gs.mu_star
    if d <= 0:
        raise SeriesDivergence(f"mu={mu} must exceed mu_*={gs.mu_star}")
    return d


def _tail_energy_floor(model: EnergyModel, K: int) -> float:
    """Lower bound of ``E_k - eps_* k`` valid for every k > K (>= 0)."""
    if model.beta == 0:
        return 0.0
    base = model.tail if model.kind == "table" else model
    head = max(len(model.table), max(model.excluded, default=0), 1 if model.e1_override is not None else 0)
    if K < head:
        return 0.0
    gs = ground_state(model)
    eps = gs.eps_star + model.shift  # in base units
    k1 = float(K + 1)
    kind = base.kind
    if kind in ("log", "loglog") and eps == 0.0 and k1 >= 3:
        e = float(base._base(np.array([k1]))[0])
        return max(e, 0.0)
    if kind == "const" and base.c > 0 and eps == 0.0:
        return base.c
    if kind == "power" and base.c > 0 and base.alpha > 0:
        e = base.c * k1 ** base.alpha - eps * k1
        return max(e, 0.0) if base.alpha >= 1 else 0.0
    return 0.0


def _certify(model, mu, tol, kmin, term_fn, tail_fn) -> TruncatedSeriesValue:
    """Sum ``term_fn(log_theta, k)`` over k >= kmin until ``tail_fn`` <= tol."""
    delta = _delta(model, mu)
    q = math.exp(-delta)
    est = max(2.0 / delta, (math.log(1.0 / tol) + 2.0 * math.log(max(1.0 / delta, 1.0))) / delta)
    K = int(min(math.ceil(est), _CHUNK_START))
    K = max(K, kmin)
    partial: list[float] = []
    lo = kmin
    while True:
        if K >= lo:
            k = np.arange(lo, K + 1, dtype=float)
            lt = log_thetas(model, mu, k)
            terms = term_fn(lt, k)
            terms = terms[terms > 1e-300]
            partial.append(math.fsum(terms))
            lo = K + 1
        n = max(K, kmin - 1) + 1
        r = math.exp(-model.beta * _tail_energy_floor(model, n - 1))
        bound = tail_fn(q, r, n)
        if bound <= tol:
            return TruncatedSeriesValue(math.fsum(partial), K, bound, tol)
        if K >= _MAX_K:
            raise SeriesDivergence(f"series not certified by K={K} (tail bound {bound:.3g})")
        K *= 2


def _occ(lt, k):
    return 1.0 / np.expm1(-lt)


def _tail_occ(q, r, n):
    # sum_{k>=n} r q^k / (1 - r q^n)
    return r * q ** n / ((1.0 - q) * (1.0 - r * q ** n))


def grand_potential_log(model: EnergyModel, mu: float, tol: float = DEFAULT_TOL) -> TruncatedSeriesValue:
    """ln Xi = -sum ln(1 - theta_k)."""
    return _certify(model, mu, tol, 1, lambda lt, k: -np.log1p(-np.exp(lt)), _tail_occ)


def expected_monomers(model: EnergyModel, mu: float, tol: float = DEFAULT_TOL) -> TruncatedSeriesValue:
    """E Mon = sum k / (exp(beta E_k + mu k) - 1)."""

    def tail(q, r, n):
        return r * q ** n * (n - (n - 1) * q) / ((1.0 - q) ** 2 * (1.0 - r * q ** n))

    return _certify(model, mu, tol, 1, lambda lt, k: k * _occ(lt, k), tail)


def first_index(x: float, mu: float) -> int:
    """Smallest integer k with k >= x/mu (guarding float noise in x/mu)."""
    return max(1, math.ceil(round(x / mu, 9)))


def occupation_sum(model, mu, kmin, tol=DEFAULT_TOL, kmax: Optional[int] = None):
    """sum_{kmin <= k (< kmax)} E p_k."""
    if kmax is None:
        return _certify(model, mu, tol, kmin, _occ, _tail_occ)
    k = np.arange(kmin, kmax, dtype=float)
    return math.fsum(_occ(log_thetas(model, mu, k), k))


def variance_sum(model, mu, kmin, tol=DEFAULT_TOL, kmax: Optional[int] = None):
    """sum_{k >= kmin} Var p_k = theta / (1 - theta)^2."""

    def term(lt, k):
        th = np.exp(lt)
        return th / (-np.expm1(lt)) ** 2

    def tail(q, r, n):
        return r * q ** n / ((1.0 - q) * (1.0 - r * q ** n) ** 2)

    if kmax is None:
        return _certify(model, mu, tol, kmin, term, tail)
    k = np.arange(kmin, kmax, dtype=float)
    return math.fsum(term(log_thetas(model, mu, k), k))


def _check_x(model, x):
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        tag = classify_regime(model)
        if tag.regime == "i" or (tag.regime == "iv" and tag.effective_beta >= 1):
            raise ValueError("x = 0 is not allowed in this regime (shape density not integrable at 0)")


def expected_F(model: EnergyModel, mu: float, x: float, tol: float = DEFAULT_TOL) -> TruncatedSeriesValue:
    """E F_mu(x) = sum_{k >= x/mu} E p_k / (mu E Mon)."""
    _check_x(model, x)
    em = expected_monomers(model, mu, tol)
    s = occupation_sum(model, mu, first_index(x, mu) if x > 0 else 1, tol)
    scale = mu * em.value
    return TruncatedSeriesValue(s.value / scale, s.truncation_index, s.tail_bound / scale, tol)


def variance_F(model: EnergyModel, mu: float, x: float, tol: float = DEFAULT_TOL) -> TruncatedSeriesValue:
    """Var F_mu(x) = sum_{k >= x/mu} theta/(1-theta)^2 / (mu E Mon)^2."""
    _check_x(model, x)
    em = expected_monomers(model, mu, tol)
    s = variance_sum(model, mu, first_index(x, mu) if x > 0 else 1, tol)
    scale = (mu * em.value) ** 2
    return TruncatedSeriesValue(s.value / scale, s.truncation_index, s.tail_bound / scale, tol)


def scaled_mass(model: EnergyModel, mu: float, tol: float = DEFAULT_TOL) -> float:
    """mu^2 exp(beta u(-ln mu)) E Mon, which tends to lambda."""
    em = expected_monomers(model, mu, tol).value
    return mu * mu * math.exp(model.beta * model.u(-math.log(mu))) * em


# -- canonical sums -------------------------------------------------------------


def partition_energy(model: EnergyModel, p) -> float:
    if not p.items:
        return 0.0
    ks = np.array([k for k, _ in p.items], dtype=float)
    cs = np.array([c for _, c in p.items], dtype=float)
    return float(np.dot(model.energies(ks), cs))


def canonical_weights(model: EnergyModel, M: int):
    """(partitions, weights exp(-beta H)) over all partitions of M."""
    parts = list(enumerate_partitions(M))
    w = np.array([math.exp(-model.beta * partition_energy(model, p)) if model.beta else 1.0 for p in parts])
    return parts, w


def canonical_sum(model: EnergyModel, M: int) -> float:
    _, w = canonical_weights(model, M)
    return math.fsum(w)


@dataclass(frozen=True)
class GeneratingFunctionCheck:
    log_xi: float
    log_partial: float
    remainder_bound: float

    @property
    def discrepancy(self) -> float:
        return abs(self.log_xi - self.log_partial)

    @property
    def ok(self) -> bool:
        return self.discrepancy <= self.remainder_bound


def generating_function_check(model: EnergyModel, mu: float, m_max: int = 20,
                              tol: float = 1e-13) -> GeneratingFunctionCheck:
    """Compare ln Xi with ln sum_{M <= m_max} Z_M e^{-mu M}.

    Needs E_k >= 0 so that Z_M <= Q_M; the omitted canonical terms are
    bounded with exact Q_M up to a cut-off and Q_M <= exp(pi sqrt(2M/3))
    beyond it.
    """
    ks = np.arange(1, max(m_max, 1) + 1, dtype=float)
    if model.beta > 0 and np.any(model.energies(ks) < 0):
        raise ValueError("remainder certificate needs non-negative energies")
    if mu <= 0:
        raise ValueError("mu must be positive")
    lx = grand_potential_log(model, mu, tol)
    partial = math.fsum(canonical_sum(model, M) * math.exp(-mu * M) for M in range(m_max + 1))
    # exact Q_M up to m_cut, then a ratio bound on exp(pi sqrt(2M/3) - mu M)
    m_cut = max(m_max + 1, int(math.ceil(4.0 * math.pi ** 2 / (6.0 * mu * mu))) + 1, 200)
    rem = math.fsum(float(partition_number(M)) * math.exp(-mu * M) for M in range(m_max + 1, m_cut + 1))
    rho = math.exp(math.pi / math.sqrt(6.0 * m_cut) - mu)
    b_cut = math.exp(math.pi * math.sqrt(2.0 * m_cut / 3.0) - mu * m_cut)
    rem += b_cut * rho / (1.0 - rho)
    bound = math.log1p(rem / partial) + lx.tail_bound
    return GeneratingFunctionCheck(lx.value, math.log(partial), bound)


# -- limit shapes --------------------------------------------------------------


@dataclass(frozen=True)
class LimitShape:
    """Closed-form shape in the cell scaling width = mu, height = 1/(mu E Mon).

    ``cell_height(mu)`` is the asymptotic height ``mu exp(beta u(-ln mu)) / lambda``.
    """

    regime: str
    beta: float
    lam: float
    F: Callable[[np.ndarray], np.ndarray]
    density: Callable[[np.ndarray], np.ndarray]
    u: Callable[[float], float]
    integrable_at_zero: bool = True

    def cell_width(self, mu: float) -> float:
        return mu

    def cell_height(self, mu: float) -> float:
        return mu * math.exp(self.beta * self.u(-math.log(mu))) / self.lam

    def __call__(self, x):
        return self.F(x)


@dataclass(frozen=True)
class NoLimitShape:
    regime: str
    reason: str


@dataclass(frozen=True)
class NoThermodynamicLimit:
    regime: str
    reason: str


@dataclass(frozen=True)
class Indeterminate:
    regime: str
    reason: str


CLASSICAL_C = math.pi / math.sqrt(6.0)


def classical_shape(x):
    """-(sqrt6/pi) ln(1 - exp(-pi x / sqrt6)) in the sqrt(M) scaling."""
    x = np.asarray(x, dtype=float)
    return -np.log1p(-np.exp(-CLASSICAL_C * x)) / CLASSICAL_C


def to_classical_scaling(F_mu: Callable, x):
    """Map a mu-scaled uniform-measure curve onto the sqrt(M) scaling.

    With mu E Mon ~ c^2/mu and sqrt(M) ~ c/mu (c = pi/sqrt6),
    F_M(x) = c F_mu(c x).
    """
    x = np.asarray(x, dtype=float)
    return CLASSICAL_C * np.asarray(F_mu(CLASSICAL_C * x))


def _phi_lambda(regime: str, beta: float):
    """(Phi, lambda, F) for a table row; F(x) = int_x^inf Phi / lambda."""
    if regime == "i":
        lam = math.pi ** 2 / 6.0
        return (lambda x: 1.0 / np.expm1(x), lam,
                lambda x: -np.log1p(-np.exp(-x)) / lam)
    if regime == "ii":
        z = math.exp(-beta)
        li = dilog(z)
        lam = math.exp(beta) * li
        return (lambda x: np.exp(-x) / (1.0 - z * np.exp(-x)), lam,
                lambda x: -np.log1p(-np.exp(-beta - x)) / li)
    if regime == "iii":
        return (lambda x: np.exp(-x), 1.0, lambda x: np.exp(-x))
    if regime == "iv":
        if beta >= 2:
            raise ValueError("lambda = Gamma(2 - beta) needs beta < 2")
        lam = math.gamma(2.0 - beta)
        if beta < 1:
            s = 1.0 - beta
            F = lambda x: vgammaincc(s, x) * math.gamma(s) / lam  # noqa: E731
        else:
            s = 1.0 - beta
            F = lambda x: np.vectorize(lambda t: upper_gamma(s, t) / lam if t > 0 else math.inf,  # noqa: E731
                                       otypes=[float])(x)
        return (lambda x: np.asarray(x, float) ** (-beta) * np.exp(-np.asarray(x, float)), lam, F)
    raise ValueError(f"no table row {regime!r}")


def mean_shape(model: EnergyModel):
    """Limit of E F_mu whenever lambda is finite (also for beta in [1, 2) on row iv).

    Returns (F, lambda).  For row iv with beta >= 1 this is the mean curve only;
    the fluctuations do not vanish, so it is not a limit shape.
    """
    tag = classify_regime(model)
    if tag.regime not in ("i", "ii", "iii", "iv"):
        raise ValueError(f"no finite lambda in regime {tag.regime}")
    _, lam, F = _phi_lambda(tag.regime, tag.effective_beta)
    return (lambda x: np.asarray(F(np.asarray(x, float)), float)), lam


def limit_shape(model: EnergyModel):
    """LimitShape, or a typed NoLimitShape / NoThermodynamicLimit / Indeterminate."""
    tag: RegimeTag = classify_regime(model)
    if tag.scenario != "S3":
        return NoLimitShape(str(tag.regime), f"scenario {tag.scenario}: {tag.reason}")
    if tag.regime == "supercritical":
        return NoThermodynamicLimit("supercritical", "E Mon is bounded")
    b = tag.effective_beta
    if tag.regime == "iv":
        if b == 1:
            return NoLimitShape("iv", "beta=1: scaled distributions converge to a Poisson process")
        if 1 < b < 2:
            return NoLimitShape("iv", "beta>1")
        if b == 2:
            return Indeterminate("iv", "beta=2: behaviour depends on lower-order energy terms")
        if b > 2:
            return NoThermodynamicLimit("iv", "beta>2: E Mon is bounded")
    phi, lam, F = _phi_lambda(tag.regime, b)

    def Fv(x):
        return np.asarray(F(np.asarray(x, float)), float)

    def dens(x):
        return np.asarray(phi(np.asarray(x, float)), float) / lam

    if tag.regime in ("ii", "const"):
        # u -> c; keep the effective beta in the height
        u = lambda t: 1.0  # noqa: E731
        beta_h = b
    elif tag.regime == "iv":
        u = lambda t: t  # noqa: E731
        beta_h = b
    else:
        u = model.u
        beta_h = model.beta
    return LimitShape(tag.regime, beta_h, lam, Fv, dens, u, integrable_at_zero=tag.regime != "i")


def mu_for_target_mass(model: EnergyModel, M_target: float, tol: float = 1e-6,
                       series_tol: float = DEFAULT_TOL) -> float:
    """Bisection (in log delta) for E Mon(mu) = M_target."""
    if M_target <= 0:
        raise ValueError("target mass must be positive")
    mu_star = ground_state(model).mu_star
    _delta(model, mu_star + 1.0)
    tag = classify_regime(model)
    if tag.scenario == "S3" and tag.thermo_limit is False:
        raise ValueError(f"target mass {M_target} unreachable: E Mon stays bounded ({tag.reason})")

    def em(d):
        return expected_monomers(model, mu_star + d, series_tol).value

    hi = 1.0
    while em(hi) > M_target:
        hi *= 4.0
        if hi > 1e6:
            raise ValueError("target mass too small to reach")
    lo = hi / 4.0
    while em(lo) < M_target:
        lo /= 4.0
        if lo < 1e-9:
            raise ValueError(f"target mass {M_target} unreachable: E Mon stays bounded")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        v = em(mid)
        if abs(v - M_target) <= tol * M_target:
            return mu_star + mid
        if v > M_target:
            lo = mid
        else:
            hi = mid
    return mu_star + math.sqrt(lo * hi)


def poisson_window_mean(model: EnergyModel, mu: float, x: float, y: float) -> float:
    """Exact E sum_{x/mu <= k < y/mu} p_k at finite mu."""
    return occupation_sum(model, mu, first_index(x, mu), kmax=first_index(y, mu))


def critical_rate(x: float, y: float) -> float:
    return exp_integral_e1(x) - exp_integral_e1(y)
