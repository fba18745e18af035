"""Internal energies ``E_k = u(ln k)``, ground states and regime classification.

Probabilities depend on ``beta*E_k + mu*k`` only, so every per-state quantity
is computed from that exponent (``log theta_k = -(beta*E_k + mu*k)``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

KINDS = ("decay", "const", "loglog", "log", "power", "table")

LN_LN_3 = math.log(math.log(3.0))


@dataclass(frozen=True)
class EnergyModel:
    """Energy sequence plus inverse temperature.

    kinds
        ``decay``   E_k = k**-alpha
        ``const``   E_k = c
        ``loglog``  E_k = ln ln k for k >= 3, E_1 = E_2 = ln ln 3
        ``log``     E_k = slope * ln k for k >= 2, E_1 = ln 2 unless ``e1_override``
        ``power``   E_k = c * k**alpha (used mainly as a table tail)
        ``table``   explicit E_1..E_K followed by ``tail`` for k > K

    ``shift`` subtracts ``shift * k`` from every energy (renormalization of the
    ground state).  States listed in ``excluded`` are removed from the system
    (infinite energy, theta_k = 0).
    """

    kind: str = "const"
    beta: float = 1.0
    alpha: float = 1.0
    c: float = 1.0
    slope: float = 1.0
    table: tuple[float, ...] = ()
    tail: Optional["EnergyModel"] = None
    e1_override: Optional[float] = None
    shift: float = 0.0
    excluded: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown energy kind {self.kind!r}")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.kind == "decay" and self.alpha <= 0:
            raise ValueError("decay kind needs alpha > 0")
        if self.kind == "table" and self.tail is None:
            raise ValueError("table kind needs a tail model")
        if self.kind == "table" and self.tail.kind == "table":
            raise ValueError("nested tables are not supported")
        object.__setattr__(self, "table", tuple(float(v) for v in self.table))
        object.__setattr__(self, "excluded", frozenset(int(k) for k in self.excluded))

    # -- energies ---------------------------------------------------------
    def _base(self, k: np.ndarray) -> np.ndarray:
        kind = self.kind
        if kind == "decay":
            e = k ** (-self.alpha)
        elif kind == "const":
            e = np.full_like(k, self.c)
        elif kind == "loglog":
            e = np.log(np.log(np.maximum(k, 3.0)))
        elif kind == "log":
            e = self.slope * np.log(np.maximum(k, 2.0))
        elif kind == "power":
            e = self.c * k ** self.alpha
        else:
            n = len(self.table)
            e = self.tail._base(k)
            head = k <= n
            if np.any(head):
                idx = k[head].astype(np.int64) - 1
                e[head] = np.asarray(self.table)[idx]
        if self.e1_override is not None:
            e = np.where(k == 1, self.e1_override, e)
        return e

    def energies(self, k) -> np.ndarray:
        """Vectorized ``E_k`` (float array; ``inf`` for excluded states)."""
        k = np.asarray(k, dtype=float)
        if np.any(k < 1):
            raise ValueError("state index k must be >= 1")
        e = self._base(np.atleast_1d(k).copy()) - self.shift * np.atleast_1d(k)
        if self.excluded:
            e = np.where(np.isin(np.atleast_1d(k), list(self.excluded)), np.inf, e)
        return e.reshape(np.shape(k)) if np.ndim(k) else e

    def u(self, t: float) -> float:
        """Continuous profile with ``E_k = u(ln k)`` (used for scalings)."""
        m = self.tail if self.kind == "table" else self
        kind = m.kind
        if kind == "decay":
            val = math.exp(-m.alpha * t)
        elif kind == "const":
            val = m.c
        elif kind == "loglog":
            val = math.log(max(t, math.log(3.0)))
        elif kind == "log":
            val = m.slope * t
        else:
            val = m.c * math.exp(m.alpha * t)
        return val - self.shift * math.exp(t)

    def renormalized(self) -> "EnergyModel":
        """Model with ``E_k -> E_k - eps_* k`` so that the ground state is 0."""
        gs = ground_state(self)
        if gs.scenario == "S1":
            raise ValueError("ground state energy is -inf; cannot renormalize")
        return replace(self, shift=self.shift + gs.eps_star)

    def with_beta(self, beta: float) -> "EnergyModel":
        return replace(self, beta=beta)

    def to_config(self) -> dict:
        frag: dict = {"kind": "table" if self.kind == "table" else _CONFIG_NAMES[self.kind]}
        if self.kind in ("decay", "power"):
            frag["alpha"] = self.alpha
        if self.kind in ("const", "power"):
            frag["c"] = self.c
        if self.kind == "log" and self.slope != 1.0:
            frag["slope"] = self.slope
        if self.kind == "table":
            frag["table"] = list(self.table)
            frag["tail"] = self.tail.to_config()["energy"]
        if self.e1_override is not None:
            frag["e1_override"] = self.e1_override
        if self.shift:
            frag["shift"] = self.shift
        if self.excluded:
            frag["exclude"] = sorted(self.excluded)
        return {"energy": frag, "beta": self.beta}


_CONFIG_NAMES = {"decay": "decay", "const": "const", "loglog": "loglog", "log": "log", "power": "power"}


def model_from_config(cfg: dict) -> EnergyModel:
    """Parse ``{"energy": {...}, "beta": b}``."""
    if "energy" not in cfg:
        raise ValueError("config: missing 'energy' object")
    frag = dict(cfg["energy"])
    beta = float(cfg.get("beta", frag.pop("beta", 1.0)))
    return _model_from_fragment(frag, beta)


def _model_from_fragment(frag: dict, beta: float) -> EnergyModel:
    kind = frag.get("kind")
    if kind not in KINDS:
        raise ValueError(f"config.energy.kind: expected one of {KINDS}, got {kind!r}")
    tail = None
    if kind == "table":
        if "tail" not in frag:
            raise ValueError("config.energy.tail: required for kind 'table'")
        tail = _model_from_fragment(dict(frag["tail"]), beta)
    kw = {}
    for key in ("alpha", "c", "slope", "shift"):
        if key in frag:
            kw[key] = float(frag[key])
    if frag.get("e1_override") is not None:
        kw["e1_override"] = float(frag["e1_override"])
    return EnergyModel(
        kind=kind,
        beta=beta,
        table=tuple(frag.get("table", ())),
        tail=tail,
        excluded=frozenset(frag.get("exclude", ())),
        **kw,
    )


def energy(model: EnergyModel, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(model.energies(np.array([k]))[0])


# -- ground state -------------------------------------------------------------


@dataclass(frozen=True)
class GroundState:
    eps_star: float
    mu_star: float
    attained_at: frozenset[int]
    at_infinity: bool
    scenario: str  # S1 | S2 | S3

    def to_dict(self):
        return {
            "eps_star": self.eps_star,
            "mu_star": self.mu_star,
            "attained_at": sorted(self.attained_at) + (["infinity"] if self.at_infinity else []),
            "scenario": self.scenario,
        }


_TIE = 1e-12


def _tail_infimum(m: EnergyModel, kmin: int) -> tuple[float, Optional[int], bool]:
    """Infimum of ``E_k/k`` over ``k >= kmin`` for a non-table base kind.

    Returns (value, finite argmin or None, attained-at-infinity flag).
    ``e1_override``/``excluded``/``shift`` are handled by the caller.
    """
    kind = m.kind
    if kind == "decay":
        return 0.0, None, True
    if kind == "const":
        if m.c > 0:
            return 0.0, None, True
        if m.c == 0:
            return 0.0, kmin, True
        return m.c / kmin, kmin, False
    if kind in ("loglog", "log"):
        # E_k/k decreases to 0 from above once E_k > 0
        first = float(m._base(np.array([float(kmin)]))[0])
        if first < 0 or (kind == "log" and m.slope < 0):
            return -math.inf, None, True
        return 0.0, None, True
    # power: eps_k = c k^(alpha-1)
    c, p = m.c, m.alpha
    if c == 0:
        return 0.0, kmin, True
    if p > 1:
        return (c * kmin ** (p - 1), kmin, False) if c > 0 else (-math.inf, None, True)
    if p == 1:
        return c, kmin, True
    return (0.0, None, True) if c > 0 else (c * kmin ** (p - 1), kmin, False)


def ground_state(model: EnergyModel) -> GroundState:
    """``eps_* = inf_k E_k/k``, ``mu_* = -beta eps_*`` and where it is attained."""
    base = model.tail if model.kind == "table" else model
    n_head = len(model.table) if model.kind == "table" else 0
    n_head = max(n_head, 1 if model.e1_override is not None else 0)
    n_head = max(n_head, max(model.excluded, default=0))
    tail_val, tail_arg, tail_inf = _tail_infimum(base, n_head + 1)
    # finite head: explicit minimization
    cands: list[tuple[float, int]] = []
    if n_head:
        ks = np.arange(1, n_head + 1, dtype=float)
        e = model.energies(ks) + model.shift * ks
        for k, ek in zip(range(1, n_head + 1), e):
            if math.isfinite(ek):
                cands.append((ek / k, k))
    if tail_arg is not None and tail_arg not in model.excluded:
        cands.append((tail_val, tail_arg))

    if tail_val == -math.inf:
        eps = -math.inf
        attained: frozenset[int] = frozenset()
        at_inf = True
    else:
        eps = min([v for v, _ in cands] + [tail_val])
        attained = frozenset(k for v, k in cands if v <= eps + _TIE * max(1.0, abs(eps)))
        at_inf = tail_inf and tail_val <= eps + _TIE * max(1.0, abs(eps))
    eps -= model.shift
    if eps == -math.inf:
        scenario = "S1"
    elif attained:
        scenario = "S2"
    else:
        scenario = "S3"
    mu_star = 0.0 if model.beta == 0 else -model.beta * eps + 0.0  # no -0.0
    return GroundState(eps, mu_star, attained, at_inf, scenario)


# -- regimes ------------------------------------------------------------------

ROWS = ("i", "ii", "iii", "iv", "supercritical")


@dataclass(frozen=True)
class RegimeTag:
    scenario: str
    regime: Optional[str]  # i | ii | iii | iv | supercritical; None for S1
    limit_shape: str  # classical | dilog | exp | gamma | none
    thermo_limit: Optional[bool]  # None when indeterminate
    reason: str = ""
    effective_beta: float = 0.0

    def to_dict(self):
        d = {
            "scenario": self.scenario,
            "regime": self.regime,
            "limit_shape": self.limit_shape,
            "thermo_limit": self.thermo_limit,
        }
        if self.reason:
            d["reason"] = self.reason
        return d


def _tail_row(m: EnergyModel) -> str:
    kind = m.kind
    if kind == "decay":
        return "i"
    if kind == "const":
        return "ii" if m.c != 0 else "i"
    if kind == "loglog":
        return "iii"
    if kind == "log":
        return "iv"
    if m.alpha > 0:
        return "supercritical"
    if m.alpha == 0:
        return "ii"
    return "i"


def classify_regime(model: EnergyModel) -> RegimeTag:
    """Table row from the declared tail kind (not inferred from values)."""
    gs = ground_state(model)
    if gs.scenario == "S1":
        return RegimeTag("S1", None, "none", False, "eps_star=-inf: no grand canonical measure")
    base = model.tail if model.kind == "table" else model
    row = _tail_row(base)
    beta = model.beta
    if row == "ii":
        beta_eff = beta * (base.c if base.kind in ("const", "power") else 1.0)
    elif row == "iv":
        beta_eff = beta * base.slope
    else:
        beta_eff = beta
    if gs.scenario == "S2":
        shape, thermo, reason = "none", True, "condensation at " + ",".join(map(str, sorted(gs.attained_at)))
        return RegimeTag("S2", row, shape, thermo, reason, beta_eff)
    if row == "supercritical":
        return RegimeTag("S3", row, "none", False, "E Mon bounded as mu->0", beta_eff)
    if row == "i":
        return RegimeTag("S3", row, "classical", True, "", beta_eff)
    if row == "ii":
        return RegimeTag("S3", row, "dilog", True, "", beta_eff)
    if row == "iii":
        return RegimeTag("S3", row, "exp", True, "", beta_eff)
    # critical row iv
    if beta_eff < 1:
        return RegimeTag("S3", row, "gamma", True, "", beta_eff)
    if beta_eff == 1:
        return RegimeTag("S3", row, "none", True, "beta=1: random limit (Poisson process)", beta_eff)
    if beta_eff < 2:
        return RegimeTag("S3", row, "none", True, "beta>1", beta_eff)
    if beta_eff == 2:
        return RegimeTag("S3", row, "none", None, "beta=2: indeterminate", beta_eff)
    return RegimeTag("S3", row, "none", False, "beta>2: E Mon bounded", beta_eff)


def normalize_slope(model: EnergyModel) -> EnergyModel:
    """Opt-in rescaling for a log tail ``E_k = a ln k``: (a, beta) -> (1, a*beta)."""
    base = model.tail if model.kind == "table" else model
    if base.kind != "log":
        raise ValueError("slope normalization applies to log tails only")
    a = base.slope
    if a <= 0:
        raise ValueError("log slope must be positive")
    if model.kind == "table":
        new_tail = replace(base, slope=1.0, beta=model.beta * a)
        return replace(model, table=tuple(v / a for v in model.table), tail=new_tail,
                       beta=model.beta * a, shift=model.shift / a,
                       e1_override=None if model.e1_override is None else model.e1_override / a)
    return replace(model, slope=1.0, beta=model.beta * a, shift=model.shift / a,
                   e1_override=None if model.e1_override is None else model.e1_override / a)


# -- per-state parameters -------------------------------------------------------


def log_thetas(model: EnergyModel, mu: float, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    e = model.energies(k)
    gone = np.isposinf(e)
    # excluded states stay at theta = 0 even when beta = 0
    bE = np.where(gone, np.inf, model.beta * np.where(gone, 0.0, e))
    return -(bE + mu * k)


def theta(model: EnergyModel, mu: float, k: int) -> float:
    """Geometric parameter ``exp(-beta E_k - mu k)``; must be < 1."""
    if k < 1:
        raise ValueError("k must be >= 1")
    lt = float(log_thetas(model, mu, np.array([k]))[0])
    if lt >= 0:
        raise ValueError(f"theta_{k} >= 1 at mu={mu}: mu must exceed mu_*")
    return math.exp(lt)


def log_alphas(model: EnergyModel, mu: float, k) -> np.ndarray:
    from scipy.special import gammaln

    k = np.asarray(k, dtype=float)
    return log_thetas(model, mu, k) - gammaln(k + 1.0)


def alpha(model: EnergyModel, mu: float, k: int) -> float:
    """Poisson parameter ``exp(-beta E_k - mu k) / k!`` (any mu)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return math.exp(float(log_alphas(model, mu, np.array([k]))[0]))
