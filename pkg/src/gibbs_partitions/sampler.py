"""Samplers for the quantum (geometric), classical (Poisson) and canonical ensembles.

Replicas are drawn in fixed-size batches.  Batch ``b`` of stream ``s`` uses
its own Philox generator keyed by ``(seed, s, b)``, so a run is reproducible
for a given seed and config whatever the number of worker threads.

States with a large occupation probability are sampled densely (one uniform
per state and replica, inverse CDF).  The remaining tail is sparse: within a
block of consecutive states the event ``{p_k > 0}`` is generated by thinning a
Bernoulli(r) process, ``r`` being the largest success probability in the
block, which is exact and costs O(number of candidates).
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy.special import gammaln

from . import __version__
from .analytics import canonical_weights, mu_for_target_mass
from .energy import EnergyModel, ground_state, log_alphas, log_thetas
from .partitions import ENUMERATION_CAP, Partition

BATCH_SIZE = 1024
DENSE_PROB = 0.02
EXACT_CANONICAL_MAX = 30

_STREAM_QUANTUM = 1
_STREAM_CLASSICAL = 2
_STREAM_CANONICAL = 3
_STREAM_REJECTION = 4


@dataclass(frozen=True)
class SamplerConfig:
    model: EnergyModel
    mu: float
    ensemble: str = "quantum"  # quantum | classical | canonical
    mass: Optional[int] = None
    truncation_tol: float = 1e-9
    seed: int = 0
    replicas: int = 1
    max_attempts: int = 10 ** 7
    method: str = "auto"  # canonical: auto | exact | rejection
    threads: int = 1

    def __post_init__(self):
        if self.ensemble not in ("quantum", "classical", "canonical"):
            raise ValueError(f"unknown ensemble {self.ensemble!r}")
        if self.truncation_tol <= 0:
            raise ValueError("truncation_tol must be positive")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.ensemble == "canonical" and (self.mass is None or self.mass < 0):
            raise ValueError("canonical ensemble needs mass >= 0")
        if self.ensemble == "quantum":
            mu_star = ground_state(self.model).mu_star
            if not self.mu > mu_star:
                raise ValueError(f"quantum ensemble needs mu > mu_* = {mu_star}")


def batch_rng(seed: int, stream: int, batch: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed & (2 ** 64 - 1), spawn_key=(stream, batch))
    return np.random.Generator(np.random.Philox(ss))


# -- sample container -----------------------------------------------------------


@dataclass
class PartitionSample:
    """Many partitions in sparse (replica, k, count) form, sorted by replica then k."""

    replicas: int
    rep: np.ndarray
    k: np.ndarray
    count: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def concat(cls, parts: list["PartitionSample"]) -> "PartitionSample":
        off = 0
        reps, ks, cs = [], [], []
        for p in parts:
            reps.append(p.rep + off)
            ks.append(p.k)
            cs.append(p.count)
            off += p.replicas
        if not parts:
            e = np.zeros(0, np.int64)
            return cls(0, e, e.copy(), e.copy())
        return cls(off, np.concatenate(reps), np.concatenate(ks), np.concatenate(cs))

    @classmethod
    def from_partitions(cls, parts: list[Partition]) -> "PartitionSample":
        reps, ks, cs = [], [], []
        for i, p in enumerate(parts):
            for k, c in p.items:
                reps.append(i)
                ks.append(k)
                cs.append(c)
        a = lambda v: np.asarray(v, dtype=np.int64)  # noqa: E731
        return cls(len(parts), a(reps), a(ks), a(cs))

    def take(self, n: int) -> "PartitionSample":
        keep = self.rep < n
        return PartitionSample(n, self.rep[keep], self.k[keep], self.count[keep], dict(self.meta))

    def select(self, mask_replicas: np.ndarray) -> "PartitionSample":
        idx = np.flatnonzero(mask_replicas)
        new_id = np.full(self.replicas, -1, np.int64)
        new_id[idx] = np.arange(len(idx))
        keep = mask_replicas[self.rep]
        return PartitionSample(len(idx), new_id[self.rep[keep]], self.k[keep], self.count[keep], dict(self.meta))

    def partition(self, i: int) -> Partition:
        lo, hi = np.searchsorted(self.rep, [i, i + 1])
        return Partition(tuple(zip(self.k[lo:hi].tolist(), self.count[lo:hi].tolist())))

    def partitions(self) -> Iterator[Partition]:
        bounds = np.searchsorted(self.rep, np.arange(self.replicas + 1))
        ks, cs = self.k.tolist(), self.count.tolist()
        for i in range(self.replicas):
            lo, hi = bounds[i], bounds[i + 1]
            yield Partition(tuple(zip(ks[lo:hi], cs[lo:hi])))

    def masses(self) -> np.ndarray:
        return np.bincount(self.rep, weights=self.k * self.count, minlength=self.replicas).astype(np.int64)

    def occupation(self, k: int) -> np.ndarray:
        out = np.zeros(self.replicas, np.int64)
        sel = self.k == k
        out[self.rep[sel]] = self.count[sel]
        return out

    def window_counts(self, kmin: int, kmax: int) -> np.ndarray:
        """Per replica sum of p_k over kmin <= k < kmax."""
        sel = (self.k >= kmin) & (self.k < kmax)
        return np.bincount(self.rep[sel], weights=self.count[sel], minlength=self.replicas).astype(np.int64)

    def tail_counts(self, thresholds: np.ndarray) -> np.ndarray:
        """Matrix f[i, j] = sum_{k >= thresholds[j]} p_k for replica i (thresholds increasing)."""
        thresholds = np.asarray(thresholds)
        G = len(thresholds)
        out = np.zeros((self.replicas, G + 1), np.int64)
        idx = np.searchsorted(thresholds, self.k, side="right")
        np.add.at(out, (self.rep, idx), self.count)
        # entry with idx contributes to all columns j < idx
        return np.cumsum(out[:, ::-1], axis=1)[:, ::-1][:, 1:]

    def dumps(self, header: dict) -> str:
        lines = [json.dumps({"header": header}, sort_keys=True)]
        lines.extend(p.to_json() for p in self.partitions())
        return "\n".join(lines) + "\n"


def load_ndjson(text: str) -> tuple[dict, PartitionSample]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = json.loads(lines[0])["header"]
    parts = [Partition.from_json(ln) for ln in lines[1:]]
    return header, PartitionSample.from_partitions(parts)


# -- truncation -------------------------------------------------------------------


def _quantum_tail(model, mu, K) -> float:
    from .analytics import _tail_energy_floor

    delta = mu - ground_state(model).mu_star
    q = math.exp(-delta)
    r = math.exp(-model.beta * _tail_energy_floor(model, K))
    return r * q ** (K + 1) / (1.0 - q)


def _classical_tail(model, mu, K) -> float:
    gs = ground_state(model)
    if gs.scenario == "S1" and model.beta > 0:
        raise ValueError("classical tail certificate needs a finite ground state energy")
    eps = gs.eps_star if model.beta > 0 else 0.0
    log_t = -(model.beta * eps + mu)
    n = K + 1
    if math.exp(log_t) >= n + 1:
        return math.inf
    lead = math.exp(n * log_t - gammaln(n + 1.0))
    return lead / (1.0 - math.exp(log_t) / (n + 1))


def truncation_index(model: EnergyModel, mu: float, tol: float, ensemble: str = "quantum") -> int:
    """Smallest K whose certified tail (sum of theta_k or alpha_k over k > K) is <= tol."""
    tail = _quantum_tail if ensemble != "classical" else _classical_tail
    if ensemble != "classical" and not mu > ground_state(model).mu_star:
        raise ValueError("mu must exceed mu_*")
    if tail(model, mu, 1) <= tol:
        return 1
    hi = 2
    while tail(model, mu, hi) > tol:
        hi *= 2
        if hi > 1 << 40:
            raise ValueError("truncation index does not exist")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail(model, mu, mid) <= tol:
            hi = mid
        else:
            lo = mid
    return hi


# -- core batch sampler -------------------------------------------------------------


@dataclass
class _Plan:
    """Precomputed per-state parameters shared by all batches."""

    kind: str  # geometric | poisson
    log_p: np.ndarray  # log theta_k (geometric) or log alpha_k (poisson), k = 1..K
    dense_end: int  # states 1..dense_end sampled densely
    blocks: list  # (start_k, stop_k, envelope)


def _plan(model: EnergyModel, mu: float, tol: float, ensemble: str) -> _Plan:
    K = truncation_index(model, mu, tol, ensemble)
    k = np.arange(1, K + 1, dtype=float)
    if ensemble == "classical":
        log_p = log_alphas(model, mu, k)
        hit = -np.expm1(-np.exp(log_p))  # P{p_k > 0}
    else:
        log_p = log_thetas(model, mu, k)
        hit = np.exp(log_p)
    big = np.flatnonzero(hit >= DENSE_PROB)
    dense_end = int(big[-1]) + 1 if len(big) else 0
    delta = max(mu - ground_state(model).mu_star, 1e-12) if ensemble != "classical" else 1.0
    max_block = max(1, int(math.ceil(0.05 / delta)))
    blocks = []
    start = dense_end + 1
    while start <= K:
        stop = min(K + 1, start + max_block, int(start * 1.25) + 1)
        stop = max(stop, start + 1)
        env = float(hit[start - 1:stop - 1].max())
        if env > 0:
            blocks.append((start, stop, env))
        start = stop
    return _Plan("poisson" if ensemble == "classical" else "geometric", log_p, dense_end, blocks)


def _geometric_from_uniform(u: np.ndarray, log_theta: np.ndarray) -> np.ndarray:
    # P{p >= n} = theta^n  =>  p = floor(ln U / ln theta), U in (0, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.floor(np.log(u) / log_theta)
    v = np.where(np.isfinite(v), v, 0.0)
    return v.astype(np.int64)


def _zero_truncated_poisson(rng: np.random.Generator, lam: np.ndarray) -> np.ndarray:
    """Poisson(lam) conditioned on >= 1, by inversion."""
    u = rng.random(len(lam)) * (-np.expm1(-lam))  # uniform on (0, P{N>=1})
    n = np.ones(len(lam), np.int64)
    pmf = lam * np.exp(-lam)
    cdf = pmf.copy()
    todo = u > cdf
    while np.any(todo):
        n[todo] += 1
        pmf = np.where(todo, pmf * lam / n, pmf)
        cdf = np.where(todo, cdf + pmf, cdf)
        todo = todo & (u > cdf) & (pmf > 0)
    return n


def _bernoulli_positions(rng: np.random.Generator, n: int, r: float) -> np.ndarray:
    """Indices of successes among n Bernoulli(r) trials via geometric gaps."""
    if r >= 1.0:
        return np.arange(n)
    out = []
    pos = -1
    expect = n * r
    while True:
        m = int(expect + 6.0 * math.sqrt(expect + 1.0) + 16)
        gaps = rng.geometric(r, size=m)
        p = pos + np.cumsum(gaps)
        inside = p[p < n]
        out.append(inside)
        if len(inside) < m:
            break
        pos = int(p[-1])
        expect = (n - pos) * r
    return np.concatenate(out) if out else np.zeros(0, np.int64)


def _sample_batch(plan: _Plan, R: int, rng: np.random.Generator) -> PartitionSample:
    reps, ks, cs = [], [], []
    d = plan.dense_end
    if d:
        lp = plan.log_p[:d]
        if plan.kind == "geometric":
            u = 1.0 - rng.random((R, d))
            counts = _geometric_from_uniform(u, lp[None, :])
        else:
            counts = rng.poisson(np.exp(lp)[None, :], size=(R, d)).astype(np.int64)
        r_i, k_i = np.nonzero(counts)
        reps.append(r_i)
        ks.append(k_i + 1)
        cs.append(counts[r_i, k_i])
    for start, stop, env in plan.blocks:
        width = stop - start
        cells = _bernoulli_positions(rng, R * width, env)
        if not len(cells):
            continue
        r_i = cells // width
        k_i = start + cells % width
        lp = plan.log_p[k_i - 1]
        if plan.kind == "geometric":
            hit = np.exp(lp)
        else:
            hit = -np.expm1(-np.exp(lp))
        keep = rng.random(len(cells)) * env < hit
        r_i, k_i, lp = r_i[keep], k_i[keep], lp[keep]
        if not len(r_i):
            continue
        if plan.kind == "geometric":
            c = 1 + _geometric_from_uniform(1.0 - rng.random(len(r_i)), lp)
        else:
            c = _zero_truncated_poisson(rng, np.exp(lp))
        reps.append(r_i)
        ks.append(k_i)
        cs.append(c)
    if not reps:
        e = np.zeros(0, np.int64)
        return PartitionSample(R, e, e.copy(), e.copy())
    rep = np.concatenate(reps).astype(np.int64)
    k = np.concatenate(ks).astype(np.int64)
    c = np.concatenate(cs).astype(np.int64)
    order = np.lexsort((k, rep))
    return PartitionSample(R, rep[order], k[order], c[order])


def _run_batches(plan, replicas, seed, stream, threads) -> PartitionSample:
    n_batches = (replicas + BATCH_SIZE - 1) // BATCH_SIZE
    sizes = [min(BATCH_SIZE, replicas - b * BATCH_SIZE) for b in range(n_batches)]

    def job(b):
        return _sample_batch(plan, sizes[b], batch_rng(seed, stream, b))

    threads = threads or os.cpu_count() or 1
    if threads > 1 and n_batches > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(job, range(n_batches)))
    else:
        parts = [job(b) for b in range(n_batches)]
    return PartitionSample.concat(parts)


def _meta(config: SamplerConfig, plan: Optional[_Plan]) -> dict:
    m = {"ensemble": config.ensemble, "mu": config.mu, "seed": config.seed, "version": __version__}
    if plan is not None:
        m["K"] = len(plan.log_p)
    return m


def sample_quantum_gc(config: SamplerConfig) -> PartitionSample:
    """Independent p_k ~ Geometric: P{p_k = N} = theta_k^N (1 - theta_k)."""
    plan = _plan(config.model, config.mu, config.truncation_tol, "quantum")
    s = _run_batches(plan, config.replicas, config.seed, _STREAM_QUANTUM, config.threads)
    s.meta = _meta(config, plan)
    return s


def sample_classical_gc(config: SamplerConfig) -> PartitionSample:
    """Independent p_k ~ Poisson(alpha_k), alpha_k = exp(-beta E_k - mu k) / k!."""
    plan = _plan(config.model, config.mu, config.truncation_tol, "classical")
    s = _run_batches(plan, config.replicas, config.seed, _STREAM_CLASSICAL, config.threads)
    s.meta = _meta(config, plan)
    return s


@dataclass
class CanonicalSample:
    sample: PartitionSample
    method: str
    attempts: int
    acceptance_rate: float
    mu: Optional[float] = None


def sample_canonical(config: SamplerConfig) -> CanonicalSample:
    """Exact canonical law on partitions of ``config.mass``.

    Small masses are drawn from the enumerated weights exp(-beta H); larger
    ones (or ``method="rejection"``) by conditioning grand canonical draws,
    with mu tuned so that E Mon equals the target mass.
    """
    M = int(config.mass)
    method = config.method
    if method == "auto":
        method = "exact" if M <= EXACT_CANONICAL_MAX else "rejection"
    if method == "exact":
        if M > ENUMERATION_CAP:
            raise ValueError(f"exact canonical sampling limited to M <= {ENUMERATION_CAP}")
        parts, w = canonical_weights(config.model, M)
        rng = batch_rng(config.seed, _STREAM_CANONICAL, 0)
        idx = rng.choice(len(parts), size=config.replicas, p=w / w.sum())
        s = PartitionSample.from_partitions([parts[i] for i in idx])
        s.meta = {"ensemble": "canonical", "mass": M, "method": "exact", "seed": config.seed}
        return CanonicalSample(s, "exact", config.replicas, 1.0)
    if method != "rejection":
        raise ValueError(f"unknown canonical method {method!r}")
    if M == 0:
        mu = config.mu if config.mu > ground_state(config.model).mu_star else 1.0
    else:
        mu = mu_for_target_mass(config.model, M, tol=1e-8)
    plan = _plan(config.model, mu, config.truncation_tol, "quantum")
    accepted: list[PartitionSample] = []
    n_acc = 0
    attempts = 0
    b = 0
    while n_acc < config.replicas:
        if attempts >= config.max_attempts:
            raise RuntimeError(
                f"rejection budget exhausted: {n_acc}/{config.replicas} accepted in {attempts} attempts")
        R = min(BATCH_SIZE * 16, config.max_attempts - attempts)
        batch = _sample_batch(plan, R, batch_rng(config.seed, _STREAM_REJECTION, b))
        b += 1
        ok = batch.masses() == M
        need = config.replicas - n_acc
        hit_idx = np.flatnonzero(ok)
        if len(hit_idx) > need:
            # stop exactly at the replica that completes the sample
            last = hit_idx[need - 1]
            ok[last + 1:] = False
            attempts += int(last) + 1
        else:
            attempts += R
        sel = batch.select(ok)
        accepted.append(sel)
        n_acc += sel.replicas
    s = PartitionSample.concat(accepted)
    s.meta = {"ensemble": "canonical", "mass": M, "method": "rejection", "mu": mu, "seed": config.seed}
    return CanonicalSample(s, "rejection", attempts, n_acc / attempts, mu)


def config_header(config: SamplerConfig) -> dict:
    d = asdict(config)
    d["model"] = config.model.to_config()
    d["version"] = __version__
    return d
