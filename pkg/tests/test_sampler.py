import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gibbs_partitions.analytics import canonical_weights, expected_monomers
from gibbs_partitions.energy import EnergyModel, log_thetas
from gibbs_partitions.partitions import Partition
from gibbs_partitions.sampler import (
    BATCH_SIZE,
    PartitionSample,
    SamplerConfig,
    _bernoulli_positions,
    _geometric_from_uniform,
    _zero_truncated_poisson,
    batch_rng,
    load_ndjson,
    sample_canonical,
    sample_classical_gc,
    sample_quantum_gc,
    truncation_index,
)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.01, max_value=0.99), st.integers(min_value=0, max_value=30))
def test_geometric_inversion_pmf(theta, n):
    # the set of u mapped to n is (theta^(n+1), theta^n], so its measure is the pmf
    lt = np.array([math.log(theta)])
    hi, lo = theta ** n, theta ** (n + 1)
    if lo > 1e-300:
        inner = np.array([lo + 0.01 * (hi - lo), math.sqrt(lo * hi), hi - 0.01 * (hi - lo)])
        assert list(_geometric_from_uniform(inner, np.repeat(lt, 3))) == [n, n, n]
    assert hi - lo == pytest.approx(theta ** n * (1 - theta))


def test_geometric_zero_theta():
    assert _geometric_from_uniform(np.array([0.3]), np.array([-np.inf]))[0] == 0


def test_zero_truncated_poisson_law():
    rng = np.random.default_rng(1)
    lam = 0.7
    x = _zero_truncated_poisson(rng, np.full(200_000, lam))
    assert x.min() >= 1
    n = np.arange(1, 8)
    pmf = stats.poisson.pmf(n, lam) / (1 - math.exp(-lam))
    freq = np.array([(x == v).mean() for v in n])
    assert np.all(np.abs(freq - pmf) < 5 * np.sqrt(pmf / len(x)) + 1e-4)


def test_bernoulli_positions_rate():
    rng = np.random.default_rng(2)
    counts = np.array([len(_bernoulli_positions(rng, 1000, 0.01)) for _ in range(3000)])
    assert counts.mean() == pytest.approx(10.0, abs=0.2)
    pos = _bernoulli_positions(rng, 50, 1.0)
    assert list(pos) == list(range(50))


def test_truncation_index_certificate():
    m = EnergyModel("const")
    K = truncation_index(m, 0.01, 1e-9)
    q = math.exp(-0.01)
    tail = lambda K: math.exp(-1) * q ** (K + 1) / (1 - q)  # noqa: E731
    assert tail(K) <= 1e-9 < tail(K - 1)


def test_quantum_marginals_are_geometric():
    m = EnergyModel("const")
    mu = 0.2
    s = sample_quantum_gc(SamplerConfig(m, mu, replicas=50_000, seed=3))
    for k in (1, 2, 5, 12):
        th = math.exp(float(log_thetas(m, mu, np.array([k]))[0]))
        occ = s.occupation(k)
        assert occ.mean() == pytest.approx(th / (1 - th), abs=5 * math.sqrt(th / (1 - th) ** 2 / len(occ)))
        assert (occ == 0).mean() == pytest.approx(1 - th, abs=5 * math.sqrt(th * (1 - th) / len(occ)))


def test_quantum_mean_mass():
    m = EnergyModel("log", beta=0.5)
    mu = 0.02
    s = sample_quantum_gc(SamplerConfig(m, mu, replicas=20_000, seed=4))
    em = expected_monomers(m, mu).value
    masses = s.masses()
    assert masses.mean() == pytest.approx(em, abs=5 * masses.std() / math.sqrt(len(masses)))


def test_classical_marginals_are_poisson():
    m = EnergyModel("const", beta=0.0)
    nu = 3.0
    s = sample_classical_gc(SamplerConfig(m, -math.log(nu), ensemble="classical", replicas=40_000, seed=5))
    for k in (1, 3, 6):
        a = nu ** k / math.factorial(k)
        occ = s.occupation(k)
        assert occ.mean() == pytest.approx(a, abs=5 * math.sqrt(a / len(occ)))
        assert occ.var() == pytest.approx(a, rel=0.05)


def test_determinism_and_thread_independence():
    cfg = SamplerConfig(EnergyModel("const"), 0.05, replicas=3 * BATCH_SIZE + 17, seed=99)
    a = sample_quantum_gc(cfg).dumps({"seed": 99})
    b = sample_quantum_gc(SamplerConfig(cfg.model, cfg.mu, replicas=cfg.replicas, seed=99, threads=4)).dumps({"seed": 99})
    assert a == b
    c = sample_quantum_gc(SamplerConfig(cfg.model, cfg.mu, replicas=cfg.replicas, seed=100)).dumps({"seed": 99})
    assert a != c


def test_prefix_stability():
    # replicas are keyed by batch, so a shorter run is a prefix of a longer one
    m = EnergyModel("const")
    short = sample_quantum_gc(SamplerConfig(m, 0.05, replicas=BATCH_SIZE, seed=7))
    long = sample_quantum_gc(SamplerConfig(m, 0.05, replicas=2 * BATCH_SIZE, seed=7))
    assert list(short.partitions()) == list(long.take(BATCH_SIZE).partitions())


def test_batch_rng_streams_differ():
    assert batch_rng(1, 1, 0).random() != batch_rng(1, 2, 0).random()
    assert batch_rng(1, 1, 0).random() == batch_rng(1, 1, 0).random()


def test_ndjson_round_trip():
    s = sample_quantum_gc(SamplerConfig(EnergyModel("const"), 0.1, replicas=50, seed=8))
    header, back = load_ndjson(s.dumps({"x": 1}))
    assert header == {"x": 1}
    assert list(back.partitions()) == list(s.partitions())


def test_sample_accessors():
    parts = [Partition.from_parts([3, 1, 1]), Partition(), Partition.from_parts([2, 2])]
    s = PartitionSample.from_partitions(parts)
    assert list(s.masses()) == [5, 0, 4]
    assert list(s.occupation(1)) == [2, 0, 0]
    assert list(s.window_counts(1, 3)) == [2, 0, 2]
    assert s.tail_counts(np.array([1, 2, 3])).tolist() == [[3, 1, 1], [0, 0, 0], [2, 2, 0]]
    assert s.partition(2) == parts[2]


def test_canonical_exact_small_mass():
    m = EnergyModel("const")
    res = sample_canonical(SamplerConfig(m, 1.0, ensemble="canonical", mass=5, replicas=20_000, seed=9))
    assert res.method == "exact"
    parts, w = canonical_weights(m, 5)
    emp = np.array([sum(1 for p in res.sample.partitions() if p == q) for q in parts]) / 20_000
    assert 0.5 * np.abs(emp - w / w.sum()).sum() < 0.02


def test_canonical_rejection_budget():
    m = EnergyModel("const")
    with pytest.raises(RuntimeError, match="budget"):
        sample_canonical(SamplerConfig(m, 1.0, ensemble="canonical", mass=40, replicas=10_000,
                                       seed=1, max_attempts=2000, method="rejection"))


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(EnergyModel("const"), 0.0)
    with pytest.raises(ValueError):
        SamplerConfig(EnergyModel("const"), 0.1, ensemble="canonical")
    with pytest.raises(ValueError):
        SamplerConfig(EnergyModel("const"), 0.1, ensemble="bosonic")
