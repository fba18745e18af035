import math

import numpy as np
import pytest

from gibbs_partitions.energy import (
    EnergyModel,
    classify_regime,
    energy,
    ground_state,
    log_thetas,
    model_from_config,
    normalize_slope,
    theta,
)


def test_energy_kinds():
    assert energy(EnergyModel("decay", alpha=2.0), 3) == pytest.approx(1 / 9)
    assert energy(EnergyModel("const", c=2.5), 7) == 2.5
    ll = EnergyModel("loglog")
    assert energy(ll, 1) == energy(ll, 2) == pytest.approx(math.log(math.log(3)))
    assert energy(ll, 10) == pytest.approx(math.log(math.log(10)))
    lg = EnergyModel("log")
    assert energy(lg, 1) == pytest.approx(math.log(2))
    assert energy(lg, 8) == pytest.approx(math.log(8))
    assert energy(EnergyModel("log", e1_override=0.0), 1) == 0.0


def test_table_with_tail():
    m = EnergyModel("table", table=(0.0, 5.0), tail=EnergyModel("power", c=1.0, alpha=1.0))
    assert list(m.energies([1, 2, 3, 4])) == [0.0, 5.0, 3.0, 4.0]


def test_excluded_states_have_zero_theta():
    m = EnergyModel("log", beta=0.0, excluded={1})
    lt = log_thetas(m, 0.1, np.array([1.0, 2.0]))
    assert lt[0] == -np.inf and np.isfinite(lt[1])


def test_theta_requires_mu_above_mu_star():
    m = EnergyModel("const", beta=1.0)
    assert theta(m, 0.1, 1) == pytest.approx(math.exp(-1.1))
    with pytest.raises(ValueError):
        theta(EnergyModel("const", beta=0.0), -0.1, 1)


def test_ground_state_scenarios():
    gs = ground_state(EnergyModel("const"))
    assert (gs.scenario, gs.eps_star, gs.mu_star, gs.at_infinity) == ("S3", 0.0, 0.0, True)
    cond = ground_state(EnergyModel("table", table=(0.0,), tail=EnergyModel("power", c=1.0, alpha=1.0)))
    assert cond.scenario == "S2" and cond.attained_at == {1}
    s1 = ground_state(EnergyModel("power", c=-1.0, alpha=2.0))
    assert s1.scenario == "S1" and s1.eps_star == -math.inf
    sq = ground_state(EnergyModel("power", c=1.0, alpha=2.0, beta=2.0))
    assert sq.scenario == "S2" and sq.mu_star == -2.0


@pytest.mark.parametrize("model,expected", [
    (EnergyModel("decay", beta=0.0), ("i", "classical")),
    (EnergyModel("const"), ("ii", "dilog")),
    (EnergyModel("loglog"), ("iii", "exp")),
    (EnergyModel("log", beta=0.5), ("iv", "gamma")),
    (EnergyModel("log", beta=1.5), ("iv", "none")),
])
def test_classify_rows(model, expected):
    tag = classify_regime(model)
    assert (tag.regime, tag.limit_shape) == expected


def test_classify_log_cases():
    assert classify_regime(EnergyModel("log", beta=1.5)).to_dict() == {
        "scenario": "S3", "regime": "iv", "limit_shape": "none", "thermo_limit": True, "reason": "beta>1"}
    assert classify_regime(EnergyModel("log", beta=2.0)).thermo_limit is None
    assert classify_regime(EnergyModel("log", beta=3.0)).thermo_limit is False
    assert classify_regime(EnergyModel("power", c=1.0, alpha=0.5)).regime == "supercritical"


def test_slope_normalization():
    m = normalize_slope(EnergyModel("log", beta=0.5, slope=2.0))
    assert (m.slope, m.beta) == (1.0, 1.0)
    assert classify_regime(EnergyModel("log", beta=0.5, slope=2.0)).limit_shape == "none"


def test_renormalized_ground_state_is_zero():
    m = EnergyModel("power", c=1.0, alpha=2.0).renormalized()
    assert m.energies(1.0) == pytest.approx(0.0)
    assert ground_state(m).eps_star == pytest.approx(0.0)


def test_config_round_trip():
    models = [
        EnergyModel("log", beta=1.0, e1_override=0.0, excluded={1}),
        EnergyModel("table", beta=0.7, table=(0.0, 1.0), tail=EnergyModel("power", beta=0.7, c=1.0, alpha=1.0)),
        EnergyModel("decay", beta=0.0, alpha=1.5),
    ]
    for m in models:
        assert model_from_config(m.to_config()) == m


def test_config_errors():
    with pytest.raises(ValueError, match="kind"):
        model_from_config({"energy": {"kind": "cubic"}})
    with pytest.raises(ValueError, match="tail"):
        model_from_config({"energy": {"kind": "table", "table": [0.0]}})
    with pytest.raises(ValueError):
        EnergyModel("const", beta=-1.0)
