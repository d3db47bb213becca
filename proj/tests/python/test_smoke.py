import json
import math

import numpy as np
import pytest

import propauction as pa


def kelly(n):
    return pa.Instance([pa.Agent(pa.Valuation.linear([1.0]), 10.0, 1.0) for _ in range(n)], 1)


def test_valuation_and_allocation():
    v = pa.Valuation.linear([3.0, 1.0])
    assert v.value([0.5, 0.5]) == pytest.approx(2.0)
    assert v.gradient([0.1, 0.9]) == [3.0, 1.0]
    shares = pa.allocate(np.array([[2.0], [6.0]]))
    assert shares[:, 0] == pytest.approx([0.25, 0.75])


def test_power_payments_closed_form_and_quadrature():
    bids = np.array([[0.3, 0.1], [0.2, 0.7]])
    closed = pa.payments(bids, "power", eps=1.0)
    assert closed[:, 0] == pytest.approx([0.10, 0.15])
    quad = pa.power_payments_quadrature(bids, 1.0)
    assert np.allclose(closed, quad, rtol=1e-9, atol=0)
    assert max(pa.price_identity_residual(bids, 1.0)) < 1e-12


def test_best_response_fixture():
    inst = pa.Instance([pa.Agent(pa.Valuation.linear([4.0]), 10.0, 1.0),
                        pa.Agent(pa.Valuation.linear([1.0]), 10.0, 1.0)], 1)
    br = pa.best_response(inst, np.array([[0.0], [1.0]]), 0)
    assert br["feasible"]
    assert br["bids"][0] == pytest.approx(1.0, abs=1e-6)


def test_kelly_equilibrium_and_certificate():
    eq = pa.equilibrium(kelly(3))
    assert eq["converged"]
    assert eq["bids"][:, 0] == pytest.approx([2 / 9] * 3, abs=1e-9)
    rep = pa.poa_report(kelly(3), eq["bids"])
    assert rep["dual_feasible"]
    assert rep["ratio"] <= rep["certified_ratio"] + 1e-6 <= 2 + 2e-6
    cert = json.loads(rep["certificate"])
    assert cert["tag"] == "standard-PM"


def test_welfare_optimum():
    inst = pa.Instance([pa.Agent(pa.Valuation.linear([1.0]), 10.0, 1.0),
                        pa.Agent(pa.Valuation.linear([2.0]), 0.5, 1.0)], 1)
    opt = pa.optimal_liquid_welfare(inst, grid_step=0.25)
    assert opt["value"] == pytest.approx(1.25, abs=1e-8)
    assert opt["grid_value"] == pytest.approx(1.25)


def test_instance_json_round_trip_and_generator():
    gen = json.dumps({"agents": {"min": 3, "max": 3}, "items": {"min": 2, "max": 2}, "rho": 1})
    inst = pa.generate_instance(gen, 5)
    assert inst.agents == 3 and inst.items == 2
    assert pa.Instance.from_json(inst.to_json()) == inst
    assert all(inst.agent(i).rho == 1.0 for i in range(3))


def test_experiment_is_deterministic():
    cfg = json.dumps({"schema_version": 1, "trials": 3, "seed": 9})
    a = pa.run_experiment_csv(cfg)
    assert a == pa.run_experiment_csv(cfg)
    assert a.splitlines()[0] == pa.results_csv_header()
    assert len(a.splitlines()) == 4


def test_conversion_report():
    eq = pa.equilibrium(kelly(2))
    rep = json.loads(pa.expectation_check(kelly(2), eq["bids"], 20000, 3))
    assert rep["passes"]
    assert rep["rng"] == pa.RNG_NAME


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        pa.Valuation.power_sum([1.0], [2.0])
    with pytest.raises(pa.UsageError):
        pa.payments(np.array([[1.0], [1.0], [1.0]]), "power", eps=0.1)
    assert math.isfinite(pa.payments(np.zeros((2, 1)), "standard")[0, 0])
