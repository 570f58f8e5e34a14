"""Smoke test for the `tlb` extension module.

Build and install first:  pip install --no-build-isolation ./crates/py
Then run:                 python python/smoke_test.py   (or pytest python/)
"""

import json
import math

import tlb


def test_occupancy_and_dispatch():
    occ = tlb.OccupancyMeasure([4, 4, 4, 3, 3, 2, 1, 1, 0])
    assert occ.n == 4
    assert math.isclose(occ.total_mass(), 18 / 4)
    assert math.isclose(occ.tail_mass(5), (2 + 1 + 1) / 4)
    level, band = tlb.dispatch(occ, ell=2, delta=2, u=0.99)
    # every pool holds at least ell = 2 tasks; the only one below h = 4 holds exactly 2
    assert (level, band) == (3, "mid")
    occ.apply_arrival(level)
    assert occ.counts == [4, 4, 4, 4, 3, 2, 1, 1, 0]
    assert tlb.threshold_update(tlb.OccupancyMeasure.empty(10), ell=0, delta=1, alpha=0.5) == 0
    try:
        occ.apply_departure(9)
    except ValueError:
        pass
    else:
        raise AssertionError("departure from an empty level must fail")


def test_scenario_round_trip_and_run():
    s = tlb.Scenario.two_regime_steps(n=50, delta=3, seed=11)
    again = tlb.Scenario.from_json(s.to_json())
    assert again == s
    traj = tlb.run(s)
    assert len(traj) == len(traj.events())
    assert traj.counting_identity_holds()
    assert traj.audit()["violations"] == 0
    assert all(ell % 3 == 0 for ell in traj.thresholds())
    s.mode = "oracle"
    oracle = tlb.run(s)
    assert oracle.events() == traj.events()


def test_fluid_and_sigma():
    assert math.isclose(tlb.sigma(1.0, 1.0, 1.5, 1.5, 1, 1), math.log(3), rel_tol=1e-12)
    assert tlb.sigma_bd(1.0, 1.0, 1.5, 1, 1) == 0.0
    text = json.dumps({
        "n": 10, "mu": 1.0, "delta": 1, "alpha": {"value": 0.5},
        "lambda": [{"start": 0, "end": 5, "shape": "constant", "rate": 2.0}], "T": 5,
    })
    u = tlb.solve_u(tlb.Scenario.from_json(text))
    assert math.isclose(u(math.log(2)), 1.0, rel_tol=1e-12)
    cert = u.certify(0.0, 5.0)
    assert cert["verdict"] == "boundary"


def test_fslln():
    stats = tlb.fslln_diag(3, [100, 10000], gamma=0.0)
    assert [n for n, _ in stats] == [100, 10000]
    try:
        tlb.fslln_diag(3, [100], gamma=0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("gamma >= 1/2 must be rejected")


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"ok {name}")
