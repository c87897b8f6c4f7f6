"""Smoke test for the `tmn` extension module.

Build and install first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/tmn-*.whl

then run `python python/smoke_test.py` from the repository root.
"""

import math
from pathlib import Path

import tmn

SCENARIOS = Path(__file__).resolve().parent.parent / "crates" / "core" / "scenarios"


def close(a, b, rel=1e-9):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1.0)


def main():
    linear = tmn.Scenario.from_file(SCENARIOS / "example1.scn")
    assert (linear.n_v, linear.n_a, linear.n_c) == (4, 3, 7)

    report = linear.circularity()
    assert close(report["lambda"], -2.0 * linear.mass), report

    journey = linear.simulate()
    t5 = journey.milestones["t5"]
    assert journey.end_time >= t5 > 0.0
    assert len(journey.events) >= 2
    traj = journey.trajectory(journey.arcs[0])
    assert all(b > a for a, b in zip(traj["t"], traj["t"][1:]))

    renewable = linear.apply(tmn.Strategy.reduce_renewable(0.5))
    assert renewable.applied == ["renewable(0.5)"]
    assert renewable.circularity()["lambda"] > report["lambda"]

    repair = tmn.Scenario.from_file(SCENARIOS / "example3.scn")
    assert repair.simulate().life_extension(journey) < 0.0
    ranked = linear.optimize(phi=t5)
    assert ranked[0]["rank"] == 1
    assert ranked[0]["lambda"] >= ranked[-1]["lambda"]

    # 0.3 m/s^2 over 10 km from rest.
    t, v = tmn.analytic_segment(1e4, 1e4, 5000.0, 2000.0, axis="x_axis")
    assert close(t, math.sqrt(2e4 / 0.3), 1e-14)
    t_num, v_num = tmn.integrate_segment(1e4, 1e4, 5000.0, 2000.0, axis="x_axis")
    assert close(t_num, t, 1e-8) and close(v_num, v, 1e-8)

    try:
        tmn.Scenario.from_str("route = [")
    except tmn.TmnError as err:
        assert isinstance(err, ValueError)
        assert err.code == "ParseError", err.code
    else:
        raise AssertionError("malformed scenario accepted")

    print("tmn smoke test ok")


if __name__ == "__main__":
    main()
