"""Smoke test for the compiled extension. Run from this directory after
copying the built library to geomech.so."""

import json
import math
import pathlib

import geomech

ROOT = pathlib.Path(__file__).resolve().parent.parent


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    v = [0.3, -1.2, 0.7]
    r = geomech.Rotation.exp(v)
    assert all(close(x, y) for x, y in zip(r.log(), v)), "exp/log round trip"
    assert r.orthogonality_defect() < 1e-14
    assert geomech.vee(geomech.hat(v)) == v

    q = geomech.Rotation.from_axis_angle([0.0, 0.0, 1.0], 1.0)
    m = geomech.rotation_mean(geomech.Rotation.identity(), q)
    assert close(m.angle(), 0.5)

    theta = 2.0
    rd = geomech.Rotation.from_axis_angle([1.0, 0.0, 0.0], theta)
    psi = geomech.attitude_error_psi(geomech.Rotation.identity(), rd)
    assert close(psi, 4.0 * math.sin(theta / 4.0) ** 2)

    tau = geomech.control_torque(geomech.Rotation.identity(), [0, 0, 0], rd, [3.0, 2.0, 1.0])
    assert len(tau) == 3 and all(math.isfinite(t) for t in tau)

    traj = geomech.simulate_free_body([3.0, 2.0, 1.0], [1.0, 1.0, 1.0], 0.01, 5.0)
    e = traj["energy"]
    assert len(e) == 501
    assert max(abs(x - e[0]) for x in e) / e[0] < 1e-5

    rotor = geomech.RotorGeometry(2, 0.025, 0.15, 0.3, 0.08, 0.01)
    assert rotor.thrust_coefficient(0.05, 0.0) > 0.0
    assert rotor.hover_rotor_speed(10.0) > 0.0

    text = (ROOT / "scenarios" / "free_body.json").read_text()
    assert geomech.validate_scenario(text) == []
    assert geomech.validate_scenario('{"kind": "free_body", "dt": -1}') != []
    cols, rows, metrics = geomech.run_scenario(text, t_final=1.0)
    assert cols[0] == "t" and len(rows) == 101
    assert json.loads(metrics)["steps"] == 100

    try:
        geomech.Rotation([[2, 0, 0], [0, 1, 0], [0, 0, 1]])
    except ValueError:
        pass
    else:
        raise AssertionError("non-rotation accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
