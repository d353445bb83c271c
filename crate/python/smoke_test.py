"""Smoke test for the mwfpi Python extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""
import json
import math
import tempfile

import mwfpi


def main():
    assert abs(mwfpi.epsilon_fw() - 1.597) < 1e-3

    model = mwfpi.Model()
    reduced = model.reduced()
    assert abs(reduced["barrier_center"] - 10.5) < 1e-12
    print("model:", model, "time unit [s]:", model.time_unit_s())

    res = model.resonances(e_max=0.5)
    energies = [r["energy"] for r in res]
    print("resonances E_r/V_b:", [round(e, 4) for e in energies])
    assert len(energies) == 4 and abs(energies[0] - 0.03) < 0.01

    tau = model.transmission_spectrum([energies[1], 0.5 * (energies[0] + energies[1])])
    print("|tau|^2 at resonance / between:", tau)
    assert tau[0] > 0.99 and tau[1] < 1e-2

    tilted = mwfpi.Model(gravity_m_s2=-8e-4)
    out = tilted.transmit(0.77)
    obs = out["observables"]
    print("transmit at E/V_b = 0.77, g = -0.8 mm/s^2:", obs["t_r"], out["stop_reason"])
    assert 0.0 <= obs["t_r"] <= 1.0 and abs(obs["t_plus"] - obs["t_l"] - obs["t_r"]) < 1e-12

    g = [-1e-3, 0.0, 1e-3]
    e = [0.3, 0.5, 0.7]
    t = [[0.1 * gi * 1e3 + ej for ej in e] for gi in g]
    dg = mwfpi.rel_uncertainty_r(t, g, e, [0.0] * 3, include_propagation=False)
    assert math.isnan(dg[1][1])

    levels = tilted.triangular_levels(2)
    assert levels[0] > 0 and levels[1] > levels[0]

    with tempfile.TemporaryDirectory() as out_dir:
        manifest = mwfpi.run_scenario("bragg-table", json.dumps({"svg": False}), out_dir, 1)
        rows = manifest["summary"]["rows"]
        print("bragg table:", [(round(r["er_over_vb"], 3), round(r["omega_over_2pi_hz"], 3)) for r in rows])
        assert len(rows) == 7 and manifest["failures"] == 0

    try:
        mwfpi.Model(not_a_field=1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown field accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
