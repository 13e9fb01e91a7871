"""Smoke test for the trimirror extension module.

Build and install first:  pip install maturin && maturin develop -m crates/python/Cargo.toml
(or `maturin build` and pip-install the wheel), then run this file.
"""

import math

import trimirror as tm


def main() -> None:
    geom = tm.CavityGeometry(5e-3, 1e-4, 1e-5)
    mode = tm.CavityMode.number(geom, 10_000)
    assert math.isclose(mode.wavelength, 1e-6, rel_tol=1e-12)

    even, odd = tm.branch_frequencies(geom, mode, 0.0)
    assert even < odd

    rows = tm.spectrum_sweep(geom, [10_000, 10_001], [-1e-7, 0.0, 1e-7])
    assert len(rows) == 2 * 3 * 2

    assert tm.linear_coupling(geom, mode, 0.0) == 0.0
    assert tm.coupling_regime(mode, 0.0) == "quadratic"
    assert tm.coupling_regime(mode, mode.wavelength / 8) == "linear"
    assert tm.quadratic_coupling(geom, mode) > 0.0

    mech = tm.MechanicalOscillator(1e-9, 2 * math.pi * 2500, 2e-11, 300.0)
    drive = tm.DriveField(1e-3, 0.0, "odd")
    w_eff, d_eff = tm.effective_quadratic(geom, mode, mech, drive)
    assert w_eff > mech.omega_m and d_eff == mech.damping
    assert tm.quadratic_stability(geom, mode, mech, drive)["stable"]

    try:
        tm.quadratic_stability(geom, mode, mech, tm.DriveField(1e-3, 0.0, "even"))
    except ValueError:
        pass
    else:
        raise AssertionError("even-branch trap must be refused")

    cfg = tm.RunConfig.preset("table-one")
    summary = cfg.thermal_summary()
    assert math.isclose(summary["t_eff"], 300.0, rel_tol=1e-9)

    design = cfg.design()
    assert math.isclose(design["design"]["lambda_t"] / design["design"]["lambda_d"], 0.8)
    assert design["performance"]["stability"]["stable"]

    sde = tm.RunConfig.preset("sde-demo").simulate(n_traj=50)
    assert abs(sde["temperature"] - 300.0) < 5 * sde["temperature_se"], sde
    print("trimirror smoke test: ok "
          f"(T_sde = {sde['temperature']:.1f} ± {sde['temperature_se']:.1f} K, "
          f"hybrid omega_eff = {design['performance']['omega_eff'] / mech.omega_m:.0f} omega_M)")


if __name__ == "__main__":
    main()
