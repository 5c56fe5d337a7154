"""Smoke test for the grr extension module.

Build and install first:  maturin build --release -m crates/python/Cargo.toml
then pip install the wheel, and run  python python/smoke_test.py
"""

import math

import grr


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    # closed-form GRR right-hand sides
    psi = grr.YoungFunction("pow:4")
    p = grr.ModulusFunction("pow:1")
    close(grr.grr_rhs(psi, [p], 1.0, [1.0]), 16 * math.sqrt(2), 1e-9)
    close(grr.grr_rhs(psi, [p, p], 1.0, [1.0, 1.0]), 512.0, 1e-9)

    # f = xy on a 9x9 grid: the inequality holds with B = 1 at every box
    axes = [[i / 8 for i in range(9)]] * 2
    values = [x * y for x in axes[0] for y in axes[1]]
    field = grr.GridField(axes, values)
    report = grr.verify_grr(field, psi, [p, p], b=1.0)
    assert report["summary"]["pass"], report
    close(field.rect_increment([0.0, 0.0], [1.0, 1.0]), 1.0, 1e-15)

    # heat field covariances
    close(grr.heat_cov(1.0, 0.0, 1.0, 0.0), 1 / math.sqrt(math.pi), 1e-12)
    close(grr.heat_sq_increment(0.0, 1.0, 1.0, 0.0), 0.729096, 1e-6)
    close(grr.rho(float("inf")), 2 * math.sqrt(2), 1e-9)

    # sampling is deterministic in (seed, replicate)
    a = grr.sample([17, 17], seed=42, hurst=[0.5, 0.5])
    b = grr.sample([17, 17], seed=42, hurst=[0.5, 0.5])
    assert a.values == b.values and a.shape == [17, 17]
    m = grr.LogModulatedModulus("hH", [0.5, 0.5])
    r = grr.sup_ratio(a, m, 0.25)
    assert math.isfinite(r) and r > 0
    close(grr.sup_ratio(a.scaled(-2.0), m, 0.25), 2 * r, 1e-12 * r)

    sweep = grr.refinement_sweep([[9, 9], [17, 17]], replicates=4, seed=1, delta_max=0.25, hurst=[0.5, 0.5])
    assert sweep["schema"] == "grr-report/1"
    assert all(g["all_finite"] for g in sweep["grids"])

    moment = grr.exp_moment_check(1.0, 100_000, 3)
    assert moment["exceeds_printed_bound"]

    try:
        grr.LogModulatedModulus("hH", [1.5, 0.5])
    except ValueError:
        pass
    else:
        raise AssertionError("Hurst index 1.5 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
