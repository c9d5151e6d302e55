"""Smoke test for the uavtilt_py extension.

    pip install --no-build-isolation ./crates/py
    python python/smoke_test.py
"""

import json
import math

import uavtilt_py


def main():
    base = uavtilt_py.Scenario()
    assert base.n_cells == 57 and base.dim == 57
    r = base.baseline()
    n_uav = r["kind"].count("UAV")
    assert n_uav == 280, n_uav
    assert r["uav_outage"] >= 0.99, r["uav_outage"]
    assert math.isclose(r["geo_mean_rate_mbps"], math.exp(r["normalized_objective"]) / 1e6, rel_tol=1e-12)

    # up-tilting every cell must help the UAVs
    up = base.evaluate([10.0] * base.n_cells)
    assert up["uav_coverage"] > r["uav_coverage"]

    small = uavtilt_py.Scenario("ground_only", json.dumps({"n_rings": 1, "gue_per_cell": 4}), n_fading_draws=5)
    assert small.n_cells == 21
    assert len(small.bounds()) == 21 and all(lo < hi for lo, hi in small.bounds())
    out = small.optimize(max_evals=10, n_init=8, seed=3)
    curve = out["curve_mbps"]
    assert out["n_evaluations"] == len(curve) == 18
    assert all(b >= a for a, b in zip(curve, curve[1:]))
    assert out["aborted"] is None
    again = small.optimize(max_evals=10, n_init=8, seed=3)
    assert again["best_x"] == out["best_x"]

    try:
        uavtilt_py.Scenario(overrides=json.dumps({"isd": -1.0}))
    except ValueError:
        pass
    else:
        raise AssertionError("negative isd accepted")
    try:
        base.evaluate([0.0] * 3)
    except ValueError:
        pass
    else:
        raise AssertionError("short decision accepted")

    print(f"uavtilt_py {uavtilt_py.__version__}: baseline {r['geo_mean_rate_mbps']:.3f} Mbps, "
          f"UAV outage {r['uav_outage']:.1%}, toy TuRBO best {out['best_geo_mean_mbps']:.3f} Mbps; ok")


if __name__ == "__main__":
    main()
