#!/usr/bin/env python3
"""Smoke test for the blab_py extension module.

Builds the cdylib if necessary, loads it, and exercises the main surface on
the bundled reference parameter sets.
"""

import json
import math
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def ensure_module():
    lib = os.path.join(ROOT, "target", "release", "libblab_py.so")
    if not os.path.exists(lib):
        subprocess.run(
            ["cargo", "build", "-p", "blab-py", "--release"], cwd=ROOT, check=True
        )
    stage = tempfile.mkdtemp(prefix="blab-py-")
    shutil.copy(lib, os.path.join(stage, "blab_py.so"))
    sys.path.insert(0, stage)
    import blab_py

    return blab_py


def main():
    blab = ensure_module()

    ref1 = blab.reference_params("ref1")
    params = json.loads(ref1)
    assert params["case"] == "Saddle" and params["d"] == 3

    theta, alpha, cycle_type = blab.moduli(ref1)
    assert abs(theta - math.log(2) / math.log(3)) < 1e-14, theta
    assert alpha == 0.5 and cycle_type == "I"

    report = json.loads(blab.nondegeneracy(ref1))
    assert report["all_pass"] and report["c4_variant"] == "C4.1"

    a_km, b_km = blab.return_coeffs(ref1, 20, 12)
    assert abs(a_km - 531441 / 1048576) < 1e-12
    assert abs(b_km - (531441 / 1048576 - 0.5)) < 1e-12

    xbar, y, zbar = blab.cross_map(ref1, 20, 12, 0.01, [0.0], [0.0])
    assert abs(xbar - (a_km * 0.01 + b_km)) < 1e-12
    assert abs(y[0]) < 1e-11 and abs(zbar[0]) < 1e-6

    covering = json.loads(blab.build_covering(ref1, "cs"))
    assert covering["set"]["n"] == 9
    assert covering["verification"]["covered"]
    assert covering["verification"]["min_overlap"] > 0.0025

    cert = json.loads(blab.verify_blender(ref1, "cs", trials=5, depth=8))
    assert cert["pass"] and len(cert["trials"]) == 5

    hits = blab.search_km(
        theta, math.log(0.5) / math.log(3), 0.05, math.log(3), 50, even=True
    )
    assert [20, 12] in [list(h) for h in hits], hits

    intervals = json.loads(blab.activation_intervals(ref1, m_lo=5, m_hi=5, k_lo=5, k_hi=5))
    u5 = intervals["u_family"][0]
    assert abs(u5["center"] - 0.5 / 243) < 1e-15

    ref2 = blab.reference_params("ref2")
    rare = json.loads(blab.rational_theta(ref2))
    assert rare["treated_rational"] and not rare["rare1"]["pass"]

    out_dir = tempfile.mkdtemp(prefix="blab-scenario-")
    scenario = json.dumps({"params": json.loads(ref2), "actions": ["classify"]})
    code = blab.run_scenario(scenario, "classify", out_dir)
    assert code == 0 and os.path.exists(os.path.join(out_dir, "regime.json"))

    print("blab_py smoke test: all checks passed")


if __name__ == "__main__":
    main()
