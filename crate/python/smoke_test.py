"""Smoke test for the slelab Python module.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/slelab-*.whl
"""

import json
import math
import os
import tempfile

import slelab


def main():
    times, values = slelab.sample_driving(6.0, 1.0, 100, 7)
    assert len(times) == len(values) == 101
    assert times[0] == 0.0 and values[0] == 0.0
    assert (times, values) == slelab.sample_driving(6.0, 1.0, 100, 7)

    # zero driving: the trace climbs straight up to 2 i sqrt(t)
    pts = slelab.chordal_trace(0.0, 1.0, 1000, 1, 10)
    for t, re, im in pts:
        assert abs(re) < 1e-12 and abs(im - 2.0 * math.sqrt(t)) < 1e-6 * max(1.0, im)

    est, err = slelab.hitting_probability(6.0, math.pi / 2, 2.0, 10, 1)
    assert est == 1.0 and err == 0.0

    koebe = json.loads(slelab.estimate_beta(1.0, '{"kind": "koebe"}'))
    assert abs(koebe["estimate"]["beta_hat"] - 2.0) < 0.1
    assert koebe["universal_bound"]["pass"]

    sieve = json.loads(slelab.classify_squares(1.0 / 3.0, 2, n_max=8))
    assert sieve["bad"] == [] and sieve["content_bound"] == 0.0

    bound = json.loads(slelab.dkappa_bounds(6.0))
    assert abs(bound["p"] - 1.0 / 3.0) < 1e-15 and not bound["refined_applicable"]

    try:
        slelab.dkappa_bounds(9.0)
    except ValueError as e:
        assert "kappa" in str(e)
    else:
        raise AssertionError("kappa = 9 accepted")

    diags = slelab.validate_config(json.dumps(
        {"kind": "hitting", "seed": 1, "output_dir": "x", "params": {"kappa": 9.0, "radii": [0.1], "n_traces": 5}}))
    assert diags and diags[0][0] == "error" and diags[0][1] == "params.kappa"

    with tempfile.TemporaryDirectory() as out:
        config = json.dumps({"kind": "dkappa", "seed": 1, "output_dir": out, "params": {"kappa": 6.0}})
        manifest = json.loads(slelab.run_config(config, threads=1))
        assert [f["file"] for f in manifest["outputs"]] == ["dkappa.json"]
        assert os.path.exists(os.path.join(out, "manifest.json"))

    print("slelab", slelab.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
