"""Smoke test for the mcil_py extension module.

Build and run:
    maturin develop -m crates/py/Cargo.toml --features extension-module
    python python/smoke_test.py
"""

import json
import math

import mcil_py


def main():
    assert abs(mcil_py.cumulative_gaussian(0.0) - 0.5) < 1e-15

    w = mcil_py.joint_weights([1.0, 2.0])
    assert all(abs(a - b) < 1e-12 for a, b in zip(w, [0.8, 0.2])), w
    joint = mcil_py.joint_model([1.0, 2.0])
    assert abs(joint.sigma**2 - 0.8) < 1e-12
    assert abs(mcil_py.joint_variance_closed_form([1.0, 2.0]) - 0.8) < 1e-12
    assert joint.response(1e9) == 1.0

    curve = mcil_py.simulate_joint_curve([2.0, 2.0], [-1.0, 0.0, 1.0], 20000, 1)
    assert abs(curve[1][1] - 0.5) < 0.02, curve

    model, residual = mcil_py.fit_curve([(-1.0, 0.2, 100), (0.0, 0.5, 100), (1.0, 0.8, 100)])
    assert model.sigma > 0 and residual >= 0

    kappa, band = mcil_py.fleiss_kappa([[3, 0], [0, 3], [2, 1], [1, 2]], 3)
    assert abs(kappa - 1 / 3) < 1e-12 and band == "fair", (kappa, band)
    assert mcil_py.vote([0, 0, 1, 2, 0], 5) == [0.6, 0.2, 0.2, 0.0, 0.0]
    assert abs(mcil_py.kl_loss([1.0, 0.0], [0.5, 0.5]) - math.log(2)) < 1e-12

    net = mcil_py.Network([8], 3, 4, seed=5, activation="tanh")
    p = net.forward([0.1, -0.2, 0.3])
    assert abs(sum(p) - 1.0) < 1e-12
    cls, _ = net.predict([0.1, -0.2, 0.3])
    assert cls == max(range(4), key=lambda i: p[i])
    again = mcil_py.Network.load(net.save())
    assert again.forward([0.1, -0.2, 0.3]) == p

    try:
        mcil_py.joint_weights([1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("single observer accepted")

    config = json.loads(mcil_py.default_config_json())
    config["data"]["source"]["synthetic"]["per_class"] = 60
    config["stage1"]["epochs"] = 2
    config["stage2"]["epochs"] = 1
    report = json.loads(mcil_py.run_experiment(json.dumps(config), seed=3))
    assert report["global_seed"] == 3
    assert len(report["classifiers"]) == len(config["zoo"])
    print("kappa", report["kappa_before"]["kappa"], "->", report["kappa_after"]["kappa"])
    print("smoke test ok")


if __name__ == "__main__":
    main()
