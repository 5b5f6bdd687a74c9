"""Smoke test for the uygraph extension module.

Build and install first:  pip install --no-build-isolation -e crates/py
"""

import math
import tempfile

import uygraph


def main():
    g = uygraph.sbm(num_classes=2, nodes_per_class=40, p_in=0.2, p_out=0.02, seed=1)
    assert g.num_nodes == 80 and g.num_classes == 2
    assert 0.0 <= g.homophily() <= 1.0

    g = g.split(5, val_fraction=0.5, seed=1)
    assert sum(g.train_mask) == 10

    with tempfile.TemporaryDirectory() as d:
        checksum = g.save(d)
        again = uygraph.load(d)
        assert again.edges == g.edges and again.features == g.features
        assert again.save(d) == checksum

    aug = uygraph.augment(g, multiplicity=2, cn_cn="negative")
    assert aug.num_cns == 4
    # each train node is wrong for two CNs, plus all CN pairs
    assert aug.negative_edges == 10 * 2 + 4 * 3 // 2
    spec = aug.spectrum()
    assert spec["negative_count"] <= min(spec["theorem_bound"], spec["edge_negative_count"])

    for model in ["gcn", "uygcn", "uygat"]:
        metrics = uygraph.train(g, model=model, epochs=50, seed=0)
        acc = metrics["test"]["accuracy"]
        assert 0.0 <= acc <= 1.0 and len(metrics["epochs"]) == 50
        print(f"{model}: test accuracy {acc:.3f}")

    report = uygraph.simulate(aug, variant="grand", horizon=20.0)
    assert report["flocking"]["flocked"] is False

    try:
        uygraph.train(g, model="gin")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown model accepted")

    assert math.isfinite(aug.curvature()["mean_delta"])
    print("smoke test passed")


if __name__ == "__main__":
    main()
