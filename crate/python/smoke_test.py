"""Smoke test for the `sensiloop` extension module.

Build and install it first, e.g. `maturin build -m crates/python/Cargo.toml`
followed by `pip install target/wheels/sensiloop-*.whl`.
"""

import math
import pathlib
import sys
import tempfile

import sensiloop

ROOT = pathlib.Path(__file__).resolve().parent.parent
TITANIC = ROOT / "crates" / "core" / "tests" / "data" / "titanic.csv"


def ishigami(x, a=7.0, b=0.1):
    return math.sin(x[0]) + a * math.sin(x[1]) ** 2 + b * x[2] ** 4 * math.sin(x[0])


def check_efast():
    pi = math.pi
    out = sensiloop.efast(ishigami, [(-pi, pi)] * 3, resamples=10, seed=2024)
    indices = {i["input"]: i for i in out["outputs"][0]["indices"]}
    expected = {"x1": 0.3139, "x2": 0.4424, "x3": 0.0}
    for name, s1 in expected.items():
        assert abs(indices[name]["s1"] - s1) < 0.05, (name, indices[name])
    print("efast ok:", {k: round(v["s1"], 3) for k, v in indices.items()})


def check_loss():
    p = [[0.1], [0.4], [0.3]]
    t = [[0.0], [0.5], [0.5]]
    mse = sum((a[0] - b[0]) ** 2 for a, b in zip(p, t)) / 3
    assert abs(sensiloop.loss("mse", p, t) - mse) < 1e-12
    try:
        sensiloop.loss("no_such_loss", p, t)
    except sensiloop.SensiloopError:
        pass
    else:
        raise AssertionError("unknown loss accepted")
    print("loss ok")


def check_session():
    s = sensiloop.Session(seed=7)
    s.upload_csv(TITANIC.read_text())
    s.configure(
        inputs=["Pclass", "Sex", "Age", "SibSp", "Parch", "Fare"],
        outputs=["Survived"],
        task="classification",
        normalization="min_max",
    )
    gbdt = s.train("gradient_boosted_trees", n_rounds=50, max_depth=3)
    forest = s.train("random_forest", n_trees=30)
    report = s.evaluate("validation", "binary_cross_entropy")
    gsa = s.gsa()
    ranked = sorted(gsa["outputs"][0]["indices"], key=lambda i: -i["st"])
    lime = s.explain(0, "lime", split="test")
    shap = s.explain(0, "shap", split="test")
    assert len(shap["entries"]) == 6 and lime["method"] == "lime"

    model = s.model(gbdt)
    with tempfile.TemporaryDirectory() as d:
        path = pathlib.Path(d) / "m.model"
        model.save(str(path))
        again = sensiloop.Model.load(str(path))
    row = [[0.5] * len(model.inputs)]
    assert model.predict(row) == again.predict(row)
    assert again.to_bytes() == model.to_bytes()

    print("session ok: models", [gbdt, forest], "best", report["best_model_id"])
    print("  top ST:", [(i["input"], round(i["st"], 3)) for i in ranked[:3]])
    print("  revision", s.revision)


def main():
    print("sensiloop module:", sensiloop.__file__)
    check_efast()
    check_loss()
    check_session()
    print("all smoke checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
