"""Smoke test for the rankval extension module.

Build and install first, e.g. `pip install maturin && maturin develop -m
crates/py/Cargo.toml`, then run `python python/smoke_test.py` or `pytest`.
"""

import json
from pathlib import Path

import rankval

ROOT = Path(__file__).resolve().parent.parent
NBA = ROOT / "crates" / "core" / "fixtures" / "nba"


def test_binomial_pipeline():
    ds = rankval.Dataset.from_csv(str(NBA / "nba_full.csv"))
    assert ds.kind == "binomial" and len(ds) == 461

    prior = rankval.Prior.fit(ds)
    theta = prior.theta
    assert theta["family"] == "beta"
    assert abs(theta["a"] - 15.12) < 0.5 and abs(theta["b"] - 5.38) < 0.5

    table = rankval.rvalues(ds, prior)
    ranks = dict(zip(table.ids, table.ranks("rvalue")))
    assert ranks["Brian Roberts"] == 1
    assert all(0.0 < r <= 1.0 for r in table.rvalues)
    lam = table.lambda_curve
    assert len(lam["grid"]) == 199 and len(lam["smoothed"]) == 199

    full = rankval.rank(ds, prior)
    assert set(full.methods) == {"rvalue", "mle", "pm", "per"}
    assert full.to_csv().startswith("id,rvalue,rvalue_rank")

    again = rankval.Prior.from_json(prior.to_json())
    assert again.theta == theta


def test_posterior_against_scipy():
    from scipy import stats

    ds = rankval.Dataset.binomial(["roberts", "allen"], [125, 105], [133, 116])
    prior = rankval.Prior.beta(15.12, 5.38)
    pm = rankval.posterior_means(ds, prior)
    assert abs(pm[0] - (125 + 15.12) / (133 + 15.12 + 5.38)) < 1e-12
    assert abs(pm[0] - 0.913) < 0.0015 and abs(pm[1] - 0.880) < 0.0015

    tails = rankval.tail_probabilities(ds, prior, 0.85)
    for t, (y, n) in zip(tails, [(125, 133), (105, 116)]):
        assert abs(t - stats.beta.sf(0.85, 15.12 + y, 5.38 + n - y)) < 1e-10


def test_normal_closed_form_matches_grid():
    from scipy import stats

    rng = __import__("numpy").random.default_rng(7)
    n = 20000
    s2 = rng.gamma(4.0, 0.25, n)
    x = rng.normal(0.0, 1.0, n) + rng.normal(0.0, 1.0, n) * s2 ** 0.5
    ds = rankval.Dataset.normal([f"u{i}" for i in range(n)], x.tolist(), s2.tolist())
    law = {"family": "gamma", "shape": 4.0, "rate": 4.0}
    prior = rankval.Prior.normal(0.0, 1.0, law)
    closed = rankval.rank(ds, prior, route="closed_form").rvalues
    grid = rankval.rvalues(ds, prior).rvalues
    # the grid's crossing level is an empirical quantile over the units, so
    # the two routes agree only up to its sampling error (~7e-3 here)
    worst = max(abs(a - b) for a, b in zip(closed, grid) if a < 0.99)
    assert worst < 1.5e-2, worst

    # the optimal threshold tends to the prior quantile as noise vanishes
    pts = rankval.threshold_curve("maxagree", [0.1], [1e-10], law)
    assert abs(pts[0][2] - stats.norm.isf(0.1)) < 1e-3

    fitted = rankval.Prior.fit(ds, variance_law="gamma")
    assert fitted.variance["family"] == "gamma"
    assert set(fitted.std_errors) == {"mu", "tau2"}


def test_studies():
    rep = rankval.agreement_study(
        {
            "n_units": 20000,
            "theta": {"family": "normal", "mu": 0.0, "tau2": 1.0},
            "variance": {"family": "gamma", "shape": 1.0, "rate": 1.0},
            "alphas": [0.1],
            "seed": 3,
        }
    )
    methods = {r["method"] for r in rep["results"]}
    assert {"rvalue", "mle", "pm"} <= methods
    assert rep["max_identity_error"] < 1e-12

    train = rankval.Dataset.from_csv(str(NBA / "nba_midseason.csv"))
    full = rankval.Dataset.from_csv(str(NBA / "nba_full.csv"))
    sim = rankval.similarity_validation(train, full, {"t_list": [10], "replicates": 20, "seed": 1})
    assert any(r["method"] == "rvalue" for r in sim["rows"])

    assert rankval.ks_uniform([(i + 0.5) / 100 for i in range(100)]) <= 0.0051


def test_errors_carry_codes():
    try:
        rankval.Dataset.binomial(["a"], [5], [3])
    except rankval.RankvalError as e:
        assert e.args[0] == "InvalidUnits"
    else:
        raise AssertionError("y > n accepted")
    try:
        rankval.Dataset.normal([], [], [])
    except rankval.RankvalError as e:
        assert e.args[0] == "EmptyDataset"
    else:
        raise AssertionError("empty dataset accepted")
    assert issubclass(rankval.RankvalError, ValueError)
    json.loads(rankval.Prior.beta(2.0, 3.0).to_json())


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
