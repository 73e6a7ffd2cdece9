import math

import numpy as np
import pytest

import bcam

MODEL = """
margins = iG, SM
copula = J0
eq.mu1 = x2 + x3
eq.mu2 = x1 + s(x2)
eq.sigma1 = 1
eq.sigma2 = 1
eq.nu2 = x3
eq.theta = x1
"""


def test_copula_functions_vectorize():
    u = np.linspace(0.1, 0.9, 5)
    c = bcam.copula_cdf("C0", u, u, 2.0)
    assert c.shape == (5,)
    assert np.all(c <= u + 1e-12)
    assert bcam.copula_cdf("N", 0.3, 0.6, 0.0) == pytest.approx(0.18, abs=1e-9)
    assert bcam.theta_to_tau("C0", 2.0) == pytest.approx(0.5)
    assert bcam.tau_to_theta("G0", 0.5) == pytest.approx(2.0)
    assert "J270" in bcam.copula_tags()


def test_invalid_tag_raises_value_error():
    with pytest.raises(ValueError):
        bcam.copula_cdf("J45", 0.5, 0.5, 2.0)
    with pytest.raises(ValueError):
        bcam.copula_cdf("C0", 0.5, 0.5, -1.0)


def test_margin_roundtrip():
    p = np.array([0.1, 0.5, 0.9])
    y = bcam.margin_quantile("GA", p, 1.5, 0.6)
    assert np.allclose(bcam.margin_cdf("GA", y, 1.5, 0.6), p, atol=1e-10)
    assert bcam.margin_cdf("N", 0.0, 0.0, 1.0) == pytest.approx(0.5)


def test_sampler_matches_tau():
    uv = bcam.sample_copula("C0", 2.0, 4000, seed=3)
    x, y = uv[:, 0], uv[:, 1]
    conc = np.sign(x[:, None] - x[None, :]) * np.sign(y[:, None] - y[None, :])
    tau = conc.sum() / (len(x) * (len(x) - 1))
    assert tau == pytest.approx(0.5, abs=0.03)


def test_fit_and_inference(tmp_path):
    data = bcam.simulate(n=400, seed=2)
    model = bcam.Model(MODEL, data)
    res = model.fit()
    assert res.converged
    assert len(res.coefficients) == model.n_coef == len(model.coef_names)
    assert res.edf < model.n_coef
    assert model.aic() < model.bic()
    assert 0.6 < model.mean_tau() < 0.9
    r = model.residuals()
    assert r.shape == (400, 2)
    assert abs(float(np.mean(r))) < 0.2
    pc = model.joint_prob(1.0, 1.0)
    pi = model.joint_prob(1.0, 1.0, mode="independence")
    assert np.mean(pc) > np.mean(pi)
    iv = model.joint_prob_interval(1.0, 1.0, nsim=100)
    assert iv.shape == (400, 3)
    assert np.all(iv[:, 1] <= iv[:, 2])
    assert "logLik" in model.summary()

    path = str(tmp_path / "fit.bcam")
    model.save(path)
    other = bcam.Model(MODEL, data)
    other.load(path)
    assert np.array_equal(other.result.coefficients, res.coefficients)


def test_unfitted_model_raises():
    model = bcam.Model(MODEL, bcam.simulate(n=50, seed=1))
    with pytest.raises(ValueError):
        model.aic()


def test_config_errors_are_collected():
    data = bcam.simulate(n=50, seed=1)
    with pytest.raises(ValueError) as e:
        bcam.Model("margins = DAGUM, SM\ncopula = J45\neq.mu1 = 1\n", data)
    assert "J45" in str(e.value)
    assert "expect 7" in str(e.value) or "equation" in str(e.value)


def test_cli_entry_point(tmp_path):
    assert bcam.run_cli(["simulate", "--n", "50", "--out", str(tmp_path)]) == 0
    loaded = bcam.load_csv(str(tmp_path / "data.csv"))
    assert len(loaded["y1"]) == 50
    assert math.isfinite(float(np.mean(loaded["y2"])))
