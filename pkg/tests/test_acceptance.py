"""Acceptance criteria, one test (or group of tests) per criterion.

Simulation studies are seeded, so every number here is reproducible.  The
terminal summary prints one PASS/FAIL line per criterion with the measured
values.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from momdecon.gof import bootstrap_pvalue
from momdecon.hankel import estimate_k, hankel_determinant
from momdecon.known_components import MomentProvider
from momdecon.moments import deconvolve_location, discrete_moments, exact_mixture_moments
from momdecon.orthopoly import assemble, orthonormal_family, roots, weights
from momdecon.pipeline import fit_sample
from momdecon.refine import MixtureModel, em_fit, initial_model
from momdecon.simlab import preset, run_experiment

criterion = pytest.mark.criterion


@criterion(1, "exact-moment oracle: [1,2,5,14,41] and the even-reduced [1,5,41,365,3281]")
def test_exact_moment_oracle(record_property):
    t0 = time.perf_counter()
    mu = [1, 2, 5, 14, 41]
    rep = estimate_k(mu)
    d = assemble(rep, mu, "scale")
    mu2 = [1, 5, 41, 365, 3281]
    d2 = assemble(estimate_k(mu2), mu2, "even_reduced")
    elapsed = time.perf_counter() - t0
    record_property("support", d.support)
    record_property("weights", d.weights)
    record_property("even_reduced_support", d2.support)
    record_property("seconds", round(elapsed, 4))
    assert rep.k_star == 2
    assert d.support == pytest.approx((1, 3), abs=1e-8)
    assert d.weights == pytest.approx((0.5, 0.5), abs=1e-8)
    assert d2.support == pytest.approx((1, 3), abs=1e-8)
    assert elapsed < 1.0


@criterion(2, "exponential k=2, n=100, reps=2000")
def test_exponential_k2(record_property):
    t0 = time.perf_counter()
    s = run_experiment(preset("exp-k2-n100", reps=2000, seed=1))
    elapsed = time.perf_counter() - t0
    record_property("pct_correct", s.pct_correct)
    record_property("mean_k", s.mean_k)
    record_property("sd_k", round(s.sd_k, 4))
    record_property("seconds", round(elapsed, 1))
    assert 91 <= s.pct_correct <= 97
    assert 1.90 <= s.mean_k <= 2.00
    assert 0.18 <= s.sd_k <= 0.30
    assert elapsed < 60


@criterion(3, "exponential k=3 trend at n=1000/5000/10000, reps=1000")
def test_exponential_k3_trend(record_property):
    t0 = time.perf_counter()
    target = {1000: 29.22, 5000: 53.44, 10000: 64.72}
    pct = {}
    for n in target:
        pct[n] = run_experiment(preset(f"exp-k3-n{n}", reps=1000, seed=2)).pct_correct
    elapsed = time.perf_counter() - t0
    record_property("pct_correct", pct)
    record_property("seconds", round(elapsed, 1))
    for n, want in target.items():
        assert abs(pct[n] - want) <= 5
    assert pct[1000] < pct[5000] < pct[10000]
    assert elapsed < 600


@criterion(4, "exponential k=3 at n=100: very bad regime")
def test_exponential_k3_small_sample(record_property):
    s = run_experiment(preset("exp-k3-n100", reps=2000, seed=3))
    record_property("pct_correct", s.pct_correct)
    record_property("median_k", s.median_k)
    assert s.pct_correct <= 5
    assert s.median_k == 2


@criterion(5, "normal scale mixture N(0,1)/N(0,9), n=1000, reps=1000")
def test_normal_scale_mixture(record_property):
    s = run_experiment(preset("normal-scale-I", reps=1000, seed=4))
    record_property("pct_k2", s.pct_correct)
    record_property("sigma_means", [round(v, 4) for v in s.param_means])
    record_property("weight_means", [round(v, 4) for v in s.weight_means])
    assert 56.7 <= s.pct_correct <= 66.7
    assert 0.75 <= s.param_means[0] <= 0.87
    assert 2.88 <= s.param_means[1] <= 3.08
    assert 0.43 <= s.weight_means[0] <= 0.53


@criterion(6, "normal location mixture, shifts -1/+1")
def test_normal_location_mixture(record_property):
    s = run_experiment(preset("normal-loc-II", reps=1000, seed=5))
    record_property("pct_k2", s.pct_correct)
    record_property("location_means", [round(v, 4) for v in s.param_means])
    record_property("weight_means", [round(v, 4) for v in s.weight_means])
    assert 53 <= s.pct_correct <= 63
    assert s.param_means == pytest.approx([-0.9957, 0.9957], abs=0.05)
    assert s.weight_means == pytest.approx([0.5, 0.5], abs=0.03)


@criterion(7, "Laplace location mixture, shifts -1/+1")
def test_laplace_location_mixture(record_property):
    s = run_experiment(preset("laplace-loc-III", reps=1000, seed=6))
    record_property("pct_k2", s.pct_correct)
    record_property("location_means", [round(v, 4) for v in s.param_means])
    assert 55.8 <= s.pct_correct <= 65.8
    assert s.param_means[0] == pytest.approx(-0.9886, abs=0.05)
    assert s.param_means[1] == pytest.approx(0.9875, abs=0.05)


def _rational_laws(rng, count, k_hi=4):
    for _ in range(count):
        k = int(rng.integers(1, k_hi + 1))
        pts = sorted(Fraction(int(p), 2) for p in rng.choice(np.arange(-8, 9), k, replace=False))
        raw = rng.integers(1, 9, k)
        yield pts, [Fraction(int(r), int(raw.sum())) for r in raw]


@criterion(8, "property suite")
def test_property_orthonormality_and_reconstruction(record_property):
    rng = np.random.default_rng(80)
    worst_g = worst_m = 0.0
    for support, w_true in _rational_laws(rng, 300):
        k = len(support)
        mu = [float(sum(w * x**j for x, w in zip(support, w_true))) for j in range(2 * k + 1)]
        fam = orthonormal_family(mu, k)
        lam = roots(fam[k])
        w = weights(fam[:k], lam)
        for i in range(k):
            for l in range(k):
                g = math.fsum(wj * fam[i](x) * fam[l](x) for x, wj in zip(lam, w))
                worst_g = max(worst_g, abs(g - (i == l)))
        for r in range(2 * k):
            rec = math.fsum(wj * x**r for x, wj in zip(lam, w))
            worst_m = max(worst_m, abs(rec - mu[r]) / max(abs(mu[r]), 1e-300) if mu[r] else abs(rec))
    record_property("max_orthonormality_error", f"{worst_g:.2e}")
    record_property("max_reconstruction_rel_error", f"{worst_m:.2e}")
    assert worst_g <= 1e-8 and worst_m <= 1e-8


@criterion(8, "property suite")
def test_property_em_monotone(record_property):
    worst = math.inf
    for i, m in enumerate([
        MixtureModel("normal_scale", (1.0, 3.0), (0.5, 0.5)),
        MixtureModel("laplace_scale", (0.13, 0.73), (0.84, 0.16)),
        MixtureModel("normal_location", (-1.0, 1.0), (0.5, 0.5), scale=1.0),
        MixtureModel("laplace_location", (-1.0, 1.0), (0.5, 0.5), scale=math.sqrt(0.5)),
        MixtureModel("exponential_scale", (1.0, 3.0), (0.5, 0.5)),
    ]):
        x = m.sample(1000, np.random.default_rng([81, i]))
        start = MixtureModel(m.family, tuple(p * 0.8 + 0.1 for p in m.params), (0.5, 0.5), m.scale)
        fit = em_fit(x, start)
        worst = min(worst, float(np.min(np.diff(fit.trace))))
    record_property("min_loglik_step", f"{worst:.2e}")
    assert worst >= -1e-9


def _laplace_det(m):
    if len(m) == 1:
        return m[0][0]
    return sum((-1) ** c * m[0][c] * _laplace_det([r[:c] + r[c + 1:] for r in m[1:]]) for c in range(len(m)))


@criterion(8, "property suite")
def test_property_hankel_vs_laplace_expansion(record_property):
    rng = np.random.default_rng(82)
    worst = 0.0
    for _ in range(400):
        s = int(rng.integers(0, 5))
        entries = rng.integers(-10**6, 10**6, 2 * s + 1).tolist()
        want = _laplace_det([[Fraction(entries[i + j]) for j in range(s + 1)] for i in range(s + 1)])
        got = hankel_determinant([float(v) for v in entries], s)
        err = abs(Fraction(got) - want) / abs(want) if want else abs(got)
        worst = max(worst, float(err))
    record_property("max_det_rel_error", f"{worst:.2e}")
    assert worst <= 1e-9


@criterion(8, "property suite")
def test_property_scale_equivariance(record_property):
    rng = np.random.default_rng(83)
    checked = 0
    for support, w in _rational_laws(rng, 100, k_hi=5):
        k = len(support)
        for c in (Fraction(1, 4), Fraction(2), Fraction(8)):
            base = [float(sum(wi * x**j for x, wi in zip(support, w))) for j in range(2 * k + 1)]
            scaled = [float(sum(wi * (c * x) ** j for x, wi in zip(support, w))) for j in range(2 * k + 1)]
            a = np.sign([hankel_determinant(base, s) for s in range(k + 1)])
            b = np.sign([hankel_determinant(scaled, s) for s in range(k + 1)])
            assert np.array_equal(a, b)
            assert estimate_k(base).k_star == estimate_k(scaled).k_star
            checked += 1
    record_property("scalings_checked", checked)


@criterion(8, "property suite")
def test_property_location_round_trip(record_property):
    rng = np.random.default_rng(84)
    worst = 0.0
    # support on the scale of Z or larger; far below it the rounding of the
    # inputs alone exceeds 1e-10, whatever the arithmetic
    for i in range(200):
        k = int(rng.integers(1, 4))
        support = np.sort(rng.uniform(1.0, 3.0, k))
        w = rng.dirichlet(np.ones(k))
        z = [MomentProvider.normal(0.0, 1.0), MomentProvider.laplace(0.0, 0.7), MomentProvider.normal(0.3, 0.5)][i % 3]
        xm = exact_mixture_moments(support, w, z, "location", 10)
        got = deconvolve_location(xm, z).values
        want = discrete_moments(support, w, 10)
        worst = max(worst, max(abs(g - v) / abs(v) for g, v in zip(got[1:], want[1:])))
    record_property("max_round_trip_rel_error", f"{worst:.2e}")
    assert worst <= 1e-10


@criterion(8, "property suite")
def test_property_seeded_paths_bit_exact(record_property):
    cfg = preset("normal-scale-I", reps=40, seed=85, refine=True)
    assert run_experiment(cfg).to_json(True) == run_experiment(cfg).to_json(True) == \
        run_experiment(cfg, workers=2).to_json(True)
    m = MixtureModel("laplace_scale", (0.13, 0.73), (0.84, 0.16))
    x = m.sample(500, np.random.default_rng(85))
    a = bootstrap_pvalue(x, m, "cvm", reps=99, seed=85)
    b = bootstrap_pvalue(x, m, "cvm", reps=99, seed=85, threads=2)
    assert a == b
    assert np.array_equal(m.sample(50, np.random.default_rng(1)), m.sample(50, np.random.default_rng(1)))
    record_property("determinism", "simlab, bootstrap, sampling")


TRUTH = MixtureModel("laplace_scale", (0.13, 0.73), (0.84, 0.16))


@criterion(9, "synthetic Laplace scale mixture: fit, refine, CvM bootstrap over 50 runs")
def test_synthetic_financial_pipeline(record_property):
    t0 = time.perf_counter()
    z = MomentProvider.laplace(0.0, 1.0)
    k_ok = scale_ok = p_ok = joint = 0
    for i in range(50):
        x = TRUTH.sample(8000, np.random.default_rng([9, i]))
        fit = fit_sample(x, z, "scale", fallback=True)
        good_k = fit.ok and fit.k_star == 2
        good_scale = good_p = False
        if good_k:
            model = em_fit(x, initial_model(fit.distribution, z)).sorted()
            good_scale = all(abs(est - true) <= 0.15 * true for est, true in zip(model.params, TRUTH.params))
            good_p = bootstrap_pvalue(x, model, "cvm", reps=199, seed=i).p_value >= 0.05
        k_ok += good_k
        scale_ok += good_scale
        p_ok += good_p
        joint += good_k and good_scale and good_p
    elapsed = time.perf_counter() - t0
    record_property("runs_k2", k_ok)
    record_property("runs_scales_within_15pct", scale_ok)
    record_property("runs_p_at_least_0.05", p_ok)
    record_property("runs_all_three", joint)
    record_property("seconds", round(elapsed, 1))
    assert joint >= 45
    assert elapsed < 300


@criterion(10, "exponential k=4: n=1e5 beats n=1e4, reps=200")
def test_exponential_k4_trend(record_property):
    lo = run_experiment(preset("exp-k4-n10000", reps=200, seed=10)).pct_correct
    hi = run_experiment(preset("exp-k4-n100000", reps=200, seed=10)).pct_correct
    record_property("pct_correct", {10000: lo, 100000: hi})
    assert hi > lo
