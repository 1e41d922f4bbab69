import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from genmv.diffusion import (AdaptiveSampler, AnalyticGaussianScore, GeneratorConfig, NoiseSchedule,
                             ScoreModel, TrainBatch, analytic_gaussian_score,
                             dissipativity_constants, dsm_loss, esm_loss, perturb, sample_next,
                             sample_path, train_generator)
from helpers import max_rel_error

OU = NoiseSchedule.ou(horizon=20.0)


def toy(param="residual", seed=0, hidden=1, sched=None):
    """Four head parameters: one time feature, one hidden unit, one x."""
    m = ScoreModel(1, sched or NoiseSchedule(), hidden_dim=hidden, depth=0, time_width=1,
                   parameterization=param, bound=2.0, seed=seed)
    rng = np.random.default_rng(seed + 100)
    for p in m.params.values():
        p[...] = rng.normal(0.0, 0.5, p.shape)
    return m


# schedule ---------------------------------------------------------------

@pytest.mark.parametrize("sched", [NoiseSchedule(), NoiseSchedule.ou(), OU])
def test_vp_identity_on_grid(sched):
    g = sched.grid()
    assert np.max(np.abs(sched.h1(g) ** 2 + sched.h2(g) - 1.0)) < 1e-12


@pytest.mark.parametrize("sched", [NoiseSchedule(), NoiseSchedule.ou(horizon=5.0)])
def test_h1_h2_strictly_monotone(sched):
    # at tau = 20 the OU h2 rounds to 1.0, so monotonicity is checked where it is representable
    g = sched.grid()
    assert np.all(np.diff(sched.h1(g)) > 0)  # grid runs backwards in tau
    assert np.all(np.diff(sched.h2(g)) < 0)
    assert np.all((sched.h1(g) > 0) & (sched.h1(g) <= 1) & (sched.h2(g) >= 0) & (sched.h2(g) < 1))


def test_ou_closed_form():
    tau = np.linspace(0, 5, 11)
    assert np.allclose(OU.h1(tau), np.exp(-tau), atol=1e-15)
    assert np.allclose(OU.h2(tau), 1 - np.exp(-2 * tau), atol=1e-15)


def test_schedule_rejects_bad_values():
    with pytest.raises(ValueError):
        NoiseSchedule(kind="cosine")
    with pytest.raises(ValueError):
        NoiseSchedule(tau0=0.0)
    with pytest.raises(ValueError):
        NoiseSchedule(beta_min=1.0, beta_max=0.5)


# perturb and analytic score ---------------------------------------------

def test_perturb_examples():
    assert perturb(np.array([1.7]), 0.0, np.array([0.4]), OU)[0] == 1.7
    far = perturb(np.array([5.0]), 20.0, np.array([0.3]), OU)[0]
    assert far == pytest.approx(5 * math.exp(-20) + math.sqrt(-math.expm1(-40)) * 0.3, abs=1e-15)
    assert abs(far - 0.3) < 1.1e-8  # h1(20) = 2.06e-9 so the offset is 5 h1 = 1.03e-8
    assert perturb(np.array([1.0]), math.log(2), np.array([0.0]), OU)[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        perturb(np.array([1.0]), 21.0, np.array([0.0]), OU)
    with pytest.raises(ValueError):
        perturb(np.array([1.0]), -0.1, np.array([0.0]), OU)


def test_analytic_score_examples():
    x = np.array([0.3, -1.2])
    for tau in (0.1, 3.0):
        assert np.allclose(analytic_gaussian_score(tau, x, 0.0, 1.0, OU), -x)
    assert np.allclose(analytic_gaussian_score(20.0, x, 3.0, 0.2, OU), -x, atol=1e-7)
    assert analytic_gaussian_score(math.log(2), 1.0, 2.0, 0.25, OU) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        analytic_gaussian_score(0.0, x, 0.0, 0.0, OU)
    with pytest.raises(ValueError):
        analytic_gaussian_score(1.0, x, 0.0, -1.0, OU)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(-2, 2), st.floats(0.01, 2), st.floats(-3, 3))
def test_analytic_score_is_log_density_gradient(tau, m, v, x):
    sched = NoiseSchedule()
    h1, h2 = sched.h1(tau), sched.h2(tau)
    sd = math.sqrt(v * h1 * h1 + h2)
    e = 1e-5
    num = (norm.logpdf(x + e, m * h1, sd) - norm.logpdf(x - e, m * h1, sd)) / (2 * e)
    assert analytic_gaussian_score(tau, x, m, v, sched) == pytest.approx(num, rel=1e-5, abs=1e-6)


# score model ------------------------------------------------------------

def test_dissipative_head_is_bounded():
    m = ScoreModel(2, parameterization="dissipative", bound=3.0, hidden_dim=2, width=8)
    for p in m.head.params.values():
        p[...] = 50.0
    x = np.random.default_rng(0).standard_normal((20, 2))
    tau = 0.4
    g = m.score(tau, np.zeros(2), x) + x / m.schedule.h2(tau)
    assert np.all(np.abs(g) <= 3.0 + 1e-12)


def test_dissipativity_inequality_on_random_probes():
    rng = np.random.default_rng(5)
    m = ScoreModel(3, parameterization="dissipative", bound=4.0, hidden_dim=2, width=8, seed=1)
    for p in m.head.params.values():
        p[...] = rng.normal(0, 3, p.shape)
    R0, delta, C = dissipativity_constants(m)
    x = rng.standard_normal((10000, 3))
    x *= (R0 + rng.exponential(5.0, (10000, 1))) / np.linalg.norm(x, axis=1, keepdims=True)
    tau = rng.uniform(m.schedule.tau0, 1.0, 10000)
    s = np.concatenate([m.score(t, rng.standard_normal(2), xi[None]) for t, xi in zip(tau, x)])
    lhs = 2 * np.sum(x * s, axis=1)
    assert np.all(lhs <= -(1 + delta) * np.sum(x * x, axis=1) + C)
    with pytest.raises(ValueError):
        dissipativity_constants(ScoreModel(1))


def test_score_model_checkpoint_roundtrip(tmp_path):
    m = ScoreModel(2, hidden_dim=3, width=8, parameterization="noise", seed=4)
    m.mean, m.std = np.array([0.1, 0.2]), np.array([2.0, 3.0])
    m.save(tmp_path / "g.ckpt")
    back = ScoreModel.load(tmp_path / "g.ckpt")
    x = np.ones((3, 2))
    assert np.array_equal(back.score(0.3, np.zeros(3), x), m.score(0.3, np.zeros(3), x))
    assert np.array_equal(back.std, m.std)
    assert back.descriptor() == m.descriptor()


def test_bad_parameterization_rejected():
    with pytest.raises(ValueError):
        ScoreModel(1, parameterization="velocity")
    with pytest.raises(ValueError):
        ScoreModel(1, bound=0.0)


# losses -----------------------------------------------------------------

def test_dsm_loss_zero_for_point_mass_with_exact_score():
    m = ScoreModel(2, parameterization="dissipative", hidden_dim=2, width=4)
    for p in m.head.params.values():
        p[...] = 0.0
    batch = TrainBatch.draw(np.zeros((8, 3, 2)), m.schedule, np.random.default_rng(0))
    loss, _ = dsm_loss(m, batch)
    assert loss < 1e-20


@pytest.mark.parametrize("param", ["residual", "noise", "dissipative"])
def test_dsm_gradient_matches_finite_differences(param):
    m = toy(param, seed=2, hidden=2)
    rng = np.random.default_rng(3)
    # tau kept away from tau0 so the dissipative -x/h2 term does not swamp the
    # finite differences with cancellation error
    batch = TrainBatch(rng.standard_normal((6, 3, 1)), rng.uniform(0.05, 1.0, (6, 3)),
                       rng.standard_normal((6, 3, 1)))
    _, grads = dsm_loss(m, batch)
    assert max_rel_error(lambda: dsm_loss(m, batch)[0], m.params, grads) < 1e-4


def test_dsm_rejects_bad_batches():
    m = toy()
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        dsm_loss(m, TrainBatch(np.zeros((0, 1, 1)), np.zeros((0, 1)), np.zeros((0, 1, 1))))
    with pytest.raises(ValueError):
        dsm_loss(m, TrainBatch(np.zeros((2, 1, 1)), np.zeros((2, 1)), rng.standard_normal((2, 1, 1))))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_dsm_nonfinite_loss_aborts():
    m = toy()
    m.head.params["head.W0"][...] = np.inf
    batch = TrainBatch.draw(np.ones((4, 1, 1)), m.schedule, np.random.default_rng(0))
    with pytest.raises(FloatingPointError):
        dsm_loss(m, batch)


@pytest.mark.parametrize("param", ["residual", "noise", "dissipative"])
def test_esm_gradient_matches_finite_differences(param):
    m = toy(param, seed=7)
    _, grads = esm_loss(m, 0.5, 0.04)
    assert max_rel_error(lambda: esm_loss(m, 0.5, 0.04)[0], m.head.params, grads) < 1e-4


def test_esm_zero_at_exact_score():
    # residual head with F = 0 is the exact score of N(0, 1) data
    m = toy("residual")
    for p in m.head.params.values():
        p[...] = 0.0
    assert esm_loss(m, 0.0, 1.0)[0] < 1e-25
    with pytest.raises(ValueError):
        esm_loss(ScoreModel(2), 0.0, 1.0)


# training ---------------------------------------------------------------

def test_zero_epochs_returns_initial_model():
    data = np.random.default_rng(0).standard_normal((50, 2, 1))
    m, losses = train_generator(data, GeneratorConfig(epochs=0, hidden_dim=2, width=8, seed=3))
    ref = ScoreModel(1, hidden_dim=2, width=8, seed=3)
    assert losses == []
    assert all(np.array_equal(m.params[k], ref.params[k]) for k in ref.params)


def test_training_is_deterministic_and_reduces_loss():
    data = 0.5 + 0.2 * np.random.default_rng(1).standard_normal((400, 1, 1))
    cfg = GeneratorConfig(epochs=8, hidden_dim=2, width=16, batch_size=64, seed=2)
    m1, l1 = train_generator(data, cfg)
    m2, l2 = train_generator(data, cfg)
    assert l1 == l2
    assert all(np.array_equal(m1.params[k], m2.params[k]) for k in m1.params)
    m0, _ = train_generator(data, GeneratorConfig(epochs=0, hidden_dim=2, width=16, seed=2))
    # explicit objective on the standardized law N(0, 1) is noise free
    assert esm_loss(m1, 0.0, 1.0)[0] < esm_loss(m0, 0.0, 1.0)[0]
    assert m1.mean[0] == pytest.approx(data.mean())


def test_train_rejects_empty_data():
    with pytest.raises(ValueError):
        train_generator(np.zeros((0, 2, 1)))


# sampling ---------------------------------------------------------------

def test_exact_standard_normal_score_samples_standard_normal():
    exact = AnalyticGaussianScore(NoiseSchedule(), 0.0, 1.0)
    x = np.sort(sample_next(exact, np.zeros((5000, 1)), np.random.default_rng(0))[:, 0])
    q = norm.ppf((np.arange(5000) + 0.5) / 5000)
    assert np.sqrt(np.mean((x - q) ** 2)) < 0.05


def test_exact_gaussian_score_recovers_target_moments():
    exact = AnalyticGaussianScore(NoiseSchedule(), 0.5, 0.04)
    x = sample_next(exact, np.zeros((5000, 1)), np.random.default_rng(1))[:, 0]
    assert abs(x.mean() - 0.5) < 3 * 0.2 / math.sqrt(5000)
    assert abs(x.var() / 0.04 - 1) < 0.2


def test_predictor_only_reference_trace():
    # with n_cor = 0 the sampler is plain Euler-Maruyama; replay it by hand
    sched = NoiseSchedule(n_steps=5)
    exact = AnalyticGaussianScore(sched, 0.0, 1.0)
    got = sample_next(exact, np.zeros((3, 1)), np.random.default_rng(9), n_cor=0)
    rng = np.random.default_rng(9)
    x = rng.standard_normal((3, 1))
    taus = np.linspace(1.0, 1e-3, 6)
    for tk, tn in zip(taus[:-1], taus[1:]):
        b = 0.01 + 9.99 * tk
        dt = tk - tn
        x = x + (0.5 * b * x - b * x) * dt + math.sqrt(b * dt) * rng.standard_normal((3, 1))
    assert np.allclose(got, x, rtol=0, atol=1e-14)


def test_sampler_nonfinite_aborts():
    m = toy("noise")
    m.head.params["head.b0"][...] = np.nan
    with pytest.raises(FloatingPointError, match="step 0"):
        sample_next(m, np.zeros((2, 1)), np.random.default_rng(0), n_pre=3)


def test_sample_path_determinism_and_thread_invariance():
    m = ScoreModel(2, hidden_dim=3, width=8, seed=1)
    kw = dict(T_out=3, n_paths=300, seed=5, n_pre=20)
    a = sample_path(m, None, **kw)
    assert np.array_equal(a, sample_path(m, None, **kw))
    assert np.array_equal(a, sample_path(m, None, threads=3, **kw))
    assert a.shape == (300, 3, 2)
    assert not np.array_equal(a, sample_path(m, np.ones((2, 2)), **kw))
    with pytest.raises(ValueError):
        sample_path(m, None, T_out=0)


def test_sampling_prefix_causality():
    m = ScoreModel(1, hidden_dim=2, width=8, seed=2)
    short = AdaptiveSampler(m, np.zeros(2), 7, np.random.default_rng(4), n_pre=10)
    short.step()
    short.step()
    p2 = short.paths()
    short.step()
    full = sample_path(m, None, 3, 7, seed=0, n_pre=10)
    assert np.array_equal(short.paths()[:, :2], p2)
    # sample_path uses the same construction per chunk
    seq = np.random.SeedSequence(0).spawn(1)[0]
    again = AdaptiveSampler(m, np.zeros(2), 7, np.random.default_rng(seq), n_pre=10)
    for _ in range(3):
        again.step()
    assert np.array_equal(again.paths(), full)


def test_t_out_one_equals_sample_next_from_zero_state():
    m = ScoreModel(1, hidden_dim=2, width=8, seed=3)
    p = sample_path(m, None, 1, 10, seed=2, n_pre=15)
    seq = np.random.SeedSequence(2).spawn(1)[0]
    x = sample_next(m, np.zeros((10, 2)), np.random.default_rng(seq), n_pre=15)
    assert np.allclose(p[:, 0], m.denormalize(x))


def test_features_returned_match_encoder():
    m = ScoreModel(2, hidden_dim=3, width=8, seed=1)
    ctx = np.full((4, 2), 0.01)
    paths, feats = sample_path(m, ctx, 3, 5, seed=0, n_pre=10, return_features=True)
    for i in range(5):
        assert np.allclose(feats[i], m.feature_path(paths[i], ctx), atol=1e-12)
