import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sidforge.classifier import (
    FEATURE_DIM,
    AdamState,
    LogisticModel,
    TrainConfig,
    adamw_step,
    bce_loss_and_grad,
    dumps_model,
    featurize,
    image_features,
    loads_model,
    logits,
    lr_schedule,
    scores,
    train,
)
from sidforge.features import Extractor
from sidforge.harness import load_dataset
from sidforge.transforms import AugmentConfig


def _grid_oracle(fmap):
    avg = np.abs(fmap).mean(axis=0)
    h, w = avg.shape
    out = []
    for i in range(4):
        for j in range(4):
            r0, r1 = i * (h // 4), (h if i == 3 else (i + 1) * (h // 4))
            c0, c1 = j * (w // 4), (w if j == 3 else (j + 1) * (w // 4))
            out.append(avg[r0:r1, c0:c1].mean())
    return out


# -- featurize ---------------------------------------------------------------


def test_featurize_all_zero():
    f = featurize(np.zeros((3, 8, 8)), np.zeros((7, 7)))
    assert f.shape == (FEATURE_DIM,)
    assert f.tolist() == [0.0] * 25 + [0.0, 1.0, 0.0]


@pytest.mark.parametrize("shape", [(3, 8, 8), (3, 10, 13)])
def test_featurize_matches_statistics_oracle(shape):
    rng = np.random.default_rng(sum(shape))
    fmap = rng.normal(size=shape)
    corr = rng.integers(-1, 2, size=(9, 9)).astype(float)
    f = featurize(fmap, corr)
    expected = []
    for ch in fmap:
        expected.extend(oracles.moments(ch))
    expected.extend(_grid_oracle(fmap))
    vals = corr.ravel().tolist()
    expected.extend(vals.count(v) / len(vals) for v in (-1.0, 0.0, 1.0))
    np.testing.assert_allclose(f, expected, atol=1e-9, rtol=0)


def test_featurize_doubling_scales_magnitude_slots_exactly():
    rng = np.random.default_rng(1)
    fmap = rng.normal(size=(3, 8, 8))
    corr = rng.integers(-1, 2, size=(7, 7)).astype(float)
    a, b = featurize(fmap, corr), featurize(2 * fmap, corr)
    mag = [0, 1, 3, 4, 6, 7] + list(range(9, 25))
    fixed = [2, 5, 8, 25, 26, 27]
    np.testing.assert_array_equal(b[mag], 2 * a[mag])
    np.testing.assert_array_equal(b[fixed], a[fixed])


def test_featurize_gray_replicates_channel():
    g = np.random.default_rng(2).normal(size=(1, 8, 8))
    f = featurize(g, np.zeros((3, 3)))
    np.testing.assert_array_equal(f[0:3], f[3:6])
    np.testing.assert_array_equal(f[0:3], f[6:9])


def test_featurize_constant_channel_has_zero_kurtosis():
    f = featurize(np.full((3, 4, 4), 0.2), np.zeros((3, 3)))
    assert f[2] == f[5] == f[8] == 0.0
    assert f[0] == pytest.approx(0.2)


def test_image_features_histogram_sums_to_one():
    x = np.random.default_rng(3).random((3, 16, 16))
    f = image_features(x, Extractor())
    assert np.all(np.isfinite(f))
    assert f[25:].sum() == pytest.approx(1.0, abs=1e-9)


# -- forward and loss --------------------------------------------------------


def test_zero_model_scores_half():
    f = np.random.default_rng(4).normal(size=(5, FEATURE_DIM))
    assert np.all(scores(LogisticModel(), f) == 0.5)


def test_unit_weight_on_zero_feature():
    w = np.zeros(FEATURE_DIM)
    w[0] = 1.0
    f = np.random.default_rng(5).normal(size=FEATURE_DIM)
    f[0] = 0.0
    assert scores(LogisticModel(weights=w), f[None])[0] == 0.5


def test_forward_is_dot_product():
    rng = np.random.default_rng(6)
    m = LogisticModel(weights=rng.normal(size=FEATURE_DIM), bias=0.3,
                      mean=rng.normal(size=FEATURE_DIM), scale=rng.random(FEATURE_DIM) + 0.5)
    f = rng.normal(size=FEATURE_DIM)
    z = sum(wi * (fi - mi) / si for wi, fi, mi, si in zip(m.weights, f, m.mean, m.scale)) + 0.3
    assert logits(m, f[None])[0] == pytest.approx(z, abs=1e-12)
    assert scores(m, f[None])[0] == pytest.approx(1 / (1 + math.exp(-z)), abs=1e-12)


def test_loss_zero_model_balanced_is_ln2():
    f = np.random.default_rng(7).normal(size=(6, FEATURE_DIM))
    loss, _, _ = bce_loss_and_grad(LogisticModel(), f, [0, 1, 0, 1, 1, 0])
    assert loss == pytest.approx(math.log(2), abs=1e-9)


def test_loss_confident_correct_is_tiny():
    w = np.zeros(FEATURE_DIM)
    w[0] = 100.0
    f = np.zeros((2, FEATURE_DIM))
    f[:, 0] = [-1.0, 1.0]
    loss, gw, gb = bce_loss_and_grad(LogisticModel(weights=w), f, [0, 1])
    assert loss <= 1e-9
    assert np.all(np.isfinite(gw)) and math.isfinite(gb)


def _finite_difference_check(seed):
    rng = np.random.default_rng(seed)
    m = LogisticModel(weights=rng.normal(size=FEATURE_DIM), bias=float(rng.normal()),
                      mean=rng.normal(size=FEATURE_DIM), scale=rng.random(FEATURE_DIM) + 0.5)
    n = int(rng.integers(1, 12))
    f = rng.normal(size=(n, FEATURE_DIM)) * 0.3
    y = rng.integers(0, 2, n)
    _, gw, gb = bce_loss_and_grad(m, f, y)
    h = 1e-6
    params = np.append(m.weights, m.bias)
    analytic = np.append(gw, gb)
    for k in range(FEATURE_DIM + 1):
        hi, lo = params.copy(), params.copy()
        hi[k] += h
        lo[k] -= h
        lp = bce_loss_and_grad(LogisticModel(hi[:-1], hi[-1], m.mean, m.scale), f, y)[0]
        lm = bce_loss_and_grad(LogisticModel(lo[:-1], lo[-1], m.mean, m.scale), f, y)[0]
        numeric = (lp - lm) / (2 * h)
        assert abs(numeric - analytic[k]) <= 1e-4 * max(abs(numeric), abs(analytic[k]), 1e-3), (seed, k)


def test_gradient_matches_finite_differences_100_draws():
    for seed in range(100):
        _finite_difference_check(seed)


def test_clamped_logits_stay_finite():
    w = np.full(FEATURE_DIM, 1e3)
    f = np.ones((3, FEATURE_DIM))
    loss, gw, gb = bce_loss_and_grad(LogisticModel(weights=w), f, [0, 0, 1])
    assert math.isfinite(loss) and np.all(np.isfinite(gw))
    assert loss == pytest.approx(2 * 30 / 3, rel=1e-9)


# -- optimiser and schedule --------------------------------------------------


def test_adamw_zero_gradient_zero_decay_is_noop():
    rng = np.random.default_rng(8)
    m = LogisticModel(weights=rng.normal(size=FEATURE_DIM), bias=0.7)
    new, _ = adamw_step(m, np.zeros(FEATURE_DIM), 0.0, AdamState(), 0.01, TrainConfig(weight_decay=0.0))
    np.testing.assert_array_equal(new.weights, m.weights)
    assert new.bias == m.bias


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3), min_size=FEATURE_DIM + 1,
                max_size=FEATURE_DIM + 1))
def test_adamw_first_step_is_sign(g):
    g = np.array(g)
    lr = 0.01
    new, state = adamw_step(LogisticModel(), g[:-1], g[-1], AdamState(), lr, TrainConfig(weight_decay=0.0))
    step = np.append(new.weights, new.bias)
    # eps perturbs the ratio by at most eps / |g| <= 1e-5
    np.testing.assert_allclose(step, -lr * np.sign(g), rtol=2e-5)
    assert state.t == 1


def test_adamw_decoupled_decay_shrinks():
    rng = np.random.default_rng(9)
    m = LogisticModel(weights=rng.normal(size=FEATURE_DIM), bias=-1.5)
    cfg = TrainConfig(weight_decay=0.01)
    lr = 0.05
    new, _ = adamw_step(m, np.zeros(FEATURE_DIM), 0.0, AdamState(), lr, cfg)
    np.testing.assert_allclose(new.weights, m.weights * (1 - lr * 0.01), rtol=1e-15)
    assert new.bias == pytest.approx(-1.5 * (1 - lr * 0.01), rel=1e-15)


def test_adamw_second_step_closed_form():
    cfg = TrainConfig(weight_decay=0.0)
    g1, g2 = np.full(FEATURE_DIM, 1.0), np.full(FEATURE_DIM, 3.0)
    m1, s1 = adamw_step(LogisticModel(), g1, 0.0, AdamState(), 0.1, cfg)
    m2, _ = adamw_step(m1, g2, 0.0, s1, 0.1, cfg)
    mhat = (0.9 * 0.1 * 1 + 0.1 * 3) / (1 - 0.9 ** 2)
    vhat = (0.999 * 0.001 * 1 + 0.001 * 9) / (1 - 0.999 ** 2)
    expected = -0.1 / (1 + 1e-8) - 0.1 * mhat / (math.sqrt(vhat) + 1e-8)
    np.testing.assert_allclose(m2.weights, expected, rtol=1e-12)


def test_lr_schedule_landmarks():
    assert lr_schedule(0, 100, 10, 5e-3) == 0.0
    assert lr_schedule(5, 100, 10, 5e-3) == pytest.approx(2.5e-3)
    assert lr_schedule(10, 100, 10, 5e-3) == pytest.approx(5e-3, abs=1e-15)
    assert lr_schedule(55, 100, 10, 5e-3) == pytest.approx(2.5e-3, abs=1e-15)
    assert abs(lr_schedule(100, 100, 10, 5e-3)) <= 1e-12


def test_lr_schedule_monotone_after_warmup():
    lrs = [lr_schedule(t, 200, 10, 1.0) for t in range(10, 201)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=0)
    with pytest.raises(ValueError):
        TrainConfig(beta1=1.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=1, warmup_epochs=2)


# -- model file --------------------------------------------------------------


def test_sidm_roundtrip_and_layout():
    rng = np.random.default_rng(10)
    m = LogisticModel(rng.normal(size=FEATURE_DIM), 0.25, rng.normal(size=FEATURE_DIM), rng.random(FEATURE_DIM))
    blob = dumps_model(m)
    assert blob[:4] == b"SIDM"
    assert np.frombuffer(blob[4:12], "<u4").tolist() == [1, FEATURE_DIM]
    assert len(blob) == 12 + 8 * (3 * FEATURE_DIM + 1)
    assert np.frombuffer(blob[12:], "<f8")[FEATURE_DIM] == 0.25
    back = loads_model(blob)
    np.testing.assert_array_equal(back.weights, m.weights)
    np.testing.assert_array_equal(back.scale, m.scale)
    assert back.bias == m.bias
    assert dumps_model(back) == blob


@pytest.mark.parametrize("mutate", [lambda b: b"SIDX" + b[4:], lambda b: b[:-8], lambda b: b[:6]])
def test_sidm_rejects_corrupt(mutate):
    with pytest.raises(ValueError):
        loads_model(mutate(dumps_model(LogisticModel())))


# -- training loop -----------------------------------------------------------


def test_train_zero_epochs(tiny_corpus):
    res = train(load_dataset(tiny_corpus), TrainConfig(epochs=0))
    assert res.history == []
    assert np.all(res.model.weights == 0) and res.model.bias == 0.0


def test_train_rejects_single_class(tiny_corpus):
    ds = load_dataset(tiny_corpus)
    ds.samples = [s for s in ds.samples if s.label == 0]
    with pytest.raises(ValueError, match="both classes"):
        train(ds, TrainConfig(epochs=1))


def test_train_is_deterministic_and_loss_decreases(tiny_corpus):
    ds = load_dataset(tiny_corpus)
    cfg = TrainConfig(epochs=20, batch_size=4)
    aug = AugmentConfig(crop_size=32, patch_size=8)
    a = train(ds, cfg, aug)
    b = train(ds, cfg, aug)
    assert dumps_model(a.model) == dumps_model(b.model)
    assert a.history == b.history
    assert len(a.history) == 20
    assert a.history[-1]["loss"] < a.history[0]["loss"]


def test_train_worker_count_does_not_matter(tiny_corpus):
    ds = load_dataset(tiny_corpus)
    cfg = TrainConfig(epochs=2, batch_size=4)
    aug = AugmentConfig(crop_size=32, patch_size=8)
    assert dumps_model(train(ds, cfg, aug, workers=1).model) == dumps_model(train(ds, cfg, aug, workers=3).model)
