from dataclasses import replace

import numpy as np
import pytest

from irad.data import BenchSpec, LabeledSet, gen_benchmark
from irad.losses import adv_losses
from irad.model import build_model, discriminate, sample_noise
from irad.numkit import ContractError
from irad.trainer import (
    Adam,
    NonFiniteLossError,
    TrainConfig,
    TrainState,
    _fakes,
    discriminator_step,
    evaluate_losses,
    fit,
    generator_step,
    select_epoch,
    train_step,
)

TOY = dict(d_x=4, d_z=2, d_p=2, hidden=4, depth=1)


def toy_batches(seed=0, b=6):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(b, 4)), rng.normal(size=(b, 4)) + 1.0


def params(m):
    return [p.copy() for p in m.generator_parameters() + m.discriminator_parameters()]


def fd_grad(m, p, f, eps=1e-6):
    g = np.zeros_like(p)
    flat, gflat = p.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f(m)
        flat[i] = orig - eps
        down = f(m)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return g


def test_config_validation():
    for bad in (dict(batch_size=1), dict(epochs=0), dict(n_t=0), dict(variant="x"), dict(early_stop="x")):
        with pytest.raises(ValueError):
            replace(TrainConfig(), **bad).validate()
    c = TrainConfig()
    assert (c.alpha, c.beta, c.lr, c.adam_beta1, c.adam_beta2, c.d_steps_per_g_step) == (1.0, 0.5, 2e-4, 0.5, 0.999, 1)


def test_zero_learning_rate_step():
    m = build_model(**TOY, seed=1)
    xs, xt = toy_batches()
    cfg = TrainConfig(lr=0.0)
    before = params(m)
    z = sample_noise(m, len(xs), np.random.default_rng(5))
    pre = evaluate_losses(m, xs, xt, z, cfg)
    post = train_step(m, xs, xt, cfg, np.random.default_rng(5))
    assert all(np.array_equal(a, b) for a, b in zip(before, params(m)))
    assert post == pre


def test_step_matches_finite_difference_adam_oracle():
    cfg = TrainConfig(lr=1e-3)
    m = build_model(**TOY, seed=2)
    xs, xt = toy_batches(1)
    z = sample_noise(m, len(xs), np.random.default_rng(9))

    oracle = m.copy()
    d_params, g_params = oracle.discriminator_parameters(), oracle.generator_parameters()

    def adam1(g):
        return -cfg.lr * g / (np.abs(g) + cfg.adam_eps)  # first step: bias-corrected moments are g and g^2

    def v_d(mm):
        return evaluate_losses(mm, xs, xt, z, cfg).v_d

    def total(mm):
        return evaluate_losses(mm, xs, xt, z, cfg).total

    d_delta = [adam1(fd_grad(oracle, p, v_d)) for p in d_params]
    for p, d in zip(d_params, d_delta):
        p += d
    g_delta = [adam1(fd_grad(oracle, p, total)) for p in g_params]

    before = m.copy()
    train_step(m, xs, xt, cfg, np.random.default_rng(9))
    got_d = [a - b for a, b in zip(m.discriminator_parameters(), before.discriminator_parameters())]
    got_g = [a - b for a, b in zip(m.generator_parameters(), before.generator_parameters())]
    for got, want in zip(got_d + got_g, d_delta + g_delta):
        assert np.allclose(got, want, rtol=1e-4, atol=1e-4 * cfg.lr)


def test_freezing():
    m = build_model(**TOY, seed=3)
    xs, xt = toy_batches(2)
    cfg = TrainConfig(lr=1e-2)
    state = TrainState.fresh(m, cfg)
    g_before = [p.copy() for p in m.generator_parameters()]
    d_before = [p.copy() for p in m.discriminator_parameters()]
    fakes = (xs + 0.1, xt, None)
    discriminator_step(m, xs, fakes, state)
    assert all(np.array_equal(a, b) for a, b in zip(g_before, m.generator_parameters()))
    assert not all(np.array_equal(a, b) for a, b in zip(d_before, m.discriminator_parameters()))

    d_mid = [p.copy() for p in m.discriminator_parameters()]
    generator_step(m, xs, xt, sample_noise(m, 6, np.random.default_rng(0)), cfg, state)
    assert all(np.array_equal(a, b) for a, b in zip(d_mid, m.discriminator_parameters()))
    assert not all(np.array_equal(a, b) for a, b in zip(g_before, m.generator_parameters()))


def test_adam_single_parameter():
    p = np.array([1.0, -1.0])
    opt = Adam([p], lr=0.1, beta1=0.5, beta2=0.999, eps=0.0)
    opt.step(_Grads(p, np.array([2.0, -0.5])))
    assert np.allclose(p, [0.9, -0.9])  # first step moves each entry by lr * sign(g)


class _Grads:
    def __init__(self, p, g):
        self.p, self.g = p, g

    def __getitem__(self, key):
        assert key is self.p
        return self.g


def test_batch_contract():
    m = build_model(**TOY)
    cfg = TrainConfig()
    with pytest.raises(ContractError):
        train_step(m, np.zeros((0, 4)), np.zeros((0, 4)), cfg, np.random.default_rng(0))
    with pytest.raises(ContractError):
        train_step(m, np.zeros((3, 4)), np.zeros((2, 4)), cfg, np.random.default_rng(0))


@pytest.mark.filterwarnings("ignore:overflow")
def test_non_finite_loss_names_term():
    m = build_model(**TOY, adv_mode="least_squares")
    m.d_src.layers[-1].bias[:] = 1e200
    xs, xt = toy_batches()
    with pytest.raises(NonFiniteLossError, match="v_d"):
        train_step(m, xs, xt, TrainConfig(adv_mode="least_squares"), np.random.default_rng(0))


def test_variant_bookkeeping():
    m = build_model(**TOY, seed=4)
    xs, xt = toy_batches(3)
    z = sample_noise(m, 6, np.random.default_rng(1))
    full = evaluate_losses(m, xs, xt, z, TrainConfig())
    no_cycle = evaluate_losses(m, xs, xt, z, TrainConfig(variant="no_cycle"))
    assert no_cycle.l1 == full.l1 > 0 and no_cycle.l2 == full.l2 > 0
    assert no_cycle.total == pytest.approx(full.v_g + 0.5 * (full.l_dis + full.l_sim))
    no_sim = evaluate_losses(m, xs, xt, z, TrainConfig(variant="no_lsim"))
    assert no_sim.l_sim == full.l_sim and no_sim.total == pytest.approx(full.v_g + full.l1 + full.l2 + 0.5 * full.l_dis)
    no_rnd = evaluate_losses(m, xs, xt, z, TrainConfig(variant="no_xrnd"))
    _, _, _, a, b, _ = _fakes(m, xs, xt, None)
    v_d, v_g = adv_losses(discriminate(m, xs), discriminate(m, a), discriminate(m, b))
    assert (no_rnd.v_d, no_rnd.v_g) == (v_d, v_g)


def test_select_epoch():
    assert select_epoch([5.0, 4.0, 3.0, 2.0]) == 4
    assert select_epoch([3.0, 1.0, 2.0, 1.0]) == 2


SMALL = BenchSpec(n_source=128, n_t=10, n_test=40, n_source_test=40)


def small_run(epochs=3, **kw):
    b = gen_benchmark(SMALL, 0)
    cfg = TrainConfig(epochs=epochs, batch_size=32, **kw)
    return b, cfg


def test_fit_lr_zero_returns_initial_model():
    b, cfg = small_run(1, lr=0.0)
    m0 = build_model(seed=0)
    m, log = fit(m0, b.source_train, b.target_train, cfg)
    assert m is not m0
    assert all(np.array_equal(a, c) for a, c in zip(params(m0), params(m)))
    assert len(log.records) == 1 and log.selected_epoch == 1


def test_fit_is_deterministic_and_leaves_input_untouched(tmp_path):
    b, cfg = small_run(3)
    m0 = build_model(seed=0)
    snap = params(m0)
    seen = []
    m1, log1 = fit(m0, b.source_train, b.target_train, cfg, lambda e, mm: seen.append(e))
    m2, log2 = fit(m0, b.source_train, b.target_train, cfg)
    assert seen == [1, 2, 3]
    assert all(np.array_equal(a, c) for a, c in zip(snap, params(m0)))
    log1.to_csv(tmp_path / "a.csv")
    log2.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "epoch,v_d,v_g,l1,l2,l_dis,l_sim,total,proxy_val"
    assert all(np.array_equal(a, c) for a, c in zip(params(m1), params(m2)))


def test_fit_returns_snapshot_of_selected_epoch():
    b, cfg = small_run(4)
    snaps = {}
    m, log = fit(build_model(seed=0), b.source_train, b.target_train, cfg, lambda e, mm: snaps.setdefault(e, mm.copy()))
    assert log.selected_epoch == select_epoch(log.column("proxy_val"))
    assert all(np.array_equal(a, c) for a, c in zip(params(m), params(snaps[log.selected_epoch])))


def test_fit_without_early_stop_returns_last():
    b, cfg = small_run(2, early_stop="none")
    m, log = fit(build_model(seed=0), b.source_train, b.target_train, cfg)
    assert log.selected_epoch == 2 and np.isnan(log.records[0]["proxy_val"])


def test_fit_rejects_anomalous_training_labels():
    b, cfg = small_run(1)
    bad = LabeledSet(b.target_train.x, np.r_[1, np.zeros(len(b.target_train) - 1, int)], "target")
    with pytest.raises(ContractError, match="anomalous"):
        fit(build_model(seed=0), b.source_train, bad, cfg)


def test_fit_needs_enough_target_points_for_holdout():
    b, cfg = small_run(1)
    with pytest.raises(ContractError):
        fit(build_model(seed=0), b.source_train, b.target_train.subset([0, 1]), cfg)
