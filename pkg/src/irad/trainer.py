"""Alternating adversarial training of the IRAD networks."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import LabeledSet
from .losses import LossBundle, adv_losses, cycle_losses, dissimilarity_loss, similarity_loss, total_objective
from .model import IradModel, discriminate, encode_private, encode_shared, generate, sample_noise
from .numkit import ContractError, Tape, backward

VARIANTS = ("full", "no_lsim", "no_cycle", "no_xrnd")
EARLY_STOP = ("none", "holdout_proxy")
LOG_COLUMNS = ("epoch", "v_d", "v_g", "l1", "l2", "l_dis", "l_sim", "total", "proxy_val")


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    alpha: float = 1.0
    beta: float = 0.5
    epochs: int = 60
    batch_size: int = 64
    n_t: int = 50
    lr: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    d_steps_per_g_step: int = 1
    seed: int = 0
    adv_mode: str = "vanilla"
    early_stop: str = "holdout_proxy"
    holdout_frac: float = 0.2
    variant: str = "full"

    def validate(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.n_t < 1:
            raise ValueError("n_t must be >= 1")
        if self.d_steps_per_g_step < 1:
            raise ValueError("d_steps_per_g_step must be >= 1")
        if self.early_stop not in EARLY_STOP:
            raise ValueError(f"early_stop must be one of {EARLY_STOP}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    @property
    def use_sim(self) -> bool:
        return self.variant != "no_lsim"

    @property
    def use_cycle(self) -> bool:
        return self.variant != "no_cycle"

    @property
    def use_rnd(self) -> bool:
        return self.variant != "no_xrnd"


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, beta1: float, beta2: float, eps: float):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = grads[p]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainState:
    opt_d: Adam
    opt_g: Adam

    @classmethod
    def fresh(cls, m: IradModel, cfg: TrainConfig) -> TrainState:
        hp = (cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        return cls(Adam(m.discriminator_parameters(), *hp), Adam(m.generator_parameters(), *hp))


def _finite(**terms):
    for name, v in terms.items():
        val = float(v.value) if hasattr(v, "value") else float(v)
        if not math.isfinite(val):
            raise NonFiniteLossError(f"non-finite loss term {name} = {val}")


def _fakes(m: IradModel, x_src, x_tgt, z, tape=None):
    sh_s = encode_shared(m, x_src, tape)
    pv_s = encode_private(m, x_src, tape)
    sh_t = encode_shared(m, x_tgt, tape)
    x_src_hat = generate(m, sh_s, pv_s, tape)
    x_tgt_hat = generate(m, sh_t, pv_s, tape)  # target content, source style from the paired row
    x_rnd = None if z is None else generate(m, sh_s, z, tape)
    return sh_s, pv_s, sh_t, x_src_hat, x_tgt_hat, x_rnd


def _objective(m, cfg, x_src, sh_s, pv_s, sh_t, x_src_hat, x_tgt_hat, d_real, d_fakes):
    v_d, v_g = adv_losses(d_real, *d_fakes, mode=m.adv_mode)
    l1, l2 = cycle_losses(x_src, x_src_hat, x_tgt_hat)
    l_dis = dissimilarity_loss(sh_s, pv_s)
    l_sim = similarity_loss(sh_s, sh_t)
    total = total_objective(
        v_g,
        l1 if cfg.use_cycle else 0.0,
        l2 if cfg.use_cycle else 0.0,
        l_dis,
        l_sim if cfg.use_sim else 0.0,
        cfg.alpha,
        cfg.beta,
    )
    return v_d, v_g, l1, l2, l_dis, l_sim, total


def evaluate_losses(m: IradModel, x_src, x_tgt, z, cfg: TrainConfig) -> LossBundle:
    """All objective terms at the current parameters, without recording gradients.

    ``total`` is the objective the generator side actually minimises, so an
    ablated term is still reported but left out of ``total``.
    """
    sh_s, pv_s, sh_t, xs_hat, xt_hat, x_rnd = _fakes(m, x_src, x_tgt, z if cfg.use_rnd else None)
    d_fakes = [discriminate(m, xs_hat), discriminate(m, xt_hat), None if x_rnd is None else discriminate(m, x_rnd)]
    vals = _objective(m, cfg, x_src, sh_s, pv_s, sh_t, xs_hat, xt_hat, discriminate(m, x_src), d_fakes)
    b = LossBundle(*map(float, vals), alpha=cfg.alpha, beta=cfg.beta)
    _finite(**{t: getattr(b, t) for t in LossBundle.TERMS})
    return b


def discriminator_step(m: IradModel, x_src, fakes, state: TrainState) -> float:
    tape = Tape()
    d_real = discriminate(m, x_src, tape)
    d_fakes = [discriminate(m, f, tape) if f is not None else None for f in fakes]
    v_d, _ = adv_losses(d_real, *d_fakes, mode=m.adv_mode)
    _finite(v_d=v_d)
    state.opt_d.step(backward(tape, v_d))
    return float(v_d.value)


def generator_step(m: IradModel, x_src, x_tgt, z, cfg: TrainConfig, state: TrainState) -> float:
    tape = Tape()
    sh_s, pv_s, sh_t, xs_hat, xt_hat, x_rnd = _fakes(m, x_src, x_tgt, z, tape)
    # discriminator weights enter as constants: gradients reach its input only
    d_real = discriminate(m, x_src, tape, watch=False)
    d_fakes = [discriminate(m, f, tape, watch=False) if f is not None else None for f in (xs_hat, xt_hat, x_rnd)]
    x = tape.const(np.asarray(x_src, dtype=np.float64))
    v_d, v_g, l1, l2, l_dis, l_sim, total = _objective(m, cfg, x, sh_s, pv_s, sh_t, xs_hat, xt_hat, d_real, d_fakes)
    _finite(v_g=v_g, l1=l1, l2=l2, l_dis=l_dis, l_sim=l_sim, total=total)
    state.opt_g.step(backward(tape, total))
    return float(total.value)


def train_step(
    m: IradModel,
    x_src_batch,
    x_tgt_batch,
    cfg: TrainConfig,
    rng: np.random.Generator,
    state: TrainState | None = None,
) -> LossBundle:
    """Discriminator update(s), then one encoder/generator update; returns post-step losses.

    ``x_tgt_batch`` must have as many rows as ``x_src_batch``: target row ``i``
    borrows the private code of source row ``i``. Updates ``m`` in place.
    """
    x_src = np.asarray(x_src_batch, dtype=np.float64)
    x_tgt = np.asarray(x_tgt_batch, dtype=np.float64)
    if len(x_src) == 0 or len(x_tgt) == 0:
        raise ContractError("train_step needs non-empty batches")
    if len(x_src) != len(x_tgt):
        raise ContractError(f"source batch has {len(x_src)} rows, target batch {len(x_tgt)}")
    state = TrainState.fresh(m, cfg) if state is None else state
    z = sample_noise(m, len(x_src), rng) if cfg.use_rnd else None

    _, _, _, xs_hat, xt_hat, x_rnd = _fakes(m, x_src, x_tgt, z)
    for _ in range(cfg.d_steps_per_g_step):
        discriminator_step(m, x_src, (xs_hat, xt_hat, x_rnd), state)
    generator_step(m, x_src, x_tgt, z, cfg, state)
    return evaluate_losses(m, x_src, x_tgt, z, cfg)


# ---------------------------------------------------------------------------
# epochs


@dataclass
class TrainLog:
    records: list[dict] = field(default_factory=list)
    selected_epoch: int | None = None

    def add(self, epoch: int, bundle: LossBundle, proxy_val: float) -> None:
        row = {"epoch": epoch, **{t: getattr(bundle, t) for t in LossBundle.TERMS}, "proxy_val": proxy_val}
        self.records.append(row)

    def column(self, name: str) -> list:
        return [r[name] for r in self.records]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_COLUMNS)
            for r in self.records:
                w.writerow([r["epoch"]] + [repr(float(r[c])) for c in LOG_COLUMNS[1:]])


def select_epoch(proxy_vals: list[float]) -> int:
    """1-based epoch of the smallest proxy value; earliest wins ties."""
    best, best_i = math.inf, len(proxy_vals)
    for i, v in enumerate(proxy_vals, start=1):
        if v < best:
            best, best_i = v, i
    return best_i


def holdout_l2(m: IradModel, x_hold: np.ndarray, x_pair: np.ndarray) -> float:
    """Mean target-cycle error over every (held-out target, fixed source) pair."""
    sh_t = encode_shared(m, x_hold)
    pv_s = encode_private(m, x_pair)
    n_h, n_s = len(x_hold), len(x_pair)
    gen = generate(m, np.repeat(sh_t, n_s, axis=0), np.tile(pv_s, (n_h, 1)))
    diff = np.tile(x_pair, (n_h, 1)) - gen
    return float(np.sqrt((diff * diff).sum(axis=1)).mean())


def fit(
    m: IradModel,
    source: LabeledSet,
    target_train: LabeledSet,
    cfg: TrainConfig,
    on_epoch_end: Callable[[int, IradModel], None] | None = None,
) -> tuple[IradModel, TrainLog]:
    """Train a copy of ``m``; the input model is left untouched.

    With ``early_stop="holdout_proxy"`` a fifth of the target normals (at
    least two) is held out and the returned model is the snapshot from the
    epoch with the lowest held-out target-cycle error.
    """
    cfg.validate()
    for s, name in ((source, "source"), (target_train, "target_train")):
        if not s.normal_only:
            raise ContractError(f"{name} contains anomalous labels; training sees normal data only")
    if len(target_train) >= len(source):
        raise ContractError("target_train must be much smaller than the source set")
    model = m.copy()
    model.adv_mode = cfg.adv_mode
    rng = np.random.default_rng(cfg.seed)
    x_src = source.x
    x_pool = target_train.x

    x_hold = x_pair = None
    if cfg.early_stop == "holdout_proxy":
        n_hold = max(2, int(round(cfg.holdout_frac * len(x_pool))))
        if len(x_pool) - n_hold < 1:
            raise ContractError(f"holdout needs at least {n_hold + 1} target points, got {len(x_pool)}")
        perm = rng.permutation(len(x_pool))
        x_hold, x_pool = x_pool[np.sort(perm[:n_hold])], x_pool[np.sort(perm[n_hold:])]
        x_pair = x_src[rng.choice(len(x_src), size=min(50, len(x_src)), replace=False)]

    state = TrainState.fresh(model, cfg)
    log = TrainLog()
    best_val, best_model = math.inf, model.copy()
    b = cfg.batch_size
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(len(x_src))
        bundles = []
        for start in range(0, len(perm), b):
            idx = perm[start : start + b]
            if len(idx) < 2:
                continue
            tgt = x_pool[rng.integers(len(x_pool), size=len(idx))]
            bundles.append(train_step(model, x_src[idx], tgt, cfg, rng, state))
        proxy = holdout_l2(model, x_hold, x_pair) if x_hold is not None else math.nan
        log.add(epoch, LossBundle.mean(bundles), proxy)
        if x_hold is not None and proxy < best_val:
            best_val, best_model = proxy, model.copy()
        if on_epoch_end is not None:
            on_epoch_end(epoch, model)

    if x_hold is None:
        log.selected_epoch = cfg.epochs
        return model, log
    log.selected_epoch = select_epoch(log.column("proxy_val"))
    return best_model, log
