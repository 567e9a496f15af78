"""Objective terms of the IRAD game.

Every function accepts either tape nodes (``Var``) or plain arrays. Given
``Var`` inputs the result is a scalar ``Var`` on the same tape, ready for
:func:`irad.numkit.backward`; given arrays the result is a Python float.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .numkit import (
    ShapeError,
    Tape,
    Var,
    frobenius,
    mul,
    normalize_rows,
    row_norms,
    softplus,
    square,
    sub,
    transpose,
    vmatmul,
    vmean,
)

DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 0.5


@dataclass
class LossBundle:
    v_d: float
    v_g: float
    l1: float
    l2: float
    l_dis: float
    l_sim: float
    total: float
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    TERMS = ("v_d", "v_g", "l1", "l2", "l_dis", "l_sim", "total")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def mean(cls, bundles: list[LossBundle]) -> LossBundle:
        vals = {t: float(np.mean([getattr(b, t) for b in bundles])) for t in cls.TERMS}
        return cls(**vals, alpha=bundles[0].alpha, beta=bundles[0].beta)


def _vars(*xs) -> tuple[list[Var], bool]:
    """Put array inputs on a fresh tape; report whether the caller passed arrays."""
    tape = next((x.tape for x in xs if isinstance(x, Var)), None)
    plain = tape is None
    if plain:
        tape = Tape()
    out = [x if isinstance(x, Var) else tape.const(np.asarray(x, dtype=np.float64)) for x in xs]
    return out, plain


def _result(v: Var, plain: bool):
    return float(v.value) if plain else v


def _rows(v: Var) -> int:
    return v.value.shape[0]


def adv_losses(d_real, d_fake_src, d_fake_tgt, d_fake_rnd=None, mode: str = "vanilla"):
    """Discriminator loss ``v_d`` and generator-side loss ``v_g`` from raw scores.

    The fake streams are averaged with equal weight; pass ``d_fake_rnd=None``
    to drop the noise stream. Vanilla mode fuses the sigmoid into the log
    terms; least-squares mode uses the raw scores directly. The generator side
    uses the non-saturating form.
    """
    args = [d_real, d_fake_src, d_fake_tgt] + ([] if d_fake_rnd is None else [d_fake_rnd])
    vs, plain = _vars(*args)
    real, fakes = vs[0], vs[1:]
    n = _rows(real)
    for f in fakes:
        if f.value.shape != real.value.shape:
            raise ShapeError(f"adv_losses: score shapes differ, {real.value.shape} vs {f.value.shape}")
    if real.value.ndim != 2 or real.value.shape[1] != 1 or n == 0:
        raise ShapeError(f"adv_losses: expected B x 1 scores, got {real.value.shape}")
    k = 1.0 / len(fakes)

    if mode == "vanilla":
        # -log sigmoid(d) = softplus(-d); -log(1 - sigmoid(d)) = softplus(d)
        v_d = vmean(softplus(mul(real, -1.0)))
        v_g = None
        for f in fakes:
            v_d = v_d + mul(vmean(softplus(f)), k)
            term = mul(vmean(softplus(mul(f, -1.0))), k)
            v_g = term if v_g is None else v_g + term
    elif mode == "least_squares":
        v_d = vmean(square(sub(real, 1.0)))
        v_g = None
        for f in fakes:
            v_d = v_d + mul(vmean(square(f)), k)
            term = mul(vmean(square(sub(f, 1.0))), k)
            v_g = term if v_g is None else v_g + term
    else:
        raise ValueError(f"unknown adversarial mode {mode!r}")
    return _result(v_d, plain), _result(v_g, plain)


def cycle_losses(x_src, x_src_hat, x_tgt_hat):
    """Mean per-row Euclidean distance of each reconstruction to ``x_src``."""
    (x, a, b), plain = _vars(x_src, x_src_hat, x_tgt_hat)
    if not (x.value.shape == a.value.shape == b.value.shape):
        raise ShapeError(f"cycle_losses: shapes {x.value.shape}, {a.value.shape}, {b.value.shape} differ")
    l1 = vmean(row_norms(sub(x, a)))
    l2 = vmean(row_norms(sub(x, b)))
    return _result(l1, plain), _result(l2, plain)


def dissimilarity_loss(z_sh, z_pv):
    """Frobenius norm of pairwise cosines between shared and private codes, over B.

    With equal code widths this is ``|Zs Zp^T|_F / B`` over row-normalised
    codes (the B x B cosine matrix). When widths differ the cross-feature form
    ``|Zs^T Zp|_F / B`` is used instead. Both lie in [0, 1].
    """
    (a, b), plain = _vars(z_sh, z_pv)
    if _rows(a) != _rows(b):
        raise ShapeError(f"dissimilarity_loss: batch mismatch, {_rows(a)} vs {_rows(b)}")
    na, nb = normalize_rows(a), normalize_rows(b)
    if a.value.shape[1] == b.value.shape[1]:
        gram = vmatmul(na, transpose(nb))
    else:
        gram = vmatmul(transpose(na), nb)
    return _result(mul(frobenius(gram), 1.0 / _rows(a)), plain)


def similarity_loss(z_sh_src, z_sh_tgt):
    """Negative Frobenius norm of source-target cosines, scaled into [-1, 0]."""
    (a, b), plain = _vars(z_sh_src, z_sh_tgt)
    if a.value.shape[1] != b.value.shape[1]:
        raise ShapeError(f"similarity_loss: code widths differ, {a.value.shape[1]} vs {b.value.shape[1]}")
    gram = vmatmul(normalize_rows(a), transpose(normalize_rows(b)))
    scale = -1.0 / math.sqrt(_rows(a) * _rows(b))
    return _result(mul(frobenius(gram), scale), plain)


def total_objective(v_g, l1, l2, l_dis, l_sim, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA):
    """Weighted sum minimised by the encoders and generator.

    ``alpha`` or ``beta`` of zero drops the corresponding pair from the graph.
    """
    parts = (v_g, l1, l2, l_dis, l_sim)
    if not any(isinstance(p, Var) for p in parts):
        vals = [float(p) for p in parts]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"total_objective: non-finite part in {vals}")
        v_g, l1, l2, l_dis, l_sim = vals
        return v_g + alpha * (l1 + l2) + beta * (l_dis + l_sim)
    tape = next(p.tape for p in parts if isinstance(p, Var))
    v_g, l1, l2, l_dis, l_sim = (p if isinstance(p, Var) else tape.const(np.float64(p)) for p in parts)
    total = v_g
    if alpha != 0:
        total = total + mul(l1 + l2, alpha)
    if beta != 0:
        total = total + mul(l_dis + l_sim, beta)
    return total
