"""Dense float64 matrices, small MLPs and a matrix-level reverse-mode tape.

Matrices are plain 2-D ``numpy.ndarray`` objects with dtype float64. The tape
records one node per primitive; :func:`backward` walks it in reverse and
accumulates gradients into every watched parameter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")


class ShapeError(ValueError):
    pass


class ContractError(ValueError):
    pass


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2:
        raise ShapeError(f"{name}: expected a 2-D matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ContractError(f"{name}: non-finite entries")
    return x


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


# ---------------------------------------------------------------------------
# networks


@dataclass
class Layer:
    weight: np.ndarray  # in x out
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(f"layer weight {self.weight.shape} and bias {self.bias.shape} do not agree")


@dataclass
class Mlp:
    layers: list[Layer] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("an Mlp needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ShapeError(
                    f"layer {i} outputs {a.weight.shape[1]} but layer {i + 1} expects {b.weight.shape[0]}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out


def init_mlp(sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights and zero biases; ``sizes`` includes input and output widths."""
    if len(activations) != len(sizes) - 1:
        raise ShapeError(f"{len(sizes) - 1} layers need as many activations, got {len(activations)}")
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return Mlp(layers)


def _activate(z: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    if act == "sigmoid":
        return _sigmoid(z)
    return z


def mlp_forward(net: Mlp, x, tape: Tape | None = None, watch: bool = True):
    """Batch forward pass.

    Without a tape, ``x`` is a matrix and a matrix is returned. With a tape,
    ``x`` may be a matrix or a :class:`Var` and the result is a :class:`Var`;
    weights are watched (gradients collected) only if ``watch`` is true, so a
    frozen network still passes gradients through to its input.
    """
    if tape is None:
        h = as_matrix(x, "x")
        if h.shape[1] != net.in_dim:
            raise ShapeError(f"mlp_forward: input is {h.shape[0]}x{h.shape[1]}, network expects width {net.in_dim}")
        for layer in net.layers:
            h = _activate(h @ layer.weight + layer.bias, layer.activation)
        return h

    h = x if isinstance(x, Var) else tape.const(as_matrix(x, "x"))
    if h.value.shape[1] != net.in_dim:
        raise ShapeError(
            f"mlp_forward: input is {h.value.shape[0]}x{h.value.shape[1]}, network expects width {net.in_dim}"
        )
    for layer in net.layers:
        w = tape.watch(layer.weight) if watch else tape.const(layer.weight)
        b = tape.watch(layer.bias) if watch else tape.const(layer.bias)
        h = activate(add_bias(vmatmul(h, w), b), layer.activation)
    return h


# ---------------------------------------------------------------------------
# tape


class Var:
    __slots__ = ("value", "parents", "grad_fn", "tape", "index")

    def __init__(self, value: np.ndarray, tape: Tape, parents=(), grad_fn=None):
        self.value = value
        self.tape = tape
        self.parents = parents
        self.grad_fn = grad_fn
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_lift(self.tape, other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


class Tape:
    """Records primitives in creation order; confined to a single step."""

    def __init__(self):
        self.nodes: list[Var] = []
        self.watched: dict[int, Var] = {}

    def const(self, value) -> Var:
        return Var(np.asarray(value, dtype=np.float64), self)

    def watch(self, param: np.ndarray) -> Var:
        """Leaf node whose gradient is reported by :func:`backward`; one node per array."""
        key = id(param)
        if key not in self.watched:
            self.watched[key] = Var(param, self)
        return self.watched[key]


class Gradients:
    """Gradient lookup keyed by the parameter array itself."""

    def __init__(self, by_id: dict[int, np.ndarray]):
        self._by_id = by_id

    def __getitem__(self, param: np.ndarray) -> np.ndarray:
        return self._by_id[id(param)]

    def __contains__(self, param) -> bool:
        return id(param) in self._by_id

    def __len__(self):
        return len(self._by_id)


def backward(tape: Tape, loss: Var) -> Gradients:
    if loss.tape is not tape:
        raise ContractError("loss node was recorded on a different tape")
    if loss.value.size != 1:
        raise ContractError(f"backward needs a scalar terminal node, got shape {loss.value.shape}")
    grads: dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
    for node in reversed(tape.nodes[: loss.index + 1]):
        g = grads.pop(node.index, None) if node.grad_fn is not None else grads.get(node.index)
        if g is None or node.grad_fn is None:
            continue
        for parent, pg in zip(node.parents, node.grad_fn(g)):
            if pg is None:
                continue
            prev = grads.get(parent.index)
            grads[parent.index] = pg if prev is None else prev + pg
    out = {}
    for key, var in tape.watched.items():
        g = grads.get(var.index)
        out[key] = np.zeros_like(var.value) if g is None else g.reshape(var.value.shape)
    return Gradients(out)


def grad_check(f: Callable[[Tape], Var], params: Iterable[np.ndarray], eps: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` builds the scalar on the tape it is given and must watch every array
    in ``params``. Parameters are perturbed in place and restored.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    params = list(params)
    tape = Tape()
    grads = backward(tape, f(tape))
    worst = 0.0
    for p in params:
        analytic = grads[p] if p in grads else np.zeros_like(p)
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = float(f(Tape()).value.reshape(()))
            flat[i] = orig - eps
            down = float(f(Tape()).value.reshape(()))
            flat[i] = orig
            numeric = (up - down) / (2 * eps)
            err = abs(analytic.reshape(-1)[i] - numeric) / (abs(numeric) + 1e-8)
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# primitives


def _lift(tape: Tape, v) -> Var:
    return v if isinstance(v, Var) else tape.const(v)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a: Var, b) -> Var:
    b = _lift(a.tape, b)
    sa, sb = a.value.shape, b.value.shape
    return Var(a.value + b.value, a.tape, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Var, b) -> Var:
    b = _lift(a.tape, b)
    sa, sb = a.value.shape, b.value.shape
    return Var(a.value - b.value, a.tape, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a: Var, b) -> Var:
    if not isinstance(b, Var):
        c = float(b)
        return Var(a.value * c, a.tape, (a,), lambda g: (g * c,))
    sa, sb = a.value.shape, b.value.shape
    av, bv = a.value, b.value
    return Var(av * bv, a.tape, (a, b), lambda g: (_unbroadcast(g * bv, sa), _unbroadcast(g * av, sb)))


def vmatmul(a: Var, b: Var) -> Var:
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.value.shape} by {b.value.shape}")
    av, bv = a.value, b.value
    return Var(av @ bv, a.tape, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a: Var) -> Var:
    return Var(a.value.T, a.tape, (a,), lambda g: (g.T,))


def add_bias(h: Var, b: Var) -> Var:
    return Var(h.value + b.value, h.tape, (h, b), lambda g: (g, g.sum(axis=0)))


def concat_cols(a: Var, b: Var) -> Var:
    if a.value.shape[0] != b.value.shape[0]:
        raise ShapeError(f"concat: row counts differ, {a.value.shape} vs {b.value.shape}")
    k = a.value.shape[1]
    return Var(np.hstack([a.value, b.value]), a.tape, (a, b), lambda g: (g[:, :k], g[:, k:]))


def relu(a: Var) -> Var:
    mask = a.value > 0
    return Var(a.value * mask, a.tape, (a,), lambda g: (g * mask,))


def tanh(a: Var) -> Var:
    y = np.tanh(a.value)
    return Var(y, a.tape, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a: Var) -> Var:
    y = _sigmoid(a.value)
    return Var(y, a.tape, (a,), lambda g: (g * y * (1.0 - y),))


def activate(a: Var, act: str) -> Var:
    if act == "relu":
        return relu(a)
    if act == "tanh":
        return tanh(a)
    if act == "sigmoid":
        return sigmoid(a)
    return a


def softplus(a: Var) -> Var:
    """log(1 + e^a), overflow-safe; note -softplus(-a) == log sigmoid(a)."""
    s = _sigmoid(a.value)
    return Var(np.logaddexp(0.0, a.value), a.tape, (a,), lambda g: (g * s,))


def square(a: Var) -> Var:
    av = a.value
    return Var(av * av, a.tape, (a,), lambda g: (2.0 * av * g,))


def vsum(a: Var) -> Var:
    shape = a.value.shape
    return Var(np.array(a.value.sum()), a.tape, (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def vmean(a: Var) -> Var:
    n = a.value.size
    shape = a.value.shape
    return Var(np.array(a.value.mean()), a.tape, (a,), lambda g: (np.full(shape, float(g) / n),))


def row_norms(a: Var) -> Var:
    """Euclidean norm of each row as a B x 1 column; zero rows get a zero subgradient."""
    n = np.sqrt((a.value * a.value).sum(axis=1, keepdims=True))
    safe = np.where(n > 0, n, 1.0)
    av = a.value
    return Var(n, a.tape, (a,), lambda g: (g * av / safe * (n > 0),))


def normalize_rows(a: Var) -> Var:
    """Scale each row to unit L2 norm; all-zero rows stay zero and pass no gradient."""
    n = np.sqrt((a.value * a.value).sum(axis=1, keepdims=True))
    nz = n > 0
    safe = np.where(nz, n, 1.0)
    y = np.where(nz, a.value / safe, 0.0)

    def grad(g):
        # d(x/|x|) = (g - y <y, g>) / |x|
        proj = (g * y).sum(axis=1, keepdims=True)
        return (np.where(nz, (g - y * proj) / safe, 0.0),)

    return Var(y, a.tape, (a,), grad)


def frobenius(a: Var) -> Var:
    n = float(np.sqrt((a.value * a.value).sum()))
    av = a.value
    return Var(np.array(n), a.tape, (a,), lambda g: (av * (float(g) / n) if n > 0 else np.zeros_like(av),))
