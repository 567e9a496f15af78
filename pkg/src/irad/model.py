"""The four IRAD networks and the latent plumbing between them."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numkit import Layer, Mlp, ShapeError, Tape, Var, as_matrix, concat_cols, init_mlp, mlp_forward

ADV_MODES = ("vanilla", "least_squares")
COMBINE_MODES = ("concat", "sum")
CHECKPOINT_FORMAT = "irad-checkpoint/1"


@dataclass
class IradModel:
    e_sh: Mlp
    e_pv: Mlp
    g_src: Mlp
    d_src: Mlp
    adv_mode: str = "vanilla"
    combine: str = "sum"
    seed: int = 0

    def __post_init__(self):
        if self.adv_mode not in ADV_MODES:
            raise ValueError(f"adv_mode must be one of {ADV_MODES}, got {self.adv_mode!r}")
        if self.combine not in COMBINE_MODES:
            raise ValueError(f"combine must be one of {COMBINE_MODES}, got {self.combine!r}")
        d_x = self.e_sh.in_dim
        if self.e_pv.in_dim != d_x or self.d_src.in_dim != d_x or self.g_src.out_dim != d_x:
            raise ShapeError("encoders, generator output and discriminator must share the data width")
        if self.d_src.out_dim != 1:
            raise ShapeError(f"discriminator must output one score, got {self.d_src.out_dim}")
        code_in = self.d_z + self.d_p if self.combine == "concat" else self.d_z
        if self.combine == "sum" and self.d_z != self.d_p:
            raise ShapeError(f"sum combination needs d_z == d_p, got {self.d_z} and {self.d_p}")
        if self.g_src.in_dim != code_in:
            raise ShapeError(f"generator expects {self.g_src.in_dim} inputs, codes provide {code_in}")

    @property
    def d_x(self) -> int:
        return self.e_sh.in_dim

    @property
    def d_z(self) -> int:
        return self.e_sh.out_dim

    @property
    def d_p(self) -> int:
        return self.e_pv.out_dim

    def networks(self) -> dict[str, Mlp]:
        return {"e_sh": self.e_sh, "e_pv": self.e_pv, "g_src": self.g_src, "d_src": self.d_src}

    def generator_parameters(self) -> list[np.ndarray]:
        return self.e_sh.parameters() + self.e_pv.parameters() + self.g_src.parameters()

    def discriminator_parameters(self) -> list[np.ndarray]:
        return self.d_src.parameters()

    def copy(self) -> IradModel:
        return copy.deepcopy(self)


def build_model(
    d_x: int = 20,
    d_z: int = 8,
    d_p: int = 8,
    hidden: int = 32,
    depth: int = 2,
    rng: np.random.Generator | None = None,
    seed: int = 0,
    adv_mode: str = "vanilla",
    combine: str = "sum",
    activation: str = "tanh",
) -> IradModel:
    """Randomly initialised model; each net has ``depth`` hidden layers of width ``hidden``."""
    rng = np.random.default_rng(seed) if rng is None else rng
    acts = [activation] * depth + ["identity"]

    def net(n_in, n_out):
        return init_mlp([n_in] + [hidden] * depth + [n_out], acts, rng)

    code_in = d_z + d_p if combine == "concat" else d_z
    return IradModel(
        e_sh=net(d_x, d_z),
        e_pv=net(d_x, d_p),
        g_src=net(code_in, d_x),
        d_src=net(d_x, 1),
        adv_mode=adv_mode,
        combine=combine,
        seed=seed,
    )


def _check_width(x, width: int, what: str):
    shape = x.value.shape if isinstance(x, Var) else np.shape(x)
    if len(shape) != 2 or shape[1] != width:
        raise ShapeError(f"{what}: expected B x {width}, got {shape}")


def encode_shared(m: IradModel, x, tape: Tape | None = None, watch: bool = True):
    _check_width(x, m.d_x, "encode_shared")
    return mlp_forward(m.e_sh, x, tape, watch)


def encode_private(m: IradModel, x, tape: Tape | None = None, watch: bool = True):
    _check_width(x, m.d_x, "encode_private")
    return mlp_forward(m.e_pv, x, tape, watch)


def discriminate(m: IradModel, x, tape: Tape | None = None, watch: bool = True):
    """Raw (pre-sigmoid) discriminator scores, B x 1."""
    _check_width(x, m.d_x, "discriminate")
    return mlp_forward(m.d_src, x, tape, watch)


def generate(m: IradModel, z_sh, z_pv, tape: Tape | None = None, watch: bool = True):
    _check_width(z_sh, m.d_z, "generate (shared code)")
    _check_width(z_pv, m.d_p, "generate (private code)")
    rows = lambda v: (v.value if isinstance(v, Var) else np.asarray(v)).shape[0]  # noqa: E731
    if rows(z_sh) != rows(z_pv):
        raise ShapeError(f"generate: batch mismatch, {rows(z_sh)} shared vs {rows(z_pv)} private rows")
    if tape is None:
        a, b = as_matrix(z_sh, "z_sh"), as_matrix(z_pv, "z_pv")
        codes = np.hstack([a, b]) if m.combine == "concat" else a + b
        return mlp_forward(m.g_src, codes)
    a = z_sh if isinstance(z_sh, Var) else tape.const(as_matrix(z_sh))
    b = z_pv if isinstance(z_pv, Var) else tape.const(as_matrix(z_pv))
    codes = concat_cols(a, b) if m.combine == "concat" else a + b
    return mlp_forward(m.g_src, codes, tape, watch)


def sample_noise(m: IradModel, batch: int, rng: np.random.Generator) -> np.ndarray:
    """Stand-in private codes, N(0, 1) per entry."""
    return rng.standard_normal((batch, m.d_p))


def make_x_rnd(m: IradModel, x_src, rng: np.random.Generator) -> np.ndarray:
    x_src = as_matrix(x_src, "x_src")
    _check_width(x_src, m.d_x, "make_x_rnd")
    z = sample_noise(m, x_src.shape[0], rng)
    return generate(m, encode_shared(m, x_src), z)


# ---------------------------------------------------------------------------
# checkpoint container


def _net_to_dict(net: Mlp) -> dict:
    return {
        "layers": [
            {
                "in": int(layer.weight.shape[0]),
                "out": int(layer.weight.shape[1]),
                "activation": layer.activation,
                "weight": layer.weight.reshape(-1).tolist(),
                "bias": layer.bias.tolist(),
            }
            for layer in net.layers
        ]
    }


def _net_from_dict(d: dict) -> Mlp:
    layers = []
    for spec in d["layers"]:
        w = np.array(spec["weight"], dtype=np.float64).reshape(spec["in"], spec["out"])
        layers.append(Layer(w, np.array(spec["bias"], dtype=np.float64), spec["activation"]))
    return Mlp(layers)


def model_to_dict(m: IradModel) -> dict:
    return {
        "d_x": m.d_x,
        "d_z": m.d_z,
        "d_p": m.d_p,
        "adv_mode": m.adv_mode,
        "combine": m.combine,
        "seed": m.seed,
        "networks": {name: _net_to_dict(net) for name, net in m.networks().items()},
    }


def model_from_dict(d: dict) -> IradModel:
    nets = {name: _net_from_dict(v) for name, v in d["networks"].items()}
    m = IradModel(**nets, adv_mode=d["adv_mode"], combine=d["combine"], seed=int(d["seed"]))
    if (m.d_x, m.d_z, m.d_p) != (d["d_x"], d["d_z"], d["d_p"]):
        raise ShapeError("checkpoint dimensions disagree with stored networks")
    return m


def save_checkpoint(path, model: IradModel, forest=None, extra: dict | None = None) -> None:
    """Write one JSON file; float payloads use shortest round-trip repr, so loads are bit-exact."""
    from .iforest import forest_to_dict

    doc = {"format": CHECKPOINT_FORMAT, "model": model_to_dict(model)}
    if forest is not None:
        doc["forest"] = forest_to_dict(forest)
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc, sort_keys=True, allow_nan=False) + "\n")


def load_checkpoint(path):
    """Returns ``(model, forest_or_None, extra_dict)``."""
    from .iforest import forest_from_dict

    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not an IRAD checkpoint (format={doc.get('format')!r})")
    forest = forest_from_dict(doc["forest"]) if "forest" in doc else None
    return model_from_dict(doc["model"]), forest, doc.get("extra", {})
