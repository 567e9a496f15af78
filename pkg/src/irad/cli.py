"""``irad`` command line: gen, train, eval, ablate, sweep, theory.

Configuration file grammar, one setting per line::

    # comment
    key = value

Keys are the field names of :class:`RunConfig` (see ``irad keys``); booleans
accept true/false, lists are comma separated. Command-line flags override the
file. Every output lands under ``--out``.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import BenchSpec, gen_benchmark, load_csv, save_csv
from .evaltheory import auroc, threshold_sweep
from .model import load_checkpoint, save_checkpoint
from .pipeline import (
    ForestParams,
    ModelParams,
    anomaly_score,
    build_irad_detector,
    build_raw_detector,
    nt_sweep,
    run_ablation,
    train_irad,
    write_ablation_reports,
    write_csv,
    write_nt_sweep,
)
from .trainer import VARIANTS, TrainConfig

SPLITS = ("source_train", "target_train", "target_test", "source_test")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    bench: BenchSpec = field(default_factory=BenchSpec)
    forest: ForestParams = field(default_factory=ForestParams)
    model: ModelParams = field(default_factory=ModelParams)
    out: str = "runs/default"
    n_seeds: int = 5
    nt_values: tuple = (10, 20, 50, 100)
    checkpoint_every: int = 25

    @property
    def seed(self) -> int:
        return self.train.seed


def _sections(cfg: RunConfig) -> dict:
    return {"train": cfg.train, "bench": cfg.bench, "forest": cfg.forest, "model": cfg.model}


def config_keys() -> dict[str, tuple[str | None, type]]:
    """Flat key -> (section, default value); ``n_t`` is shared by train and bench."""
    cfg = RunConfig()
    keys = {}
    for section, obj in _sections(cfg).items():
        for f in fields(obj):
            keys.setdefault(f.name, (section, getattr(obj, f.name)))
    for name in ("out", "n_seeds", "nt_values", "checkpoint_every"):
        keys[name] = (None, getattr(cfg, name))
    return keys


def _parse_value(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if default is None:  # optional integer seeds
            return None if raw.lower() in ("", "none") else int(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def apply_settings(cfg: RunConfig, settings: dict[str, str]) -> RunConfig:
    keys = config_keys()
    secs = _sections(cfg)
    for key, raw in settings.items():
        if key not in keys:
            raise ConfigError(f"unknown config key {key!r}")
        section, default = keys[key]
        value = _parse_value(key, raw, default)
        if section is None:
            setattr(cfg, key, value)
            continue
        setattr(secs[section], key, value)
        if key == "n_t":
            cfg.bench.n_t = value
        if key == "seed":
            cfg.train.seed = value
    return cfg


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


FLAG_KEYS = {
    "seed": "seed",
    "out": "out",
    "epochs": "epochs",
    "nt": "n_t",
    "alpha": "alpha",
    "beta": "beta",
    "adv_mode": "adv_mode",
    "variant": "variant",
    "trees": "n_trees",
    "psi": "psi",
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    settings = read_config_file(args.config) if args.config else {}
    for flag, key in FLAG_KEYS.items():
        v = getattr(args, flag, None)
        if v is not None:
            settings[key] = str(v)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        settings[k.strip()] = v
    cfg = apply_settings(cfg, settings)
    cfg.train.validate()
    cfg.bench.validate()
    if cfg.train.adv_mode not in ("vanilla", "least_squares"):
        raise ConfigError(f"adv_mode must be vanilla or least_squares, got {cfg.train.adv_mode!r}")
    return cfg


# ---------------------------------------------------------------------------
# commands


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_split(out: Path, name: str):
    path = out / f"{name}.csv"
    if not path.exists():
        raise FileNotFoundError(f"missing input file {path} (run `irad gen` first)")
    return load_csv(path)


def cmd_gen(cfg: RunConfig) -> list[Path]:
    out = _out(cfg)
    b = gen_benchmark(cfg.bench, cfg.seed)
    written = []
    for name in SPLITS:
        path = out / f"{name}.csv"
        save_csv(path, getattr(b, name))
        written.append(path)
    return written


def cmd_train(cfg: RunConfig) -> Path:
    out = _out(cfg)
    source, target = _load_split(out, "source_train"), _load_split(out, "target_train")
    ckpt_dir = out / "checkpoints"

    def periodic(epoch, model):
        if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            ckpt_dir.mkdir(exist_ok=True)
            save_checkpoint(ckpt_dir / f"epoch_{epoch:04d}.json", model, extra={"epoch": epoch})

    model, log = train_irad(source, target, cfg.train, cfg.model, on_epoch_end=periodic)
    det = build_irad_detector(model, source, target, cfg.forest, cfg.seed)
    log.to_csv(out / "train_log.csv")
    path = out / "checkpoint.json"
    save_checkpoint(path, model, det.forest, extra={"selected_epoch": log.selected_epoch, "seed": cfg.seed})
    return path


def _checkpoint(out: Path):
    path = out / "checkpoint.json"
    if not path.exists():
        raise FileNotFoundError(f"missing checkpoint {path} (run `irad train` first)")
    model, forest, _ = load_checkpoint(path)
    return model, forest


def cmd_eval(cfg: RunConfig) -> Path:
    from .pipeline import Detector

    out = _out(cfg)
    model, forest = _checkpoint(out)
    source, target, test = (_load_split(out, n) for n in ("source_train", "target_train", "target_test"))
    det = Detector("irad", forest, model) if forest is not None else build_irad_detector(model, source, target, cfg.forest, cfg.seed)
    rows = [("irad", auroc(anomaly_score(det, test.x), test.y))]
    for kind in ("if_raw_t", "if_raw_st"):
        d = build_raw_detector(kind, source, target, cfg.forest, cfg.seed)
        rows.append((kind, auroc(anomaly_score(d, test.x), test.y)))
    path = out / "eval_report.csv"
    write_csv(path, ("detector", "auroc"), rows)
    return path


def cmd_ablate(cfg: RunConfig) -> Path:
    out = _out(cfg)
    reports = []
    for variant in VARIANTS:
        for s in range(cfg.seed, cfg.seed + cfg.n_seeds):
            reports.append(run_ablation(variant, cfg.bench, replace(cfg.train, seed=s), cfg.forest, cfg.model))
    write_ablation_reports(out, reports)
    return out / "ablation_report.csv"


def cmd_sweep(cfg: RunConfig) -> Path:
    out = _out(cfg)
    seeds = range(cfg.seed, cfg.seed + cfg.n_seeds)
    rows = nt_sweep(cfg.nt_values, cfg.bench, cfg.train, seeds, cfg.forest, cfg.model)
    path = out / "nt_sweep.csv"
    write_nt_sweep(path, rows)
    return path


def cmd_theory(cfg: RunConfig) -> Path:
    from .pipeline import Detector

    out = _out(cfg)
    model, forest = _checkpoint(out)
    if forest is None:
        raise ValueError("checkpoint holds no forest")
    det = Detector("irad", forest, model)
    src, tgt = _load_split(out, "source_test"), _load_split(out, "target_test")
    rows = threshold_sweep(anomaly_score(det, src.x), src.y, anomaly_score(det, tgt.x), tgt.y)
    path = out / "theory_report.csv"
    write_csv(
        path,
        ("threshold", "eps_s", "eps_t", "lhs", "rhs", "holds"),
        [(thr, r.eps_s, r.eps_t, r.lhs, r.rhs, str(r.holds).lower()) for thr, r in rows],
    )
    return path


COMMANDS = {
    "gen": (cmd_gen, "generate the synthetic benchmark CSVs"),
    "train": (cmd_train, "train IRAD on the benchmark CSVs; writes checkpoint.json and train_log.csv"),
    "eval": (cmd_eval, "AUROC of IRAD, IF(T) and IF(S+T) on target_test.csv; writes eval_report.csv"),
    "ablate": (cmd_ablate, "train every ablation variant over n_seeds seeds; writes ablation_report.csv"),
    "sweep": (cmd_sweep, "AUROC against the number of target training points; writes nt_sweep.csv"),
    "theory": (cmd_theory, "joint-error bound at every score threshold; writes theory_report.csv"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message.replace("\n", " "))


def build_parser() -> argparse.ArgumentParser:
    t, fp = TrainConfig(), ForestParams()
    common = argparse.ArgumentParser(add_help=False, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common.add_argument("--config", default=None, help="key = value configuration file")
    common.add_argument("--seed", type=int, default=None, help=f"run seed (default {t.seed})")
    common.add_argument("--out", default=None, help=f"output directory (default {RunConfig.out})")
    common.add_argument("--epochs", type=int, default=None, help=f"training epochs (default {t.epochs})")
    common.add_argument("--nt", type=int, default=None, help=f"target training points (default {t.n_t})")
    common.add_argument("--alpha", type=float, default=None, help=f"cycle-loss weight (default {t.alpha})")
    common.add_argument("--beta", type=float, default=None, help=f"similarity/dissimilarity weight (default {t.beta})")
    common.add_argument(
        "--adv-mode", dest="adv_mode", choices=("vanilla", "least_squares"), default=None,
        help=f"adversarial objective (default {t.adv_mode})",
    )
    common.add_argument("--variant", choices=VARIANTS, default=None, help=f"objective variant (default {t.variant})")
    common.add_argument("--trees", type=int, default=None, help=f"isolation trees (default {fp.n_trees})")
    common.add_argument("--psi", type=int, default=None, help=f"forest subsample size (default {fp.psi})")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key (repeatable)")

    parser = _Parser(prog="irad", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"irad {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, (_, text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    sub.add_parser("keys", help="list every config key with its default")
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 2
        if args.command == "keys":
            for key, (section, default) in config_keys().items():
                if isinstance(default, tuple):
                    default = ",".join(map(str, default))
                print(f"{key} = {default}    # {section or 'run'}")
            return 0
        cfg = resolve_config(args)
        result = COMMANDS[args.command][0](cfg)
        for p in result if isinstance(result, list) else [result]:
            print(p)
        return 0
    except Exception as exc:  # one machine-parseable line per failure
        msg = str(exc).replace("\n", " ")
        print(f"irad: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
