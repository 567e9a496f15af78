"""End-to-end detector: trained shared encoder followed by an isolation forest."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import BenchSpec, LabeledSet, gen_benchmark
from .evaltheory import auroc, pca_2d
from .iforest import IsolationForest, fit_forest
from .model import IradModel, build_model, encode_shared
from .numkit import ShapeError
from .trainer import VARIANTS, TrainConfig, TrainLog, fit

KINDS = ("irad", "if_raw_t", "if_raw_st")


@dataclass
class ForestParams:
    n_trees: int = 100
    psi: int = 256


@dataclass
class ModelParams:
    d_z: int = 8
    d_p: int = 8
    hidden: int = 32
    depth: int = 2
    combine: str = "sum"


@dataclass
class Detector:
    kind: str
    forest: IsolationForest
    model: IradModel | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.kind == "irad" and self.model is None:
            raise ValueError("an irad detector needs a model")


def _forest(x: np.ndarray, fp: ForestParams, seed) -> IsolationForest:
    return fit_forest(x, fp.n_trees, min(fp.psi, len(x)), seed)


def build_irad_detector(
    m: IradModel, source_train: LabeledSet, target_train: LabeledSet, fp: ForestParams | None = None, seed=0
) -> Detector:
    fp = fp or ForestParams()
    for s in (source_train, target_train):
        if s.x.shape[1] != m.d_x:
            raise ShapeError(f"model expects {m.d_x} features, {s.domain} data has {s.x.shape[1]}")
    codes = np.vstack([encode_shared(m, source_train.x), encode_shared(m, target_train.x)])
    return Detector("irad", _forest(codes, fp, seed), m)


def build_raw_detector(kind: str, source_train: LabeledSet, target_train: LabeledSet, fp=None, seed=0) -> Detector:
    fp = fp or ForestParams()
    if kind == "if_raw_t":
        x = target_train.x
    elif kind == "if_raw_st":
        x = np.vstack([source_train.x, target_train.x])
    else:
        raise ValueError(f"not a raw detector kind: {kind!r}")
    return Detector(kind, _forest(x, fp, seed))


def anomaly_score(d: Detector, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if d.kind == "irad":
        if x.shape[1] != d.model.d_x:
            raise ShapeError(f"detector expects {d.model.d_x} features, got {x.shape[1]}")
        return d.forest.score_samples(encode_shared(d.model, x))
    return d.forest.score_samples(x)


# ---------------------------------------------------------------------------
# experiments


@dataclass
class RunResult:
    seed: int
    model: IradModel
    log: TrainLog
    detector: Detector
    auroc: float
    baselines: dict = field(default_factory=dict)


def train_irad(
    source: LabeledSet,
    target_train: LabeledSet,
    cfg: TrainConfig,
    mp: ModelParams | None = None,
    on_epoch_end=None,
) -> tuple[IradModel, TrainLog]:
    mp = mp or ModelParams()
    init = build_model(
        source.x.shape[1], mp.d_z, mp.d_p, mp.hidden, mp.depth, seed=cfg.seed, adv_mode=cfg.adv_mode, combine=mp.combine
    )
    return fit(init, source, target_train, cfg, on_epoch_end)


def run_once(
    bench: BenchSpec,
    cfg: TrainConfig,
    fp: ForestParams | None = None,
    mp: ModelParams | None = None,
    baselines: bool = False,
) -> RunResult:
    """Generate the benchmark for ``cfg.seed``, train, fit the forest and score the target test set."""
    fp = fp or ForestParams()
    b = gen_benchmark(replace(bench, n_t=cfg.n_t), cfg.seed)
    model, log = train_irad(b.source_train, b.target_train, cfg, mp)
    det = build_irad_detector(model, b.source_train, b.target_train, fp, cfg.seed)
    res = RunResult(cfg.seed, model, log, det, auroc(anomaly_score(det, b.target_test.x), b.target_test.y))
    if baselines:
        for kind in ("if_raw_t", "if_raw_st"):
            d = build_raw_detector(kind, b.source_train, b.target_train, fp, cfg.seed)
            res.baselines[kind] = auroc(anomaly_score(d, b.target_test.x), b.target_test.y)
    return res


def mean_cross_cosine(z_src: np.ndarray, z_tgt: np.ndarray) -> float:
    """Mean cosine similarity over all source/target code pairs."""
    a = z_src / np.maximum(np.linalg.norm(z_src, axis=1, keepdims=True), 1e-300)
    b = z_tgt / np.maximum(np.linalg.norm(z_tgt, axis=1, keepdims=True), 1e-300)
    return float((a @ b.T).mean())


@dataclass
class AblationReport:
    variant: str
    seed: int
    auroc: float
    cross_cosine: float
    pca: np.ndarray  # n x 2
    pca_domain: list[str]
    pca_label: np.ndarray
    log: TrainLog


def run_ablation(
    variant: str, bench: BenchSpec, cfg: TrainConfig, fp: ForestParams | None = None, mp: ModelParams | None = None
) -> AblationReport:
    """Train with one objective term removed and summarise the shared codes."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    cfg = replace(cfg, variant=variant)
    res = run_once(bench, cfg, fp, mp)
    b = gen_benchmark(replace(bench, n_t=cfg.n_t), cfg.seed)
    z_src = encode_shared(res.model, b.source_train.x)
    z_tgt = encode_shared(res.model, b.target_test.x)
    cos = mean_cross_cosine(z_src, encode_shared(res.model, b.target_train.x))
    pts = np.vstack([z_src, z_tgt])
    return AblationReport(
        variant,
        cfg.seed,
        res.auroc,
        cos,
        pca_2d(pts),
        ["source"] * len(z_src) + ["target"] * len(z_tgt),
        np.concatenate([b.source_train.y, b.target_test.y]),
        res.log,
    )


def nt_sweep(
    values, bench: BenchSpec, cfg: TrainConfig, seeds=range(5), fp=None, mp=None
) -> list[tuple[int, float, float, list[float]]]:
    """Rows ``(n_t, mean AUROC, sd AUROC, per-seed AUROCs)``."""
    values = [int(v) for v in values]
    if values != sorted(values):
        raise ValueError("n_t values must be sorted ascending")
    if not values or values[0] < 1 or values[-1] >= bench.n_source:
        raise ValueError("n_t values must lie in [1, n_source)")
    rows = []
    for nt in values:
        scores = [run_once(bench, replace(cfg, n_t=nt, seed=s), fp, mp).auroc for s in seeds]
        sd = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
        rows.append((nt, float(np.mean(scores)), sd, scores))
    return rows


# ---------------------------------------------------------------------------
# report files


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_ablation_reports(out_dir, reports: list[AblationReport]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "ablation_report.csv",
        ("variant", "seed", "auroc", "cross_cosine"),
        [(r.variant, r.seed, r.auroc, r.cross_cosine) for r in reports],
    )
    for r in reports:
        if r.seed != reports[0].seed:
            continue
        write_csv(
            out / f"pca_2d_{r.variant}.csv",
            ("pc1", "pc2", "domain", "label"),
            [(p[0], p[1], d, int(y)) for p, d, y in zip(r.pca, r.pca_domain, r.pca_label)],
        )


def write_nt_sweep(path, rows) -> None:
    write_csv(path, ("n_t", "auroc_mean", "auroc_sd", "n_seeds"), [(nt, mu, sd, len(s)) for nt, mu, sd, s in rows])


@dataclass
class CurveResult:
    seed: int
    epochs: list[int]
    auroc: list[float]
    proxy: list[float]
    selected_epoch: int
    selected_auroc: float
    final_auroc: float

    @property
    def peak_epoch(self) -> int:
        return self.epochs[int(np.argmax(self.auroc))]


def overtraining_curve(
    bench: BenchSpec, cfg: TrainConfig, fp: ForestParams | None = None, mp: ModelParams | None = None, every: int = 1
) -> CurveResult:
    """Target-test AUROC after every ``every``-th epoch (and the last), plus the early-stopped model's AUROC.

    The test labels are only read by the evaluation callback; training and
    epoch selection never see them.
    """
    fp = fp or ForestParams()
    b = gen_benchmark(replace(bench, n_t=cfg.n_t), cfg.seed)
    test = b.target_test
    epochs, scores = [], []

    def evaluate(model) -> float:
        det = build_irad_detector(model, b.source_train, b.target_train, fp, cfg.seed)
        return auroc(anomaly_score(det, test.x), test.y)

    def on_epoch_end(epoch, model):
        if epoch % every == 0 or epoch == cfg.epochs:
            epochs.append(epoch)
            scores.append(evaluate(model))

    model, log = train_irad(b.source_train, b.target_train, cfg, mp, on_epoch_end)
    final = scores[-1]
    selected = final if log.selected_epoch == cfg.epochs else evaluate(model)
    return CurveResult(cfg.seed, epochs, scores, log.column("proxy_val"), log.selected_epoch, selected, final)


def write_curve(path, c: CurveResult) -> None:
    proxy = dict(zip(range(1, len(c.proxy) + 1), c.proxy))
    write_csv(path, ("epoch", "auroc", "proxy_val"), [(e, a, proxy[e]) for e, a in zip(c.epochs, c.auroc)])
