"""Synthetic two-domain benchmark and CSV feature ingestion."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numkit import ShapeError, as_matrix

DOMAINS = ("source", "target")


@dataclass
class LabeledSet:
    x: np.ndarray
    y: np.ndarray
    domain: str

    def __post_init__(self):
        self.x = as_matrix(self.x, "x")
        self.y = np.asarray(self.y, dtype=int).reshape(-1)
        if len(self.y) != len(self.x):
            raise ShapeError(f"{len(self.x)} rows but {len(self.y)} labels")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 (normal) or 1 (anomalous)")
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}, got {self.domain!r}")

    def __len__(self):
        return len(self.y)

    @property
    def normal_only(self) -> bool:
        return not self.y.any()

    def subset(self, idx) -> LabeledSet:
        return LabeledSet(self.x[idx], self.y[idx], self.domain)


@dataclass
class BenchSpec:
    """Two domains sharing a latent ``s``; each has its own affine map and private subspace.

    ``domain_gap`` in [0, 1] rotates the target's shared-latent map away from
    the source's (0 gives identical maps, 1 independent ones). ``None`` map seeds
    are derived from the run seed; set both seeds equal and ``domain_gap=0`` for
    identical domain transforms.
    """

    k_shared: int = 4
    m_private: int = 4
    d_x: int = 20
    n_source: int = 2000
    n_t: int = 50
    n_test: int = 1000
    n_source_test: int = 1000
    shift: float = 4.0
    inlier_scale: float = 0.5
    anomaly_frac: float = 0.5
    source_anomaly_frac: float = 0.2
    domain_gap: float = 0.5
    offset_scale: float = 1.5
    private_scale: float = 1.0
    noise: float = 0.05
    nonlinear: bool = True
    source_map_seed: int | None = None
    target_map_seed: int | None = None

    def validate(self):
        for name in ("k_shared", "m_private", "d_x", "n_source", "n_t", "n_test"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.k_shared + self.m_private > self.d_x:
            raise ValueError("k_shared + m_private must not exceed d_x")
        if self.n_t >= self.n_source:
            raise ValueError("n_t must be much smaller than n_source")
        if self.shift < 0:
            raise ValueError("shift must be >= 0")
        if not 0.0 <= self.domain_gap <= 1.0:
            raise ValueError("domain_gap must lie in [0, 1]")
        for name in ("anomaly_frac", "source_anomaly_frac"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass
class DomainMap:
    shared: np.ndarray  # d_x x k
    private: np.ndarray  # d_x x m
    offset: np.ndarray  # d_x


@dataclass
class Benchmark:
    source_train: LabeledSet
    target_train: LabeledSet
    target_test: LabeledSet
    source_test: LabeledSet
    s: dict = field(default_factory=dict)  # true shared latents per split, for oracle checks


def _domain_maps(spec: BenchSpec, seed: int) -> tuple[DomainMap, DomainMap]:
    src_seed = spec.source_map_seed if spec.source_map_seed is not None else [seed, 1]
    tgt_seed = spec.target_map_seed if spec.target_map_seed is not None else [seed, 2]
    d, k, m = spec.d_x, spec.k_shared, spec.m_private
    r_src = np.random.default_rng(src_seed)
    a_src = r_src.standard_normal((d, k)) / math.sqrt(k)
    b_src = r_src.standard_normal((d, m)) / math.sqrt(m)
    c_src = r_src.standard_normal(d) * spec.offset_scale
    src = DomainMap(a_src, b_src, c_src)
    if spec.target_map_seed is not None and spec.target_map_seed == spec.source_map_seed and spec.domain_gap == 0:
        return src, DomainMap(a_src.copy(), b_src.copy(), c_src.copy())
    r_tgt = np.random.default_rng(tgt_seed)
    a_new = r_tgt.standard_normal((d, k)) / math.sqrt(k)
    theta = spec.domain_gap * math.pi / 2
    a_tgt = math.cos(theta) * a_src + math.sin(theta) * a_new
    b_tgt = r_tgt.standard_normal((d, m)) / math.sqrt(m)
    c_tgt = r_tgt.standard_normal(d) * spec.offset_scale
    return src, DomainMap(a_tgt, b_tgt, c_tgt)


def _latents(n: int, frac: float, spec: BenchSpec, rng) -> tuple[np.ndarray, np.ndarray]:
    n_anom = int(round(n * frac))
    y = np.zeros(n, dtype=int)
    y[:n_anom] = 1
    rng.shuffle(y)
    s = rng.standard_normal((n, spec.k_shared)) * spec.inlier_scale
    u = rng.standard_normal((n, spec.k_shared))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    s = s + spec.shift * u * y[:, None]
    return s, y


def _observe(s: np.ndarray, dm: DomainMap, spec: BenchSpec, rng) -> np.ndarray:
    p = rng.standard_normal((len(s), spec.m_private)) * spec.private_scale
    h = s @ dm.shared.T + p @ dm.private.T + dm.offset
    if spec.nonlinear:
        h = 2.0 * np.tanh(h / 2.0)
    return h + spec.noise * rng.standard_normal(h.shape)


def gen_benchmark(spec: BenchSpec, seed: int) -> Benchmark:
    spec.validate()
    src_map, tgt_map = _domain_maps(spec, seed)
    rng = np.random.default_rng([seed, 0])

    def make(n, frac, dm, domain):
        if frac == 0:
            s = rng.standard_normal((n, spec.k_shared)) * spec.inlier_scale
            y = np.zeros(n, dtype=int)
        else:
            s, y = _latents(n, frac, spec, rng)
        return LabeledSet(_observe(s, dm, spec, rng), y, domain), s

    source_train, s_src = make(spec.n_source, 0, src_map, "source")
    target_train, s_tgt = make(spec.n_t, 0, tgt_map, "target")
    target_test, s_test = make(spec.n_test, spec.anomaly_frac, tgt_map, "target")
    source_test, s_stest = make(spec.n_source_test, spec.source_anomaly_frac, src_map, "source")
    return Benchmark(
        source_train,
        target_train,
        target_test,
        source_test,
        {"source_train": s_src, "target_train": s_tgt, "target_test": s_test, "source_test": s_stest},
    )


def gen_two_domain(spec: BenchSpec, seed: int) -> tuple[LabeledSet, LabeledSet, LabeledSet]:
    b = gen_benchmark(spec, seed)
    return b.source_train, b.target_train, b.target_test


def oracle_scores(s: np.ndarray) -> np.ndarray:
    """Bayes-style detector on the true shared latent: distance from the origin."""
    return np.linalg.norm(s, axis=1)


# ---------------------------------------------------------------------------
# CSV


def save_csv(path, *sets: LabeledSet) -> None:
    """Header ``f0..f{d-1},label,domain``; floats written with shortest round-trip repr."""
    if not sets:
        raise ValueError("nothing to save")
    d = sets[0].x.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(d)] + ["label", "domain"])
        for s in sets:
            if s.x.shape[1] != d:
                raise ShapeError("all sets in one file must share the feature width")
            for row, label in zip(s.x, s.y):
                w.writerow([repr(float(v)) for v in row] + [int(label), s.domain])


class CsvFormatError(ValueError):
    pass


def load_csv(path, domain: str | None = None) -> LabeledSet:
    """Parse a feature CSV. Rows of the other domain are dropped when ``domain`` is given.

    A file holding both domains must be loaded with an explicit ``domain``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError(f"{path}:1: empty file")
        d = len(header) - 2
        expected = [f"f{i}" for i in range(d)] + ["label", "domain"]
        if d < 1 or header != expected:
            raise CsvFormatError(f"{path}:1: header must be f0,...,f{{d-1}},label,domain")
        xs, ys, doms = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise CsvFormatError(f"{path}:{lineno}: expected {d + 2} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row[:d]]
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise CsvFormatError(f"{path}:{lineno}: non-finite feature value")
            if row[d] not in ("0", "1"):
                raise CsvFormatError(f"{path}:{lineno}: label must be 0 or 1, got {row[d]!r}")
            if row[d + 1] not in DOMAINS:
                raise CsvFormatError(f"{path}:{lineno}: domain must be source or target, got {row[d + 1]!r}")
            xs.append(vals)
            ys.append(int(row[d]))
            doms.append(row[d + 1])
    if domain is None:
        if len(set(doms)) > 1:
            raise CsvFormatError(f"{path}: file mixes domains, pass domain= to select one")
        domain = doms[0] if doms else "source"
    keep = [i for i, dm in enumerate(doms) if dm == domain]
    x = np.array([xs[i] for i in keep], dtype=np.float64).reshape(len(keep), d)
    return LabeledSet(x, np.array([ys[i] for i in keep], dtype=int), domain)


def split(s: LabeledSet, fraction: float, seed) -> tuple[LabeledSet, LabeledSet]:
    """Seeded shuffle, then the first ``round(fraction * n)`` rows go to ``a``."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(len(s))
    k = int(round(fraction * len(s)))
    return s.subset(np.sort(perm[:k])), s.subset(np.sort(perm[k:]))
