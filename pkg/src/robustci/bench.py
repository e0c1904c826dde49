"""Monte Carlo coverage/length harness over (method, n, epsilon, noise) grids.

Seeding
-------
Every random stream is a pure function of the master seed and the cell
coordinates, hashed with a chained SplitMix64 finalizer (:func:`mix64`):

* design rows:   ``mix64(master_seed, n, replicate, 1)``
* noise draws:   ``mix64(master_seed, n, noise_code, replicate, 2)``
* method draws:  ``mix64(master_seed, n, epsilon_index, noise_code, replicate, 3)``

The method tag never enters, so all methods in a cell see the same datasets.
Epsilon does not enter the data streams either: the noise sampler consumes
its stream identically for every epsilon, so moving along the epsilon axis
only swaps clean draws for contaminated ones (common random numbers).
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .baselines import BootstrapSpec, ols_t_interval, residual_bootstrap_interval
from .estimators import ConvergenceWarning
from .interval import ThresholdRule, confidence_interval
from .model import Dataset, DesignSpec, Interval, noise_preset, sample_design, sample_noise
from .univariate import location_interval, ratio_statistics

__all__ = [
    "METHODS",
    "NOISE_FAMILIES",
    "CSV_HEADER",
    "ExperimentConfig",
    "ExperimentRecord",
    "mix64",
    "replicate_dataset",
    "run_method",
    "run_cell",
    "run_grid",
    "write_csv",
    "format_csv",
    "read_csv",
    "standard_grid_config",
]

METHODS = ("alg1", "alg1-ga", "ols-t", "rb", "quantile-loc")
REGRESSION_METHODS = ("alg1", "alg1-ga", "ols-t", "rb")
NOISE_FAMILIES = ("gaussian", "cauchy")
_NOISE_CODES = {"gaussian": 0, "cauchy": 1}

CSV_HEADER = (
    "method,n,p,epsilon,noise,replicates,covered,coverage,avg_length_covered,"
    "unbounded_count,error_count,mean_runtime_ms,master_seed"
)

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def mix64(*words: int) -> int:
    """Chain SplitMix64 over integer words into one 64-bit seed."""
    h = 0
    for w in words:
        h = _splitmix64(h ^ (int(w) & _MASK))
    return h


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


@dataclass(frozen=True)
class ExperimentConfig:
    methods: tuple[str, ...] = ("alg1",)
    n_values: tuple[int, ...] = (200,)
    p: int = 20
    epsilons: tuple[float, ...] = (0.0,)
    noise_families: tuple[str, ...] = ("gaussian",)
    replicates: int = 500
    alpha: float = 0.05
    master_seed: int = 0
    design: Optional[DesignSpec] = None
    b: Optional[tuple[float, ...]] = None
    bootstrap_replicates: int = 200
    timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        object.__setattr__(self, "noise_families", tuple(self.noise_families))
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        for f in self.noise_families:
            if f not in NOISE_FAMILIES:
                raise ValueError(f"unknown noise family {f!r}")
        for e in self.epsilons:
            if not (0.0 <= e < 1.0):
                raise ValueError(f"epsilon must satisfy 0 <= epsilon < 1, got {e}")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.bootstrap_replicates < 2:
            raise ValueError("bootstrap_replicates must be at least 2")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.p < 1:
            raise ValueError("p must be positive")
        if any(m in REGRESSION_METHODS for m in self.methods):
            if self.p < 2:
                raise ValueError("regression methods need p >= 2")
            bad = [n for n in self.n_values if n <= self.p]
            if bad:
                raise ValueError(f"regression methods need n > p; offending n: {bad}")
        if any(n < 2 for n in self.n_values):
            raise ValueError("n must be at least 2")
        if not (0 <= int(self.master_seed) <= _MASK):
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        design = self.design or DesignSpec(self.p, "ar1", 0.6)
        if design.p != self.p:
            raise ValueError("design dimension differs from p")
        object.__setattr__(self, "design", design)
        b = tuple(float(v) for v in self.b) if self.b is not None else (0.0,) * self.p
        if len(b) != self.p:
            raise ValueError(f"b must have length {self.p}")
        object.__setattr__(self, "b", b)

    def cells(self) -> list[tuple[str, int, int, str]]:
        """``(method, n, epsilon_index, noise)`` in nested config order."""
        return [
            (m, n, k, f)
            for m in self.methods
            for n in self.n_values
            for k in range(len(self.epsilons))
            for f in self.noise_families
        ]

    def to_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "n_values": list(self.n_values),
            "p": self.p,
            "epsilons": list(self.epsilons),
            "noise_families": list(self.noise_families),
            "replicates": self.replicates,
            "alpha": self.alpha,
            "master_seed": self.master_seed,
            "design": self.design.to_dict(),
            "b": list(self.b),
            "bootstrap_replicates": self.bootstrap_replicates,
            "timing": self.timing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {', '.join(sorted(unknown))}")
        d = dict(d)
        p = int(d.get("p", 20))
        if "design" in d and d["design"] is not None:
            d["design"] = DesignSpec.from_dict(p, d["design"])
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ExperimentRecord:
    method: str
    n: int
    p: int
    epsilon: float
    noise: str
    replicates: int
    covered: int
    coverage: float
    avg_length_covered: Optional[float]
    unbounded_count: int
    error_count: int
    mean_runtime_ms: Optional[float] = field(compare=False)
    master_seed: int


def standard_grid_config(**overrides) -> ExperimentConfig:
    """Standard simulation grid: four regression methods, two sample sizes, nine contamination levels."""
    base = dict(
        methods=("alg1", "alg1-ga", "ols-t", "rb"),
        n_values=(200, 1000),
        p=20,
        epsilons=tuple(round(0.1 * k, 1) for k in range(9)),
        noise_families=("gaussian", "cauchy"),
        replicates=500,
        alpha=0.05,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def replicate_dataset(
    config: ExperimentConfig, n: int, epsilon_index: int, noise: str, replicate: int
) -> Dataset:
    """The dataset every method sees for one replicate of one cell."""
    code = _NOISE_CODES[noise]
    seed = int(config.master_seed)
    X = sample_design(config.design, n, _rng(mix64(seed, n, replicate, 1)))
    spec = noise_preset(noise, config.epsilons[epsilon_index])
    z = sample_noise(spec, n, _rng(mix64(seed, n, code, replicate, 2)))
    return Dataset(y=X @ np.asarray(config.b) + z, X=X)


def _method_seed(config, n, epsilon_index, noise, replicate) -> int:
    return mix64(int(config.master_seed), n, epsilon_index, _NOISE_CODES[noise], replicate, 3)


def run_method(
    method: str, dataset: Dataset, alpha: float, seed: int = 0, bootstrap_replicates: int = 200
) -> Interval:
    """Interval for the first coefficient by the named method."""
    if method == "alg1":
        return confidence_interval(dataset, 1, alpha, ThresholdRule.NON_ASYMPTOTIC)
    if method == "alg1-ga":
        return confidence_interval(dataset, 1, alpha, ThresholdRule.GAUSSIAN_APPROX)
    if method == "ols-t":
        return ols_t_interval(dataset, 1, alpha)
    if method == "rb":
        spec = BootstrapSpec(bootstrap_replicates, np.random.SeedSequence(seed))
        return residual_bootstrap_interval(dataset, 1, alpha, spec)
    if method == "quantile-loc":
        # ratio reduction; exact when the nuisance coefficients are zero
        return location_interval(ratio_statistics(dataset.X[:, 0], dataset.y), alpha)
    raise ValueError(f"unknown method {method!r}")


def run_cell(
    config: ExperimentConfig, method: str, n: int, epsilon: float, noise: str
) -> ExperimentRecord:
    """Run all replicates of one grid cell; solver failures count as errors."""
    try:
        k = config.epsilons.index(float(epsilon))
    except ValueError:
        raise ValueError(f"epsilon {epsilon} is not in the config grid") from None
    truth = config.b[0]
    covered = unbounded = errors = 0
    lengths = []
    elapsed = 0.0
    for r in range(config.replicates):
        data = replicate_dataset(config, n, k, noise, r)
        seed = _method_seed(config, n, k, noise, r)
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                ci = run_method(method, data, config.alpha, seed, config.bootstrap_replicates)
        except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError):
            elapsed += time.perf_counter() - t0
            errors += 1
            continue
        elapsed += time.perf_counter() - t0
        if not ci.bounded:
            unbounded += 1
        if ci.contains(truth):
            covered += 1
            if ci.bounded:
                lengths.append(ci.length)
    valid = config.replicates - errors
    return ExperimentRecord(
        method=method,
        n=n,
        p=config.p,
        epsilon=float(epsilon),
        noise=noise,
        replicates=config.replicates,
        covered=covered,
        coverage=covered / valid if valid else math.nan,
        avg_length_covered=math.fsum(lengths) / len(lengths) if lengths else None,
        unbounded_count=unbounded,
        error_count=errors,
        mean_runtime_ms=1e3 * elapsed / config.replicates if config.timing else None,
        master_seed=int(config.master_seed),
    )


def _run_cell_tuple(args):
    config, method, n, k, noise = args
    return run_cell(config, method, n, config.epsilons[k], noise)


def run_grid(
    config: ExperimentConfig,
    progress: Optional[Callable[[ExperimentRecord], None]] = None,
    jobs: int = 1,
) -> list[ExperimentRecord]:
    """Run every cell of the grid; output order is independent of ``jobs``."""
    tasks = [(config, m, n, k, f) for (m, n, k, f) in config.cells()]
    records: list[ExperimentRecord] = []
    if jobs <= 1 or len(tasks) <= 1:
        results = map(_run_cell_tuple, tasks)
        for rec in results:
            records.append(rec)
            if progress:
                progress(rec)
        return records
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for rec in pool.map(_run_cell_tuple, tasks):
            records.append(rec)
            if progress:
                progress(rec)
    return records


def _fmt_real(v: Optional[float]) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def format_csv(records: Iterable[ExperimentRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for r in records:
        w.writerow(
            [
                r.method,
                r.n,
                r.p,
                _fmt_real(r.epsilon),
                r.noise,
                r.replicates,
                r.covered,
                _fmt_real(r.coverage),
                _fmt_real(r.avg_length_covered),
                r.unbounded_count,
                r.error_count,
                _fmt_real(r.mean_runtime_ms),
                r.master_seed,
            ]
        )
    return buf.getvalue()


def write_csv(records: Iterable[ExperimentRecord], sink) -> None:
    """Write records to a binary sink (UTF-8, LF line endings)."""
    sink.write(format_csv(records).encode("utf-8"))


def read_csv(source: Iterable[str]) -> list[ExperimentRecord]:
    """Parse CSV produced by :func:`write_csv` back into records."""
    reader = csv.DictReader(source)
    out = []
    for row in reader:
        opt = lambda s: float(s) if s != "" else None  # noqa: E731
        out.append(
            ExperimentRecord(
                method=row["method"],
                n=int(row["n"]),
                p=int(row["p"]),
                epsilon=float(row["epsilon"]),
                noise=row["noise"],
                replicates=int(row["replicates"]),
                covered=int(row["covered"]),
                coverage=float(row["coverage"]),
                avg_length_covered=opt(row["avg_length_covered"]),
                unbounded_count=int(row["unbounded_count"]),
                error_count=int(row["error_count"]),
                mean_runtime_ms=opt(row["mean_runtime_ms"]),
                master_seed=int(row["master_seed"]),
            )
        )
    return out
