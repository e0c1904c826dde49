"""Domain types, coordinate splitting and synthetic data generation.

Gaussian draws use numpy's ``Generator.standard_normal`` (ziggurat on the
PCG64 bit generator); Cauchy draws use the inverse CDF ``tan(pi * (U - 1/2))``.
Both are deterministic given the generator state.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Dataset",
    "SplitDataset",
    "NoiseBase",
    "NoiseSpec",
    "DesignSpec",
    "Interval",
    "split",
    "sample_design",
    "sample_noise",
    "generate_dataset",
    "gaussian_preset",
    "cauchy_preset",
    "noise_preset",
    "read_dataset_csv",
    "write_dataset_csv",
    "DatasetFormatError",
]


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""


@dataclass(frozen=True)
class Dataset:
    """Responses ``y`` (length n) and design ``X`` (n x p)."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or X.ndim != 2:
            raise ValueError("y must be a vector and X a matrix")
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"row count of X ({X.shape[0]}) differs from length of y ({y.shape[0]})"
            )
        if y.shape[0] < 2:
            raise ValueError("need at least 2 observations")
        if X.shape[1] < 1:
            raise ValueError("need at least one covariate")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class SplitDataset:
    """Target covariate ``x`` separated from the nuisance block ``W``.

    ``target_index`` is 1-based, matching the coefficient numbering b_1..b_p.
    """

    y: np.ndarray
    x: np.ndarray
    W: np.ndarray
    target_index: int

    @property
    def n(self) -> int:
        return self.y.shape[0]


class NoiseBase(str, enum.Enum):
    GAUSSIAN = "gaussian"
    CAUCHY = "cauchy"


@dataclass(frozen=True)
class NoiseSpec:
    """Contaminated noise law ``(1 - epsilon) * base + epsilon * Q``.

    ``contamination`` lists ``(weight, mean, sd)`` Gaussian components of Q.
    Invalid specs are rejected, never renormalized.
    """

    base: NoiseBase = NoiseBase.GAUSSIAN
    epsilon: float = 0.0
    contamination: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "base", NoiseBase(self.base))
        comps = tuple(tuple(float(v) for v in c) for c in self.contamination)
        object.__setattr__(self, "contamination", comps)
        eps = float(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if not (0.0 <= eps < 1.0):
            raise ValueError(f"epsilon must satisfy 0 <= epsilon < 1, got {eps!r}")
        if any(len(c) != 3 for c in comps):
            raise ValueError("contamination components must be (weight, mean, sd)")
        if eps > 0 and not comps:
            raise ValueError("epsilon > 0 requires at least one contamination component")
        if comps:
            weights = [c[0] for c in comps]
            if any(w < 0 for w in weights):
                raise ValueError("contamination weights must be nonnegative")
            if abs(math.fsum(weights) - 1.0) > 1e-12:
                raise ValueError("contamination weights must sum to 1")
            if any(not (c[2] > 0) for c in comps):
                raise ValueError("contamination sd must be positive")
            if not all(math.isfinite(v) for c in comps for v in c):
                raise ValueError("contamination parameters must be finite")


# Q = 1/2 N(10^2, 1) + 1/2 N(10^4, 1), shared by both simulation presets.
_PRESET_CONTAMINATION = ((0.5, 1e2, 1.0), (0.5, 1e4, 1.0))


def gaussian_preset(epsilon: float) -> NoiseSpec:
    return NoiseSpec(NoiseBase.GAUSSIAN, epsilon, _PRESET_CONTAMINATION)


def cauchy_preset(epsilon: float) -> NoiseSpec:
    return NoiseSpec(NoiseBase.CAUCHY, epsilon, _PRESET_CONTAMINATION)


def noise_preset(family: str, epsilon: float) -> NoiseSpec:
    """Simulation noise preset by family name (``gaussian`` or ``cauchy``)."""
    if family == "gaussian":
        return gaussian_preset(epsilon)
    if family == "cauchy":
        return cauchy_preset(epsilon)
    raise ValueError(f"unknown noise family {family!r}")


@dataclass(frozen=True)
class DesignSpec:
    """Zero-mean Gaussian covariate law.

    ``kind`` is ``"ar1"`` (entries ``rho**|j-k|``), ``"identity"`` or
    ``"explicit"`` (``matrix`` given). The Cholesky factor is computed and
    validated at construction; no jitter is ever added.
    """

    p: int
    kind: str = "ar1"
    rho: float = 0.6
    matrix: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError("p must be a positive integer")
        object.__setattr__(self, "p", int(self.p))
        if self.kind == "ar1":
            if not (-1.0 < self.rho < 1.0):
                raise ValueError("AR(1) rho must lie in (-1, 1)")
            idx = np.arange(self.p)
            cov = float(self.rho) ** np.abs(idx[:, None] - idx[None, :])
        elif self.kind == "identity":
            cov = np.eye(self.p)
        elif self.kind == "explicit":
            if self.matrix is None:
                raise ValueError("explicit covariance requires a matrix")
            cov = np.array(self.matrix, dtype=float)
            if cov.shape != (self.p, self.p):
                raise ValueError(f"covariance must be {self.p}x{self.p}")
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
                raise ValueError("covariance matrix is not symmetric")
        else:
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance matrix is not positive definite") from None
        object.__setattr__(self, "matrix", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def covariance(self) -> np.ndarray:
        return self.matrix

    @property
    def cholesky(self) -> np.ndarray:
        return self._chol

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "ar1":
            d["rho"] = self.rho
        elif self.kind == "explicit":
            d["matrix"] = self.matrix.tolist()
        return d

    @classmethod
    def from_dict(cls, p: int, d: dict) -> "DesignSpec":
        kind = d.get("kind", "ar1")
        return cls(p=p, kind=kind, rho=float(d.get("rho", 0.6)), matrix=d.get("matrix"))


@dataclass(frozen=True)
class Interval:
    """Closed confidence interval, possibly unbounded on either side.

    Unbounded sides carry an explicit flag; the corresponding endpoint is
    stored as ``-inf``/``inf``.
    """

    lower: float
    upper: float
    alpha: float
    method: str
    lower_unbounded: bool = False
    upper_unbounded: bool = False

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.lower_unbounded:
            object.__setattr__(self, "lower", -math.inf)
        if self.upper_unbounded:
            object.__setattr__(self, "upper", math.inf)
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError("interval endpoints must not be NaN")
        if self.lower > self.upper:
            raise ValueError(f"lower endpoint {self.lower} exceeds upper {self.upper}")

    @property
    def bounded(self) -> bool:
        return not (self.lower_unbounded or self.upper_unbounded)

    @property
    def length(self) -> float:
        return self.upper - self.lower if self.bounded else math.inf

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def shifted(self, delta: float) -> "Interval":
        return Interval(
            self.lower + delta,
            self.upper + delta,
            self.alpha,
            self.method,
            self.lower_unbounded,
            self.upper_unbounded,
        )


def split(dataset: Dataset, target_index: int) -> SplitDataset:
    """Separate column ``target_index`` (1-based) from the remaining columns."""
    p = dataset.p
    if p < 2:
        raise ValueError("no nuisance columns: p = 1, use the univariate methods")
    if not (1 <= target_index <= p):
        raise ValueError(f"target_index must lie in [1, {p}], got {target_index}")
    j = target_index - 1
    x = dataset.X[:, j].copy()
    W = np.delete(dataset.X, j, axis=1)
    return SplitDataset(y=dataset.y.copy(), x=x, W=W, target_index=target_index)


def sample_design(spec: DesignSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` iid rows from N(0, Sigma) as ``L z`` with ``L`` lower Cholesky."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    z = rng.standard_normal((n, spec.p))
    return z @ spec.cholesky.T


def sample_noise(spec: NoiseSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` iid contaminated noise values.

    The generator is consumed identically for every epsilon, so coupled draws
    across contamination levels differ only in which entries are replaced.
    """
    pick = rng.random(n)
    if spec.base is NoiseBase.GAUSSIAN:
        base = rng.standard_normal(n)
    else:
        base = np.tan(np.pi * (rng.random(n) - 0.5))
    comp_u = rng.random(n)
    comp_z = rng.standard_normal(n)
    if spec.epsilon == 0.0:
        return base
    weights = np.array([c[0] for c in spec.contamination])
    means = np.array([c[1] for c in spec.contamination])
    sds = np.array([c[2] for c in spec.contamination])
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    k = np.minimum(np.searchsorted(cum, comp_u, side="right"), len(weights) - 1)
    contaminated = means[k] + sds[k] * comp_z
    return np.where(pick < spec.epsilon, contaminated, base)


def generate_dataset(
    design: DesignSpec,
    noise: NoiseSpec,
    b: Sequence[float],
    n: int,
    rng: np.random.Generator | np.random.SeedSequence | int,
) -> Dataset:
    """Simulate ``y = X b + z``.

    Design and noise are drawn from two independent child streams spawned
    from ``rng``; passing a seed or ``SeedSequence`` makes the result a pure
    function of it.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (design.p,):
        raise ValueError(f"b must have length {design.p}, got shape {b.shape}")
    design_rng, noise_rng = _child_generators(rng, 2)
    X = sample_design(design, n, design_rng)
    z = sample_noise(noise, n, noise_rng)
    return Dataset(y=X @ b + z, X=X)


def _child_generators(rng, k: int) -> list[np.random.Generator]:
    if isinstance(rng, np.random.Generator):
        return list(rng.spawn(k))
    if not isinstance(rng, np.random.SeedSequence):
        rng = np.random.SeedSequence(rng)
    return [np.random.default_rng(s) for s in rng.spawn(k)]


def write_dataset_csv(dataset: Dataset, sink: io.TextIOBase) -> None:
    """Write ``y,x1,...,xp`` CSV with round-trip decimal formatting."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["y"] + [f"x{j + 1}" for j in range(dataset.p)])
    for yi, row in zip(dataset.y, dataset.X):
        writer.writerow([repr(float(yi))] + [repr(float(v)) for v in row])


def read_dataset_csv(source: Iterable[str]) -> Dataset:
    """Parse a ``y,x1,...,xp`` CSV; errors name the offending row and column."""
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetFormatError("empty file: missing header row") from None
    header = [h.strip() for h in header]
    p = len(header) - 1
    expected = ["y"] + [f"x{j + 1}" for j in range(p)]
    if p < 1 or header != expected:
        raise DatasetFormatError(
            f"row 1: header must be {','.join(expected) if p >= 1 else 'y,x1,...,xp'}, "
            f"got {','.join(header)}"
        )
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != p + 1:
            raise DatasetFormatError(f"row {lineno}: expected {p + 1} fields, got {len(row)}")
        values = []
        for col, (name, text) in enumerate(zip(header, row), start=1):
            try:
                v = float(text)
            except ValueError:
                raise DatasetFormatError(
                    f"row {lineno}, column {col} ({name}): cannot parse {text!r}"
                ) from None
            if not math.isfinite(v):
                raise DatasetFormatError(f"row {lineno}, column {col} ({name}): non-finite value")
            values.append(v)
        rows.append(values)
    if len(rows) < 2:
        raise DatasetFormatError("need at least 2 data rows")
    arr = np.array(rows, dtype=float)
    return Dataset(y=arr[:, 0], X=arr[:, 1:])
