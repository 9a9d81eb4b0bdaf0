"""Problem generators: the three benchmark matrix models (incoherent Gaussian,
coherent almost-colinear, mixed duplicated-row), ground-truth/noise
construction, and CSV matrix ingestion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CsvParseError, DegenerateInputError, ParameterError
from .linalg import apply_pinv, as_matrix

NOISE_KINDS = ("none", "gaussian_relative", "spiky")


@dataclass(frozen=True)
class NoiseSpec:
    """How to perturb the right-hand side.

    ``gaussian_relative`` scales a Gaussian vector to ``level * ||A x*||``;
    ``spiky`` plants ``spike_count`` coordinates of size ``spike_magnitude``.
    ``orthogonalize`` of ``None`` resolves to the per-kind default: gaussian
    noise is projected onto the orthogonal complement of the column space (so
    the generating ``x*`` stays the exact least-squares minimizer), spiky
    noise is left raw.
    """

    kind: str = "none"
    level: float = 0.0
    spike_count: int = 0
    spike_magnitude: float = 0.0
    orthogonalize: bool | None = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if self.level < 0:
            raise ParameterError("noise level must be non-negative")
        if self.spike_count < 0:
            raise ParameterError("spike_count must be non-negative")
        if self.spike_magnitude < 0:
            raise ParameterError("spike_magnitude must be non-negative")

    @property
    def resolved_orthogonalize(self) -> bool:
        if self.orthogonalize is not None:
            return self.orthogonalize
        return self.kind == "gaussian_relative"


@dataclass(frozen=True)
class ProblemInstance:
    """A linear system with known ground truth: ``b = A x_star - e`` by
    construction, ``e`` all-zero for consistent instances."""

    a: np.ndarray
    b: np.ndarray
    x_star: np.ndarray
    e: np.ndarray
    model_tag: str
    seed: int

    @property
    def consistent(self) -> bool:
        return not self.e.any()

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape


def gen_gaussian(m: int, n: int, seed: int) -> np.ndarray:
    """Incoherent model: i.i.d. standard normal entries."""
    if not m >= n >= 1:
        raise ParameterError(f"need m >= n >= 1, got m={m}, n={n}")
    return np.random.default_rng(seed).standard_normal((m, n))


def gen_coherent(m: int, n: int, seed: int) -> np.ndarray:
    """Coherent model: entries uniform on [0.8, 1], rows almost colinear."""
    if m < 1 or n < 1:
        raise ParameterError(f"need m, n >= 1, got m={m}, n={n}")
    return np.random.default_rng(seed).uniform(0.8, 1.0, size=(m, n))


def gen_mixed(m: int, n: int, seed: int) -> np.ndarray:
    """Mixed model: n distinct standard normal rows, every later row a copy of
    row 0, so row-block selection must hunt for the informative rows."""
    if not m >= n >= 1:
        raise ParameterError(f"need m >= n >= 1, got m={m}, n={n}")
    a = np.empty((m, n))
    a[:n] = np.random.default_rng(seed).standard_normal((n, n))
    a[n:] = a[0]
    return a


def _orthogonalize(a: np.ndarray, g: np.ndarray) -> np.ndarray:
    # Project g onto the orthogonal complement of the column space of a.
    return g - a @ apply_pinv(a, g)


def make_problem(a, noise: NoiseSpec = NoiseSpec(), seed: int = 0, model_tag: str = "custom") -> ProblemInstance:
    """Attach a standard normal ground truth ``x*`` and the requested noise.

    Returns the instance with ``b = A x* - e``; the stored ``e`` is the noise
    exactly as generated (spiky entries keep their exact magnitude).
    """
    a = as_matrix(a)
    m, n = a.shape
    rng = np.random.default_rng(seed)
    x_star = rng.standard_normal(n)
    ax = a @ x_star
    if noise.kind == "none":
        e = np.zeros(m)
        b = ax.copy()
    elif noise.kind == "gaussian_relative":
        g = rng.standard_normal(m)
        if noise.resolved_orthogonalize:
            g = _orthogonalize(a, g)
        target = noise.level * float(np.linalg.norm(ax))
        if noise.level > 0 and target == 0.0:
            raise DegenerateInputError("cannot scale noise relative to a zero A x*")
        gn = float(np.linalg.norm(g))
        if noise.level > 0 and gn == 0.0:
            raise DegenerateInputError("degenerate noise direction")
        e = g * (target / gn) if noise.level > 0 else np.zeros(m)
        b = ax - e
    else:  # spiky
        if noise.spike_count > m:
            raise ParameterError(f"spike_count {noise.spike_count} exceeds m={m}")
        e = np.zeros(m)
        idx = rng.choice(m, size=noise.spike_count, replace=False)
        e[idx] = noise.spike_magnitude
        if noise.resolved_orthogonalize:
            e = _orthogonalize(a, e)
        b = ax - e
    return ProblemInstance(a=a, b=b, x_star=x_star, e=e, model_tag=model_tag, seed=seed)


def load_csv_matrix(path, normalize_rows: bool = False) -> np.ndarray:
    """Parse a headerless comma-separated matrix file.

    Each line is one row of decimal literals.  Ragged rows, non-numeric or
    non-finite fields, and empty files raise `CsvParseError` naming the line.
    With ``normalize_rows`` every row is scaled to unit 2-norm.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    while lines and lines[-1].strip() == "":
        lines.pop()
    if not lines:
        raise CsvParseError(f"{path}: empty file")
    rows = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        fields = line.split(",")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise CsvParseError(
                f"{path}: line {lineno}: expected {width} fields, got {len(fields)}", line=lineno
            )
        values = []
        for tok in fields:
            try:
                val = float(tok)
            except ValueError:
                raise CsvParseError(
                    f"{path}: line {lineno}: invalid number {tok.strip()!r}", line=lineno
                ) from None
            if not np.isfinite(val):
                raise CsvParseError(f"{path}: line {lineno}: non-finite value", line=lineno)
            values.append(val)
        rows.append(values)
    a = np.array(rows, dtype=float)
    if normalize_rows:
        norms = np.sqrt(np.einsum("ij,ij->i", a, a))
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise DegenerateInputError(f"{path}: row {zero[0] + 1} has zero norm, cannot normalize")
        a = a / norms[:, None]
    return a
