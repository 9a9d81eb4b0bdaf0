"""Monte-Carlo checks of the statistically verifiable ingredients behind the
convergence guarantees: operator-norm tails, small-ball probabilities, sketch
second moments, inverse smallest-singular-value moments, sketch independence,
the bounded-noise event, and one-step contraction.

Every check returns an `MCReport` whose pass flag is recomputable from its
recorded fields, and is deterministic given the generator state and trial
count.  Margins are three standard errors plus, where noted, a small absolute
slack; they only account for sampling noise, never weaken the inequality.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .bounds import rate_norm_ratio, rate_one_step
from .errors import DegenerateInputError, ParameterError
from .linalg import apply_pinv, as_matrix, as_vector, spectral_summary
from .models import NoiseSpec, ProblemInstance, gen_gaussian, make_problem
from .sketch import SketchKind, SketchSpec, draw_sketch
from .solver import step

CSV_HEADER = ("check_name", "trials", "empirical", "bound", "pass", "margin")


@dataclass(frozen=True)
class MCReport:
    check_name: str
    trials: int
    empirical: float
    bound_or_target: float
    passed: bool
    margin: float
    direction: str  # "le": empirical <= bound+margin; "ge": >= bound-margin; "abs": |emp-bound| <= margin

    def recompute_pass(self) -> bool:
        if self.direction == "le":
            return self.empirical <= self.bound_or_target + self.margin
        if self.direction == "ge":
            return self.empirical >= self.bound_or_target - self.margin
        if self.direction == "abs":
            return abs(self.empirical - self.bound_or_target) <= self.margin
        raise ParameterError(f"unknown direction {self.direction!r}")


def _report(name, trials, empirical, bound, margin, direction) -> MCReport:
    rep = MCReport(
        check_name=name,
        trials=int(trials),
        empirical=float(empirical),
        bound_or_target=float(bound),
        passed=False,
        margin=float(margin),
        direction=direction,
    )
    return replace(rep, passed=rep.recompute_pass())


def write_reports_csv(reports, fh) -> None:
    """One CSV row per report: check_name, trials, empirical, bound, pass, margin."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        writer.writerow(
            [r.check_name, r.trials, repr(r.empirical), repr(r.bound_or_target), r.passed, repr(r.margin)]
        )


def _batches(trials: int, batch: int):
    done = 0
    while done < trials:
        take = min(batch, trials - done)
        yield take
        done += take


def check_opnorm_tail(m: int, cols: int, t: float, trials: int, rng, batch: int = 256) -> MCReport:
    """Tail of the largest singular value of a Gaussian matrix:
    the exceedance frequency of ``(2+t) sqrt(m)`` against ``exp(-t^2 m / 2)``."""
    if not m >= cols >= 1:
        raise ParameterError(f"need m >= cols >= 1, got m={m}, cols={cols}")
    if t < 0:
        raise ParameterError("t must be non-negative")
    cutoff = (2.0 + t) * math.sqrt(m)
    exceed = 0
    for take in _batches(trials, batch):
        draws = rng.standard_normal((take, m, cols))
        top = np.linalg.svd(draws, compute_uv=False)[:, 0]
        exceed += int((top > cutoff).sum())
    bound = math.exp(-t * t * m / 2.0)
    empirical = exceed / trials
    # The extra 1/trials keeps zero-exceedance runs passing when the bound is
    # below Monte-Carlo resolution.
    margin = 3.0 * math.sqrt(bound * (1.0 - bound) / trials) + 1.0 / trials
    return _report("opnorm_tail", trials, empirical, bound, margin, "le")


def check_small_ball(v, s: int, trials: int, rng, batch: int = 8192) -> MCReport:
    """Frequency of ``||S^T v||^2 > ||v||^2 s / 10`` over Gaussian sketches,
    which should be at least one half."""
    v = as_vector(v)
    if not v.any():
        raise ParameterError("v must be nonzero")
    if s < 1:
        raise ParameterError("s must be >= 1")
    m = v.shape[0]
    cutoff = float(v @ v) * s / 10.0
    hits = 0
    for take in _batches(trials, batch):
        draws = rng.standard_normal((take, m, s))
        proj = np.einsum("bms,m->bs", draws, v)
        hits += int((np.einsum("bs,bs->b", proj, proj) > cutoff).sum())
    empirical = hits / trials
    margin = 3.0 * math.sqrt(0.25 / trials)
    return _report("small_ball", trials, empirical, 0.5, margin, "ge")


def check_second_moment(a, s: int, trials: int, rng, batch: int = 2048, tol: float = 0.05) -> MCReport:
    """Monte-Carlo mean of ``||S^T A u||^2 / (s ||A u||^2)`` for a fixed random
    unit ``u``; the exact expectation is 1."""
    a = as_matrix(a)
    if s < 1:
        raise ParameterError("s must be >= 1")
    m, n = a.shape
    u = rng.standard_normal(n)
    u /= np.linalg.norm(u)
    w = a @ u
    wn = float(w @ w)
    if wn == 0.0:
        raise DegenerateInputError("A u vanished; second-moment ratio undefined")
    total = 0.0
    for take in _batches(trials, batch):
        draws = rng.standard_normal((take, m, s))
        proj = np.einsum("bms,m->bs", draws, w)
        total += float(np.einsum("bs,bs->b", proj, proj).sum())
    empirical = total / (trials * s * wn)
    return _report("second_moment", trials, empirical, 1.0, tol, "abs")


def check_inv_smin_moment(n: int, s: int, trials: int, rng, batch: int = 256) -> MCReport:
    """Monte-Carlo mean of ``sigma_min^{-2}`` of an n-by-s Gaussian matrix
    against the closed-form ceiling ``20 / (sqrt(n) - sqrt(s))^2``."""
    if s < 1 or s > n // 2:
        raise ParameterError(f"need 1 <= s <= n/2 for the tall-matrix regime, got s={s}, n={n}")
    vals = np.empty(trials)
    done = 0
    for take in _batches(trials, batch):
        draws = rng.standard_normal((take, n, s))
        smin = np.linalg.svd(draws, compute_uv=False)[:, -1]
        vals[done : done + take] = 1.0 / (smin * smin)
        done += take
    bound = 20.0 / (math.sqrt(n) - math.sqrt(s)) ** 2
    empirical = float(vals.mean())
    margin = 3.0 * float(vals.std(ddof=1)) / math.sqrt(trials)
    return _report("inv_smin_moment", trials, empirical, bound, margin, "le")


def _require_orthogonal_noise(problem: ProblemInstance) -> None:
    e = problem.e
    if not e.any():
        raise ParameterError("noise vector is zero; check undefined")
    en = float(np.linalg.norm(e))
    col_norms = np.sqrt(np.einsum("ij,ij->j", problem.a, problem.a))
    inner = np.abs(problem.a.T @ e)
    if np.any(inner > 1e-8 * en * np.maximum(col_norms, 1e-300)):
        raise ParameterError("noise is not orthogonal to the column space of A")


def check_independence(problem: ProblemInstance, s: int, trials: int, rng, batch: int = 64) -> MCReport:
    """Sample correlation between ``||A_S^+||`` and ``||S^T e||`` over fresh
    Gaussian sketches; the two are independent when the noise is orthogonal to
    the column space, so |correlation| should be at sampling-noise level."""
    if s < 1:
        raise ParameterError("s must be >= 1")
    _require_orthogonal_noise(problem)
    a, e = problem.a, problem.e
    m, n = a.shape
    pinv_norms = np.empty(trials)
    noise_norms = np.empty(trials)
    done = 0
    for take in _batches(trials, batch):
        flat = rng.standard_normal((m, take * s))
        a_s = (flat.T @ a).reshape(take, s, n)
        smin = np.linalg.svd(a_s, compute_uv=False)[:, -1]
        pinv_norms[done : done + take] = 1.0 / smin
        se = (flat.T @ e).reshape(take, s)
        noise_norms[done : done + take] = np.sqrt(np.einsum("bs,bs->b", se, se))
        done += take
    empirical = abs(float(np.corrcoef(pinv_norms, noise_norms)[0, 1]))
    margin = 3.0 / math.sqrt(trials) + 0.02
    return _report("independence", trials, empirical, 0.0, margin, "le")


def check_noise_event(
    problem: ProblemInstance, s: int, trials: int, rng, alpha_max: float = 0.9, target: float = 0.95
) -> MCReport:
    """Frequency of the bounded-noise event
    ``||A_S^+ S^T e||^2 <= 8 s ||e||^2 / ((sqrt(n)-sqrt(s))^2 sigma_min^2)``."""
    a, e = problem.a, problem.e
    m, n = a.shape
    if not 1 <= s <= alpha_max * n:
        raise ParameterError(
            f"need s/n bounded away from 1 (s <= {alpha_max} n); got s={s}, n={n}"
        )
    if e.any():
        _require_orthogonal_noise(problem)
    smin = spectral_summary(a).sigma_min
    if smin == 0.0:
        raise DegenerateInputError("A is rank deficient")
    cutoff = 8.0 * s * float(e @ e) / ((math.sqrt(n) - math.sqrt(s)) ** 2 * smin * smin)
    hits = 0
    for _ in range(trials):
        sk = rng.standard_normal((m, s))
        a_s = sk.T @ a
        z = apply_pinv(a_s, sk.T @ e)
        if float(z @ z) <= cutoff:
            hits += 1
    empirical = hits / trials
    return _report("noise_event", trials, empirical, target, 0.0, "ge")


def check_one_step_contraction(
    problem: ProblemInstance, spec: SketchSpec, trials: int, rng, x=None
) -> MCReport:
    """Monte-Carlo mean of ``||step(x) - x*||^2 / ||x - x*||^2`` over fresh
    sketches, against the sharper of the two closed-form one-step factors."""
    if not problem.consistent:
        raise ParameterError("one-step contraction check requires a consistent system")
    a, b, x_star = problem.a, problem.b, problem.x_star
    m, n = a.shape
    x = rng.standard_normal(n) if x is None else as_vector(x)
    d = x - x_star
    dist = float(d @ d)
    if dist == 0.0:
        raise DegenerateInputError("x equals the solution; contraction ratio undefined")
    ratios = np.empty(trials)
    for i in range(trials):
        draw = draw_sketch(spec, a, rng)
        nx = step(x, a, b, draw)
        nd = nx - x_star
        ratios[i] = float(nd @ nd) / dist
    summary = spectral_summary(a)
    comparator = min(
        rate_one_step(summary, m, spec.block_size).beta,
        rate_norm_ratio(summary, spec.block_size).beta,
    )
    empirical = float(ratios.mean())
    margin = 3.0 * float(ratios.std(ddof=1)) / math.sqrt(trials)
    return _report("one_step_contraction", trials, empirical, comparator, margin, "le")


def default_checks() -> dict[str, Callable[[np.random.Generator], MCReport]]:
    """Named canonical instantiations of every check, at the scales the
    acceptance protocol uses."""

    def _noisy_problem():
        a = gen_gaussian(1000, 100, seed=11)
        noise = NoiseSpec(kind="gaussian_relative", level=0.2, orthogonalize=True)
        return make_problem(a, noise, seed=12, model_tag="gaussian")

    def opnorm_tail(rng):
        return check_opnorm_tail(m=25, cols=25, t=0.5, trials=10_000, rng=rng)

    def small_ball(rng):
        v = np.random.default_rng(7).standard_normal(50)
        return check_small_ball(v, s=1, trials=100_000, rng=rng)

    def second_moment(rng):
        a = gen_gaussian(100, 20, seed=5)
        return check_second_moment(a, s=5, trials=10_000, rng=rng)

    def inv_smin_moment(rng):
        return check_inv_smin_moment(n=200, s=100, trials=2000, rng=rng)

    def independence(rng):
        return check_independence(_noisy_problem(), s=50, trials=5000, rng=rng)

    def noise_event(rng):
        return check_noise_event(_noisy_problem(), s=50, trials=2000, rng=rng)

    def one_step_contraction(rng):
        a = gen_gaussian(400, 40, seed=21)
        problem = make_problem(a, NoiseSpec(), seed=22, model_tag="gaussian")
        spec = SketchSpec(kind=SketchKind.GAUSSIAN_BLOCK, block_size=8)
        return check_one_step_contraction(problem, spec, trials=500, rng=rng)

    return {
        "opnorm_tail": opnorm_tail,
        "small_ball": small_ball,
        "second_moment": second_moment,
        "inv_smin_moment": inv_smin_moment,
        "independence": independence,
        "noise_event": noise_event,
        "one_step_contraction": one_step_contraction,
    }


def run_checks(names="all", seed: int = 0) -> list[MCReport]:
    """Run a comma-separated subset (or all) of the canonical checks, each on
    its own seed-derived generator."""
    registry = default_checks()
    if names in ("all", None):
        selected = list(registry)
    else:
        selected = [n.strip() for n in names.split(",")] if isinstance(names, str) else list(names)
        unknown = [n for n in selected if n not in registry]
        if unknown:
            raise ParameterError(f"unknown checks: {', '.join(unknown)}; known: {', '.join(registry)}")
    reports = []
    for i, name in enumerate(selected):
        rng = np.random.default_rng([seed, i, 0xC0])
        reports.append(registry[name](rng))
    return reports
