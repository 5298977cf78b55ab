"""Point estimators of the Pickands dependence function.

Known-margin estimators (Pickands, Deheuvels, Hall-Tajvidi, CFG) work on
Y = -log F(X). The rank-based estimators work on a :class:`PseudoSample`
and are all members of one weighted family: the estimate solves

    g(alpha) = int_0^1 {C_n(u^(1-t), u^t) - u^alpha} lambda(u, t) du = 0.

The empirical-copula part of g is a step function with jumps at
``m_i(t) = exp(-M_i(t))``, so it integrates exactly; for the power-log
weight ``lambda = u^-1 (-log u)^-q`` the whole equation has a closed form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import xlogy

from evdep.empirical import PseudoSample, diag_min_statistics
from evdep.errors import BracketError, NoRootError, ParameterError
from evdep.numerics import QuadratureRule, euler_gamma, find_root, log_gamma

DEFAULT_BRACKET = (1e-6, 8.0)
EXPANDED_BRACKET = (1e-8, 64.0)


# -- weights ---------------------------------------------------------------------


class WeightKind(str, enum.Enum):
    POWER_LOG = "powerlog"
    CUSTOM = "custom"


@dataclass(frozen=True)
class WeightSpec:
    """Weight function lambda(u, t) of the estimating equation.

    ``WeightSpec.power_log(q)`` gives ``u^-1 (-log u)^-q`` with fixed q;
    ``WeightSpec.adaptive()`` uses the same family with
    ``q(t) = min(A_cfg(t), 1)`` (clamped at 0 from below).
    ``WeightSpec.custom(fn, cumulative)`` accepts any nonnegative
    ``fn(u, t)``; ``cumulative(a, b, t)`` is its integral over [a, b] and is
    optional (quadrature otherwise).
    """

    kind: WeightKind = WeightKind.POWER_LOG
    q: float | None = None
    fn: Callable | None = None
    cumulative: Callable | None = None

    def __post_init__(self):
        if self.kind is WeightKind.POWER_LOG and self.q is not None:
            if not 0.0 <= self.q <= 1.0:
                raise ParameterError(f"power-log exponent q must lie in [0, 1], got {self.q}")
        if self.kind is WeightKind.CUSTOM and self.fn is None:
            raise ParameterError("custom weight needs a function")

    @classmethod
    def power_log(cls, q: float) -> WeightSpec:
        return cls(WeightKind.POWER_LOG, q=float(q))

    @classmethod
    def adaptive(cls) -> WeightSpec:
        return cls(WeightKind.POWER_LOG, q=None)

    @classmethod
    def custom(cls, fn: Callable, cumulative: Callable | None = None) -> WeightSpec:
        return cls(WeightKind.CUSTOM, fn=fn, cumulative=cumulative)

    @property
    def is_adaptive(self) -> bool:
        return self.kind is WeightKind.POWER_LOG and self.q is None

    def resolve_q(self, ps: PseudoSample, t: float) -> float:
        if self.kind is not WeightKind.POWER_LOG:
            raise ParameterError("only power-log weights have an exponent")
        if self.q is not None:
            return self.q
        return adaptive_q(ps, t)

    def values(self, u, t: float, q: float | None = None) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind is WeightKind.CUSTOM:
            return np.asarray(self.fn(u, t), dtype=float)
        q = self.q if q is None else q
        if q is None:
            raise ParameterError("adaptive weight needs q resolved against a sample")
        return 1.0 / (u * (-np.log(u)) ** q)

    def __str__(self):
        if self.kind is WeightKind.CUSTOM:
            return "custom"
        return "adaptive" if self.q is None else f"powerlog:{self.q:g}"


def power_log_integral(lo: float, hi: float, q: float) -> float:
    """Integral of ``u^-1 (-log u)^-q`` over ``[lo, hi]`` within (0, 1)."""
    s_hi, s_lo = -math.log(lo), -math.log(hi)
    if q == 1.0:
        return math.log(s_hi) - math.log(s_lo)
    return (s_hi ** (1 - q) - s_lo ** (1 - q)) / (1 - q)


# -- known margins -------------------------------------------------------------------


@dataclass(frozen=True)
class KnownMarginSample:
    """Observations on the exponential scale, ``Y_ij = -log F_j(X_ij) > 0``."""

    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 2 or y.shape[1] != 2 or y.shape[0] < 1:
            raise ParameterError(f"y must have shape (n, 2), got {y.shape}")
        if not np.all(y > 0) or not np.all(np.isfinite(y)):
            raise ParameterError("Y values must be positive and finite")
        object.__setattr__(self, "y", y)

    @classmethod
    def from_uniforms(cls, uv) -> KnownMarginSample:
        return cls(-np.log(np.asarray(uv, dtype=float)))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def ratios(self) -> np.ndarray:
        return self.y[:, 0] / self.y.sum(axis=1)


def _cfg_piece_integral(z_sorted: np.ndarray, lo: float, hi: float) -> float:
    # int_lo^hi (H_n(z) - z) / (z (1 - z)) dz with H_n right-continuous
    n = z_sorted.size
    inner = z_sorted[(z_sorted > lo) & (z_sorted < hi)]
    edges = np.concatenate(([lo], inner, [hi]))
    c = np.searchsorted(z_sorted, edges[:-1], side="right") / n

    def anti(c, z):
        return xlogy(c, z) - xlogy(c - 1.0, 1.0 - z)

    return float(np.sum(anti(c, edges[1:]) - anti(c, edges[:-1])))


def known_margin_estimate(
    sample: KnownMarginSample, t: float, variant: str, lambda_t: float | None = None
) -> float:
    """Classical estimators with known margins: ``"P"``, ``"D"``, ``"HT"`` or
    ``"CFG"`` (the latter with weight ``lambda_t``, default ``t``)."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"t must lie in [0, 1], got {t}")
    y1, y2 = sample.y[:, 0], sample.y[:, 1]
    n = sample.n
    variant = variant.upper()

    def min_ratio(a, b):
        # min(a / t, b / (1 - t)) with the limit convention at the endpoints
        if t == 0.0:
            return b
        if t == 1.0:
            return a
        return np.minimum(a / t, b / (1.0 - t))

    if variant == "P":
        return n / float(min_ratio(y1, y2).sum())
    if variant == "D":
        denom = min_ratio(y1, y2).sum() - t * y1.sum() - (1 - t) * y2.sum() + n
        return n / float(denom)
    if variant == "HT":
        return n / float(min_ratio(n * y1 / y1.sum(), n * y2 / y2.sum()).sum())
    if variant == "CFG":
        lam = t if lambda_t is None else float(lambda_t)
        if not 0.0 <= lam <= 1.0:
            raise ParameterError(f"CFG weight must lie in [0, 1], got {lam}")
        z = np.sort(sample.ratios)
        left = _cfg_piece_integral(z, 0.0, t) if t > 0 else 0.0
        right = _cfg_piece_integral(z, t, 1.0) if t < 1 else 0.0
        return math.exp(lam * left - (1 - lam) * right)
    raise ParameterError(f"unknown variant {variant!r}")


# -- rank-based estimators ---------------------------------------------------------


def _interior(t: float) -> bool:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"t must lie in [0, 1], got {t}")
    return 0.0 < t < 1.0


def pickands_rank(ps: PseudoSample, t: float) -> float:
    """Rank-based Pickands estimator ``n / sum_i M_i(t)``."""
    _interior(t)
    return ps.n / float(diag_min_statistics(ps, t).sum())


def cfg_rank(ps: PseudoSample, t: float) -> float:
    """Rank-based CFG estimator ``exp(-gamma - mean_i log M_i(t))``.

    ``M_i(t)`` is approximately exponential with rate A(t), so
    ``E log M = -gamma - log A(t)``. This is also the q -> 1 limit of
    :func:`weighted_closed_form`. Returns 1 at the endpoints; no projection
    onto the Pickands envelope.
    """
    if not _interior(t):
        return 1.0
    return math.exp(-euler_gamma() - float(np.log(diag_min_statistics(ps, t)).mean()))


def weighted_closed_form(ps: PseudoSample, t: float, q: float) -> float:
    """Weighted estimator for ``lambda(u, t) = u^-1 (-log u)^-q``.

    q = 0 reproduces :func:`pickands_rank`; q = 1 is defined by continuity
    and equals :func:`cfg_rank`.
    """
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ParameterError(f"q must lie in [0, 1], got {q}")
    if not _interior(t):
        return 1.0
    if q == 1.0:
        return cfg_rank(ps, t)
    m = diag_min_statistics(ps, t)
    log_mean = math.log(float(np.mean(m ** (1.0 - q))))
    return math.exp(-(log_mean - log_gamma(2.0 - q)) / (1.0 - q))


def adaptive_q(ps: PseudoSample, t: float) -> float:
    """Data-driven exponent ``min(A_cfg(t), 1)``, also clamped at 0."""
    return min(max(cfg_rank(ps, t), 0.0), 1.0)


def adaptive_weighted(ps: PseudoSample, t: float) -> float:
    """Weighted estimator with the adaptive exponent ``q(t) = min(A_cfg(t), 1)``."""
    if not _interior(t):
        return 1.0
    return weighted_closed_form(ps, t, adaptive_q(ps, t))


def _quad_cumulative(weight: WeightSpec, lo: np.ndarray, t: float, rule: QuadratureRule) -> np.ndarray:
    # int_{lo_i}^1 lambda(u, t) du for each lower limit, one rule per interval
    half = 0.5 * (1.0 - lo)
    nodes = (0.5 * (1.0 + lo))[:, None] + half[:, None] * rule.nodes[None, :]
    vals = weight.values(nodes, t)
    return half * (vals @ rule.weights)


def weighted_equation(
    neg_log_jumps: np.ndarray,
    t: float,
    weight: WeightSpec,
    q: float | None = None,
    rule: QuadratureRule | None = None,
) -> Callable[[float], float]:
    """The monotone function g(alpha) for a diagonal step function with
    jumps at ``exp(-neg_log_jumps)``, each of height 1/n."""
    m = np.asarray(neg_log_jumps, dtype=float)
    if weight.kind is WeightKind.POWER_LOG:
        q = weight.q if q is None else q
        if q is None:
            raise ParameterError("adaptive weight needs q resolved against a sample")
        if q >= 1.0:
            raise ParameterError("the q = 1 weight is not integrable; use cfg_rank")
        step_part = float(np.mean(m ** (1.0 - q))) / (1.0 - q)
        gamma_term = math.exp(log_gamma(1.0 - q))

        def g(alpha):
            return step_part - alpha ** (q - 1.0) * gamma_term

        return g

    rule = rule or QuadratureRule.gauss_legendre()
    lo = np.exp(-m)
    if weight.cumulative is not None:
        step_part = float(np.mean([weight.cumulative(a, 1.0, t) for a in lo]))
    else:
        step_part = float(np.mean(_quad_cumulative(weight, lo, t, rule)))
    x, w = rule.on(0.0, 1.0)
    lam = weight.values(x, t)

    def g(alpha):
        return step_part - float(np.dot(w, x**alpha * lam))

    return g


def solve_weighted_equation(g: Callable[[float], float], bracket=DEFAULT_BRACKET, tol: float = 1e-12) -> float:
    """Root of the increasing function ``g``; widens ``bracket`` once before
    giving up."""
    for lo, hi in (bracket, EXPANDED_BRACKET):
        try:
            return find_root(g, lo, hi, tol=tol)
        except BracketError:
            continue
    raise NoRootError("estimating equation has no root in (1e-8, 64); sample is degenerate")


def weighted_root_solve(
    ps: PseudoSample,
    t: float,
    weight: WeightSpec,
    alpha_bracket=DEFAULT_BRACKET,
    rule: QuadratureRule | None = None,
) -> float:
    """Solve the weighted estimating equation for a general weight."""
    if not _interior(t):
        return 1.0
    q = None
    if weight.kind is WeightKind.POWER_LOG:
        q = weight.resolve_q(ps, t)
        if q == 1.0:
            return cfg_rank(ps, t)
    g = weighted_equation(diag_min_statistics(ps, t), t, weight, q=q, rule=rule)
    return solve_weighted_equation(g, alpha_bracket)


# -- optional post-processing --------------------------------------------------------


def project_to_envelope(t_grid, estimates) -> np.ndarray:
    """Clip into ``[max(t, 1-t), 1]`` and take the greatest convex minorant
    over the grid. Off by default everywhere; estimates are reported raw."""
    t = np.asarray(t_grid, dtype=float)
    a = np.asarray(estimates, dtype=float)
    order = np.argsort(t)
    t, a = t[order], a[order]
    a = np.clip(a, np.maximum(t, 1 - t), 1.0)
    hull: list[int] = []
    for k in range(t.size):
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            cross = (t[j] - t[i]) * (a[k] - a[i]) - (a[j] - a[i]) * (t[k] - t[i])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(k)
    out = np.interp(t, t[hull], a[hull])
    result = np.empty_like(out)
    result[order] = out
    return result
