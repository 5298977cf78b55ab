"""Jackknife empirical likelihood (JEL) confidence intervals for A(t).

The smoothed diagonal copula is jackknifed into pseudo-values
``V_i(u) = n C^s_n(u) - (n-1) C^s_{n,-i}(u)``, which are integrated against
the weight over the trimmed range ``[a_n, 1 - b_n]``:

    Q_i(theta) = int {V_i(u) - u^theta} lambda(u, t) du.

Empirical likelihood for the mean of Q_i at zero gives the log ratio
``l(theta) = 2 sum log(1 + beta Q_i)``, asymptotically chi-square(1) at the
true A(t).

Because ``theta`` only enters through the common term
``c(theta) = int u^theta lambda du``, the pseudo-value integrals are computed
once per (sample, t) and every evaluation of ``l`` is O(n).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from evdep.empirical import BIWEIGHT, PseudoSample, SmoothKernel, smoothed_copula_diag, smoothed_copula_diag_loo_all
from evdep.errors import (
    BracketError,
    EmptyIntervalError,
    InfeasibleThetaError,
    NumericDomainError,
    ParameterError,
)
from evdep.estimators import WeightKind, WeightSpec, adaptive_weighted
from evdep.numerics import QuadratureRule, chi2_quantile_1df, find_root

log = logging.getLogger(__name__)


class TuningWarning(UserWarning):
    """Bandwidth is large relative to the trimming."""


@dataclass(frozen=True)
class JelConfig:
    """Tuning for the JEL procedure.

    ``h=None`` means ``h_scale * n^(-1/3)``. Trimming defaults to the
    constant ``a_n = b_n = 0.1``; :meth:`rate_schedule` gives the decaying
    ``d n^(-rate)`` alternatives.
    """

    h: float | None = None
    h_scale: float = 0.5
    a_n: float = 0.1
    b_n: float = 0.1
    kernel: SmoothKernel = BIWEIGHT
    weight: WeightSpec = field(default_factory=WeightSpec.adaptive)
    quad_order: int = 200
    beta_tol: float = 1e-11
    theta_min: float = 1e-6
    theta_max: float = 64.0
    endpoint_tol: float = 1e-6

    def __post_init__(self):
        if self.h is not None and not self.h > 0:
            raise ParameterError(f"bandwidth must be positive, got {self.h}")
        if not self.h_scale > 0:
            raise ParameterError(f"h_scale must be positive, got {self.h_scale}")
        if not (0 < self.a_n < 1 - self.b_n < 1):
            raise ParameterError(f"need 0 < a_n < 1 - b_n < 1, got a_n={self.a_n}, b_n={self.b_n}")
        if self.quad_order < 1:
            raise ParameterError("quad_order must be positive")

    @classmethod
    def rate_schedule(
        cls, n: int, d1: float, a: float, d2: float, b: float, d3: float = 0.5, **kw
    ) -> JelConfig:
        """``a_n = d1 n^-a``, ``b_n = d2 n^-b``, ``h = d3 n^(-1/3)``."""
        return cls(h=d3 * n ** (-1 / 3), a_n=d1 * n**-a, b_n=d2 * n**-b, **kw)

    def bandwidth(self, n: int) -> float:
        h = self.h if self.h is not None else self.h_scale * n ** (-1.0 / 3.0)
        # slack absorbs rounding in n^(-1/3), e.g. exactly 0.05 at n = 1000
        if max(h / self.a_n, h / self.b_n) > 0.5 + 1e-12:
            warnings.warn(
                f"bandwidth {h:.4g} is large relative to trimming ({self.a_n:g}, {self.b_n:g})",
                TuningWarning,
                stacklevel=2,
            )
        return h

    def describe(self, n: int | None = None) -> dict:
        h = "0.5*n^(-1/3)" if self.h is None and self.h_scale == 0.5 else self.h
        if n is not None and self.h is None:
            h = self.h_scale * n ** (-1.0 / 3.0)
        return {
            "h": h,
            "a_n": self.a_n,
            "b_n": self.b_n,
            "kernel": self.kernel.name,
            "weight": str(self.weight),
            "quad_order": self.quad_order,
        }


# -- building blocks -------------------------------------------------------------


def quadrature_nodes(cfg: JelConfig) -> tuple[np.ndarray, np.ndarray]:
    rule = QuadratureRule.gauss_legendre(cfg.quad_order)
    return rule.on(cfg.a_n, 1.0 - cfg.b_n)


def jackknife_pseudovalues(ps: PseudoSample, t: float, u_nodes, cfg: JelConfig) -> np.ndarray:
    """Matrix ``V[i, k]`` of jackknife pseudo-values at the nodes ``u_nodes``."""
    if ps.n < 3:
        raise ParameterError("jackknife needs n >= 3")
    h = cfg.bandwidth(ps.n)
    u = np.atleast_1d(np.asarray(u_nodes, dtype=float))
    full = smoothed_copula_diag(ps, t, u, h, cfg.kernel)
    loo = smoothed_copula_diag_loo_all(ps, t, u, h, cfg.kernel)
    return ps.n * full[None, :] - (ps.n - 1) * loo


def _weighted_nodes(t: float, cfg: JelConfig, q: float | None) -> tuple[np.ndarray, np.ndarray]:
    u, w = quadrature_nodes(cfg)
    lam = cfg.weight.values(u, t, q)
    if not np.all(np.isfinite(lam)):
        raise NumericDomainError("weight is not finite at a quadrature node")
    return u, w * lam


def q_values(V: np.ndarray, t: float, theta: float, cfg: JelConfig, q: float | None = None) -> np.ndarray:
    """``Q_i(theta)``: trimmed weighted integral of ``V_i(u) - u^theta``.

    ``q`` is the power-log exponent and is required when ``cfg.weight`` is
    adaptive.
    """
    if not theta > 0:
        raise ParameterError(f"theta must be positive, got {theta}")
    u, wl = _weighted_nodes(t, cfg, q)
    return V @ wl - float(np.dot(wl, u**theta))


def solve_lagrange(Q, tol: float = 1e-11, max_iter: int = 200) -> float:
    """Multiplier ``beta`` solving ``mean(Q / (1 + beta Q)) = 0``.

    Safeguarded Newton iteration inside ``(-1/max Q, -1/min Q)``; raises
    :class:`InfeasibleThetaError` when zero is not strictly inside the range
    of ``Q``.
    """
    Q = np.asarray(Q, dtype=float)
    qmin, qmax = float(Q.min()), float(Q.max())
    if not (qmin < 0.0 < qmax):
        raise InfeasibleThetaError("zero is not inside the convex hull of Q")
    lo, hi = -1.0 / qmax, -1.0 / qmin
    scale = tol * (1.0 + max(abs(qmin), abs(qmax)))
    beta = 0.0
    for _ in range(max_iter):
        d = 1.0 + beta * Q
        r = Q / d
        f = float(r.mean())
        if abs(f) <= scale:
            return beta
        if f > 0:
            lo = beta
        else:
            hi = beta
        step = f / float((r * r).mean())
        nxt = beta + step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if nxt == beta or hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(beta)):
            return beta
        beta = nxt
    return beta


def log_el_ratio(Q) -> float:
    """``2 sum log(1 + beta Q_i)``; ``inf`` when ``Q`` is infeasible."""
    try:
        beta = solve_lagrange(Q)
    except InfeasibleThetaError:
        return math.inf
    return 2.0 * float(np.sum(np.log1p(beta * np.asarray(Q))))


# -- per-sample fit ----------------------------------------------------------------


@dataclass(frozen=True)
class JelInterval:
    level: float
    lo: float
    hi: float
    point: float
    lo_open: bool = False
    hi_open: bool = False

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass
class JelFit:
    """Pseudo-values for one (sample, t) and the log ratio built on them."""

    ps: PseudoSample
    t: float
    cfg: JelConfig
    q: float | None
    nodes: np.ndarray
    node_weights: np.ndarray  # quadrature weight times lambda
    V: np.ndarray
    qv: np.ndarray  # int V_i lambda over the trimmed range
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def build(cls, ps: PseudoSample, t: float, cfg: JelConfig) -> JelFit:
        key = ("jel", float(t), cfg)
        hit = ps.cache.get(key)
        if hit is not None:
            return hit
        t = float(t)
        if not 0.0 < t < 1.0:
            raise ParameterError(f"t must lie in (0, 1), got {t}")
        q = None
        if cfg.weight.kind is WeightKind.POWER_LOG:
            # frozen once per sample, not re-estimated per candidate theta
            q = cfg.weight.resolve_q(ps, t)
        u, wl = _weighted_nodes(t, cfg, q)
        V = jackknife_pseudovalues(ps, t, u, cfg)
        fit = cls(ps, t, cfg, q, u, wl, V, V @ wl)
        ps.cache[key] = fit
        return fit

    def shift(self, theta: float) -> float:
        return float(np.dot(self.node_weights, self.nodes**theta))

    def Q(self, theta: float) -> np.ndarray:
        if not theta > 0:
            raise ParameterError(f"theta must be positive, got {theta}")
        return self.qv - self.shift(theta)

    def ratio(self, theta: float) -> float:
        return log_el_ratio(self.Q(theta))

    def beta(self, theta: float) -> float:
        return solve_lagrange(self.Q(theta), self.cfg.beta_tol)

    def point_estimate(self) -> float:
        """The theta with ``sum Q_i(theta) = 0``, where ``l`` attains 0."""
        target = float(self.qv.mean())

        def g(theta):
            return self.shift(theta) - target

        lo0 = 0.5 * max(self.t, 1 - self.t)
        for lo, hi in ((lo0, 1.5), (self.cfg.theta_min, self.cfg.theta_max)):
            try:
                return find_root(g, lo, hi, tol=1e-12)
            except BracketError:
                continue
        # sum Q has no zero: fall back to minimising l over the search range
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(
            lambda th: min(self.ratio(th), 1e300),
            bounds=(self.cfg.theta_min, self.cfg.theta_max),
            method="bounded",
        )
        self.diagnostics["point_fallback"] = True
        return float(res.x)

    def _edge(self, inside: float, outside: float, crit: float) -> float:
        tol = self.cfg.endpoint_tol
        while abs(outside - inside) > tol:
            mid = 0.5 * (inside + outside)
            if self.ratio(mid) <= crit:
                inside = mid
            else:
                outside = mid
        return 0.5 * (inside + outside)

    def interval(self, level: float, point: float | None = None) -> JelInterval:
        """Connected piece of ``{theta : l(theta) <= chi2_level}`` around the
        minimiser of ``l``."""
        crit = chi2_quantile_1df(level)
        theta_hat = self.point_estimate() if point is None else point
        if self.ratio(theta_hat) > crit:
            raise EmptyIntervalError(f"l(theta_hat) = {self.ratio(theta_hat):.4g} exceeds {crit:.4g}")

        lo_open = hi_open = False
        below = min(0.5 * max(self.t, 1 - self.t), 0.5 * theta_hat)
        while self.ratio(below) <= crit:
            if below <= self.cfg.theta_min:
                lo_open = True
                break
            below = max(0.5 * below, self.cfg.theta_min)
        lo = self.cfg.theta_min if lo_open else self._edge(theta_hat, below, crit)

        above = max(1.5, 1.5 * theta_hat)
        while self.ratio(above) <= crit:
            if above >= self.cfg.theta_max:
                hi_open = True
                break
            above = min(2.0 * above, self.cfg.theta_max)
        hi = self.cfg.theta_max if hi_open else self._edge(theta_hat, above, crit)

        if lo_open or hi_open:
            self.diagnostics.setdefault("half_open", []).append(level)
        return JelInterval(level, lo, hi, theta_hat, lo_open, hi_open)


# -- functional API ------------------------------------------------------------------


def jel_ratio(ps: PseudoSample, t: float, theta: float, cfg: JelConfig | None = None) -> float:
    """Log JEL ratio ``l(theta)``; ``inf`` when theta is infeasible."""
    return JelFit.build(ps, t, cfg or JelConfig()).ratio(theta)


def jel_confidence_interval(
    ps: PseudoSample, t: float, level: float, cfg: JelConfig | None = None
) -> tuple[float, float]:
    iv = JelFit.build(ps, t, cfg or JelConfig()).interval(level)
    return iv.lo, iv.hi


@dataclass
class JelProfile:
    theta_grid: np.ndarray
    ratios: np.ndarray
    betas: np.ndarray
    point_estimate: float
    intervals: dict[float, JelInterval]
    diagnostics: dict


def jel_profile(
    ps: PseudoSample,
    t: float,
    cfg: JelConfig | None = None,
    theta_grid=None,
    levels=(0.9, 0.95),
) -> JelProfile:
    """Evaluate ``l`` on a grid together with the point estimate and
    intervals. Non-unimodal profiles are logged, not raised."""
    cfg = cfg or JelConfig()
    fit = JelFit.build(ps, t, cfg)
    point = fit.point_estimate()
    if theta_grid is None:
        theta_grid = np.linspace(0.5 * max(t, 1 - t), 1.2, 141)
    grid = np.asarray(theta_grid, dtype=float)
    ratios = np.array([fit.ratio(th) for th in grid])
    betas = np.array([fit.beta(th) if np.isfinite(r) else np.nan for th, r in zip(grid, ratios)])
    finite = ratios[np.isfinite(ratios)]
    if finite.size > 2:
        k = int(np.argmin(finite))
        if np.any(np.diff(finite[: k + 1]) > 1e-9) or np.any(np.diff(finite[k:]) < -1e-9):
            log.warning("JEL profile at t=%g is not unimodal on the grid", t)
    intervals = {}
    for level in levels:
        try:
            intervals[level] = fit.interval(level, point)
        except EmptyIntervalError as exc:
            fit.diagnostics.setdefault("empty", []).append(str(exc))
    diag = dict(fit.diagnostics)
    diag.update(q=fit.q, q_range=(float(fit.qv.min()), float(fit.qv.max())), adaptive_estimate=adaptive_weighted(ps, t))
    return JelProfile(grid, ratios, betas, point, intervals, diag)
