"""Shared numerical kernels: Gauss-Legendre quadrature, bracketed root
finding, normal/gamma special functions, chi-square(1) quantiles and
reproducible random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import optimize, special

from evdep.errors import BracketError, NumericDomainError, ParameterError

DEFAULT_ORDER = 200
ROOT_TOL = 1e-10
EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on the reference interval (-1, 1)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    @classmethod
    def gauss_legendre(cls, order: int = DEFAULT_ORDER) -> QuadratureRule:
        return _gauss_legendre(int(order))

    def on(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights mapped affinely onto ``[lo, hi]``."""
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        return mid + half * self.nodes, half * self.weights


@lru_cache(maxsize=16)
def _gauss_legendre(order: int) -> QuadratureRule:
    if order < 1:
        raise ParameterError(f"quadrature order must be >= 1, got {order}")
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(nodes=x, weights=w, order=order)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    rule: QuadratureRule | None = None,
) -> float:
    """Gauss-Legendre approximation of the integral of ``f`` over ``[lo, hi]``.

    ``f`` is called once with the full node array and must return an array
    of the same shape.
    """
    if not lo < hi:
        raise ParameterError(f"need lo < hi, got [{lo}, {hi}]")
    rule = rule or QuadratureRule.gauss_legendre()
    x, w = rule.on(lo, hi)
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    if not np.all(np.isfinite(fx)):
        raise NumericDomainError("integrand is not finite at a quadrature node")
    return float(np.dot(w, fx))


def find_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = ROOT_TOL,
) -> float:
    """Brent's method on a sign-changing bracket ``[lo, hi]``."""
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    return optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def std_normal_cdf(x):
    """Standard normal distribution function (vectorised)."""
    return special.ndtr(x)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def log_gamma(x):
    """log Gamma(x) for x > 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise NumericDomainError("log_gamma requires x > 0")
    out = special.gammaln(arr)
    return float(out) if np.ndim(out) == 0 else out


def normal_quantile(p: float) -> float:
    """Inverse of ``std_normal_cdf`` obtained by root finding on it."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"probability must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    return find_root(lambda z: float(std_normal_cdf(z)) - p, -40.0, 40.0, tol=1e-14)


def chi2_quantile_1df(level: float) -> float:
    """The ``level`` quantile of the chi-square distribution with one degree
    of freedom, computed as the square of a normal quantile."""
    if not 0.0 < level < 1.0:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    z = normal_quantile(0.5 * (1.0 + level))
    return z * z


def euler_gamma() -> float:
    return EULER_GAMMA


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams with the same pair always produce the same draws; distinct
    ``stream_id`` values are statistically independent (SeedSequence spawn
    keys).
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))
