"""Parametric bivariate extreme-value copulas (Gumbel, Husler-Reiss, Tawn).

Every family is represented through its Pickands dependence function A,
from which the copula and its first partial derivatives follow via

    C(u, v) = exp{log(uv) A(log v / log(uv))}.

Sampling uses conditional inversion on dC/du, so any family that provides
A and A' gets an exact sampler for free.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from evdep.errors import NumericDomainError, ParameterError
from evdep.numerics import RngStream, std_normal_cdf


class Family(str, enum.Enum):
    GUMBEL = "gumbel"
    HUSLER_REISS = "husler-reiss"
    TAWN = "tawn"

    @classmethod
    def parse(cls, name: str | Family) -> Family:
        if isinstance(name, Family):
            return name
        key = name.strip().lower().replace("_", "-").replace("ü", "u")
        aliases = {"hr": "husler-reiss", "huslerreiss": "husler-reiss"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ParameterError(f"unknown copula family {name!r}") from None

    @property
    def label(self) -> str:
        return {"gumbel": "Gumbel", "husler-reiss": "Husler-Reiss", "tawn": "Tawn"}[self.value]


_BISECT_STEPS = 48


@dataclass(frozen=True)
class PickandsModel:
    """An extreme-value copula from one of the supported families.

    Parameter ranges: Gumbel ``theta >= 1``; Husler-Reiss ``theta > 0``;
    Tawn ``0 <= theta <= 1`` (the range for which ``1 - theta t + theta t^2``
    stays a valid Pickands function).
    """

    family: Family
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        theta = float(self.theta)
        object.__setattr__(self, "theta", theta)
        ok = {
            Family.GUMBEL: theta >= 1.0,
            Family.HUSLER_REISS: theta > 0.0,
            Family.TAWN: 0.0 <= theta <= 1.0,
        }[self.family]
        if not (ok and np.isfinite(theta)):
            raise ParameterError(f"invalid theta={theta} for {self.family.label} copula")

    def __str__(self):
        return f"{self.family.label}({self.theta:g})"

    # -- Pickands function ---------------------------------------------------

    def A(self, t):
        """Pickands dependence function; exactly 1 at t = 0 and t = 1."""
        t = np.asarray(t, dtype=float)
        if np.any((t < 0) | (t > 1)):
            raise ParameterError("t must lie in [0, 1]")
        inner = np.clip(t, 1e-300, 1 - 1e-16)
        out = self._A_inner(inner)
        out = np.where((t == 0) | (t == 1), 1.0, out)
        return float(out) if out.ndim == 0 else out

    def _A_inner(self, t):
        th = self.theta
        if self.family is Family.GUMBEL:
            if th == 1.0:
                return np.ones_like(t)
            return (t**th + (1 - t) ** th) ** (1 / th)
        if self.family is Family.TAWN:
            return 1 - th * t + th * t * t
        with np.errstate(divide="ignore"):
            s = np.log(t) - np.log1p(-t)
        a = th - s / (2 * th)
        b = th + s / (2 * th)
        return (1 - t) * std_normal_cdf(a) + t * std_normal_cdf(b)

    def A_prime(self, t):
        """Derivative of A on the open interval (0, 1)."""
        t = np.asarray(t, dtype=float)
        if np.any((t <= 0) | (t >= 1)):
            raise NumericDomainError("A'(t) is evaluated only for t in (0, 1)")
        out = self._A_prime_inner(t)
        return float(out) if out.ndim == 0 else out

    def _A_prime_inner(self, t):
        th = self.theta
        if self.family is Family.GUMBEL:
            if th == 1.0:
                return np.zeros_like(t)
            return (t ** (th - 1) - (1 - t) ** (th - 1)) * (t**th + (1 - t) ** th) ** (1 / th - 1)
        if self.family is Family.TAWN:
            return -th + 2 * th * t
        # (1-t) phi(a) = t phi(b), so the density terms of the chain rule cancel.
        with np.errstate(divide="ignore"):
            s = np.log(t) - np.log1p(-t)
        a = th - s / (2 * th)
        b = th + s / (2 * th)
        return std_normal_cdf(b) - std_normal_cdf(a)

    # -- copula ----------------------------------------------------------------

    def cdf(self, u, v):
        """C(u, v), extended to the boundary of the unit square by continuity."""
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
            raise ParameterError("copula arguments must lie in [0, 1]")
        interior = (u > 0) & (u < 1) & (v > 0) & (v < 1)
        uu = np.where(interior, u, 0.5)
        vv = np.where(interior, v, 0.5)
        lu, lv = np.log(uu), np.log(vv)
        L = lu + lv
        out = np.exp(L * self._A_inner(lv / L))
        out = np.where(interior, out, 0.0)
        out = np.where((u == 1) & (v > 0), v, out)
        out = np.where((v == 1) & (u > 0), u, out)
        return float(out) if out.ndim == 0 else out

    def _partials(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        if np.any((u <= 0) | (u >= 1) | (v <= 0) | (v >= 1)):
            raise NumericDomainError("partial derivatives require (u, v) in (0, 1)^2")
        lu, lv = np.log(u), np.log(v)
        L = lu + lv
        w = lv / L
        a, ap = self._A_inner(w), self._A_prime_inner(w)
        logc = L * a
        return u, v, w, a, ap, logc, lu, lv

    def partial_u(self, u, v):
        """dC/du, i.e. the conditional distribution of V given U = u."""
        _, _, w, a, ap, logc, lu, _ = self._partials(u, v)
        out = np.clip(np.exp(logc - lu) * (a - w * ap), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def partial_v(self, u, v):
        """dC/dv, i.e. the conditional distribution of U given V = v."""
        _, _, w, a, ap, logc, _, lv = self._partials(u, v)
        out = np.clip(np.exp(logc - lv) * (a + (1 - w) * ap), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def partial_u_diag(self, u, t):
        """dC/du at (u^(1-t), u^t), written directly in terms of A(t), A'(t)."""
        u = np.asarray(u, dtype=float)
        a, ap = self._A_inner(np.asarray(t, float)), self._A_prime_inner(np.asarray(t, float))
        out = u ** (a - (1 - t)) * (a - t * ap)
        return float(out) if np.ndim(out) == 0 else out

    def partial_v_diag(self, u, t):
        """dC/dv at (u^(1-t), u^t)."""
        u = np.asarray(u, dtype=float)
        a, ap = self._A_inner(np.asarray(t, float)), self._A_prime_inner(np.asarray(t, float))
        out = u ** (a - t) * (a + (1 - t) * ap)
        return float(out) if np.ndim(out) == 0 else out

    # -- sampling ----------------------------------------------------------------

    def _cond_cdf(self, lu, v):
        # dC/du(u, v) with log u precomputed; v strictly inside (0, 1)
        lv = np.log(v)
        L = lu + lv
        w = lv / L
        a, ap = self._A_inner(w), self._A_prime_inner(w)
        return np.exp(L * a - lu) * (a - w * ap)

    def sample(self, n: int, rng: RngStream | np.random.Generator, *, return_resamples: bool = False):
        """Draw ``n`` i.i.d. pairs from the copula by conditional inversion.

        U is uniform; V solves dC/du(U, V) = P for an independent uniform P,
        found by bisection to well below 1e-10. Draws whose bracket is
        numerically degenerate are redrawn; the number of redraws is returned
        when ``return_resamples`` is set.
        """
        if n < 1:
            raise ParameterError(f"sample size must be >= 1, got {n}")
        gen = rng.generator() if isinstance(rng, RngStream) else rng
        out = np.empty((n, 2))
        todo = np.arange(n)
        resamples = 0
        lo_v, hi_v = 1e-300, np.nextafter(1.0, 0.0)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            while todo.size:
                k = todo.size
                u = gen.random(k)
                p = gen.random(k)
                ok = (u > 0) & (u < 1) & (p > 0)
                lu = np.log(np.where(ok, u, 0.5))
                f_lo = self._cond_cdf(lu, np.full(k, lo_v)) - p
                f_hi = self._cond_cdf(lu, np.full(k, hi_v)) - p
                ok &= (f_lo <= 0) & (f_hi >= 0)
                lo = np.zeros(k)
                hi = np.ones(k)
                for _ in range(_BISECT_STEPS):
                    mid = 0.5 * (lo + hi)
                    below = self._cond_cdf(lu, mid) < p
                    lo = np.where(below, mid, lo)
                    hi = np.where(below, hi, mid)
                v = 0.5 * (lo + hi)
                ok &= np.isfinite(v) & (v > 0) & (v < 1)
                good = todo[ok]
                out[good, 0] = u[ok]
                out[good, 1] = v[ok]
                resamples += int(k - ok.sum())
                todo = todo[~ok]
        if return_resamples:
            return out, resamples
        return out


def pickands_A(model: PickandsModel, t):
    return model.A(t)


def pickands_A_prime(model: PickandsModel, t):
    return model.A_prime(t)


def copula_cdf(model: PickandsModel, u, v):
    return model.cdf(u, v)


def copula_partial_u(model: PickandsModel, u, v):
    return model.partial_u(u, v)


def copula_partial_v(model: PickandsModel, u, v):
    return model.partial_v(u, v)


def sample(model: PickandsModel, n: int, rng: RngStream | np.random.Generator):
    return model.sample(n, rng)
