"""Rank transforms and the empirical copula along the diagonal curve
u -> (u^(1-t), u^t), in raw, kernel-smoothed and leave-one-out forms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from evdep.errors import ParameterError, TieError


@dataclass(frozen=True, eq=False)
class PseudoSample:
    """Rank-transformed bivariate data.

    ``ranks[:, j]`` holds the 1-based ranks of column ``j``; ``pseudo`` is
    ``ranks / (n + 1)`` and ``z = -log(pseudo)``.
    """

    ranks: np.ndarray
    pseudo: np.ndarray = field(init=False)
    z: np.ndarray = field(init=False)
    # per-sample memo for derived quantities (e.g. jackknife matrices)
    cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.int64)
        n = ranks.shape[0]
        pseudo = ranks / (n + 1.0)
        z = -np.log(pseudo)
        for arr in (ranks, pseudo, z):
            arr.setflags(write=False)
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "pseudo", pseudo)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.ranks.shape[0]

    @classmethod
    def from_pseudo(cls, pseudo) -> PseudoSample:
        """Rebuild from pseudo-observations already on the k/(n+1) lattice."""
        pseudo = np.asarray(pseudo, dtype=float)
        n = pseudo.shape[0]
        ranks = np.rint(pseudo * (n + 1)).astype(np.int64)
        return cls(ranks)


def _column_ranks(col: np.ndarray) -> np.ndarray:
    order = np.argsort(col, kind="stable")
    ranks = np.empty(col.size, dtype=np.int64)
    ranks[order] = np.arange(1, col.size + 1)
    return ranks


def pseudo_observations(data) -> PseudoSample:
    """Replace each margin by its rescaled empirical distribution function,
    ``rank / (n + 1)``. Ties are rejected rather than midranked."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ParameterError(f"data must have shape (n, 2), got {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise ParameterError(f"need at least 2 observations, got {n}")
    if not np.all(np.isfinite(x)):
        raise ParameterError("data contain non-finite values")
    ranks = np.empty((n, 2), dtype=np.int64)
    for j in range(2):
        col = x[:, j]
        if np.unique(col).size != n:
            raise TieError(f"column {j + 1} contains tied values")
        ranks[:, j] = _column_ranks(col)
    return PseudoSample(ranks)


def read_csv_pairs(path: str | Path, header: bool | None = None) -> np.ndarray:
    """Read a two-column numeric CSV.

    With ``header=None`` the first row is treated as a header when it does
    not parse as numbers.
    """
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParameterError(f"{path}: no data rows")

    def numeric(row):
        try:
            [float(c) for c in row]
            return True
        except ValueError:
            return False

    if header is None:
        header = not numeric(rows[0])
    if header:
        rows = rows[1:]
    out = []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if len(row) != 2:
            raise ParameterError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            out.append([float(row[0]), float(row[1])])
        except ValueError:
            raise ParameterError(f"{path}:{lineno}: non-numeric value") from None
    return np.asarray(out)


# -- raw empirical copula on the diagonal curve ------------------------------


def _check_t(t: float, open_interval: bool = False) -> float:
    t = float(t)
    if open_interval and not 0.0 < t < 1.0:
        raise ParameterError(f"t must lie in (0, 1), got {t}")
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"t must lie in [0, 1], got {t}")
    return t


def diag_min_statistics(ps: PseudoSample, t: float) -> np.ndarray:
    """``M_i(t) = min(Z_i1 / (1 - t), Z_i2 / t)``; at t = 0 or 1 the
    degenerate term is dropped."""
    t = _check_t(t)
    z1, z2 = ps.z[:, 0], ps.z[:, 1]
    if t == 0.0:
        return z1.copy()
    if t == 1.0:
        return z2.copy()
    return np.minimum(z1 / (1.0 - t), z2 / t)


def _unsorted_jumps(ps: PseudoSample, t: float) -> np.ndarray:
    t = _check_t(t)
    p1, p2 = ps.pseudo[:, 0], ps.pseudo[:, 1]
    if t == 0.0:
        return p1.copy()
    if t == 1.0:
        return p2.copy()
    return np.maximum(p1 ** (1.0 / (1.0 - t)), p2 ** (1.0 / t))


def diag_jump_points(ps: PseudoSample, t: float) -> np.ndarray:
    """Sorted thresholds ``m_i(t)`` at which the diagonal empirical copula
    jumps by 1/n."""
    return np.sort(_unsorted_jumps(ps, t))


def empirical_copula_diag(ps: PseudoSample, t: float, u):
    """Empirical copula at ``(u^(1-t), u^t)``: the fraction of ``m_i(t) <= u``."""
    m = diag_jump_points(ps, t)
    u = np.asarray(u, dtype=float)
    out = np.searchsorted(m, u, side="right") / ps.n
    return float(out) if out.ndim == 0 else out


# -- smoothing kernels ---------------------------------------------------------


@dataclass(frozen=True)
class SmoothKernel:
    """A symmetric density on [-1, 1] together with its distribution function."""

    name: str
    density: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]


def _biweight_density(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) <= 1.0, 15.0 / 16.0 * (1.0 - x * x) ** 2, 0.0)


def _saturate(x, inner):
    # exact 0 and 1 outside the support; the polynomial alone leaves rounding residue
    x = np.asarray(x, dtype=float)
    return np.where(x <= -1.0, 0.0, np.where(x >= 1.0, 1.0, inner(np.clip(x, -1.0, 1.0))))


def _biweight_cdf(x):
    def inner(x):
        x2 = x * x
        return 0.5 + 15.0 / 16.0 * x * (1.0 - 2.0 * x2 / 3.0 + x2 * x2 / 5.0)

    return _saturate(x, inner)


def _epanechnikov_density(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) <= 1.0, 0.75 * (1.0 - x * x), 0.0)


def _epanechnikov_cdf(x):
    return _saturate(x, lambda x: 0.5 + 0.75 * (x - x**3 / 3.0))


BIWEIGHT = SmoothKernel("biweight", _biweight_density, _biweight_cdf)
EPANECHNIKOV = SmoothKernel("epanechnikov", _epanechnikov_density, _epanechnikov_cdf)
KERNELS = {k.name: k for k in (BIWEIGHT, EPANECHNIKOV)}


# -- smoothed empirical copula ---------------------------------------------------


def _diag_exponents(t: float) -> tuple[float, float]:
    t = _check_t(t, open_interval=True)
    return 1.0 / (1.0 - t), 1.0 / t


def _check_h(h: float) -> float:
    h = float(h)
    if not h > 0:
        raise ParameterError(f"bandwidth must be positive, got {h}")
    return h


def smoothed_copula_diag(ps: PseudoSample, t: float, u, h: float, kernel: SmoothKernel = BIWEIGHT):
    """Kernel-smoothed empirical copula at ``(u^(1-t), u^t)``.

    Each indicator ``I(F^(1/(1-t)) <= u)`` is replaced by ``K((u - F^(1/(1-t))) / h)``.
    """
    h = _check_h(h)
    e1, e2 = _diag_exponents(t)
    a = ps.pseudo[:, 0] ** e1
    b = ps.pseudo[:, 1] ** e2
    u = np.asarray(u, dtype=float)
    uu = np.atleast_1d(u)[:, None]
    vals = (kernel.cdf((uu - a) / h) * kernel.cdf((uu - b) / h)).mean(axis=1)
    return float(vals[0]) if u.ndim == 0 else vals


def loo_marginals(ps: PseudoSample, exclude_i: int) -> np.ndarray:
    """Leave-one-out marginal values ``F_{n,-i}(X_j)`` for all j != i.

    The divisor is n (not n - 1), so
    ``F_{n,-i}(X_j) = F_n(X_j) (n+1)/n - I(X_i <= X_j)/n``.
    """
    n = ps.n
    keep = np.arange(n) != exclude_i
    r = ps.ranks[keep]
    ri = ps.ranks[exclude_i]
    return (r - (r > ri)) / float(n)


def smoothed_copula_diag_loo(
    ps: PseudoSample, exclude_i: int, t: float, u, h: float, kernel: SmoothKernel = BIWEIGHT
):
    """Leave-one-out smoothed diagonal copula with observation ``exclude_i``
    removed; averages the remaining n - 1 kernel products."""
    if ps.n < 3:
        raise ParameterError("leave-one-out smoothing needs n >= 3")
    h = _check_h(h)
    e1, e2 = _diag_exponents(t)
    f = loo_marginals(ps, exclude_i)
    a, b = f[:, 0] ** e1, f[:, 1] ** e2
    u = np.asarray(u, dtype=float)
    uu = np.atleast_1d(u)[:, None]
    vals = (kernel.cdf((uu - a) / h) * kernel.cdf((uu - b) / h)).sum(axis=1) / (ps.n - 1)
    return float(vals[0]) if u.ndim == 0 else vals


def smoothed_copula_diag_loo_all(
    ps: PseudoSample, t: float, u, h: float, kernel: SmoothKernel = BIWEIGHT
) -> np.ndarray:
    """All leave-one-out smoothed values at once, shape ``(n, len(u))``.

    For j != i the leave-one-out marginal of X_j is ``R_j/n`` when
    ``R_j < R_i`` and ``(R_j - 1)/n`` otherwise, so each kernel factor is one
    of two precomputed vectors selected by a rank-comparison mask. The sum
    over j then reduces to three matrix products.
    """
    n = ps.n
    if n < 3:
        raise ParameterError("leave-one-out smoothing needs n >= 3")
    h = _check_h(h)
    e1, e2 = _diag_exponents(t)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    r1, r2 = ps.ranks[:, 0], ps.ranks[:, 1]

    def factors(r, e):
        below = kernel.cdf((u[None, :] - ((r / n) ** e)[:, None]) / h)
        above = kernel.cdf((u[None, :] - (((r - 1) / n) ** e)[:, None]) / h)
        return below, above

    b1, a1 = factors(r1, e1)
    b2, a2 = factors(r2, e2)
    d1, d2 = b1 - a1, b2 - a2
    m1 = (r1[None, :] < r1[:, None]).astype(float)
    m2 = (r2[None, :] < r2[:, None]).astype(float)
    base = a1 * a2
    s = base.sum(axis=0)[None, :] - base
    s += m1 @ (d1 * a2)
    s += m2 @ (a1 * d2)
    s += (m1 * m2) @ (d1 * d2)
    return s / (n - 1)
