"""Exact tests for 2x2 tables and a z-score outlier screen.

Tables follow the column-as-group layout: column A holds (a successes, c
failures), column B holds (b successes, d failures).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

ALTERNATIVES = ("two-sided", "less", "greater")
_TIE_TOL = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DegenerateTableError(ValueError):
    pass


@dataclass(frozen=True)
class ContingencyTable2x2:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for name in "abcd":
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"count {name} must be a non-negative integer")
        if self.n1 == 0 or self.n2 == 0:
            raise DegenerateTableError("both column totals must be positive")

    @classmethod
    def from_rows(cls, rows) -> ContingencyTable2x2:
        (a, b), (c, d) = rows
        return cls(int(a), int(b), int(c), int(d))

    @classmethod
    def parse(cls, text: str) -> ContingencyTable2x2:
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError("table must be four comma-separated counts a,b,c,d")
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"table counts must be integers, got {text!r}") from None
        return cls(*vals)

    @property
    def n1(self) -> int:
        return self.a + self.c

    @property
    def n2(self) -> int:
        return self.b + self.d

    def rows(self) -> list[list[int]]:
        return [[self.a, self.b], [self.c, self.d]]

    def swap_groups(self) -> ContingencyTable2x2:
        return ContingencyTable2x2(self.b, self.a, self.d, self.c)

    def swap_outcomes(self) -> ContingencyTable2x2:
        return ContingencyTable2x2(self.c, self.d, self.a, self.b)


@dataclass(frozen=True)
class ExactTestResult:
    statistic: float
    p_value: float
    nuisance_argmax: float


def _as_table(table) -> ContingencyTable2x2:
    if isinstance(table, ContingencyTable2x2):
        return table
    return ContingencyTable2x2.from_rows(table)


def wald_pooled(table) -> float:
    """Difference in success proportions (A minus B) over its pooled standard error."""
    t = _as_table(table)
    return float(_wald_grid(np.array([t.a]), np.array([t.b]), t.n1, t.n2)[0, 0])


def _wald_grid(x1: np.ndarray, x2: np.ndarray, n1: int, n2: int) -> np.ndarray:
    x1 = np.asarray(x1, dtype=float)[:, None]
    x2 = np.asarray(x2, dtype=float)[None, :]
    p = (x1 + x2) / (n1 + n2)
    var = p * (1 - p) * (1.0 / n1 + 1.0 / n2)
    diff = x1 / n1 - x2 / n2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(var > 0, diff / np.sqrt(np.where(var > 0, var, 1.0)), 0.0)
    return out


def _log_binom_pmf(n: int, pis: np.ndarray) -> np.ndarray:
    """(len(pis), n+1) matrix of log Binom(x; n, pi)."""
    x = np.arange(n + 1, dtype=float)
    logc = np.array([math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1) for k in range(n + 1)])
    lp = np.log(pis)[:, None]
    lq = np.log1p(-pis)[:, None]
    return logc[None, :] + x[None, :] * lp + (n - x)[None, :] * lq


def _tail_prob(region: np.ndarray, n1: int, n2: int, pis) -> np.ndarray:
    pis = np.atleast_1d(np.asarray(pis, dtype=float))
    p1 = np.exp(_log_binom_pmf(n1, pis))
    p2 = np.exp(_log_binom_pmf(n2, pis))
    # sum over the rejection region of p1[x1] * p2[x2]
    return np.einsum("gi,ij,gj->g", p1, region, p2)


def rejection_region(table, alternative: str = "two-sided") -> np.ndarray:
    """Boolean (n1+1, n2+1) mask of tables at least as extreme as the observed one."""
    t = _as_table(table)
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}")
    T = _wald_grid(np.arange(t.n1 + 1), np.arange(t.n2 + 1), t.n1, t.n2)
    obs = wald_pooled(t)
    tol = _TIE_TOL * max(1.0, abs(obs))
    if alternative == "two-sided":
        return np.abs(T) >= abs(obs) - tol
    if alternative == "less":
        return T <= obs + tol
    return T >= obs - tol


def barnard_exact(table, alternative: str = "two-sided", grid_points: int = 1001,
                  refine_tol: float = 1e-6) -> ExactTestResult:
    """Barnard's unconditional exact test with the pooled Wald statistic.

    The tail probability of the rejection region is maximised over the common
    success probability: first on a uniform interior grid, then by
    golden-section search around each of the best grid points.
    ``alternative="less"`` tests whether group A's success rate is lower.
    """
    t = _as_table(table)
    if grid_points < 100:
        raise ValueError("grid_points must be at least 100")
    region = rejection_region(t, alternative).astype(float)
    stat = wald_pooled(t)
    if region.all():
        return ExactTestResult(stat, 1.0, 0.5)
    grid = np.linspace(0.0, 1.0, grid_points + 2)[1:-1]
    vals = _tail_prob(region, t.n1, t.n2, grid)
    h = grid[1] - grid[0]
    best_p, best_pi = float(vals.max()), float(grid[vals.argmax()])
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    candidates = set(int(i) for i in interior[np.argsort(vals[interior])[::-1][:4]])
    candidates.add(int(vals.argmax()))
    for i in sorted(candidates):
        lo = max(grid[i] - h, 1e-12)
        hi = min(grid[i] + h, 1 - 1e-12)
        pi, p = _golden_max(lambda x: float(_tail_prob(region, t.n1, t.n2, x)[0]), lo, hi, refine_tol)
        if p > best_p:
            best_p, best_pi = p, float(pi)
    return ExactTestResult(stat, min(1.0, best_p), best_pi)


def _golden_max(fn, lo: float, hi: float, tol: float) -> tuple[float, float]:
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = fn(x1), fn(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = fn(x1)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def fisher_exact(table) -> float:
    """Two-sided Fisher exact p: total probability of tables no more likely than the observed one."""
    t = _as_table(table)
    row1 = t.a + t.b
    lo = max(0, row1 - t.n2)
    hi = min(row1, t.n1)
    ks = np.arange(lo, hi + 1)
    logp = np.array([_log_hypergeom(int(k), t.n1, t.n2, row1) for k in ks])
    obs = _log_hypergeom(t.a, t.n1, t.n2, row1)
    keep = logp <= obs + 1e-7  # relative tie tolerance
    total = math.fsum(np.exp(logp[keep]))
    return min(1.0, total)


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _log_hypergeom(k: int, n1: int, n2: int, row1: int) -> float:
    return _log_comb(n1, k) + _log_comb(n2, row1 - k) - _log_comb(n1 + n2, row1)


def zscore_outliers(values: Sequence[float], threshold: float = 2.0) -> list[int]:
    """Indices whose sample z score (ddof=1) exceeds ``threshold``; only values above the mean count."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values")
    sd = float(np.std(x, ddof=1))
    if np.all(x == x[0]) or not sd > 0:
        raise ValueError("values have zero variance")
    z = (x - x.mean()) / sd
    return [int(i) for i in np.flatnonzero(z > threshold)]
