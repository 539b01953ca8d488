"""Perron-Frobenius data and cycle-mean searches on small weighted graphs."""

from __future__ import annotations

import numpy as np


class ReducibleGraphError(ValueError):
    """The weighted graph is not strongly connected."""


def strongly_connected(adj: np.ndarray) -> bool:
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[0]

    def reach(a: np.ndarray) -> int:
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = seen.copy()
        while frontier.any():
            nxt = a[frontier].any(axis=0) & ~seen
            seen |= nxt
            frontier = nxt
        return int(seen.sum())

    return reach(adj) == n and reach(adj.T) == n


def _positive_eigvec(M: np.ndarray, tol: float, max_iter: int) -> tuple[float, np.ndarray]:
    n = M.shape[0]
    # M + sI is primitive whenever M is irreducible, so plain power iteration converges.
    shift = float(M.sum(axis=1).mean())
    B = M + shift * np.eye(n)
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        y = B @ x
        y /= y.sum()
        if np.abs(y - x).max() < 1e-11:
            x = y
            break
        x = y
    lam = float((M @ x).sum() / x.sum())
    # Rayleigh-type refinement by inverse iteration around the current estimate.
    for _ in range(30):
        resid = np.abs(M @ x - lam * x).max()
        if resid <= tol * lam * x.max():
            break
        try:
            y = np.linalg.solve(M - lam * (1 + 1e-13) * np.eye(n), x)
        except np.linalg.LinAlgError:
            break
        y = np.abs(y)
        y /= y.sum()
        x = y
        lam = float((M @ x).sum() / x.sum())
    return lam, x


def perron(M: np.ndarray, tol: float = 1e-14, max_iter: int = 100_000) -> tuple[float, np.ndarray, np.ndarray]:
    """Leading eigenvalue with positive right and left eigenvectors.

    ``h`` is normalised to sum 1 and ``nu`` so that ``nu @ h == 1``.
    Raises :class:`ReducibleGraphError` when the support of ``M`` is not
    strongly connected.
    """
    M = np.asarray(M, dtype=float)
    if (M < 0).any():
        raise ValueError("matrix has negative entries")
    if not strongly_connected(M > 0):
        raise ReducibleGraphError("weighted graph is reducible (not strongly connected)")
    lam, h = _positive_eigvec(M, tol, max_iter)
    lam_left, nu = _positive_eigvec(M.T, tol, max_iter)
    if not (h > 0).all() or not (nu > 0).all():  # pragma: no cover - Perron-Frobenius
        raise ArithmeticError("Perron vector lost positivity")
    nu = nu / (nu @ h)
    return 0.5 * (lam + lam_left), h, nu


def max_cycle_mean(adj: np.ndarray, weight: np.ndarray) -> float:
    """Karp's maximum cycle mean; ``weight[u]`` is charged on every edge leaving ``u``."""
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[0]
    D = np.full((n + 1, n), -np.inf)
    D[0] = 0.0
    for k in range(n):
        cand = np.where(adj, (D[k] + weight)[:, None], -np.inf)
        D[k + 1] = cand.max(axis=0)
    best = -np.inf
    for v in range(n):
        if not np.isfinite(D[n, v]):
            continue
        ks = np.arange(n)
        finite = np.isfinite(D[:n, v])
        vals = (D[n, v] - D[:n, v][finite]) / (n - ks[finite])
        best = max(best, float(vals.min()))
    return best


def cycle_ratio_extreme(adj: np.ndarray, cost: np.ndarray, time: np.ndarray, maximize: bool, tol: float = 1e-13) -> float:
    """Extreme of ``sum(cost) / sum(time)`` over directed cycles (``time > 0``).

    Parametric search: ``lam`` is below the maximum ratio iff the maximum
    cycle mean of ``cost - lam * time`` is positive.
    """
    sign = 1.0 if maximize else -1.0
    c = sign * np.asarray(cost, dtype=float)
    t = np.asarray(time, dtype=float)
    ratios = c / t
    lo, hi = float(ratios.min()), float(ratios.max())
    while hi - lo > tol * max(1.0, abs(hi)):
        mid = 0.5 * (lo + hi)
        if max_cycle_mean(adj, c - mid * t) >= 0:
            lo = mid
        else:
            hi = mid
    return sign * 0.5 * (lo + hi)
