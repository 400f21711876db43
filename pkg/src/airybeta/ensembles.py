"""Random-matrix samplers: Gaussian beta ensembles, corners, and Dyson dynamics.

Provides the tridiagonal sampler for the Gaussian beta ensemble at general
beta > 0 and variance tau, the Dirichlet-weighted corners map taking a level-n
spectrum to an interlacing level-(n-1) spectrum, Euler-Maruyama integration of
Dyson Brownian motion started from zero (beta >= 1), and edge rescaling
utilities used to compare Monte Carlo joint moments with the exact
operator-based moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import ValidationError


def sample_gbe(N: int, beta: float, tau: float = 1.0, size: int = 1,
               rng=None, seed: Optional[int] = None) -> np.ndarray:
    """Eigenvalue samples of the N-point Gaussian beta ensemble, shape (size, N).

    Tridiagonal model: independent diagonal N(0, tau) and off-diagonal
    sqrt(tau/2) * chi_{beta*(N-1)}, ..., chi_{beta}.  Eigenvalues are sorted
    increasingly.
    """
    if N < 1 or beta <= 0 or tau <= 0 or size < 1:
        raise ValidationError("need N >= 1, beta > 0, tau > 0, size >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    diag = rng.standard_normal((size, N)) * math.sqrt(tau)
    if N == 1:
        return np.sort(diag, axis=1)
    dfs = beta * np.arange(N - 1, 0, -1)
    off = np.sqrt(tau / 2.0) * np.sqrt(rng.chisquare(dfs, (size, N - 1)))
    if N <= 12:
        # batched dense solve is faster than per-sample tridiagonal calls
        mats = np.zeros((size, N, N))
        idx = np.arange(N)
        mats[:, idx, idx] = diag
        mats[:, idx[:-1], idx[1:]] = off
        mats[:, idx[1:], idx[:-1]] = off
        return np.linalg.eigvalsh(mats)
    out = np.empty((size, N))
    for i in range(size):
        out[i] = eigh_tridiagonal(diag[i], off[i], eigvals_only=True)
    return out


def gbe_sum_sq_mean(N: int, beta: float, tau: float) -> float:
    """E[sum lambda_i^2] for the Gaussian beta ensemble (exact)."""
    return tau * (N + beta * N * (N - 1) / 2.0)


def corners_level_down(lams: np.ndarray, beta: float, rng=None,
                       seed: Optional[int] = None) -> np.ndarray:
    """One corners step: level-n spectrum -> interlacing level-(n-1) spectrum.

    Roots of sum_b w_b prod_{b' != b} (z - lam_{b'}) with Dirichlet(beta/2)
    weights; each root is bracketed in one gap and solved with brentq on the
    rational function sum_b w_b / (z - lam_b).
    """
    lams = np.sort(np.asarray(lams, dtype=float))
    n = lams.size
    if n < 2:
        raise ValidationError("need at least two points to step down")
    if rng is None:
        rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.full(n, beta / 2.0))
    # guard against zero weights from extreme Dirichlet draws
    w = np.maximum(w, 1e-300)

    def rational(z):
        return float(np.sum(w / (z - lams)))

    roots = np.empty(n - 1)
    for g in range(n - 1):
        lo, hi = lams[g], lams[g + 1]
        width = hi - lo
        if width <= 0:
            roots[g] = lo
            continue
        a = lo + 1e-13 * max(width, 1.0)
        b = hi - 1e-13 * max(width, 1.0)
        fa, fb = rational(a), rational(b)
        shrink = 0
        while fa <= 0 and shrink < 60:       # pole at lo pushes f -> +inf
            a = lo + (a - lo) / 16.0
            fa = rational(a)
            shrink += 1
        shrink = 0
        while fb >= 0 and shrink < 60:
            b = hi - (hi - b) / 16.0
            fb = rational(b)
            shrink += 1
        if fa <= 0 or fb >= 0:
            roots[g] = 0.5 * (lo + hi)
            continue
        roots[g] = brentq(rational, a, b, xtol=1e-14 * max(1.0, abs(lo) + abs(hi)))
    if not np.all((roots >= lams[:-1]) & (roots <= lams[1:])):
        raise ValidationError("corners step produced a non-interlacing root")
    return roots


def sample_gbe_corners(N: int, rows: Sequence[int], beta: float, tau: float,
                       size: int = 1, rng=None,
                       seed: Optional[int] = None) -> list:
    """Joint corners samples: spectra at each requested row (non-increasing).

    Returns a list (one entry per row) of arrays of shape (size, row).
    """
    rows = list(rows)
    if sorted(rows, reverse=True) != rows:
        raise ValidationError("rows must be non-increasing")
    if rows and rows[0] > N:
        raise ValidationError("rows cannot exceed N")
    if rng is None:
        rng = np.random.default_rng(seed)
    top = sample_gbe(N, beta, tau, size=size, rng=rng)
    out = []
    for _ in rows:
        out.append(None)
    for s in range(size):
        cur_level, cur = N, top[s]
        for ri, r in enumerate(rows):
            while cur_level > r:
                cur = corners_level_down(cur, beta, rng=rng)
                cur_level -= 1
            if out[ri] is None:
                out[ri] = np.empty((size, r))
            out[ri][s] = cur
    return out


def corners_step_beta(lam2: np.ndarray, beta: float, rng=None,
                      seed: Optional[int] = None) -> np.ndarray:
    """Closed-form 2 -> 1 corners step: y = w*lam_max + (1-w)*lam_min,
    w ~ Beta(beta/2, beta/2).  Used as an anchor for the root-finding path."""
    lam2 = np.sort(np.asarray(lam2, dtype=float), axis=-1)
    if rng is None:
        rng = np.random.default_rng(seed)
    w = rng.beta(beta / 2.0, beta / 2.0, size=lam2.shape[:-1])
    return w * lam2[..., 1] + (1.0 - w) * lam2[..., 0]


@dataclass(frozen=True)
class DbmResult:
    times: tuple
    samples: list       # per requested time: array (size, N)
    dt: float


def simulate_dbm(N: int, beta: float, times: Sequence[float], size: int = 1,
                 dt: float = 1e-3, rng=None, seed: Optional[int] = None,
                 init: str = "zero") -> DbmResult:
    """Euler-Maruyama Dyson Brownian motion from the zero initial condition.

    d lam_i = dB_i + (beta/2) sum_{j != i} dt / (lam_i - lam_j), beta >= 1.
    The marginal of the zero-start process at any time t is exactly the
    Gaussian beta ensemble at variance t, so the state at the first requested
    time is drawn exactly and the SDE only integrated between requested
    times.  The repulsion uses a pairwise-splitting step: an isolated pair's
    gap g flows exactly to sqrt(g^2 + 2 beta dt), which agrees with the EM
    drift to O(dt) for well-separated pairs but stays bounded as g -> 0,
    avoiding the heavy-tailed near-collision kicks of the raw scheme.
    Requested time differences are rounded to the step grid.
    """
    if beta < 1:
        raise ValidationError(
            "Euler-Maruyama Dyson dynamics requires beta >= 1 "
            "(paths collide for beta < 1)")
    times = sorted(float(t) for t in times)
    if not times or times[0] <= 0:
        raise ValidationError("times must be positive")
    if dt <= 0:
        raise ValidationError("need dt > 0")
    if init != "zero":
        raise ValidationError("only the zero initial condition is supported")
    if rng is None:
        rng = np.random.default_rng(seed)
    lam = sample_gbe(N, beta, tau=times[0], size=size, rng=rng)
    samples = [lam.copy()]
    actual = [times[0]]
    sqdt = math.sqrt(dt)
    eye = np.eye(N, dtype=bool)[None, :, :]
    t = times[0]
    for target in times[1:]:
        n_steps = max(0, round((target - t) / dt))
        for _ in range(n_steps):
            diff = lam[:, :, None] - lam[:, None, :]
            g = np.abs(diff)
            push = 0.5 * (np.sqrt(g * g + 2.0 * beta * dt) - g)
            drift = (np.sign(diff) * np.where(eye, 0.0, push)).sum(axis=2)
            lam = np.sort(lam + drift + sqdt * rng.standard_normal((size, N)),
                          axis=1)
        t = t + n_steps * dt
        samples.append(lam.copy())
        actual.append(t)
    return DbmResult(times=tuple(actual), samples=samples, dt=dt)


# ---------------------------------------------------------------------------
# Monte Carlo joint moments and edge rescaling


def mc_joint_moment(samples: list, powers: Sequence[int]) -> tuple:
    """E[prod_l sum_i lam_i^{k_l}] with stderr, from per-row spectra samples.

    samples: list of (size, row_l) arrays (one per factor, matching powers).
    """
    if len(samples) != len(powers):
        raise ValidationError("samples/powers length mismatch")
    prod = np.ones(samples[0].shape[0])
    for arr, k in zip(samples, powers):
        prod = prod * (arr ** k).sum(axis=1)
    return float(prod.mean()), float(prod.std() / math.sqrt(prod.size))


def edge_rescale_moment(samples: list, powers: Sequence[int],
                        rows: Sequence[int], N: int) -> tuple:
    """MC estimate of the rescaled joint moment matching the exact
    operator-based value: 2^{-m} E[prod_l (S_{k_l} + S_{k_l+1})] with
    S_k = sum_i (lam_i / (2 sqrt(N_l N)))^k on row N_l."""
    prod = np.ones(samples[0].shape[0])
    for arr, k, Nl in zip(samples, powers, rows):
        om = arr / (2.0 * math.sqrt(Nl * N))
        prod = prod * ((om ** k).sum(axis=1) + (om ** (k + 1)).sum(axis=1)) / 2.0
    return float(prod.mean()), float(prod.std() / math.sqrt(prod.size))


def largest_eigenvalue_scaled(N: int, beta: float, size: int,
                              rng=None, seed: Optional[int] = None) -> np.ndarray:
    """Edge-scaled largest eigenvalues N^{1/6} (lam_max - 2 sqrt(N)) at tau=1."""
    if rng is None:
        rng = np.random.default_rng(seed)
    out = np.empty(size)
    dfs = beta * np.arange(N - 1, 0, -1)
    for i in range(size):
        diag = rng.standard_normal(N)
        off = np.sqrt(rng.chisquare(dfs) / 2.0)
        top = eigh_tridiagonal(diag, off, eigvals_only=True,
                               select="i", select_range=(N - 1, N - 1))[0]
        out[i] = N ** (1.0 / 6.0) * (top - 2.0 * math.sqrt(N))
    return out
