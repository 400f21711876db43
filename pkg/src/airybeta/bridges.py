"""Gaussian kernels and conditioned-path area functionals.

The continuum kernels are a Gaussian prefactor times the expected exponential
of beta^{-1} times the area under a conditioned Brownian path:

  F(x;h,g)  = (2 pi x)^{-1/2} (exp(-(g-h)^2/2x) - exp(-(g+h)^2/2x))
  I(x;h,g)  = F * E[exp(beta^{-1} Int B)],  B bridge g -> h conditioned >= 0
  F0(x;h)   = 2h (2 pi x^3)^{-1/2} exp(-h^2/2x);  I0 uses the Bessel(3) bridge 0 -> h
  F00(x)    = 2 (2 pi x^3)^{-1/2};               I00 uses the Brownian excursion

Estimators are unbiased: for I the positivity conditioning is folded into the
estimator (free Gaussian density times E[exp(area/beta) 1{B >= 0}] over the
unconditioned bridge); Bessel(3) bridges are exact in law as the norm of a 3d
Brownian bridge, excursions via Vervaat rotation of a standard bridge.  The
only systematic effect is mesh discretization, documented by the refined-mesh
companion value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError


def gauss_F(x: float, h: float, g: float) -> float:
    if x <= 0:
        raise ValidationError("x must be > 0")
    return (math.exp(-(g - h) ** 2 / (2 * x)) - math.exp(-(g + h) ** 2 / (2 * x))) \
        / math.sqrt(2 * math.pi * x)


def gauss_F0(x: float, h: float) -> float:
    if x <= 0:
        raise ValidationError("x must be > 0")
    return 2 * h / math.sqrt(2 * math.pi * x ** 3) * math.exp(-h ** 2 / (2 * x))


def gauss_F00(x: float) -> float:
    if x <= 0:
        raise ValidationError("x must be > 0")
    return 2 / math.sqrt(2 * math.pi * x ** 3)


@dataclass(frozen=True)
class FunctionalEstimate:
    value: float
    stderr: float
    n_paths: int
    n_rejected: int
    mesh: int
    value_refined: float   # same estimator at twice the mesh (bias probe)


def _std_bridges(rng, n_paths: int, mesh: int) -> np.ndarray:
    """Standard Brownian bridges 0 -> 0 on the unit grid, shape (n_paths, mesh+1)."""
    inc = rng.standard_normal((n_paths, mesh))
    inc *= math.sqrt(1.0 / mesh)
    w = np.empty((n_paths, mesh + 1))
    w[:, 0] = 0.0
    np.cumsum(inc, axis=1, out=w[:, 1:])
    s = np.linspace(0.0, 1.0, mesh + 1)
    w -= w[:, -1:] * s
    return w


def _trap_mean(paths: np.ndarray) -> np.ndarray:
    """Trapezoid average over the unit grid (multiply by duration for areas)."""
    return (paths[:, 0] / 2 + paths[:, 1:-1].sum(axis=1) + paths[:, -1] / 2) \
        / (paths.shape[1] - 1)


def sample_path(kind: str, x: float, h: float = 0.0, g: float = 0.0,
                mesh: int = 256, seed: Optional[int] = None, rng=None):
    """One conditioned path on [0, x] at mesh+1 grid points.

    kinds: "bridge_positive" (bridge g -> h conditioned >= 0, by rejection),
    "bessel3_bridge" (0 -> h), "excursion" (0 -> 0, Vervaat rotation).
    Returns (times, values).
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    times = np.linspace(0.0, x, mesh + 1)
    s = times / x
    sx = math.sqrt(x)
    if kind == "bridge_positive":
        for _ in range(100000):
            b = _std_bridges(rng, 1, mesh)[0]
            path = g + sx * b + s * (h - g)
            if path.min() >= 0:
                return times, path
        raise ValidationError("rejection sampling failed (h, g too negative?)")
    if kind == "bessel3_bridge":
        b = _std_bridges(rng, 3, mesh)
        c1 = sx * b[0] + s * h
        c2 = sx * b[1]
        c3 = sx * b[2]
        return times, np.sqrt(c1 ** 2 + c2 ** 2 + c3 ** 2)
    if kind == "excursion":
        b = _std_bridges(rng, 1, mesh)[0]
        k = int(np.argmin(b))
        rot = np.concatenate([b[k:-1], b[:k + 1]]) - b[k]
        return times, sx * rot
    raise ValidationError(f"unknown path kind {kind!r}")


def _mc_pair(core, n_paths: int, mesh: int, rng,
             refine: bool = True) -> FunctionalEstimate:
    """Run `core(n, mesh)` at mesh and 2*mesh; core returns (values, n_rejected)."""
    vals, nrej = core(n_paths, mesh, rng)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals) / math.sqrt(len(vals)))
    refined = float("nan")
    if refine:
        n_ref = max(1000, n_paths // 8)
        vals2, _ = core(n_ref, 2 * mesh, rng)
        refined = float(np.mean(vals2))
    return FunctionalEstimate(value=mean, stderr=stderr, n_paths=n_paths,
                              n_rejected=nrej, mesh=mesh,
                              value_refined=refined)


def I_mc(x: float, h: float, g: float, beta: float, n_paths: int = 100_000,
         mesh: int = 256, seed: Optional[int] = None, rng=None,
         chunk: int = 50_000, refine: bool = True) -> FunctionalEstimate:
    """I(x;h,g): unbiased estimator gauss_density * exp(area/beta) * 1{B>=0}."""
    if rng is None:
        rng = np.random.default_rng(seed)
    if min(x, h, g) < 0 or x == 0:
        raise ValidationError("need x > 0, h >= 0, g >= 0")
    dens = math.exp(-(g - h) ** 2 / (2 * x)) / math.sqrt(2 * math.pi * x)

    def core(n, m, rng):
        s = np.linspace(0.0, 1.0, m + 1)
        out = np.empty(n)
        rej = 0
        done = 0
        while done < n:
            c = min(chunk, n - done)
            b = _std_bridges(rng, c, m)
            path = g + math.sqrt(x) * b + s * (h - g)
            alive = path.min(axis=1) >= 0
            rej += int(c - alive.sum())
            area = _trap_mean(path) * x
            out[done:done + c] = dens * np.exp(area / beta) * alive
            done += c
        return out, rej

    return _mc_pair(core, n_paths, mesh, rng, refine=refine)


def I0_mc(x: float, h: float, beta: float, n_paths: int = 100_000,
          mesh: int = 256, seed: Optional[int] = None, rng=None,
          chunk: int = 25_000, refine: bool = True) -> FunctionalEstimate:
    """I0(x;h) = F0(x;h) * E[exp(area of Bessel(3) bridge 0 -> h / beta)]."""
    if rng is None:
        rng = np.random.default_rng(seed)
    if x <= 0 or h < 0:
        raise ValidationError("need x > 0, h >= 0")
    f0 = gauss_F0(x, h)

    def core(n, m, rng):
        s = np.linspace(0.0, 1.0, m + 1)
        out = np.empty(n)
        done = 0
        while done < n:
            c = min(chunk, n - done)
            b1 = _std_bridges(rng, c, m)
            b2 = _std_bridges(rng, c, m)
            b3 = _std_bridges(rng, c, m)
            path = np.sqrt((math.sqrt(x) * b1 + s * h) ** 2
                           + x * (b2 ** 2 + b3 ** 2))
            area = _trap_mean(path) * x
            out[done:done + c] = f0 * np.exp(area / beta)
            done += c
        return out, 0

    return _mc_pair(core, n_paths, mesh, rng, refine=refine)


def I00_mc(x: float, beta: float, n_paths: int = 100_000, mesh: int = 256,
           seed: Optional[int] = None, rng=None,
           chunk: int = 50_000, refine: bool = True) -> FunctionalEstimate:
    """I00(x) = F00(x) * E[exp(area of excursion on [0,x] / beta)]."""
    if rng is None:
        rng = np.random.default_rng(seed)
    if x <= 0:
        raise ValidationError("need x > 0")
    f00 = gauss_F00(x)

    def core(n, m, rng):
        out = np.empty(n)
        done = 0
        while done < n:
            c = min(chunk, n - done)
            b = _std_bridges(rng, c, m)
            kmin = np.argmin(b, axis=1)
            rows = np.arange(c)[:, None]
            idx = (kmin[:, None] + np.arange(m + 1)) % m
            exc = b[rows, idx] - b[rows, kmin[:, None]]
            area = _trap_mean(exc) * x * math.sqrt(x)
            out[done:done + c] = f00 * np.exp(area / beta)
            done += c
        return out, 0

    return _mc_pair(core, n_paths, mesh, rng, refine=refine)


# -- batch estimators (one path bundle per query row); used by blocks_limit --

def batch_I0(xs: np.ndarray, hs: np.ndarray, beta: float, n_paths: int,
             mesh: int, rng) -> np.ndarray:
    """Unbiased per-row estimates of I0(x_i; h_i). Rows with h=0 get 0."""
    n = len(xs)
    out = np.zeros(n)
    ok = (xs > 0) & (hs > 0)
    if not ok.any():
        return out
    x = xs[ok][:, None, None]
    h = hs[ok][:, None, None]
    s = np.linspace(0.0, 1.0, mesh + 1)[None, None, :]
    b = rng.standard_normal((int(ok.sum()), n_paths, 3, mesh)) / math.sqrt(mesh)
    w = np.concatenate([np.zeros((b.shape[0], n_paths, 3, 1)), np.cumsum(b, axis=3)], axis=3)
    w -= w[..., -1:] * s[None]
    path = np.sqrt((np.sqrt(x) * w[:, :, 0] + s * h) ** 2
                   + x * (w[:, :, 1] ** 2 + w[:, :, 2] ** 2))
    area = (path[..., 0] / 2 + path[..., 1:-1].sum(-1) + path[..., -1] / 2) / mesh * x[..., 0]
    f0 = 2 * hs[ok] / np.sqrt(2 * math.pi * xs[ok] ** 3) * np.exp(-hs[ok] ** 2 / (2 * xs[ok]))
    out[ok] = f0 * np.exp(area / beta).mean(axis=1)
    return out


def batch_I00(xs: np.ndarray, beta: float, n_paths: int, mesh: int, rng) -> np.ndarray:
    n = len(xs)
    out = np.zeros(n)
    ok = xs > 0
    if not ok.any():
        return out
    x = xs[ok][:, None]
    b = rng.standard_normal((int(ok.sum()), n_paths, mesh)) / math.sqrt(mesh)
    w = np.concatenate([np.zeros((b.shape[0], n_paths, 1)), np.cumsum(b, axis=2)], axis=2)
    s = np.linspace(0.0, 1.0, mesh + 1)
    w -= w[..., -1:] * s
    kmin = np.argmin(w, axis=2)
    idx = (kmin[..., None] + np.arange(mesh + 1)) % mesh
    exc = np.take_along_axis(w, idx, axis=2) - np.take_along_axis(
        w, kmin[..., None], axis=2)
    area = (exc[..., 0] / 2 + exc[..., 1:-1].sum(-1) + exc[..., -1] / 2) / mesh
    area = area * x * np.sqrt(x)
    f00 = 2 / np.sqrt(2 * math.pi * xs[ok] ** 3)
    out[ok] = f00 * np.exp(area / beta).mean(axis=1)
    return out


def batch_I(xs: np.ndarray, hs: np.ndarray, gs: np.ndarray, beta: float,
            n_paths: int, mesh: int, rng) -> np.ndarray:
    n = len(xs)
    out = np.zeros(n)
    ok = xs > 0
    if not ok.any():
        return out
    x = xs[ok][:, None, None]
    h = hs[ok][:, None, None]
    g = gs[ok][:, None, None]
    s = np.linspace(0.0, 1.0, mesh + 1)[None, None, :]
    b = rng.standard_normal((int(ok.sum()), n_paths, mesh)) / math.sqrt(mesh)
    w = np.concatenate([np.zeros((b.shape[0], n_paths, 1)), np.cumsum(b, axis=2)], axis=2)
    w -= w[..., -1:] * s[0]
    path = g + np.sqrt(x) * w + s * (h - g)
    alive = path.min(axis=2) >= 0
    area = (path[..., 0] / 2 + path[..., 1:-1].sum(-1) + path[..., -1] / 2) / mesh * x[..., 0]
    dens = np.exp(-(gs[ok] - hs[ok]) ** 2 / (2 * xs[ok])) / np.sqrt(2 * math.pi * xs[ok])
    out[ok] = dens * (np.exp(area / beta) * alive).mean(axis=1)
    return out
