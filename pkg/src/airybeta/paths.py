"""Lattice-path counting and weighted transfer-matrix sums.

Counts of +-1 paths constrained to stay non-negative (reflection principle),
their weighted analogues with the per-down-step bulk factor
1 + 2F(t)/(beta*N), and the scaling comparisons against the continuum
Gaussian kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import bridges
from .errors import ValidationError


def _parity_ok(X: int, H: int, G: int) -> bool:
    return (X + H - G) % 2 == 0


def count_paths(X: int, H: int, G: int, floor_mode: str = "nonnegative") -> int:
    """Number of +-1 paths of length X from H to G staying >= 0.

    Reflection principle: C(X, (X+H-G)/2) - C(X, (X+H+G)/2 + 1).
    floor_mode "stay_above_start" counts paths staying >= H (zero if G < H).
    """
    if X < 0 or H < 0 or G < 0:
        raise ValidationError("X, H, G must be non-negative")
    if floor_mode == "stay_above_start":
        if G < H:
            return 0
        return count_paths(X, 0, G - H)
    if floor_mode != "nonnegative":
        raise ValidationError(f"unknown floor_mode {floor_mode!r}")
    if not _parity_ok(X, H, G) or abs(H - G) > X:
        return 0
    a = (X + H - G) // 2
    b = (X + H + G) // 2 + 1
    return math.comb(X, a) - (math.comb(X, b) if b <= X else 0)


def count_paths_bruteforce(X: int, H: int, G: int,
                           floor_mode: str = "nonnegative") -> int:
    """Independent oracle: explicit DP over heights (no closed form)."""
    floor = H if floor_mode == "stay_above_start" else 0
    if floor_mode == "stay_above_start" and G < H:
        return 0
    cur = {H: 1}
    for _ in range(X):
        nxt: dict = {}
        for h, c in cur.items():
            for nh in (h - 1, h + 1):
                if nh >= floor:
                    nxt[nh] = nxt.get(nh, 0) + c
        cur = nxt
    return cur.get(G, 0)


def catalan_count(n: int) -> int:
    """Dyck paths of length 2n: count_paths(2n, 0, 0) = Catalan(n)."""
    return math.comb(2 * n, n) // (n + 1)


def weighted_sum_I(X: int, H: int, G: int, beta, N: int,
                   floor_mode: str = "nonnegative", exact: Optional[bool] = None):
    """Transfer-matrix sum I(X;H,G) = 2^{-X-1} sum over admissible paths of
    prod over down steps of (1 + 2 F(t) / (beta N)), F(t) the height after
    the step.

    exact=True uses Fractions (default for X <= 2000), exact=False a scaled
    float DP (values are kept as 2^{-t} * partial sums so nothing overflows).
    beta=None evaluates the beta -> infinity limit (all down factors 1), in
    which case 2^{X+1} I equals the path count exactly.
    """
    if X < 0:
        raise ValidationError("X must be >= 0")
    floor = H if floor_mode == "stay_above_start" else 0
    if floor_mode not in ("nonnegative", "stay_above_start"):
        raise ValidationError(f"unknown floor_mode {floor_mode!r}")
    if floor_mode == "stay_above_start" and G < H:
        return Fraction(0) if (exact or (exact is None and X <= 2000)) else 0.0
    if not _parity_ok(X, H, G) or abs(H - G) > X:
        return Fraction(0) if (exact or (exact is None and X <= 2000)) else 0.0
    if exact is None:
        exact = X <= 2000

    if exact:
        beta_n = None if beta is None else Fraction(beta) * N
        cur = {H: Fraction(1)}
        for _ in range(X):
            nxt: dict = {}
            for h, w in cur.items():
                up = h + 1
                nxt[up] = nxt.get(up, Fraction(0)) + w
                dn = h - 1
                if dn >= floor:
                    f = 1 if beta_n is None else 1 + Fraction(2 * dn) / beta_n
                    nxt[dn] = nxt.get(dn, Fraction(0)) + w * f
            cur = nxt
        return cur.get(G, Fraction(0)) / 2 ** (X + 1)

    # float DP, heights capped well above anything that matters
    hmax = max(H, G) + X // 2 + 2
    hmax = min(hmax, max(H, G) + int(12 * math.sqrt(X)) + 16)
    v = np.zeros(hmax + 2)
    v[H] = 1.0
    heights = np.arange(hmax + 2, dtype=float)
    fac = np.ones_like(heights) if beta is None \
        else 1.0 + 2.0 * heights / (float(beta) * N)
    for _ in range(X):
        nv = np.zeros_like(v)
        nv[1:] += 0.5 * v[:-1]                       # up steps
        nv[max(floor, 0):-1] += 0.5 * v[max(floor, 0) + 1:] * fac[max(floor, 0):-1]
        v = nv
    return v[G] / 2.0


def log_count_paths(X: int, H: int, G: int) -> float:
    """log of count_paths for sizes where the exact integers are unwieldy."""
    if not _parity_ok(X, H, G) or abs(H - G) > X:
        return -math.inf
    a = (X + H - G) // 2
    b = (X + H + G) // 2 + 1

    def logc(n, k):
        if k < 0 or k > n:
            return -math.inf
        return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)

    la = logc(X, a)
    lb = logc(X, b)
    if lb == -math.inf:
        return la
    return la + math.log1p(-math.exp(lb - la))


@dataclass(frozen=True)
class ScalingCheck:
    discrete: float
    continuum: float
    rel_error: float
    params: dict


def _round_parity(target: float, parity_with: int) -> int:
    """Nearest integer to target with the same parity as parity_with."""
    n = round(target)
    if (n - parity_with) % 2 != 0:
        n += 1 if target >= n else -1
    return int(n)


def asymptotic_count_check(case: str, x: float, h: float, g: float, N: int) -> ScalingCheck:
    """Compare rescaled path counts against the Gaussian kernels F, F0, F00.

    case "F":   2^{-X-1} N^{1/3} |paths(X;H,G)| vs F(x;h,g)
    case "F0":  2^{-X-1} N^{2/3} |paths(X;H,0)| vs F0(x;h)
    case "F00": 2^{-X-1} N      |paths(X;0,0)| vs F00(x)
    with X ~ x N^{2/3}, H ~ h N^{1/3}, G ~ g N^{1/3} (parities fixed).
    """
    n13, n23 = N ** (1 / 3), N ** (2 / 3)
    H = max(0, round(h * n13))
    G = max(0, round(g * n13)) if case == "F" else 0
    if case == "F00":
        H = 0
    X = _round_parity(x * n23, H + G)
    log_cnt = log_count_paths(X, H, G)
    if case == "F":
        disc = math.exp(log_cnt - (X + 1) * math.log(2) + math.log(N) / 3)
        cont = bridges.gauss_F(x, h, g)
    elif case == "F0":
        disc = math.exp(log_cnt - (X + 1) * math.log(2) + 2 * math.log(N) / 3)
        cont = bridges.gauss_F0(x, h)
    elif case == "F00":
        disc = math.exp(log_cnt - (X + 1) * math.log(2) + math.log(N))
        cont = bridges.gauss_F00(x)
    else:
        raise ValidationError(f"unknown case {case!r}")
    rel = abs(disc - cont) / abs(cont)
    return ScalingCheck(discrete=disc, continuum=cont, rel_error=rel,
                        params={"X": X, "H": H, "G": G, "N": N})


def kernel_scaling_check(case: int, x: float, h: float, g: float, N: int,
                         beta: float, mc_budget: int = 10 ** 6,
                         mesh: int = 512, seed: int = 0) -> ScalingCheck:
    """Weighted-path vs continuum-kernel comparison (the four scaling cases).

    1: N^{1/3} I(X;H,G)        vs I(x;h,g)
    2: N^{2/3} I(X;H,0)        vs I0(x;h)
    3: N^{2/3} I+(X;H,G)       vs exp(x h / beta) I0(x;g-h)   (G >= H)
    4: N      I+(X;H,H)        vs exp(x h / beta) I00(x)

    In cases 3 and 4 the floor sits at height h, so the exponential-area
    weight picks up the baseline rectangle x*h on top of the excursion /
    Bessel-bridge area; exp(+x h / beta) is exactly that baseline factor
    (the same factor that multiplies the kernels attached to the
    floor-constrained interval classes in the continuum integrand).
    The continuum side is Monte Carlo (mc_budget bridge paths); rel_error is
    relative to the MC value, whose stderr rides along in params.
    """
    n13, n23 = N ** (1 / 3), N ** (2 / 3)
    H = max(0, round(h * n13))
    rng = np.random.default_rng(seed)
    if case == 1:
        G = max(0, round(g * n13))
        X = _round_parity(x * n23, H + G)
        disc = weighted_sum_I(X, H, G, beta, N, exact=False) * n13
        est = bridges.I_mc(x, h, g, beta, n_paths=mc_budget, mesh=mesh, rng=rng)
    elif case == 2:
        X = _round_parity(x * n23, H)
        disc = weighted_sum_I(X, H, 0, beta, N, exact=False) * n23
        est = bridges.I0_mc(x, h, beta, n_paths=mc_budget, mesh=mesh, rng=rng)
    elif case == 3:
        G = max(0, round(g * n13))
        X = _round_parity(x * n23, H + G)
        disc = weighted_sum_I(X, H, G, beta, N, floor_mode="stay_above_start",
                              exact=False) * n23
        est = bridges.I0_mc(x, g - h, beta, n_paths=mc_budget, mesh=mesh, rng=rng)
        est = bridges.FunctionalEstimate(
            value=math.exp(x * h / beta) * est.value,
            stderr=math.exp(x * h / beta) * est.stderr,
            n_paths=est.n_paths, n_rejected=est.n_rejected, mesh=est.mesh,
            value_refined=math.exp(x * h / beta) * est.value_refined)
    elif case == 4:
        X = _round_parity(x * n23, 0)
        disc = weighted_sum_I(X, H, H, beta, N, floor_mode="stay_above_start",
                              exact=False) * N
        est = bridges.I00_mc(x, beta, n_paths=mc_budget, mesh=mesh, rng=rng)
        est = bridges.FunctionalEstimate(
            value=math.exp(x * h / beta) * est.value,
            stderr=math.exp(x * h / beta) * est.stderr,
            n_paths=est.n_paths, n_rejected=est.n_rejected, mesh=est.mesh,
            value_refined=math.exp(x * h / beta) * est.value_refined)
    else:
        raise ValidationError("case must be 1..4")
    rel = abs(disc - est.value) / abs(est.value)
    return ScalingCheck(discrete=float(disc), continuum=est.value, rel_error=rel,
                        params={"X": X, "H": H, "N": N, "stderr": est.stderr,
                                "mesh": est.mesh})
