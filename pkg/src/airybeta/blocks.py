"""Continuum blocks data and the truncated limit functional L_beta.

A blocks configuration is (block process p, virtual offsets upsilon, block
height H): m "main" step functions that die at their own segment start, u
extra step functions supported inside (0, Q_m), optional virtual offsets per
segment, and a height value at every mandated point (jump positions, the Q_l,
and the virtual points Q_{l-1}+upsilon_l).  Adjacent mandated points are
classified into four kernel classes (the Xi-partition); the integrand is
2^{-delta - #virtual} times a product of Gaussian-kernel expectations, and
L_beta is the epsilon -> 0 limit of the stratified integral over all
configurations with at most delta_max jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import bridges
from .errors import ValidationError

_TOL = 1e-9


@dataclass(frozen=True)
class BlockFunction:
    """Right-continuous step function on [0, Q_m], zero before its first jump.

    jumps: ((position, value_after), ...) with strictly increasing positions.
    """
    jumps: tuple

    def __post_init__(self):
        ps = [p for p, _ in self.jumps]
        if any(ps[i] >= ps[i + 1] for i in range(len(ps) - 1)):
            raise ValidationError("jump positions must increase")

    def at(self, x: float) -> float:
        v = 0.0
        for p, val in self.jumps:
            if p <= x:
                v = val
            else:
                break
        return v

    def left(self, x: float) -> float:
        v = 0.0
        for p, val in self.jumps:
            if p < x:
                v = val
            else:
                break
        return v

    def jump_positions(self) -> tuple:
        return tuple(p for p, _ in self.jumps)

    def is_zero(self) -> bool:
        return all(abs(v) <= _TOL for _, v in self.jumps)


@dataclass(frozen=True)
class BlockProcess:
    m: int
    u: int
    Q: tuple                      # (Q_0=0, Q_1, ..., Q_m)
    blocks: tuple                 # m + u BlockFunctions


@dataclass(frozen=True)
class VirtualBlocks:
    upsilon: tuple                # m entries: float or None


@dataclass(frozen=True)
class BlockHeight:
    values: tuple                 # ((point, H), ...) sorted by point

    def at(self, x: float) -> float:
        for p, v in self.values:
            if abs(p - x) <= _TOL:
                return v
        raise ValidationError(f"H not defined at {x}")

    def points(self) -> tuple:
        return tuple(p for p, _ in self.values)


@dataclass(frozen=True)
class Blocks:
    process: BlockProcess
    virtual: VirtualBlocks
    height: BlockHeight

    def p0(self, x: float) -> float:
        return sum(b.at(x) for b in self.process.blocks)

    def p0_left(self, x: float) -> float:
        return sum(b.left(x) for b in self.process.blocks)

    def delta_positions(self) -> list:
        """Interior jump positions per block: list of (j, l, position)."""
        out = []
        Q = self.process.Q
        for j, b in enumerate(self.process.blocks, start=1):
            for p in b.jump_positions():
                if any(abs(p - q) <= _TOL for q in Q):
                    continue
                l = next(l for l in range(1, self.process.m + 1)
                         if Q[l - 1] < p < Q[l])
                out.append((j, l, p))
        return out

    def mandated_points(self) -> list:
        pts = set()
        Q = self.process.Q
        pts.update(Q)
        for _, _, p in self.delta_positions():
            pts.add(p)
        for l, up in enumerate(self.virtual.upsilon, start=1):
            if up is not None:
                pts.add(Q[l - 1] + up)
        return sorted(pts)


def validate_blocks(blocks: Blocks) -> list:
    """All violated conditions of the blocks definitions (empty = valid)."""
    errs = []
    pr, vb, bh = blocks.process, blocks.virtual, blocks.height
    m, u, Q = pr.m, pr.u, pr.Q
    if len(Q) != m + 1 or Q[0] != 0 or any(Q[i] >= Q[i + 1] for i in range(m)):
        return ["Q must be an increasing tuple starting at 0"]
    if len(pr.blocks) != m + u:
        return ["need m + u block functions"]
    Qm = Q[-1]

    for j, b in enumerate(pr.blocks, start=1):
        tag = f"p_{j}"
        for p, v in b.jumps:
            if p <= 0 or p > Qm + _TOL:
                errs.append(f"{tag}: jump outside (0, Q_m]")
            if v < -_TOL:
                errs.append(f"{tag}: negative value")
        if b.jumps and abs(b.jumps[-1][1]) > _TOL:
            errs.append(f"{tag}: does not return to 0 (no finite support)")
        # connected support: positive between first and last jump
        vals = [v for _, v in b.jumps[:-1]]
        if b.jumps and any(v <= _TOL for v in vals):
            errs.append(f"{tag}: support not connected (interior zero)")
        if j <= m:
            # main block dead from Q_{j-1} on
            for p, v in b.jumps:
                if p > Q[j - 1] + _TOL and abs(v) > _TOL:
                    errs.append(f"{tag}: alive after Q_{j - 1}")
            if b.jumps and abs(b.jumps[-1][0] - Q[j - 1]) > _TOL \
                    and b.at(Q[j - 1]) > _TOL:
                errs.append(f"{tag}: must vanish at Q_{j - 1}")
        else:
            if b.is_zero() or not b.jumps:
                errs.append(f"{tag}: extra block must be nonzero")
            if b.jumps and b.jumps[-1][0] >= Qm - _TOL:
                errs.append(f"{tag}: extra block support must end before Q_m")
        # left-continuity at segment starts except the block's own
        for l in range(1, m + 1):
            if j == l:
                continue
            if abs(b.at(Q[l - 1]) - b.left(Q[l - 1])) > _TOL and l > 1:
                errs.append(f"{tag}: discontinuous at Q_{l - 1}")

    # regularity: interior jump positions disjoint, extra blocks min-ordered
    dp = blocks.delta_positions()
    pos = [p for _, _, p in dp]
    if len(set(round(p / _TOL) for p in pos)) != len(pos):
        errs.append("jump positions not disjoint")
    firsts = [pr.blocks[j - 1].jumps[0][0]
              for j in range(m + 1, m + u + 1) if pr.blocks[j - 1].jumps]
    if any(firsts[i] >= firsts[i + 1] for i in range(len(firsts) - 1)):
        errs.append("extra blocks not ordered by first jump")

    # virtual offsets
    if len(vb.upsilon) != m:
        errs.append("need one upsilon per segment")
        return errs
    for l in range(1, m + 1):
        up = vb.upsilon[l - 1]
        pl = pr.blocks[l - 1]
        if up is None:
            continue
        if l == 1:
            errs.append("upsilon_1 must be empty")
        elif pl.left(Q[l - 1]) <= _TOL:
            errs.append(f"upsilon_{l} set but p_{l} vanishes at Q_{l - 1}-")
        bound = min([p for _, ll, p in dp if ll == l] + [Q[l]])
        if up is not None and (up <= 0 or Q[l - 1] + up >= bound - _TOL):
            errs.append(f"upsilon_{l} not before the first jump of its segment")

    # height
    pts = blocks.mandated_points()
    hpts = bh.points()
    if len(hpts) != len(pts) or any(abs(a - b) > _TOL for a, b in zip(hpts, pts)):
        errs.append("H defined on the wrong point set")
        return errs
    H = bh.at
    if abs(H(0.0)) > _TOL:
        errs.append("H(0) != 0")
    for l in range(1, m + 1):
        if abs(H(Q[l]) - blocks.p0_left(Q[l])) > _TOL:
            errs.append(f"H(Q_{l}) != p0(Q_{l}-)")
        up = vb.upsilon[l - 1]
        if up is not None and abs(H(Q[l - 1] + up) - blocks.p0_left(Q[l - 1])) > _TOL:
            errs.append(f"H at virtual point {l} != p0(Q_{l - 1}-)")
    for j, l, p in dp:
        hx = H(p)
        if hx < max(blocks.p0(p), blocks.p0_left(p)) - _TOL:
            errs.append(f"H below the block sum at {p}")
        pj = pr.blocks[j - 1]
        jump = pj.at(p) - pj.left(p)
        diff = hx - blocks.p0_left(p) - pj.at(p)
        if jump > 0 and diff < -_TOL:
            errs.append(f"sign condition violated at upward jump {p}")
        if jump < 0 and diff > _TOL:
            errs.append(f"sign condition violated at downward jump {p}")
    for l in range(1, m + 1):
        if vb.upsilon[l - 1] is None:
            cands = [p for _, ll, p in dp if ll == l] + [Q[l]]
            y = min(cands)
            if H(y) < H(Q[l - 1]) - _TOL:
                errs.append(f"floor condition violated in segment {l}")
    return errs


# ---------------------------------------------------------------------------
# Xi-partition and integrand

XI_ONE, XI_TWO, XI_THREE, XI_FOUR = 1, 2, 3, 4


@dataclass(frozen=True)
class XiInterval:
    x: float
    y: float
    xi_class: int
    hx: float
    hy: float
    a: float          # the reference level A


def xi_partition(blocks: Blocks) -> list:
    """Classify each adjacent mandated pair by comparing H to the level A
    (= p0(x-) when x is a segment endpoint, else p0(x))."""
    pts = blocks.mandated_points()
    Q = blocks.process.Q
    out = []
    H = blocks.height.at
    for x, y in zip(pts[:-1], pts[1:]):
        if any(abs(x - q) <= _TOL for q in Q[1:]):
            a = blocks.p0_left(x)
        else:
            a = blocks.p0(x)
        hx, hy = H(x), H(y)
        at_a_x = abs(hx - a) <= _TOL
        at_a_y = abs(hy - a) <= _TOL
        if at_a_x and at_a_y:
            cls = XI_ONE
        elif at_a_x:
            cls = XI_TWO
        elif at_a_y:
            cls = XI_THREE
        else:
            cls = XI_FOUR
        out.append(XiInterval(x=x, y=y, xi_class=cls, hx=hx, hy=hy, a=a))
    return out


def _interval_sign(blocks: Blocks, x: float) -> float:
    """(-1)^{1[p0 drops at x]} for the Xi3/Xi4 kernels."""
    return -1.0 if blocks.p0(x) < blocks.p0_left(x) - _TOL else 1.0


@dataclass(frozen=True)
class IntegrandEstimate:
    value: float
    stderr: float
    per_interval: tuple


def integrand(blocks: Blocks, beta: Optional[float], n_paths: int = 4096,
              mesh: int = 128, seed: Optional[int] = None, rng=None) -> IntegrandEstimate:
    """2^{-delta - #virtual} * prod over Xi intervals of the kernel value.

    beta=None evaluates the beta -> infinity limit (kernels reduce to their
    Gaussian prefactors, exactly).  Otherwise each conditioned-path
    expectation is an independent unbiased MC estimate; stderrs combine in
    quadrature on the relative scale.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    parts = []
    delta = len(blocks.delta_positions())
    nvirt = sum(1 for up in blocks.virtual.upsilon if up is not None)
    pref = 2.0 ** (-delta - nvirt)
    exact = beta is None
    for iv in xi_partition(blocks):
        dur = iv.y - iv.x
        if iv.xi_class == XI_ONE:
            expo = 0.0 if exact else (dur * (iv.hx - blocks.p0(iv.x)) / beta)
            if exact:
                val, err = bridges.gauss_F00(dur), 0.0
            else:
                est = bridges.I00_mc(dur, beta, n_paths=n_paths, mesh=mesh,
                                     rng=rng, refine=False)
                val, err = est.value, est.stderr
            val, err = val * math.exp(expo), err * math.exp(expo)
        elif iv.xi_class == XI_TWO:
            expo = 0.0 if exact else (dur * (iv.hx - blocks.p0(iv.x)) / beta)
            if exact:
                val, err = bridges.gauss_F0(dur, iv.hy - iv.hx), 0.0
            else:
                est = bridges.I0_mc(dur, iv.hy - iv.hx, beta, n_paths=n_paths,
                                    mesh=mesh, rng=rng, refine=False)
                val, err = est.value, est.stderr
            val, err = val * math.exp(expo), err * math.exp(expo)
        elif iv.xi_class == XI_THREE:
            sgn = _interval_sign(blocks, iv.x)
            if exact:
                val, err = sgn * bridges.gauss_F0(dur, iv.hx - iv.hy), 0.0
            else:
                est = bridges.I0_mc(dur, iv.hx - iv.hy, beta, n_paths=n_paths,
                                    mesh=mesh, rng=rng, refine=False)
                val, err = sgn * est.value, est.stderr
        else:
            sgn = _interval_sign(blocks, iv.x)
            h = iv.hx - blocks.p0(iv.x)
            g = iv.hy - blocks.p0_left(iv.y)
            if exact:
                val, err = sgn * bridges.gauss_F(dur, h, g), 0.0
            else:
                est = bridges.I_mc(dur, h, g, beta, n_paths=n_paths, mesh=mesh,
                                   rng=rng, refine=False)
                val, err = sgn * est.value, est.stderr
        parts.append((iv, val, err))
    total = pref
    rel2 = 0.0
    for _, val, err in parts:
        total *= val
        if val != 0:
            rel2 += (err / val) ** 2
    return IntegrandEstimate(value=total, stderr=abs(total) * math.sqrt(rel2),
                             per_interval=tuple(parts))


# ---------------------------------------------------------------------------
# strata of Def-2.6 type and the truncated L_beta integral


@dataclass(frozen=True)
class Stratum:
    u: int
    delta: tuple        # (m+u)-tuple of m-tuples: jumps of block j in segment l
    virtual: tuple      # m bools: upsilon_l present?

    @property
    def total_delta(self) -> int:
        return sum(sum(row) for row in self.delta)


def enumerate_strata(m: int, delta_max: int) -> list:
    """All (u, jump pattern, virtual pattern) strata with <= delta_max jumps.

    Main block j can only jump in segments l < j; extra blocks need >= 2
    jumps; upsilon_l requires l >= 2 and p_l alive at Q_{l-1}.
    """

    def main_patterns(j: int, budget: int):
        # distribute 0..budget jumps over segments 1..j-1
        segs = j - 1

        def rec(i, left):
            if i == segs:
                yield ()
                return
            for c in range(left + 1):
                for rest in rec(i + 1, left - c):
                    yield (c,) + rest

        for pat in rec(0, budget):
            yield pat + (0,) * (m - segs)

    def extra_patterns(budget: int):
        def rec(i, left):
            if i == m:
                yield ()
                return
            for c in range(left + 1):
                for rest in rec(i + 1, left - c):
                    yield (c,) + rest

        for pat in rec(0, budget):
            if sum(pat) >= 2:
                yield pat

    out = []

    def build_mains(j: int, used: int, acc: list):
        if j > m:
            build_extras(used, acc)
            return
        for pat in main_patterns(j, delta_max - used):
            build_mains(j + 1, used + sum(pat), acc + [pat])

    def build_extras(used: int, acc: list):
        rem = delta_max - used
        # extras as a sorted multiset of patterns to avoid duplicates;
        # ordering inside a stratum is enforced at sampling time
        def rec(prev, left, eacc):
            full = tuple(acc) + tuple(eacc)
            for virt in _virtual_patterns(full):
                out.append(Stratum(u=len(eacc), delta=full, virtual=virt))
            for pat in extra_patterns(left):
                if pat >= prev:
                    rec(pat, left - sum(pat), eacc + [pat])

        rec((), rem, [])

    def _virtual_patterns(full):
        options = []
        for l in range(1, m + 1):
            if l >= 2 and sum(full[l - 1]) >= 1:
                options.append((False, True))
            else:
                options.append((False,))
        def rec(i):
            if i == m:
                yield ()
                return
            for v in options[i]:
                for rest in rec(i + 1):
                    yield (v,) + rest
        yield from rec(0)

    build_mains(1, 0, [])
    return out


def _sample_stratum(stratum: Stratum, Q: tuple, eps: float, rng,
                    lam: float = 1.0):
    """One importance sample of a stratum: (Blocks, weight) or (None, 0)."""
    m = len(Q) - 1
    log_w = 0.0
    blocks_jumps = []
    n_blocks = m + stratum.u
    positions_all = []
    for j in range(1, n_blocks + 1):
        pat = stratum.delta[j - 1]
        positions, levels = [], []
        for l in range(1, m + 1):
            c = pat[l - 1]
            if c == 0:
                continue
            lo, hi = Q[l - 1] + eps, Q[l]
            if hi <= lo:
                return None, 0.0
            xs = np.sort(rng.uniform(lo, hi, c))
            positions.extend(xs.tolist())
            log_w += c * math.log(hi - lo) - math.lgamma(c + 1)
        nj = len(positions)
        if nj == 0:
            blocks_jumps.append(())
            positions_all.append(None)
            continue
        n_free = nj if j <= m else nj - 1
        lv = rng.exponential(1.0 / lam, n_free)
        log_w += lam * lv.sum() - n_free * math.log(lam)
        levels = lv.tolist() + ([] if j <= m else [0.0])
        jumps = list(zip(positions, levels))
        if j <= m:
            # implicit death at Q_{j-1}
            jumps.append((Q[j - 1], 0.0))
        blocks_jumps.append(tuple(jumps))
        positions_all.append(positions)

    # min-ordering of extra blocks (reject otherwise)
    firsts = [positions_all[j - 1][0] for j in range(m + 1, n_blocks + 1)]
    if any(firsts[i] >= firsts[i + 1] for i in range(len(firsts) - 1)):
        return None, 0.0

    try:
        fns = tuple(BlockFunction(j) for j in blocks_jumps)
    except ValidationError:
        return None, 0.0
    process = BlockProcess(m=m, u=stratum.u, Q=Q, blocks=fns)
    shell = Blocks(process=process, virtual=VirtualBlocks((None,) * m),
                   height=BlockHeight(()))
    dp = shell.delta_positions()

    upsilon = []
    for l in range(1, m + 1):
        if not stratum.virtual[l - 1]:
            upsilon.append(None)
            continue
        bound = min([p for _, ll, p in dp if ll == l] + [Q[l]]) - Q[l - 1]
        if bound <= eps:
            return None, 0.0
        up = rng.uniform(eps, bound)
        log_w += math.log(bound - eps)
        upsilon.append(up)

    blocks_nh = Blocks(process=process, virtual=VirtualBlocks(tuple(upsilon)),
                       height=BlockHeight(()))
    pts = blocks_nh.mandated_points()
    hvals = []
    for p in pts:
        if any(abs(p - q) <= _TOL for q in Q):
            hvals.append((p, blocks_nh.p0_left(p) if p > 0 else 0.0))
            continue
        is_virtual = False
        for l in range(1, m + 1):
            if upsilon[l - 1] is not None and abs(Q[l - 1] + upsilon[l - 1] - p) <= _TOL:
                hvals.append((p, blocks_nh.p0_left(Q[l - 1])))
                is_virtual = True
                break
        if is_virtual:
            continue
        j, l, _ = next(e for e in dp if abs(e[2] - p) <= _TOL)
        pj = fns[j - 1]
        jump = pj.at(p) - pj.left(p)
        base = blocks_nh.p0_left(p)
        if jump > 0:
            slack = rng.exponential(1.0 / lam)
            log_w += lam * slack - math.log(lam)
            hvals.append((p, base + pj.at(p) + slack))
        else:
            width = pj.at(p)
            if width <= 0:
                hvals.append((p, base))      # forced full drop
            else:
                hval = rng.uniform(base, base + width)
                log_w += math.log(width)
                hvals.append((p, hval))

    blk = Blocks(process=process, virtual=VirtualBlocks(tuple(upsilon)),
                 height=BlockHeight(tuple(hvals)))
    # floor condition for empty upsilon (indicator, not resampled)
    H = blk.height.at
    for l in range(1, m + 1):
        if upsilon[l - 1] is None:
            y = min([p for _, ll, p in dp if ll == l] + [Q[l]])
            if H(y) < H(Q[l - 1]) - _TOL:
                return None, 0.0
    return blk, math.exp(log_w)


@dataclass(frozen=True)
class StratumEstimate:
    stratum: Stratum
    value: float
    stderr: float
    n_samples: int
    dims: int


@dataclass(frozen=True)
class LBetaResult:
    value: float
    stderr: float
    per_stratum: tuple
    epsilon: float
    delta_max: int


def l_beta_truncated(kvec: Sequence[float], tauvec: Sequence[float],
                     beta: Optional[float], delta_max: int = 2,
                     epsilon: float = 0.1, n_samples: int = 20_000,
                     n_paths: int = 32, mesh: int = 64,
                     seed: int = 0) -> LBetaResult:
    """Stratified MC evaluation of the truncated L_beta(k, tau) integral.

    Strata with zero parameters (the all-zero atom) are evaluated directly
    with a large path budget; positive-dimension strata are importance
    sampled, each sample's integrand estimated with a small unbiased nested
    MC whose noise is folded into the stratum stderr.
    """
    m = len(kvec)
    if len(tauvec) != m:
        raise ValidationError("kvec/tauvec length mismatch")
    if any(k <= 0 for k in kvec):
        raise ValidationError("kvec must be positive")
    Q = (0.0,) + tuple(np.cumsum([float(k) for k in kvec]).tolist())
    rng = np.random.default_rng(seed)
    per = []
    total, var = 0.0, 0.0

    def time_weight(blk: Blocks) -> float:
        w = 0.0
        for l in range(1, m):
            w += (tauvec[l - 1] - tauvec[l]) * blk.height.at(Q[l]) / 2.0
        return math.exp(w)

    for st in enumerate_strata(m, delta_max):
        dims = 0
        for j, pat in enumerate(st.delta, start=1):
            nj = sum(pat)
            dims += nj + (nj if j <= m else max(0, nj - 1))
        dims += sum(1 for v in st.virtual if v)
        dims += st.total_delta - st.u   # free H values
        if st.total_delta == 0 and not any(st.virtual):
            blk = Blocks(
                process=BlockProcess(m=m, u=0, Q=Q,
                                     blocks=tuple(BlockFunction(()) for _ in range(m))),
                virtual=VirtualBlocks((None,) * m),
                height=BlockHeight(tuple((q, 0.0) for q in Q)))
            est = integrand(blk, beta, n_paths=max(n_paths * 256, 65536),
                            mesh=max(mesh, 128), rng=rng)
            v, e = est.value * time_weight(blk), est.stderr
            per.append(StratumEstimate(st, v, e, 1, 0))
            total += v
            var += e * e
            continue
        vals = np.zeros(n_samples)
        for i in range(n_samples):
            blk, w = _sample_stratum(st, Q, epsilon, rng)
            if blk is None:
                continue
            est = integrand(blk, beta, n_paths=n_paths, mesh=mesh, rng=rng)
            vals[i] = w * est.value * time_weight(blk)
        v = float(vals.mean())
        e = float(vals.std() / math.sqrt(n_samples))
        per.append(StratumEstimate(st, v, e, n_samples, dims))
        total += v
        var += e * e
    return LBetaResult(value=total, stderr=math.sqrt(var), per_stratum=tuple(per),
                       epsilon=epsilon, delta_max=delta_max)


def epsilon_extrapolate(eps_values: Sequence[float], values: Sequence[float],
                        stderrs: Optional[Sequence[float]] = None) -> dict:
    """Fit value ~ a + b*sqrt(eps) by (weighted) least squares; return a."""
    eps_values = np.asarray(eps_values, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(eps_values) != len(values) or len(values) < 2:
        raise ValidationError("need >= 2 (eps, value) pairs")
    w = np.ones_like(values) if stderrs is None else 1.0 / np.asarray(stderrs) ** 2
    X = np.stack([np.ones_like(eps_values), np.sqrt(eps_values)], axis=1)
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    coef = cov @ (WX.T @ values)
    return {"value": float(coef[0]), "slope": float(coef[1]),
            "stderr": float(math.sqrt(max(cov[0, 0], 0.0)))
            if stderrs is not None else float("nan")}
