"""Walk expansion of Dunkl power-sum products.

Every term in the monomial expansion of D_{i_m}^{k_m} ... D_{i_1}^{k_1} [1] is
encoded by a walk: non-negative integer trajectories r_j(t), t in [0, Q_m]
(Q_l = k_1 + ... + k_l), whose total height H(t) = sum_j r_j(t) changes by
exactly +-1 per step and returns to 0.  Within segment l (steps Q_{l-1}+1..Q_l,
marked index i_l, active variables 1..N_l) each step either moves r_{i_l} by
+-1, or is a "jump": exactly one other index j <= N_l changes, H drops by 1,
and the sign of the change of r_j is opposite to r_j(t) - r_{i_l}(t-1) + 1/2.

The weight of a walk is the rational constant carried by its term: the product
of per-step factors (up: tau; plain down: deg + (beta/2) * #{j <= N_l active
with smaller degree}; jump: +-beta/2).  Summing weights over all walks equals
the degree-zero coefficient of the operator product: expansion_check verifies
this identity exactly against the operator engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from .dunkl import fixed_index_product
from .errors import ResourceLimitError, ValidationError

# step kinds
UP = "up"          # r_{i_l} += 1
DOWN = "down"      # r_{i_l} -= 1
JUMP = "jump"      # (j, v): r_j -> v, r_{i_l} compensates, H -= 1


@dataclass(frozen=True)
class Walk:
    marked_indices: tuple     # i_1..i_m (1-based)
    powers: tuple             # k_1..k_m
    rows: tuple               # N_1..N_m
    N: int
    steps: tuple              # per step: ("up",)/("down",)/("jump", j, v)

    @property
    def m(self) -> int:
        return len(self.powers)

    @property
    def Q(self) -> tuple:
        out, acc = [0], 0
        for k in self.powers:
            acc += k
            out.append(acc)
        return tuple(out)

    def segment_of(self, t: int) -> int:
        """1-based segment index of step t (1 <= t <= Q_m)."""
        Q = self.Q
        for l in range(1, self.m + 1):
            if t <= Q[l]:
                return l
        raise ValidationError("step index out of range")

    def trajectories(self) -> dict:
        """j -> tuple of r_j(t), t = 0..Q_m, for every j that is ever nonzero
        or marked."""
        degs: dict = {}
        hist = {j: [0] for j in self.marked_indices}
        Q = self.Q
        for t, step in enumerate(self.steps, start=1):
            l = self.segment_of(t)
            i = self.marked_indices[l - 1]
            if step[0] == UP:
                degs[i] = degs.get(i, 0) + 1
            elif step[0] == DOWN:
                degs[i] = degs.get(i, 0) - 1
            else:
                _, j, v = step
                old = degs.get(j, 0)
                degs[i] = degs.get(i, 0) + old - v - 1
                degs[j] = v
                if j not in hist:
                    hist[j] = [0] * t
            for j in hist:
                hist[j].append(degs.get(j, 0))
        return {j: tuple(h) for j, h in hist.items()}

    def height(self) -> tuple:
        """Total degree H(t) for t = 0..Q_m."""
        h, out = 0, [0]
        for step in self.steps:
            h += 1 if step[0] == UP else -1
            out.append(h)
        return tuple(out)


def validate_walk(walk: Walk) -> list:
    """Return a list of violated conditions (empty = valid)."""
    errs = []
    m = walk.m
    if len(walk.marked_indices) != m or len(walk.rows) != m:
        return ["marked_indices/powers/rows length mismatch"]
    Q = walk.Q
    if len(walk.steps) != Q[-1]:
        errs.append("wrong number of steps")
        return errs
    degs: dict = {}
    h = 0
    for t, step in enumerate(walk.steps, start=1):
        l = walk.segment_of(t)
        i = walk.marked_indices[l - 1]
        Nl = walk.rows[l - 1]
        if i > Nl:
            errs.append(f"t={t}: marked index {i} beyond row {Nl}")
        if step[0] == UP:
            degs[i] = degs.get(i, 0) + 1
            h += 1
        elif step[0] == DOWN:
            if degs.get(i, 0) < 1:
                errs.append(f"t={t}: down step from degree 0")
            degs[i] = degs.get(i, 0) - 1
            h -= 1
        else:
            _, j, v = step
            old = degs.get(j, 0)
            ri = degs.get(i, 0)
            if j == i or j > Nl or j < 1:
                errs.append(f"t={t}: invalid jump target {j}")
            if v == old:
                errs.append(f"t={t}: jump must change r_j")
            # sign of (v - old) opposite to v - r_i(t-1) + 1/2
            elif v > old and not v < ri:
                errs.append(f"t={t}: upward jump requires r_j(t) < r_i(t-1)")
            elif v < old and not v >= ri:
                errs.append(f"t={t}: downward jump requires r_j(t) >= r_i(t-1)")
            if v < 0:
                errs.append(f"t={t}: negative degree")
            new_i = ri + old - v - 1
            if new_i < 0:
                errs.append(f"t={t}: marked degree would go negative")
            degs[j] = v
            degs[i] = new_i
            h -= 1
        if h < 0:
            errs.append(f"t={t}: height below 0")
    if h != 0:
        errs.append("height does not return to 0")
    return errs


def enumerate_walks(marked_indices: Sequence[int], powers: Sequence[int],
                    rows: Sequence[int], N: int,
                    max_walks: Optional[int] = 2_000_000) -> Iterator[Walk]:
    """Depth-first enumeration of all walks for the given structure.

    Deterministic order: up, down, then jumps by (j, v).  Raises
    ResourceLimitError past max_walks yielded walks.
    """
    m = len(powers)
    if len(marked_indices) != m or len(rows) != m:
        raise ValidationError("length mismatch")
    if any(i < 1 or i > r for i, r in zip(marked_indices, rows)):
        raise ValidationError("marked index outside its row")
    if any(r < 1 or r > N for r in rows):
        raise ValidationError("rows must lie in [1, N]")
    Qm = sum(powers)
    seg = []
    for l, k in enumerate(powers, start=1):
        seg += [l] * k
    count = 0

    degs: dict = {}
    steps: list = []

    def walker():
        nonlocal count
        stack_walks: list = []

        def rec2(t: int, h: int):
            nonlocal count
            if Qm - t < h:
                return
            if t == Qm:
                if h == 0:
                    count += 1
                    if max_walks is not None and count > max_walks:
                        raise ResourceLimitError(
                            f"more than {max_walks} walks")
                    stack_walks.append(Walk(tuple(marked_indices), tuple(powers),
                                            tuple(rows), N, tuple(steps)))
                return
            l = seg[t]
            i = marked_indices[l - 1]
            Nl = rows[l - 1]
            ri = degs.get(i, 0)
            degs[i] = ri + 1
            steps.append((UP,))
            rec2(t + 1, h + 1)
            steps.pop()
            degs[i] = ri
            if ri > 0:
                degs[i] = ri - 1
                steps.append((DOWN,))
                rec2(t + 1, h - 1)
                steps.pop()
                degs[i] = ri
            for j in range(1, Nl + 1):
                if j == i:
                    continue
                old = degs.get(j, 0)
                for v in list(range(old + 1, ri)) + list(range(ri, old)):
                    degs[j] = v
                    degs[i] = ri + old - v - 1
                    steps.append((JUMP, j, v))
                    rec2(t + 1, h - 1)
                    steps.pop()
                    degs[i] = ri
                    degs[j] = old

        rec2(0, 0)
        return stack_walks

    yield from walker()


def walk_weight(walk: Walk, beta: Fraction, tau=None, taus=None) -> Fraction:
    """Exact weight: the rational constant of the walk's expansion term.

    Pass tau (corners: one value) or taus (dbm: one per segment).  The weight
    is the product of per-step factors: up steps contribute the stage tau,
    plain down steps contribute deg + (beta/2) * #{j <= N_l : deg_j < deg},
    jumps contribute +beta/2 (upward) or -beta/2 (downward).
    """
    beta = Fraction(beta)
    if (tau is None) == (taus is None):
        raise ValidationError("exactly one of tau/taus required")
    if taus is not None and len(taus) != walk.m:
        raise ValidationError("one tau per segment required")
    beta2 = beta / 2
    degs: dict = {}
    w = Fraction(1)
    for t, step in enumerate(walk.steps, start=1):
        l = walk.segment_of(t)
        i = walk.marked_indices[l - 1]
        Nl = walk.rows[l - 1]
        t_l = Fraction(tau) if tau is not None else Fraction(taus[l - 1])
        if step[0] == UP:
            w *= t_l
            degs[i] = degs.get(i, 0) + 1
        elif step[0] == DOWN:
            ri = degs[i]
            positive_ge = sum(1 for j, d in degs.items()
                              if j != i and j <= Nl and d >= ri)
            r_count = Nl - 1 - positive_ge  # j != i with smaller degree, zeros included
            w *= ri + beta2 * r_count
            degs[i] = ri - 1
        else:
            _, j, v = step
            old = degs.get(j, 0)
            w *= beta2 if v > old else -beta2
            degs[i] = degs.get(i, 0) + old - v - 1
            degs[j] = v
    return w


def walk_weight_factored(walk: Walk, beta: Fraction) -> dict:
    """The tau = 2N/beta weight in factored form: sign, sqrt(N*N_l) and N_l
    powers, and the per-down-step bulk factors 1 + 2r/(beta*N_l) - cnt/N_l.

    Returns a dict with the pieces and their product (float).  Equals
    walk_weight(..., tau=2N/beta) exactly up to float rounding.
    """
    beta = Fraction(beta)
    H = walk.height()
    Q = walk.Q
    jd = jump_data(walk)
    sign = 1
    factors = []
    log_pow = 0.0
    degs: dict = {}
    for t, step in enumerate(walk.steps, start=1):
        l = walk.segment_of(t)
        i = walk.marked_indices[l - 1]
        Nl = walk.rows[l - 1]
        if step[0] == UP:
            degs[i] = degs.get(i, 0) + 1
        elif step[0] == DOWN:
            ri = degs[i]
            cnt = 1 + sum(1 for j, d in degs.items()    # j = i_l itself counts
                          if j != i and j <= Nl and d >= ri)
            factors.append(1.0 + 2.0 * ri / (float(beta) * Nl) - float(cnt) / Nl)
            degs[i] = ri - 1
        else:
            _, j, v = step
            old = degs.get(j, 0)
            if v < old:   # downward jump <=> marked degree does not drop
                sign = -sign
            degs[i] = degs.get(i, 0) + old - v - 1
            degs[j] = v
    for l in range(1, walk.m + 1):
        Nl = walk.rows[l - 1]
        k_l = walk.powers[l - 1]
        n_jumps = sum(1 for t in jd.jump_steps if Q[l - 1] < t <= Q[l])
        log_pow += k_l * 0.5 * math.log(walk.N * Nl)
        log_pow += ((H[Q[l - 1]] - H[Q[l]]) / 2.0 - n_jumps) * math.log(Nl)
    prod = sign * math.exp(log_pow)
    for f in factors:
        prod *= f
    return {"sign": sign, "log_power": log_pow, "down_factors": factors,
            "value": prod}


@dataclass(frozen=True)
class JumpData:
    jump_steps: tuple        # sorted steps t where a jump occurs (the set Delta)
    per_index: dict          # (j, l) -> tuple of steps
    delta: int               # total number of jumps

    def delta_jl(self, j: int, l: int) -> int:
        return len(self.per_index.get((j, l), ()))


def jump_data(walk: Walk) -> JumpData:
    Q = walk.Q
    per: dict = {}
    steps = []
    for t, step in enumerate(walk.steps, start=1):
        if step[0] != JUMP:
            continue
        l = walk.segment_of(t)
        j = step[1]
        steps.append(t)
        per.setdefault((j, l), []).append(t)
    return JumpData(jump_steps=tuple(steps),
                    per_index={k: tuple(v) for k, v in per.items()},
                    delta=len(steps))


@dataclass(frozen=True)
class DiscreteBlocks:
    """Discrete image of a walk under the blocks map.

    p[j-1] is the trajectory of block j restricted per the construction
    (main block l frozen to 0 from Q_{l-1} on; extra blocks relabeled in
    first-positive-time order).  upsilon[l-1] is the virtual-block offset or
    None.  H maps each mandated time (jumps, Q_l, Q_{l-1}+upsilon_l) to the
    walk height there.
    """
    m: int
    u: int
    Q: tuple
    p: tuple           # (m+u) tuples of length Q_m + 1
    upsilon: tuple     # m entries: int or None
    H: dict            # mandated time -> height
    delta: int
    relabeling: dict   # walk index j -> block position (m+1..m+u)


@dataclass(frozen=True)
class BlocksRejection:
    reason: str


def to_discrete_blocks(walk: Walk, epsilon: float, scale_N: Optional[int] = None):
    """Map a walk to discrete blocks, or reject with the failed condition.

    The map is defined on walks whose marked indices are 1..m, whose marked
    variable l returns to 0 by the end of segment l and stays 0, and which
    satisfy the epsilon-conditions: total degree constant on the first
    ceil(eps*N^(2/3)) steps of each segment, and each non-empty virtual
    offset larger than that window.
    """
    m = walk.m
    if walk.marked_indices != tuple(range(1, m + 1)):
        return BlocksRejection("marked indices must be 1..m")
    scale_N = walk.N if scale_N is None else scale_N
    window = math.ceil(epsilon * scale_N ** (2.0 / 3.0))
    Q = walk.Q
    traj = walk.trajectories()
    Qm = Q[-1]
    H = walk.height()
    jd = jump_data(walk)

    # marked blocks must be dead after their own segment
    for l in range(1, m + 1):
        r = traj[l]
        if any(r[t] != 0 for t in range(Q[l], Qm + 1)):
            return BlocksRejection(f"marked variable {l} alive after Q_{l}")

    # main blocks: freeze to zero from Q_{l-1}
    p = []
    for l in range(1, m + 1):
        r = traj[l]
        p.append(tuple(r[t] if t <= Q[l - 1] else 0 for t in range(Qm + 1)))

    # extra blocks: indices > m that are ever positive, ordered by first
    # positive time
    extras = []
    for j, r in traj.items():
        if j <= m:
            continue
        first = next((t for t, v in enumerate(r) if v > 0), None)
        if first is not None:
            extras.append((first, j))
    extras.sort()
    relabel = {}
    for pos, (first, j) in enumerate(extras, start=m + 1):
        relabel[j] = pos
        p.append(traj[j])
    u = len(extras)

    # virtual offsets
    upsilon = []
    for l in range(1, m + 1):
        ups = None
        for t in range(1, Q[l] - Q[l - 1] + 1):
            if any(Q[l - 1] < s <= Q[l - 1] + t for s in jd.jump_steps):
                break
            if H[Q[l - 1] + t] < H[Q[l - 1]]:
                ups = t
                break
        upsilon.append(ups)

    # epsilon conditions
    for l in range(1, m + 1):
        hi = min(Q[l - 1] + window, Qm)
        base = H[Q[l - 1]]
        # p^l = sum of all block trajectories except the l-th marked one;
        # within the window the height must not move (all jumps excluded and
        # the marked variable flat) -- checked on the total height with the
        # marked variable's own moves excluded via the block sum.
        pl = [sum(p[j][t] for j in range(len(p)) if j != l - 1)
              for t in range(Q[l - 1], hi + 1)]
        if any(v != pl[0] for v in pl):
            return BlocksRejection(f"p^{l} not constant on the eps-window")
        if upsilon[l - 1] is not None and upsilon[l - 1] <= window:
            return BlocksRejection(f"upsilon_{l} inside the eps-window")
        del base

    mandated = set(jd.jump_steps) | {Q[l] for l in range(m + 1)}
    for l in range(1, m + 1):
        if upsilon[l - 1] is not None:
            mandated.add(Q[l - 1] + upsilon[l - 1])
    Hmap = {t: H[t] for t in sorted(mandated)}

    return DiscreteBlocks(m=m, u=u, Q=Q, p=tuple(p), upsilon=tuple(upsilon),
                          H=Hmap, delta=jd.delta, relabeling=relabel)


def preimage_walks(blocks: DiscreteBlocks, rows: Sequence[int], N: int,
                   powers: Sequence[int]) -> list:
    """All walks mapping to the given discrete blocks (small instances).

    The free data is the height path: any +-1 path that stays at or above the
    non-marked block sum, passes through the pinned mandated heights, and
    reaches them by down-steps at jump times.  Each height path reconstructs
    the marked trajectories r_l = H - p^l on segment l.
    """
    m = blocks.m
    Q = blocks.Q
    Qm = Q[-1]
    jump_times = set(t for t in blocks.H if t not in Q)
    for l in range(1, m + 1):
        if blocks.upsilon[l - 1] is not None:
            jump_times.discard(Q[l - 1] + blocks.upsilon[l - 1])

    def p_other(l: int, t: int) -> int:
        return sum(blocks.p[j][t] for j in range(len(blocks.p)) if j != l - 1)

    results = []

    def seg_of(t):
        for l in range(1, m + 1):
            if t <= Q[l]:
                return l
        raise ValidationError("bad t")

    def rec(t: int, h: int, hist: list):
        if t == Qm:
            if h == 0:
                results.append(tuple(hist))
            return
        l = seg_of(t + 1)
        floor = p_other(l, t + 1)
        for dh in (1, -1):
            nh = h + dh
            if nh < floor or Qm - (t + 1) < nh:
                continue
            if (t + 1) in blocks.H:
                pin = blocks.H[t + 1]
                if nh != pin:
                    continue
                if (t + 1) in jump_times and dh != -1:
                    continue
                if (t + 1) in [Q[l - 1] + (blocks.upsilon[l - 1] or -1)] and dh != -1:
                    continue
            hist.append(nh)
            rec(t + 1, nh, hist)
            hist.pop()

    rec(0, 0, [0])

    inv_relabel = {pos: j for j, pos in blocks.relabeling.items()}
    walks = []
    for hpath in results:
        steps = []
        ok = True
        degs: dict = {}
        for t in range(1, Qm + 1):
            l = seg_of(t)
            i = l
            # non-marked degrees prescribed by the blocks at time t
            target = {}
            for pos in range(len(blocks.p)):
                j = pos + 1 if pos < m else inv_relabel[pos + 1]
                if j != i:
                    target[j] = blocks.p[pos][t]
            ri_new = hpath[t] - sum(target.values())
            changed = [j for j, v in target.items() if degs.get(j, 0) != v]
            prev_ri = degs.get(i, 0)
            if len(changed) == 0:
                if ri_new == prev_ri + 1:
                    steps.append((UP,))
                elif ri_new == prev_ri - 1:
                    steps.append((DOWN,))
                else:
                    ok = False
                    break
            elif len(changed) == 1:
                j = changed[0]
                steps.append((JUMP, j, target[j]))
            else:
                ok = False
                break
            degs = dict(target)
            degs[i] = ri_new
            # earlier marked variables must be dead
            for ll in range(1, l):
                if degs.get(ll, 0) != 0:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        w = Walk(tuple(range(1, m + 1)), tuple(powers), tuple(rows), N,
                 tuple(steps))
        if not validate_walk(w):
            walks.append(w)
    return walks


@dataclass(frozen=True)
class ExpansionCheck:
    operator_value: Fraction
    walk_sum: Fraction
    n_walks: int
    equal: bool


def expansion_check(marked_indices: Sequence[int], powers: Sequence[int],
                    rows: Sequence[int], N: int, beta: Fraction, tau,
                    taus=None, max_walks: Optional[int] = 2_000_000) -> ExpansionCheck:
    """Exact identity: sum of walk weights = operator degree-zero value."""
    total = Fraction(0)
    n = 0
    for w in enumerate_walks(marked_indices, powers, rows, N, max_walks=max_walks):
        total += walk_weight(w, beta, tau=tau if taus is None else None, taus=taus)
        n += 1
    op = fixed_index_product(marked_indices, powers, rows, N, Fraction(beta),
                             taus if taus is not None else tau)
    return ExpansionCheck(operator_value=op, walk_sum=total, n_walks=n,
                          equal=(op == total))
