"""Exact Dunkl-operator engine for beta-ensemble joint moments.

The central object is the deformed Dunkl operator

    D_i = d/dx_i + (beta/2) * sum_{j != i, j <= R} (1 - s_ij) / (x_i - x_j) + tau * x_i

acting on polynomials in N variables, where s_ij swaps x_i and x_j and R is the
number of active variables of the current stage.  Power sums of these
operators, P_k = sum_{i<=R} D_i^k, evaluate joint moments of the corners
process and of Dyson Brownian motion: the moment is the degree-zero
coefficient of P_{k_m} ... P_{k_1} [1].

Monomials are never expanded per-index.  A state stores, for each "profile",
the degrees of a few tracked variables plus a multiset of positive degrees of
anonymous variables per zone (a zone is a maximal index interval not split by
any stage's active-variable count).  All operators act identically on
anonymous variables within a zone, so this compression is lossless; it is what
makes k ~ N^(2/3) reachable at N = 64.

All arithmetic is exact (fractions.Fraction).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import ResourceLimitError, ValidationError

Rational = Fraction

# A profile key: (tracked degrees, per-zone sorted tuples of positive anonymous degrees)
ProfileKey = tuple

DEFAULT_DEGREE_CAP = 64


@dataclass(frozen=True)
class MomentQuery:
    """One joint-moment request.

    mode "corners": rows are the (non-increasing) level sizes N_1 >= ... >= N_m,
    all operators share one tau.  mode "dbm": all rows equal N and taus is the
    non-decreasing tuple of stage times.  Mixed modes are rejected.
    """

    mode: str                      # "corners" | "dbm"
    N: int
    powers: tuple                  # (k_1, ..., k_m), applied in this order
    rows: tuple = ()               # corners mode
    tau: Optional[Fraction] = None  # corners mode
    taus: tuple = ()               # dbm mode

    def validate(self) -> None:
        if self.mode not in ("corners", "dbm"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.N < 1:
            raise ValidationError("N must be >= 1")
        if not self.powers or any(k < 1 for k in self.powers):
            raise ValidationError("powers must be positive")
        if self.mode == "corners":
            if self.taus:
                raise ValidationError("corners query must not carry dbm taus")
            if len(self.rows) != len(self.powers):
                raise ValidationError("rows/powers length mismatch")
            if any(r < 1 or r > self.N for r in self.rows):
                raise ValidationError("rows must lie in [1, N]")
            if any(self.rows[i] < self.rows[i + 1] for i in range(len(self.rows) - 1)):
                raise ValidationError("rows must be non-increasing")
            if self.tau is None or self.tau <= 0:
                raise ValidationError("corners query needs tau > 0")
        else:
            if self.rows or self.tau is not None:
                raise ValidationError("dbm query must not carry corners rows/tau")
            if len(self.taus) != len(self.powers):
                raise ValidationError("taus/powers length mismatch")
            if any(t <= 0 for t in self.taus):
                raise ValidationError("taus must be positive")
            if any(self.taus[i] > self.taus[i + 1] for i in range(len(self.taus) - 1)):
                raise ValidationError("taus must be non-decreasing")


class DunklEngine:
    """Exact operator algebra over compressed polynomial states.

    Parameters
    ----------
    N : total number of variables.
    rows : every active-variable count that will ever be used; zone boundaries
        are the distinct values in rows plus N.
    beta : positive rational.
    tracked : concrete 1-based indices of persistently tracked variables
        (used for fixed-index operator products and full-monomial checks).
    degree_cap : hard cap on the total degree of any intermediate profile.
    """

    def __init__(self, N: int, rows: Sequence[int], beta: Fraction,
                 tracked: Sequence[int] = (), degree_cap: int = DEFAULT_DEGREE_CAP):
        if N < 1:
            raise ValidationError("N must be >= 1")
        beta = Fraction(beta)
        if beta <= 0:
            raise ValidationError("beta must be > 0")
        self.N = N
        self.beta = beta
        self.degree_cap = degree_cap
        bounds = sorted(set(rows) | {N})
        if any(b < 1 or b > N for b in bounds):
            raise ValidationError("rows must lie in [1, N]")
        self.bounds = [0] + bounds              # zones: (bounds[z], bounds[z+1]]
        self.n_zones = len(self.bounds) - 1
        tracked = tuple(tracked)
        if len(set(tracked)) != len(tracked):
            raise ValidationError("tracked indices must be distinct")
        if any(i < 1 or i > N for i in tracked):
            raise ValidationError("tracked indices must lie in [1, N]")
        self.tracked_zone = tuple(self._zone_of(i) for i in tracked)
        self.n_tracked = len(tracked)
        cap = [self.bounds[z + 1] - self.bounds[z] for z in range(self.n_zones)]
        for z in self.tracked_zone:
            cap[z] -= 1
        if any(c < 0 for c in cap):
            raise ValidationError("more tracked indices than a zone can hold")
        self.anon_capacity = tuple(cap)

    def _zone_of(self, idx: int) -> int:
        for z in range(self.n_zones):
            if self.bounds[z] < idx <= self.bounds[z + 1]:
                return z
        raise ValidationError(f"index {idx} outside [1, N]")

    def _zone_active(self, z: int, row: int) -> bool:
        return self.bounds[z + 1] <= row

    # -- states ------------------------------------------------------------

    def unit_state(self) -> dict:
        key = ((0,) * self.n_tracked, ((),) * self.n_zones)
        return {key: Fraction(1)}

    def monomial_state(self, degrees: Sequence[int]) -> dict:
        if len(degrees) != self.n_tracked:
            raise ValidationError("one degree per tracked variable required")
        key = (tuple(int(d) for d in degrees), ((),) * self.n_zones)
        return {key: Fraction(1)}

    @staticmethod
    def total_degree(key: ProfileKey) -> int:
        tracked, zones = key
        return sum(tracked) + sum(sum(z) for z in zones)

    @staticmethod
    def constant_term(state: dict) -> Fraction:
        for key, coeff in state.items():
            if DunklEngine.total_degree(key) == 0:
                return coeff
        return Fraction(0)

    # -- single Dunkl application ------------------------------------------

    def apply_dunkl(self, state: dict, slot: int, row: int, tau: Fraction,
                    max_total: Optional[int] = None) -> dict:
        """Apply D_slot (tracked slot, active-variable count `row`) once.

        Branches per profile follow the four monomial cases: the x_i
        multiplication, the derivative-plus-adjacent-swap contraction
        (factor d + (beta/2) * #{active j : deg_j < d}), and the two swap
        ladders which move gamma degrees between x_i and one other variable
        at factor +-beta/2.
        """
        beta2 = self.beta / 2
        tau = Fraction(tau)
        out: dict = {}

        def add(key: ProfileKey, coeff: Fraction) -> None:
            if max_total is not None and self.total_degree(key) > max_total:
                return
            if self.total_degree(key) > self.degree_cap:
                raise ResourceLimitError(
                    f"intermediate degree exceeded cap {self.degree_cap}")
            cur = out.get(key)
            cur = coeff if cur is None else cur + coeff
            if cur == 0:
                out.pop(key, None)
            else:
                out[key] = cur

        for (tracked, zones), coeff in state.items():
            n_slots = len(tracked)
            if slot >= n_slots:
                raise ValidationError("no such tracked slot")
            d = tracked[slot]

            # active companion classes: list of (kind, ident, degree, count)
            classes = []
            for s in range(n_slots):
                if s == slot:
                    continue
                z = self.tracked_zone[s] if s < self.n_tracked else self._temp_zone[s]
                if self._zone_active(z, row):
                    classes.append(("t", s, tracked[s], 1))
            for z in range(self.n_zones):
                if not self._zone_active(z, row):
                    continue
                counts = Counter(zones[z])
                n_temp_in_zone = sum(
                    1 for s in range(self.n_tracked, n_slots) if self._temp_zone[s] == z)
                zeros = self.anon_capacity[z] - len(zones[z]) - n_temp_in_zone
                # slot itself occupies its zone but capacity already accounts
                # for persistent tracked; temp slots accounted just above.
                for dd, c in counts.items():
                    classes.append(("a", z, dd, c))
                if zeros > 0:
                    classes.append(("a", z, 0, zeros))

            def rebuild(new_d: int, other=None) -> ProfileKey:
                tr = list(tracked)
                tr[slot] = new_d
                zs = zones
                if other is not None:
                    kind, ident, dd, v = other
                    if kind == "t":
                        tr[ident] = v
                    else:
                        lst = list(zs[ident])
                        if dd > 0:
                            lst.remove(dd)
                        if v > 0:
                            lst.append(v)
                        lst.sort(reverse=True)
                        zs = zs[:ident] + (tuple(lst),) + zs[ident + 1:]
                return (tuple(tr), zs)

            # case 1: multiplication by tau * x_slot
            if tau != 0:
                add(rebuild(d + 1), coeff * tau)

            # case 2: derivative + gamma=1 swap terms
            if d > 0:
                r_count = sum(c for kind, ident, dd, c in classes if dd < d)
                add(rebuild(d - 1), coeff * (d + beta2 * r_count))

            # cases 3a/3b: degree transfer with one companion
            for kind, ident, dd, c in classes:
                if dd <= d - 2:            # 3a: companion rises to v in [dd+1, d-1]
                    for v in range(dd + 1, d):
                        add(rebuild(d + dd - v - 1, (kind, ident, dd, v)),
                            coeff * beta2 * c)
                elif dd >= d + 1:          # 3b: companion falls to v in [d, dd-1]
                    for v in range(d, dd):
                        add(rebuild(d + dd - v - 1, (kind, ident, dd, v)),
                            coeff * (-beta2) * c)
        return out

    # temp-slot zone registry (slots >= n_tracked created by power sums)
    @property
    def _temp_zone(self) -> dict:
        return self.__dict__.setdefault("_temp_zone_map", {})

    def apply_dunkl_power(self, state: dict, slot: int, row: int, tau: Fraction,
                          k: int, budget_after: Optional[int] = None) -> dict:
        """Apply D_slot k times; prune profiles that cannot return to degree 0."""
        for q in range(k):
            max_total = None
            if budget_after is not None:
                max_total = (k - q - 1) + budget_after
            state = self.apply_dunkl(state, slot, row, tau, max_total=max_total)
        return state

    # -- power sums ----------------------------------------------------------

    def apply_power_sum(self, state: dict, k: int, row: int, tau: Fraction,
                        budget_after: Optional[int] = None) -> dict:
        """Apply P_k = sum_{i <= row} D_i^k.

        Tracked variables with index <= row contribute directly; each
        anonymous class contributes via a temporary tracked slot, scaled by
        its multiplicity.
        """
        if row not in self.bounds:
            raise ValidationError("row must be one of the declared rows")
        result: dict = {}

        def accumulate(sub: dict) -> None:
            for key, coeff in sub.items():
                cur = result.get(key)
                cur = coeff if cur is None else cur + coeff
                if cur == 0:
                    result.pop(key, None)
                else:
                    result[key] = cur

        for key, coeff in state.items():
            tracked, zones = key
            # persistent tracked slots
            for s in range(self.n_tracked):
                if self._zone_active(self.tracked_zone[s], row):
                    sub = {key: coeff}
                    sub = self.apply_dunkl_power(sub, s, row, tau, k, budget_after)
                    accumulate(sub)
            # anonymous classes, grouped by (zone, degree)
            for z in range(self.n_zones):
                if not self._zone_active(z, row):
                    continue
                counts = Counter(zones[z])
                zeros = self.anon_capacity[z] - len(zones[z])
                if zeros > 0:
                    counts[0] = zeros
                for dd, c in counts.items():
                    temp = self.n_tracked
                    self._temp_zone[temp] = z
                    lst = list(zones[z])
                    if dd > 0:
                        lst.remove(dd)
                    pz = zones[:z] + (tuple(lst),) + zones[z + 1:]
                    pkey = (tracked + (dd,), pz)
                    sub = {pkey: coeff * c}
                    sub = self.apply_dunkl_power(sub, temp, row, tau, k, budget_after)
                    # demote the temp slot back into its zone
                    dem: dict = {}
                    for (tr, zs), cf in sub.items():
                        fin = tr[temp]
                        lst2 = list(zs[z])
                        if fin > 0:
                            lst2.append(fin)
                            lst2.sort(reverse=True)
                        dkey = (tr[:temp], zs[:z] + (tuple(lst2),) + zs[z + 1:])
                        dem[dkey] = dem.get(dkey, Fraction(0)) + cf
                    accumulate({k2: v for k2, v in dem.items() if v != 0})
                    del self._temp_zone[temp]
        return result


# ---------------------------------------------------------------------------
# moment drivers


def corners_moment(query: MomentQuery, beta: Fraction,
                   degree_cap: int = DEFAULT_DEGREE_CAP) -> Fraction:
    """Exact joint moment of the corners process at rows N_1 >= ... >= N_m.

    Equals the degree-zero coefficient of P_{k_m}^{N_m} ... P_{k_1}^{N_1} [1]
    with the common tau; the first-listed power acts first.
    """
    query.validate()
    if query.mode != "corners":
        raise ValidationError("corners_moment requires a corners-mode query")
    if sum(query.powers) % 2 == 1:
        return Fraction(0)
    eng = DunklEngine(query.N, query.rows, beta, degree_cap=degree_cap)
    state = eng.unit_state()
    remaining = sum(query.powers)
    for k, row in zip(query.powers, query.rows):
        remaining -= k
        state = eng.apply_power_sum(state, k, row, Fraction(query.tau), budget_after=remaining)
    return DunklEngine.constant_term(state)


def dbm_moment(query: MomentQuery, beta: Fraction,
               degree_cap: int = DEFAULT_DEGREE_CAP) -> Fraction:
    """Exact joint moment of Dyson Brownian motion at times taus (all rows N)."""
    query.validate()
    if query.mode != "dbm":
        raise ValidationError("dbm_moment requires a dbm-mode query")
    if sum(query.powers) % 2 == 1:
        return Fraction(0)
    eng = DunklEngine(query.N, (query.N,), beta, degree_cap=degree_cap)
    state = eng.unit_state()
    remaining = sum(query.powers)
    for k, tau in zip(query.powers, query.taus):
        remaining -= k
        state = eng.apply_power_sum(state, k, query.N, Fraction(tau), budget_after=remaining)
    return DunklEngine.constant_term(state)


def fixed_index_product(marked_indices: Sequence[int], powers: Sequence[int],
                        rows: Sequence[int], N: int, beta: Fraction, tau,
                        degree_cap: int = DEFAULT_DEGREE_CAP):
    """Degree-zero coefficient of D_{i_m}^{k_m} ... D_{i_1}^{k_1} [1].

    taus may be a scalar (corners) or one tau per stage (dbm).  Used as the
    operator side of the walk-expansion identity.
    """
    m = len(marked_indices)
    if len(powers) != m or len(rows) != m:
        raise ValidationError("marked_indices/powers/rows length mismatch")
    taus = [Fraction(t) for t in tau] if isinstance(tau, (list, tuple)) else [Fraction(tau)] * m
    distinct = tuple(dict.fromkeys(marked_indices))
    eng = DunklEngine(N, rows, beta, tracked=distinct, degree_cap=degree_cap)
    slot_of = {idx: s for s, idx in enumerate(distinct)}
    state = eng.unit_state()
    remaining = sum(powers)
    for i, k, row, t in zip(marked_indices, powers, rows, taus):
        if i > row:
            raise ValidationError("marked index exceeds its row")
        remaining -= k
        state = eng.apply_dunkl_power(state, slot_of[i], row, t, k, budget_after=remaining)
    return DunklEngine.constant_term(state)


# ---------------------------------------------------------------------------
# structural identities


def _power_sum_op(eng: DunklEngine, k: int, row: int, tau: Fraction):
    return lambda st: eng.apply_power_sum(st, k, row, tau)


def _pbar_op(eng: DunklEngine, k: int, row: int, tau: Fraction):
    """Pbar_k = sum_{w=0}^{k-1} sum_i D_i^w x_i D_i^{k-1-w}."""

    def mul_x(st: dict, slot: int) -> dict:
        out = {}
        for (tr, zs), cf in st.items():
            key = (tr[:slot] + (tr[slot] + 1,) + tr[slot + 1:], zs)
            out[key] = out.get(key, Fraction(0)) + cf
        return {k2: v for k2, v in out.items() if v != 0}

    def apply(state: dict) -> dict:
        result: dict = {}

        def accumulate(sub):
            for key, coeff in sub.items():
                cur = result.get(key, Fraction(0)) + coeff
                if cur == 0:
                    result.pop(key, None)
                else:
                    result[key] = cur

        for w in range(k):
            for s in range(eng.n_tracked):
                if eng._zone_active(eng.tracked_zone[s], row):
                    sub = state
                    sub = eng.apply_dunkl_power(sub, s, row, tau, k - 1 - w)
                    sub = mul_x(sub, s)
                    sub = eng.apply_dunkl_power(sub, s, row, tau, w)
                    accumulate(sub)
        return result

    return apply


def _state_sub(a: dict, b: dict) -> dict:
    out = dict(a)
    for key, coeff in b.items():
        cur = out.get(key, Fraction(0)) - coeff
        if cur == 0:
            out.pop(key, None)
        else:
            out[key] = cur
    return out


def _all_monomials(N: int, cap: int) -> Iterable[tuple]:
    if N == 0:
        yield ()
        return
    for d in range(cap + 1):
        for rest in _all_monomials(N - 1, cap - d):
            yield (d,) + rest


def _sorted_monomials(N: int, cap: int) -> Iterable[tuple]:
    """Non-increasing monomials only: the checked operators are invariant
    under simultaneous index permutation, so verifying one representative
    per orbit is equivalent to verifying all monomials."""
    for mono in _all_monomials(N, cap):
        if all(mono[i] >= mono[i + 1] for i in range(N - 1)):
            yield mono


def check_commutation(N: int, k1: int, k2: int, beta: Fraction, tau,
                      cap: int = 6) -> bool:
    """[P_k1, P_k2] = 0 on every monomial of total degree <= cap (exact)."""
    eng = DunklEngine(N, (N,), beta, tracked=tuple(range(1, N + 1)),
                      degree_cap=cap + k1 + k2 + 2)
    tau = Fraction(tau)
    A = _power_sum_op(eng, k1, N, tau)
    B = _power_sum_op(eng, k2, N, tau)
    for mono in _sorted_monomials(N, cap):
        st = eng.monomial_state(mono)
        if _state_sub(A(B(st)), B(A(st))):
            return False
    return True


def check_nested_commutator(N: int, k: int, beta: Fraction, tau,
                            cap: int = 6) -> bool:
    """[[Pbar_k, P_k], P_k] = 0 on every monomial of total degree <= cap."""
    eng = DunklEngine(N, (N,), beta, tracked=tuple(range(1, N + 1)),
                      degree_cap=cap + 4 * k + 2)
    tau = Fraction(tau)
    P = _power_sum_op(eng, k, N, tau)
    Pbar = _pbar_op(eng, k, N, tau)

    def C1(st):
        return _state_sub(Pbar(P(st)), P(Pbar(st)))

    for mono in _sorted_monomials(N, cap):
        st = eng.monomial_state(mono)
        if _state_sub(C1(P(st)), P(C1(st))):
            return False
    return True


# ---------------------------------------------------------------------------
# beta = 2 multivariate Bessel functions (determinantal closed form)


def bessel_beta2(lam: Sequence[float], x: Sequence[float]) -> float:
    """B_lam(x) at beta = 2: prod_{i<N} i! * det[exp(lam_i x_j)] / (V(x) V(lam)).

    Normalized so B(0,...,0) = 1; requires pairwise-distinct lam and x.
    """
    import numpy as np
    n = len(lam)
    if len(x) != n:
        raise ValidationError("lam and x must have equal length")
    lam = [float(v) for v in lam]
    xs = [float(v) for v in x]
    vand = 1.0
    for i in range(n):
        for j in range(i + 1, n):
            vand *= (xs[i] - xs[j]) * (lam[i] - lam[j])
    if vand == 0:
        raise ValidationError("lam and x must each be pairwise distinct")
    M = np.array([[math.exp(a * t) for t in xs] for a in lam])
    pref = 1.0
    for i in range(1, n):
        pref *= math.factorial(i)
    return pref * float(np.linalg.det(M)) / vand


def _dunkl_apply_numeric(f, i: int, n: int, beta: float, h: float):
    """Numeric Dunkl operator (no tau term): central fd + swap differences."""

    def g(pt):
        pt = list(pt)
        up = list(pt)
        dn = list(pt)
        up[i] += h
        dn[i] -= h
        val = (f(up) - f(dn)) / (2 * h)
        for j in range(n):
            if j == i:
                continue
            sw = list(pt)
            sw[i], sw[j] = sw[j], sw[i]
            val += (beta / 2) * (f(pt) - f(sw)) / (pt[i] - pt[j])
        return val

    return g


def eigenrelation_residual_beta2(lam: Sequence[float], x: Sequence[float],
                                 k: int, fd_step: float = 1e-4,
                                 richardson: bool = True) -> dict:
    """|P_k B_lam(x) - (sum lam_i^k) B_lam(x)| / |B_lam(x)| at beta = 2.

    P_k is the k-fold Dunkl power sum evaluated by nested central finite
    differences; richardson=True combines steps h and h/2.  Returns the
    residual plus a step-size warning flag when fd_step is large relative to
    the minimal coordinate spacing.
    """
    n = len(lam)

    def B(pt):
        return bessel_beta2(lam, pt)

    def pk_value(h):
        total = 0.0
        for i in range(n):
            g = B
            for _ in range(k):
                g = _dunkl_apply_numeric(g, i, n, 2.0, h)
            total += g(list(x))
        return total

    target = sum(float(a) ** k for a in lam) * B(list(x))
    v1 = pk_value(fd_step)
    if richardson:
        v2 = pk_value(fd_step / 2)
        val = (4 * v2 - v1) / 3
    else:
        val = v1
    spacing = min(abs(float(x[i]) - float(x[j]))
                  for i in range(n) for j in range(i + 1, n)) if n > 1 else math.inf
    return {"residual": abs(val - target) / abs(B(list(x))),
            "step_warning": fd_step > 0.01 * spacing}


# ---------------------------------------------------------------------------
# edge-scaled moments


@dataclass(frozen=True)
class ScaledEdgeMoment:
    N: int
    k_int: tuple          # integer powers round(k * N^(2/3))
    rows: tuple           # integer rows round(N - tau * N^(2/3))
    value: float
    exact_terms: tuple = field(default=())  # ((bits, Fraction, scale), ...)


def scaled_edge_moment(N: int, kvec: Sequence[float], tauvec: Sequence[float],
                       beta: Fraction, degree_cap: int = DEFAULT_DEGREE_CAP) -> ScaledEdgeMoment:
    """Pre-limit edge moment: the finite-N quantity that converges to L_beta.

    For each stage the engine averages the k and k+1 power sums, scaled by
    (2 sqrt(N_l N))^{-power}, with tau = 2N/beta; k_l = round(k*N^(2/3)),
    N_l = round(N - tau_l*N^(2/3)).
    """
    m = len(kvec)
    if len(tauvec) != m:
        raise ValidationError("kvec/tauvec length mismatch")
    n23 = N ** (2.0 / 3.0)
    k_int = tuple(max(1, round(k * n23)) for k in kvec)
    rows = tuple(int(round(N - t * n23)) for t in tauvec)
    if any(r < 1 for r in rows):
        raise ValidationError("tau too large: empty row")
    if any(rows[i] < rows[i + 1] for i in range(m - 1)):
        raise ValidationError("rows must be non-increasing (tau non-decreasing)")
    tau_op = Fraction(2 * N, 1) / beta
    total = 0.0
    terms = []
    for bits in range(2 ** m):
        powers = tuple(k_int[l] + ((bits >> l) & 1) for l in range(m))
        q = MomentQuery(mode="corners", N=N, powers=powers, rows=rows, tau=tau_op)
        val = corners_moment(q, beta, degree_cap=degree_cap)
        scale = 1.0
        for l in range(m):
            scale /= (2.0 * math.sqrt(rows[l] * N)) ** powers[l]
        total += float(val) * scale
        terms.append((bits, val, scale))
    total /= 2 ** m
    return ScaledEdgeMoment(N=N, k_int=k_int, rows=rows, value=total,
                            exact_terms=tuple(terms))
