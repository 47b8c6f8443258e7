"""Exact continued-fraction arithmetic with certified rational enclosures.

Every real-valued query returns a pair of rationals that provably bracket
the true value, and every inequality against e**(-k*q) is decided in exact
integer arithmetic.  Floats never enter a certification; downstream
numerics may round the enclosures outward.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

__all__ = [
    "DEFAULT_BIT_BUDGET",
    "PI_LOWER",
    "PI_UPPER",
    "DiophantineError",
    "InsufficientDepthError",
    "InsufficientPrecisionError",
    "BitBudgetError",
    "ContinuedFraction",
    "Convergent",
    "FractionalPartEnclosure",
    "LStarWitness",
    "WitnessSearch",
    "RigidityEntry",
    "RigiditySequence",
    "DiophantineEvidenceRow",
    "exp_bounds",
    "exp_ceil",
    "compare_to_exp_neg",
    "continued_fraction_of",
    "convergents",
    "fractional_part_multiple",
    "construct_lstar",
    "verify_lstar_witness",
    "rigidity_sequence",
    "approximate_in_lstar",
    "classify_diophantine_evidence",
    "chord_distance_enclosure",
    "cf_to_record",
    "cf_from_record",
]

DEFAULT_BIT_BUDGET = 2 ** 20

# Rational brackets of pi; 355/113 overshoots by ~2.7e-7, 333/106 undershoots.
PI_LOWER = Fraction(333, 106)
PI_UPPER = Fraction(355, 113)


class DiophantineError(Exception):
    """Base class for certification failures in this module."""


class InsufficientDepthError(DiophantineError):
    pass


class InsufficientPrecisionError(DiophantineError):
    pass


class BitBudgetError(DiophantineError):
    pass


# ---------------------------------------------------------------------------
# Certified bounds on powers of e
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _e_enclosure(terms: int) -> tuple[Fraction, Fraction]:
    """Bracket e by the partial sum of 1/k! and its tail bound 2/(terms+1)!."""
    total = Fraction(0)
    fact = 1
    for k in range(terms + 1):
        if k:
            fact *= k
        total += Fraction(1, fact)
    remainder = Fraction(2, fact * (terms + 1))
    return total, total + remainder


def exp_bounds(exponent: int, *, terms: int = 48) -> tuple[Fraction, Fraction]:
    """Certified rational enclosure of e**exponent, exponent a nonnegative int."""
    if exponent < 0:
        raise ValueError("exponent must be >= 0; take reciprocals for e**(-x)")
    if exponent == 0:
        return Fraction(1), Fraction(1)
    lo, hi = _e_enclosure(terms)
    return lo ** exponent, hi ** exponent


def exp_ceil(exponent: int, *, max_terms: int = 4096) -> int:
    """ceil(e**exponent), certified: refine the enclosure until both ends agree."""
    if exponent == 0:
        return 1
    terms = 24
    while terms <= max_terms:
        lo, hi = exp_bounds(exponent, terms=terms)
        clo, chi = math.ceil(lo), math.ceil(hi)
        if clo == chi:
            return clo
        terms *= 2
    raise InsufficientPrecisionError(
        f"could not resolve ceil(e^{exponent}) within {max_terms} series terms")


def compare_to_exp_neg(value: Fraction, exponent: int) -> int:
    """Certified comparison of a positive rational against e**(-exponent).

    Returns -1 when value < e**(-exponent) and +1 when value > e**(-exponent),
    both proven.  Cheap bit-length screens handle the overwhelming majority of
    calls; only near-ties fall through to an exact series enclosure.
    """
    if value <= 0:
        return -1
    if exponent == 0:
        return -1 if value < 1 else +1
    num, den = value.numerator, value.denominator
    nb, db = num.bit_length(), den.bit_length()
    # value >= 2^(nb-1-db); e^(-x) < 2^(-floor(1.4426 x)) since 1.4426 < 1/ln 2
    f = (exponent * 14426) // 10000
    if nb - 1 - db >= -f:
        return +1
    # value < 2^(nb-db+1); e^(-x) > 2^(-c) for c = floor(1.4428 x) + 1
    c = (exponent * 14428) // 10000 + 1
    if nb - db + 1 <= -c:
        return -1
    terms = 24
    while True:
        lo, hi = exp_bounds(exponent, terms=terms)
        if value * hi < 1:
            return -1
        if value * lo > 1:
            return +1
        terms *= 2
        if terms > 2 ** 16:
            raise InsufficientPrecisionError(
                f"comparison against e^-{exponent} did not resolve")


# ---------------------------------------------------------------------------
# Continued fractions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Convergent:
    p: int
    q: int
    index: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.p, self.q)


@dataclass(frozen=True)
class ContinuedFraction:
    """A real number known through partial quotients [a0; a1, a2, ...].

    With ``exact=False`` the object stands for *any* infinite continuation of
    the stored quotients; enclosures account for the unknown tail.  With
    ``exact=True`` the value is exactly the finite fraction.
    """

    a0: int
    quotients: tuple[int, ...] = ()
    exact: bool = False
    requested_extensions: int | None = None
    achieved_extensions: int | None = None
    budget_note: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "quotients", tuple(int(a) for a in self.quotients))
        if any(a < 1 for a in self.quotients):
            raise ValueError("partial quotients a_m must be >= 1 for m >= 1")

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def truncated(self, depth: int) -> "ContinuedFraction":
        if depth > self.depth:
            raise InsufficientDepthError(
                f"depth {depth} exceeds stored expansion ({self.depth})")
        return ContinuedFraction(self.a0, self.quotients[:depth], exact=self.exact and depth == self.depth)

    def convergent_pairs(self, depth: int | None = None) -> list[tuple[int, int]]:
        """(p_m, q_m) for m = 0..depth via the standard three-term recurrence."""
        depth = self.depth if depth is None else depth
        if depth > self.depth:
            raise InsufficientDepthError(
                f"depth {depth} exceeds stored expansion ({self.depth})")
        p_prev, q_prev = 1, 0
        p, q = self.a0, 1
        pairs = [(p, q)]
        for m in range(1, depth + 1):
            a = self.quotients[m - 1]
            p, p_prev = a * p + p_prev, p
            q, q_prev = a * q + q_prev, q
            pairs.append((p, q))
        return pairs

    def value_enclosure(self) -> tuple[Fraction, Fraction]:
        """Certified bracket of the represented value."""
        pairs = self.convergent_pairs()
        p, q = pairs[-1]
        if self.exact:
            v = Fraction(p, q)
            return v, v
        if self.depth == 0:
            return Fraction(self.a0), Fraction(self.a0 + 1)
        p_prev, q_prev = pairs[-2]
        # tail value t in (1, inf): alpha = (p t + p_prev)/(q t + q_prev)
        end_t1 = Fraction(p + p_prev, q + q_prev)
        end_inf = Fraction(p, q)
        return (end_t1, end_inf) if end_t1 <= end_inf else (end_inf, end_t1)

    def gap_enclosure(self, m: int) -> tuple[Fraction, Fraction]:
        """Certified bracket of |alpha - p_m/q_m|.

        Intersects the classical consecutive-denominator bounds
        1/(q_m(q_(m+1)+q_m)) < gap < 1/(q_m q_(m+1)) with the bracket induced
        by the deepest value enclosure, which is far tighter when the stored
        expansion runs well past m.
        """
        pairs = self.convergent_pairs()
        if m > self.depth:
            raise InsufficientDepthError(f"no convergent at depth {m}")
        p, q = pairs[m]
        cm = Fraction(p, q)
        if self.exact:
            lo, hi = self.value_enclosure()
            g = abs(lo - cm)
            return g, g
        if m < self.depth:
            q_next = pairs[m + 1][1]
            lo = Fraction(1, q * (q_next + q))
            hi = Fraction(1, q * q_next)
        else:
            q_prev = pairs[m - 1][1] if m >= 1 else 0
            # unknown tail t in (1, inf): gap = 1/(q (q t + q_prev))
            lo = Fraction(0)
            hi = Fraction(1, q * (q + q_prev))
        v_lo, v_hi = self.value_enclosure()
        if cm <= v_lo or cm >= v_hi:
            d1, d2 = abs(v_lo - cm), abs(v_hi - cm)
            lo = max(lo, min(d1, d2))
            hi = min(hi, max(d1, d2))
        return lo, hi

    def below_convergent(self, m: int) -> bool:
        """True when p_m/q_m < alpha (even m for a nonterminating expansion)."""
        return m % 2 == 0


def continued_fraction_of(value: Fraction) -> ContinuedFraction:
    """Exact (finite) continued fraction of a rational, canonical form."""
    value = Fraction(value)
    a0 = math.floor(value)
    rest = value - a0
    quotients: list[int] = []
    while rest:
        rest = 1 / rest
        a = math.floor(rest)
        quotients.append(a)
        rest -= a
    return ContinuedFraction(a0, tuple(quotients), exact=True)


def convergents(cf: ContinuedFraction, depth: int) -> list[Convergent]:
    """Convergents p_m/q_m for m = 0..depth.

    Raises InsufficientDepthError when the expansion is too short.
    """
    pairs = cf.convergent_pairs(depth)
    return [Convergent(p, q, m) for m, (p, q) in enumerate(pairs)]


# ---------------------------------------------------------------------------
# Fractional parts of multiples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FractionalPartEnclosure:
    n: int
    lower: Fraction
    upper: Fraction

    def __post_init__(self) -> None:
        if not (0 <= self.lower <= self.upper < 1):
            raise ValueError("fractional-part enclosure must sit inside [0, 1)")

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    def midpoint_float(self) -> float:
        return float((self.lower + self.upper) / 2)


def fractional_part_multiple(cf: ContinuedFraction, n: int) -> FractionalPartEnclosure:
    """Certified enclosure of {n*alpha}.

    Fails with InsufficientPrecisionError when the enclosure of n*alpha
    straddles an integer (more expansion depth is needed to place it).
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    lo, hi = cf.value_enclosure()
    nlo, nhi = n * lo, n * hi
    if nhi - nlo >= 1:
        raise InsufficientPrecisionError(
            f"enclosure of {n}*alpha has width {float(nhi - nlo):.3g} >= 1; "
            f"extend the expansion until q_M*q_(M+1) > {n}")
    fl, fh = math.floor(nlo), math.floor(nhi)
    if fl != fh:
        if cf.exact and nhi == fh:
            # n*alpha is exactly an integer
            return FractionalPartEnclosure(n, Fraction(0), Fraction(0))
        raise InsufficientPrecisionError(
            f"enclosure of {n}*alpha straddles the integer {fh}; "
            "deepen the continued fraction to separate {n*alpha} from 0/1")
    return FractionalPartEnclosure(n, nlo - fl, nhi - fl)


def chord_distance_enclosure(frac: FractionalPartEnclosure) -> tuple[Fraction, Fraction]:
    """Certified bracket of 2*|sin(pi*{n alpha})|, the displacement of a rigid
    rotation iterate on the boundary circle.

    Uses x - x^3/6 <= sin x <= x on [0, pi] together with rational pi bounds
    and the symmetry sin(pi x) = sin(pi(1-x)).
    """
    m_lo = min(frac.lower, 1 - frac.upper)
    m_hi = min(frac.upper, 1 - frac.lower)
    if m_lo < 0:
        m_lo = Fraction(0)
    x_hi = PI_UPPER * m_hi
    x_lo = PI_LOWER * m_lo
    upper = 2 * x_hi
    lower = 2 * (x_lo - x_lo ** 3 / 6)
    if lower < 0:
        lower = Fraction(0)
    return lower, upper


# ---------------------------------------------------------------------------
# The exponential-Liouville construction and its certificates
# ---------------------------------------------------------------------------

def _extension_bits(level: int, q: int) -> int:
    # bits of ceil(e^(level*q)) is about level*q*log2(e)
    return (level * q * 14427) // 10000 + 2


def construct_lstar(seed: Sequence[int], depth: int, *,
                    bit_budget: int = DEFAULT_BIT_BUDGET) -> ContinuedFraction:
    """Extend a seed expansion [a0; a1, ...] by a_(m+1) = ceil(e^(m*q_m)).

    Each extension at level m certifies |alpha - p_m/q_m| < 1/(q_m q_(m+1))
    < e^(-m*q_m).  Quotients explode doubly-exponentially, so construction
    stops early once the next quotient would exceed ``bit_budget`` bits; the
    returned object records requested vs. achieved extension counts.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    seed = list(seed)
    if not seed:
        raise ValueError("seed must contain at least the integer part a0")
    a0, rest = seed[0], seed[1:]
    cf = ContinuedFraction(a0, tuple(rest))
    if depth == 0:
        return replace(cf, requested_extensions=0, achieved_extensions=0)
    quotients = list(cf.quotients)
    achieved = 0
    note = ""
    for _ in range(depth):
        work = ContinuedFraction(a0, tuple(quotients))
        m = work.depth
        q_m = work.convergent_pairs()[-1][1]
        bits = _extension_bits(max(m, 1), q_m)
        if bits > bit_budget:
            note = (f"extension {achieved + 1} of {depth} needs ~{bits} bits "
                    f"(> budget {bit_budget}); achievable depth is {achieved}")
            break
        quotients.append(exp_ceil(m * q_m))
        achieved += 1
    return ContinuedFraction(a0, tuple(quotients),
                             requested_extensions=depth,
                             achieved_extensions=achieved,
                             budget_note=note)


@dataclass(frozen=True)
class LStarWitness:
    k: int
    p: int
    q: int
    gap_lower: Fraction
    gap_upper: Fraction


@dataclass(frozen=True)
class WitnessSearch:
    certified: bool
    witness: LStarWitness | None
    checked_depth: int
    reason: str = ""


def verify_lstar_witness(cf: ContinuedFraction, k: int) -> WitnessSearch:
    """First (smallest-q) convergent certified to satisfy |alpha - p/q| < e^(-k q).

    A negative answer means "not certified at the stored depth", never a
    proof of absence.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if cf.exact:
        return WitnessSearch(False, None, cf.depth,
                             "value is rational; the exponential-Liouville "
                             "condition concerns irrationals")
    pairs = cf.convergent_pairs()
    for m in range(1, cf.depth + 1):
        p, q = pairs[m]
        lo, hi = cf.gap_enclosure(m)
        if compare_to_exp_neg(hi, k * q) == -1:
            return WitnessSearch(True, LStarWitness(k, p, q, lo, hi), cf.depth)
    return WitnessSearch(False, None, cf.depth,
                         f"no convergent up to depth {cf.depth} certifies "
                         f"gap < e^(-{k} q)")


@dataclass(frozen=True)
class RigidityEntry:
    j: int
    n: int
    frac_lower: Fraction
    frac_upper: Fraction
    inverse: bool

    @property
    def small_upper(self) -> Fraction:
        """Upper bound of the small quantity: {n a} or 1 - {n a} per the flag."""
        return (1 - self.frac_lower) if self.inverse else self.frac_upper


@dataclass(frozen=True)
class RigiditySequence:
    entries: tuple[RigidityEntry, ...]
    note: str = ""

    def __len__(self) -> int:
        return len(self.entries)


def rigidity_sequence(cf: ContinuedFraction, J: int) -> RigiditySequence:
    """Iterate times n_j with certified {n_j alpha} <= n_j e^(-j n_j).

    Candidates are convergent denominators q_m (m >= 1), taken strictly
    increasing.  For each j the smallest denominator whose *direct*
    fractional part certifies the bound is preferred; if none does, the
    inverse side 1 - {n alpha} is tried and the entry flagged, signalling
    that the experiment should run on the inverse map.  The sequence is
    truncated with an explanation once no candidate certifies.
    """
    if J < 0:
        raise ValueError("J must be >= 0")
    if cf.exact:
        return RigiditySequence((), "value is rational; no rigidity sequence")
    pairs = cf.convergent_pairs()
    entries: list[RigidityEntry] = []
    prev_n = 0
    note = ""
    for j in range(1, J + 1):
        found: RigidityEntry | None = None
        for want_inverse in (False, True):
            for m in range(1, cf.depth + 1):
                q = pairs[m][1]
                if q <= prev_n:
                    continue
                inverse = not cf.below_convergent(m)
                if inverse != want_inverse:
                    continue
                lo, hi = cf.gap_enclosure(m)
                # n*gap <= n*e^(-j n)  <=>  gap <= e^(-j q)
                if compare_to_exp_neg(hi, j * q) != -1:
                    continue
                if inverse:
                    frac_lo, frac_hi = 1 - q * hi, 1 - q * lo
                else:
                    frac_lo, frac_hi = q * lo, q * hi
                found = RigidityEntry(j, q, frac_lo, frac_hi, inverse)
                break
            if found is not None:
                break
        if found is None:
            note = (f"stopped at j={j}: no convergent denominator above {prev_n} "
                    f"certifies {{n alpha}} <= n e^(-{j} n) at depth {cf.depth}")
            break
        entries.append(found)
        prev_n = found.n
    return RigiditySequence(tuple(entries), note)


def approximate_in_lstar(target: Fraction, epsilon: Fraction, depth: int, *,
                         bit_budget: int = DEFAULT_BIT_BUDGET) -> ContinuedFraction:
    """A certified member of the exponential-Liouville class within epsilon
    of a given rational target.

    Starts from the exact expansion of the target and extends it with the
    construct_lstar rule; the first added quotient is enlarged if necessary
    so the whole extension stays inside the epsilon-neighborhood (larger
    quotients only sharpen the approximation certificates).
    """
    target = Fraction(target)
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    base = continued_fraction_of(target)
    quotients = list(base.quotients)
    a0 = base.a0
    K = len(quotients)
    pairs = base.convergent_pairs()
    q_K = pairs[-1][1]
    # first extension: at least the construction rule, at least enough for epsilon
    min_for_eps = math.ceil(Fraction(2, epsilon * q_K * q_K)) + 1
    if min_for_eps.bit_length() > bit_budget:
        raise BitBudgetError("epsilon so small the first quotient exceeds the bit budget")
    note = ""
    if _extension_bits(max(K, 1), q_K) <= bit_budget:
        first = max(exp_ceil(K * q_K), min_for_eps)
    else:
        first = min_for_eps
        note = (f"rule quotient at level {K} exceeds the bit budget; "
                "only the epsilon containment is certified at this level")
    quotients.append(first)
    achieved = 1
    requested = max(depth, 1)
    # extension at level m certifies the class condition for all k <= m,
    # so extend until the deepest extension level reaches the requested depth
    while K + achieved <= requested:
        work = ContinuedFraction(a0, tuple(quotients))
        m = work.depth
        q_m = work.convergent_pairs()[-1][1]
        if _extension_bits(m, q_m) > bit_budget:
            note = (note + "; " if note else "") + (
                f"stopped after {achieved} extensions: next quotient "
                f"exceeds the {bit_budget}-bit budget")
            break
        quotients.append(exp_ceil(m * q_m))
        achieved += 1
    out = ContinuedFraction(a0, tuple(quotients),
                            requested_extensions=requested,
                            achieved_extensions=achieved,
                            budget_note=note)
    lo, hi = out.value_enclosure()
    err = max(abs(lo - target), abs(hi - target))
    if err >= epsilon:
        raise InsufficientPrecisionError(
            f"constructed value only within {float(err):.3g} of target")
    return out


@dataclass(frozen=True)
class DiophantineEvidenceRow:
    k: int
    status: str                    # "present" | "absent" | "inconclusive"
    witness_index: int | None = None
    witness: tuple[int, int] | None = None


def classify_diophantine_evidence(cf: ContinuedFraction, k_max: int,
                                  depth: int | None = None) -> list[DiophantineEvidenceRow]:
    """Finite-depth evidence for polynomial (Liouville-type) approximability.

    For each k <= k_max, reports whether some convergent with q >= 2 up to
    the given depth certifies |alpha - p/q| < 1/q^k.  Denominator 1 is
    excluded: with q = 1 the polynomial condition is vacuous.  "absent"
    means every inspected convergent is certified to fail; it is evidence
    at finite depth, never a proof of Diophantineness.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    depth = cf.depth if depth is None else min(depth, cf.depth)
    pairs = cf.convergent_pairs()
    rows: list[DiophantineEvidenceRow] = []
    for k in range(1, k_max + 1):
        status = "absent"
        witness_m = None
        witness = None
        for m in range(1, depth + 1):
            p, q = pairs[m]
            if q < 2:
                continue
            lo, hi = cf.gap_enclosure(m)
            threshold = Fraction(1, q ** k)
            if hi < threshold:
                status, witness_m, witness = "present", m, (p, q)
                break
            if not lo > threshold:
                status = "inconclusive"
        if status == "absent" and not any(pairs[m][1] >= 2 for m in range(1, depth + 1)):
            status = "inconclusive"
        rows.append(DiophantineEvidenceRow(k, status, witness_m, witness))
    return rows


# ---------------------------------------------------------------------------
# Structured text records
# ---------------------------------------------------------------------------

def cf_to_record(cf: ContinuedFraction) -> str:
    """Serialize as a structured text record; big integers as decimal strings."""
    payload = {
        "type": "continued_fraction",
        "a0": str(cf.a0),
        "quotients": [str(a) for a in cf.quotients],
        "exact": cf.exact,
    }
    if cf.requested_extensions is not None:
        payload["requested_extensions"] = cf.requested_extensions
        payload["achieved_extensions"] = cf.achieved_extensions
    if cf.budget_note:
        payload["budget_note"] = cf.budget_note
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def cf_from_record(text: str) -> ContinuedFraction:
    payload = json.loads(text)
    if payload.get("type") != "continued_fraction":
        raise ValueError("record is not a continued_fraction")
    return ContinuedFraction(
        int(payload["a0"]),
        tuple(int(a) for a in payload["quotients"]),
        exact=bool(payload.get("exact", False)),
        requested_extensions=payload.get("requested_extensions"),
        achieved_extensions=payload.get("achieved_extensions"),
        budget_note=payload.get("budget_note", ""),
    )
