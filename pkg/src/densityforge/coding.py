"""Coded sets built from factorials and powers: sparse images by construction.

The factorial coding plants a set's bits on {(n+2)!}, which thins any X down
to a density-0 image while keeping membership questions intertranslatable.
The oscillator overlays that coding with blocks [(2k)!, (2k+1)!) whose
presence forces the partial densities to swing between near 0 and near 1
forever.  Ruler sets stratify the positive naturals by 2-adic valuation, and
the power coding squeezes any function's range into the powers of two.
"""

from __future__ import annotations

from bisect import bisect_right
from fractions import Fraction
from math import factorial

from .core import (
    CLAIM_INJECTIVE,
    CLAIM_STAR_INJECTIVE,
    CLAIM_TOTAL,
    DomainError,
    FuncSpec,
    SetKind,
    SetSpec,
    Verdict,
)
from .descriptions import Answer, Description, DescriptionMode

DEFAULT_WIDTH_BITS = 4096

# k! at index k; grown on demand, shared by every lookup
_FACTORIALS = [1, 1]


def _factorials_upto(m: int) -> list:
    while _FACTORIALS[-1] <= m:
        _FACTORIALS.append(_FACTORIALS[-1] * len(_FACTORIALS))
    return _FACTORIALS


def floor_factorial_index(m: int) -> int:
    """Largest k with k! <= m; needs m >= 1."""
    if m < 1:
        raise DomainError(f"no factorial is <= {m}")
    table = _factorials_upto(m)
    return bisect_right(table, m) - 1


def factorial_index_ge2(m: int):
    """The k >= 2 with k! == m, or None when m is not such a factorial."""
    if m < 2:
        return None
    k = floor_factorial_index(m)
    return k if k >= 2 and _FACTORIALS[k] == m else None


def count_factorials_ge2_below(n: int) -> int:
    """|{k! : k >= 2} ∩ [0, n)|, exactly."""
    if n <= 2:
        return 0
    return max(0, floor_factorial_index(n - 1) - 1)


def nonfactorial_at(i: int) -> int:
    """The i-th natural (0-indexed) outside {k! : k >= 2}; 0 and 1 count."""
    if i < 0:
        raise DomainError(f"rank must be a natural, got {i}")
    # least fixpoint of x = i + (factorials skipped up to x); the fixpoint
    # itself can never land on a factorial because x-1 would fix first
    x = i
    while True:
        x2 = i + count_factorials_ge2_below(x + 1)
        if x2 == x:
            return x
        x = x2


def nonfactorial_rank(m: int) -> int:
    """Position of m within the non-factorials; m must be one of them."""
    if m < 0 or factorial_index_ge2(m) is not None:
        raise DomainError(f"{m} is not a non-factorial natural")
    return m - count_factorials_ge2_below(m)


def two_adic_valuation(n: int) -> int:
    """Exponent of 2 in n, for n >= 1."""
    if n < 1:
        raise DomainError(f"valuation needs a positive argument, got {n}")
    return (n & -n).bit_length() - 1


def factorials_ge2_set() -> SetSpec:
    """The decidable set {k! : k >= 2} with exact counting and enumeration."""

    def member(n: int, budget: int) -> Verdict:
        return Verdict.IN if factorial_index_ge2(n) is not None else Verdict.OUT

    return SetSpec(
        name="factorials-ge2",
        kind=SetKind.DECIDABLE,
        membership_fn=member,
        enumerator=lambda i: factorial(i + 2),
        enumerator_increasing=True,
        counter=lambda n, budget: count_factorials_ge2_below(n),
        recipe={"combinator": "factorials_ge2"},
    )


# ---------------------------------------------------------------------------
# factorial coding


def factorial_code(base: SetSpec) -> tuple:
    """Plant base on the factorials: A = {(n+2)! : n in base}.

    Returns (A, D) where D is the effective-dense description answering box
    exactly on {k! : k >= 2} and zero elsewhere.  D never answers one, so it
    never contradicts A no matter what base is; its whole error budget is
    the box set, whose density below n is at most (m+1)/n for m! <= n.
    """

    def member(m: int, budget: int) -> Verdict:
        k = factorial_index_ge2(m)
        if k is None:
            return Verdict.OUT
        return base.membership_fn(k - 2, budget)

    def counter(n: int, budget: int):
        if n < 3:
            return 0
        total = 0
        for k in range(2, floor_factorial_index(n - 1) + 1):
            v = base.membership_fn(k - 2, budget)
            if v is Verdict.UNKNOWN:
                return None
            if v is Verdict.IN:
                total += 1
        return total

    enumerator = None
    if base.enumerator is not None:
        base_enum = base.enumerator

        def enumerator(i: int) -> int:
            return factorial(base_enum(i) + 2)

    coded = SetSpec(
        name=f"factorial-code({base.name})",
        kind=base.kind,
        membership_fn=member,
        enumerator=enumerator,
        enumerator_increasing=base.enumerator_increasing,
        counter=counter,
        size=base.size,
        recipe={"combinator": "factorial_code", "base": base.name},
    )

    def answer(n: int, budget: int) -> Answer:
        return Answer.BOX if factorial_index_ge2(n) is not None else Answer.ZERO

    desc = Description(
        name=f"box-on-factorials({base.name})",
        mode=DescriptionMode.EFFECTIVE_DENSE,
        answer_fn=answer,
        recipe={"combinator": "factorial_code_description", "base": base.name},
    )
    return coded, desc


def box_density_bound(n: int) -> Fraction:
    """(m+1)/n with m maximal such that m! <= n; certified box-set envelope."""
    if n < 1:
        raise DomainError("bound needs a positive checkpoint")
    return Fraction(floor_factorial_index(n) + 1, n)


# ---------------------------------------------------------------------------
# oscillating density


def oscillator(base: SetSpec) -> SetSpec:
    """Factorial coding of base plus the blocks [(2k)!, (2k+1)!) for k >= 1.

    Intervals are taken closed on the left: [(2k)!, (2k+1)!) instead of
    excluding both endpoints.  With the left endpoint in, the window count
    at (2k+1)! is at least (2k+1)! - (2k)! for every base, so the high-side
    density bound 1 - 1/(2k+1) holds exactly; the low-side bound at (2k+2)!
    survives because everything past (2k+1)! outside the coded points stays
    out.  Membership reduces to one factorial-index computation plus at most
    one base query, so the kind tag carries over unchanged.
    """

    def member(m: int, budget: int) -> Verdict:
        if m < 2:
            return Verdict.OUT
        j = floor_factorial_index(m)
        if j >= 2 and j % 2 == 0:
            # inside [(j)!, (j+1)!) with j even: block member
            return Verdict.IN
        if j >= 3 and _FACTORIALS[j] == m:
            # odd factorial point: present iff coded by base
            return base.membership_fn(j - 2, budget)
        return Verdict.OUT

    def counter(n: int, budget: int):
        if n < 3:
            return 0
        total = 0
        k = 1
        while factorial(2 * k) < n:
            total += min(n, factorial(2 * k + 1)) - factorial(2 * k)
            k += 1
        for j in range(3, floor_factorial_index(n - 1) + 1, 2):
            v = base.membership_fn(j - 2, budget)
            if v is Verdict.UNKNOWN:
                return None
            if v is Verdict.IN:
                total += 1
        return total

    return SetSpec(
        name=f"oscillator({base.name})",
        kind=base.kind,
        membership_fn=member,
        counter=counter,
        recipe={"combinator": "oscillator", "base": base.name},
    )


def oscillator_bounds(checkpoint_pairs: int) -> list:
    """Per-k exact bound pair for the oscillator at factorial checkpoints.

    Row k (from 1) states: density at (2k+1)! is >= 1 - 1/(2k+1), and
    density at (2k+2)! is <= 1/(2k+2).  Both hold for every base set.
    """
    rows = []
    for k in range(1, checkpoint_pairs + 1):
        rows.append(
            {
                "k": k,
                "high_checkpoint": factorial(2 * k + 1),
                "high_bound": Fraction(2 * k, 2 * k + 1),
                "low_checkpoint": factorial(2 * k + 2),
                "low_bound": Fraction(1, 2 * k + 2),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# ruler sets


def ruler_set(e: int) -> SetSpec:
    """{n >= 1 : exactly 2^e divides n}; decidable with closed-form counts."""
    if e < 0:
        raise DomainError(f"valuation level must be a natural, got {e}")

    def member(n: int, budget: int) -> Verdict:
        if n < 1:
            return Verdict.OUT
        return Verdict.IN if two_adic_valuation(n) == e else Verdict.OUT

    def counter(n: int, budget: int) -> int:
        # members below n are (2i+1) * 2^e < n
        if n < 1:
            return 0
        return (((n - 1) >> e) + 1) // 2

    return SetSpec(
        name=f"ruler-{e}",
        kind=SetKind.DECIDABLE,
        membership_fn=member,
        enumerator=lambda i: (2 * i + 1) << e,
        enumerator_increasing=True,
        counter=counter,
        recipe={"combinator": "ruler", "level": e},
    )


def ruler_collapse() -> FuncSpec:
    """Total map sending 0 to 0 and n to its 2-adic valuation."""

    def evaluate(n: int, budget: int) -> int:
        return 0 if n == 0 else two_adic_valuation(n)

    return FuncSpec(
        name="ruler-collapse",
        evaluate_fn=evaluate,
        claims=frozenset({CLAIM_TOTAL}),
        recipe={"combinator": "ruler_collapse"},
    )


# ---------------------------------------------------------------------------
# power coding


def power_code(f: FuncSpec, width_bits: int = DEFAULT_WIDTH_BITS) -> FuncSpec:
    """g(n) = 2 ** f(n); range lives inside the powers of two.

    Exponents needing more than width_bits bits raise OverflowError rather
    than wrapping or silently succeeding; divergence of f passes through.
    """
    if width_bits < 1:
        raise DomainError("width must be positive")

    def evaluate(n: int, budget: int):
        v = f.evaluate_fn(n, budget)
        if v is None:
            return None
        if v >= width_bits:
            raise OverflowError(
                f"2**{v} needs {v + 1} bits, over the {width_bits}-bit width"
            )
        return 1 << v

    # doubling preserves totality and (star-)injectivity claims verbatim
    kept = f.claims & {CLAIM_TOTAL, CLAIM_INJECTIVE, CLAIM_STAR_INJECTIVE}
    return FuncSpec(
        name=f"power-code({f.name})",
        evaluate_fn=evaluate,
        claims=frozenset(kept),
        recipe={"combinator": "power_code", "base": f.name, "width_bits": width_bits},
    )
