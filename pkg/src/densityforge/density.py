"""Exact finite-prefix density profiles and windowed smallness verdicts.

True asymptotic densities are limits no procedure can certify; everything
here is either an exact rational about a stated finite window or an empirical
estimate labelled as such.  The verdict vocabulary is fixed:
consistent-with-density-0, refuted-on-window, inconclusive.  Refutation on a
window is the only sound positive claim this module ever makes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, factorial
from typing import Callable

from .core import (
    DomainError,
    FuncSpec,
    PermSpec,
    SetKind,
    SetSpec,
    Verdict,
    _resolve_budget,
    image_prefix,
)

VERDICT_CONSISTENT = "consistent-with-density-0"
VERDICT_REFUTED = "refuted-on-window"
VERDICT_INCONCLUSIVE = "inconclusive"

DEFAULT_THRESHOLD = Fraction(1, 10)
DEFAULT_TAIL_DIVISOR = 10


def default_tail_start(window: int) -> int:
    return max(1, ceil(window / DEFAULT_TAIL_DIVISOR))


# ---------------------------------------------------------------------------
# checkpoint schedules


def upto_schedule(limit: int) -> list:
    if limit < 1:
        raise DomainError("upto schedule needs a positive limit")
    return list(range(1, limit + 1))


def factorial_schedule(count: int) -> list:
    """The first count factorial checkpoints starting at 2!."""
    if count < 1:
        raise DomainError("factorial schedule needs a positive count")
    return [factorial(k) for k in range(2, count + 2)]


def paper_schedule(pairs: int) -> list:
    """Checkpoints (2n+1)! and (2n+2)! for n below pairs, deduplicated."""
    if pairs < 1:
        raise DomainError("paper schedule needs a positive pair count")
    points = set()
    for n in range(pairs):
        points.add(factorial(2 * n + 1))
        points.add(factorial(2 * n + 2))
    return sorted(points)


def parse_schedule(text: str) -> list:
    """Parse upto:N | factorials:K | paper:K."""
    head, sep, tail = text.partition(":")
    if not sep or not tail.isdigit():
        raise DomainError(f"bad schedule {text!r}; want upto:N, factorials:K or paper:K")
    value = int(tail)
    if head == "upto":
        return upto_schedule(value)
    if head == "factorials":
        return factorial_schedule(value)
    if head == "paper":
        return paper_schedule(value)
    raise DomainError(f"unknown schedule kind {head!r}")


# ---------------------------------------------------------------------------
# profiles


@dataclass
class DensityProfile:
    """Exact member counts and densities of a set at chosen checkpoints.

    values[i] is the exact Fraction count(checkpoints[i]) / checkpoints[i]
    over the resolved points; unresolved[i] counts Unknown verdicts below the
    checkpoint, so count is a certified lower bound whenever it is zero.
    """

    set_name: str
    checkpoints: list
    counts: list
    values: list
    unresolved: list

    def rows(self):
        for n, c, v, u in zip(self.checkpoints, self.counts, self.values, self.unresolved):
            yield (n, c, v.numerator, v.denominator, u)

    def to_dict(self) -> dict:
        return {
            "set": self.set_name,
            "rows": [
                {
                    "n": n,
                    "count": c,
                    "numerator": num,
                    "denominator": den,
                    "unresolved": u,
                }
                for (n, c, num, den, u) in self.rows()
            ],
        }


def partial_density(spec: SetSpec, n: int, budget: int | None = None):
    """Exact ρ_n over resolved points, plus the unresolved count below n."""
    if n < 1:
        raise DomainError("density checkpoint must be positive")
    b = _resolve_budget(budget)
    count = 0
    unresolved = 0
    for m in range(n):
        v = spec.membership_fn(m, b)
        if v is Verdict.IN:
            count += 1
        elif v is Verdict.UNKNOWN:
            unresolved += 1
    return Fraction(count, n), unresolved


def density_profile(spec: SetSpec, schedule, budget: int | None = None) -> DensityProfile:
    checkpoints = list(schedule)
    if not checkpoints:
        raise DomainError("schedule must be non-empty")
    if any(n < 1 for n in checkpoints) or any(
        a >= b for a, b in zip(checkpoints, checkpoints[1:])
    ):
        raise DomainError("schedule must be strictly increasing and positive")
    b = _resolve_budget(budget)
    counts = []
    unresolved_counts = []
    count = 0
    unresolved = 0
    position = 0
    for n in checkpoints:
        while position < n:
            v = spec.membership_fn(position, b)
            if v is Verdict.IN:
                count += 1
            elif v is Verdict.UNKNOWN:
                unresolved += 1
            position += 1
        counts.append(count)
        unresolved_counts.append(unresolved)
    values = [Fraction(c, n) for c, n in zip(counts, checkpoints)]
    return DensityProfile(spec.name, checkpoints, counts, values, unresolved_counts)


@dataclass(frozen=True)
class Extrema:
    tail_start: int
    min_value: Fraction
    min_witness: int
    max_value: Fraction
    max_witness: int


def empirical_extrema(profile: DensityProfile, tail_start: int) -> Extrema:
    """Min and max checkpoint densities at or beyond tail_start, with witnesses."""
    best = None
    for n, value in zip(profile.checkpoints, profile.values):
        if n < tail_start:
            continue
        if best is None:
            best = [value, n, value, n]
        else:
            if value < best[0]:
                best[0], best[1] = value, n
            if value > best[2]:
                best[2], best[3] = value, n
    if best is None:
        raise DomainError(f"no checkpoint at or beyond tail start {tail_start}")
    return Extrema(tail_start, best[0], best[1], best[2], best[3])


# ---------------------------------------------------------------------------
# windowed smallness


@dataclass
class SmallnessRow:
    """One family member's windowed image-density evidence.

    scope is "full" when densities count the whole image on [0, n) (resolved
    through a permutation inverse) and "window-image" when they count images
    of window inputs only, which is a sound lower bound.
    """

    name: str
    scope: str
    window: int
    verdict: str
    tail_max: Fraction | None = None
    max_witness: int | None = None
    tail_min: Fraction | None = None
    min_witness: int | None = None
    unresolved_tail: int = 0
    profile: DensityProfile | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "scope": self.scope,
            "window": self.window,
            "verdict": self.verdict,
            "tail_max_numerator": None if self.tail_max is None else self.tail_max.numerator,
            "tail_max_denominator": None if self.tail_max is None else self.tail_max.denominator,
            "max_witness": self.max_witness,
            "tail_min_numerator": None if self.tail_min is None else self.tail_min.numerator,
            "tail_min_denominator": None if self.tail_min is None else self.tail_min.denominator,
            "min_witness": self.min_witness,
            "unresolved_tail": self.unresolved_tail,
        }


@dataclass
class SmallnessReport:
    set_name: str
    window: int
    tail_start: int
    threshold: Fraction
    rows: list

    def to_dict(self) -> dict:
        return {
            "set": self.set_name,
            "window": self.window,
            "tail_start": self.tail_start,
            "threshold_numerator": self.threshold.numerator,
            "threshold_denominator": self.threshold.denominator,
            "rows": [row.to_dict() for row in self.rows],
        }


def _classify(bits, window, tail_start, threshold, name, scope, keep_profile):
    """bits: per-point 1/0/None flags for image membership on [0, window)."""
    counts = []
    unresolved_counts = []
    count = 0
    unresolved = 0
    for flag in bits:
        if flag is None:
            unresolved += 1
        elif flag:
            count += 1
        counts.append(count)
        unresolved_counts.append(unresolved)
    tail_max = tail_min = None
    max_witness = min_witness = None
    refuted_at = None
    unresolved_tail = 0
    possible_reach = False
    for n in range(tail_start, window + 1):
        c = counts[n - 1]
        u = unresolved_counts[n - 1]
        rho = Fraction(c, n)
        if tail_max is None or rho > tail_max:
            tail_max, max_witness = rho, n
        if tail_min is None or rho < tail_min:
            tail_min, min_witness = rho, n
        unresolved_tail = max(unresolved_tail, u)
        # counts hold only certain members, so rho is a certified lower bound
        if rho >= threshold and refuted_at is None:
            refuted_at = n
        if u > 0 and Fraction(c + u, n) >= threshold:
            possible_reach = True
    if refuted_at is not None:
        verdict = VERDICT_REFUTED
    elif possible_reach:
        verdict = VERDICT_INCONCLUSIVE
    else:
        verdict = VERDICT_CONSISTENT
    profile = None
    if keep_profile:
        checkpoints = list(range(1, window + 1))
        profile = DensityProfile(
            name,
            checkpoints,
            counts,
            [Fraction(c, n) for c, n in zip(counts, checkpoints)],
            unresolved_counts,
        )
    return SmallnessRow(
        name=name,
        scope=scope,
        window=window,
        verdict=verdict,
        tail_max=tail_max,
        max_witness=max_witness,
        tail_min=tail_min,
        min_witness=min_witness,
        unresolved_tail=unresolved_tail,
        profile=profile,
    )


def smallness_report(
    spec: SetSpec,
    family,
    window: int,
    tail_start: int | None = None,
    threshold: Fraction | None = None,
    budget: int | None = None,
    allow_oracle: bool = False,
    keep_profiles: bool = False,
) -> SmallnessReport:
    """Windowed image densities of spec under each family member.

    Permutations resolve image membership through their inverse ("full"
    scope); plain functions contribute the image of the window's inputs only
    ("window-image" scope), a certified lower bound.  A row is
    refuted-on-window only at a checkpoint with zero unresolved points.
    """
    if window < 1:
        raise DomainError("window must be positive")
    b = _resolve_budget(budget)
    threshold = DEFAULT_THRESHOLD if threshold is None else Fraction(threshold)
    tail_start = default_tail_start(window) if tail_start is None else tail_start
    if not 1 <= tail_start <= window:
        raise DomainError("tail start must lie inside the window")
    rows = []
    for member in family:
        if isinstance(member, PermSpec):
            if not allow_oracle and _oracle_backed_perm(member):
                rows.append(
                    SmallnessRow(
                        name=member.name,
                        scope="full",
                        window=window,
                        verdict=VERDICT_INCONCLUSIVE,
                    )
                )
                continue
            bits = []
            for m in range(window):
                v = member.image_membership(m, spec, b)
                bits.append(1 if v is Verdict.IN else 0 if v is Verdict.OUT else None)
            rows.append(
                _classify(bits, window, tail_start, threshold, member.name, "full", keep_profiles)
            )
        elif isinstance(member, FuncSpec):
            image = image_prefix(member, spec, window, window, b)
            # unresolved inputs could map anywhere, so unseen points stay open
            bits = [0] * window if image.complete else [None] * window
            for v in image.values:
                bits[v] = 1
            rows.append(
                _classify(
                    bits, window, tail_start, threshold, member.name, "window-image", keep_profiles
                )
            )
        else:
            raise DomainError(f"family members must be FuncSpec or PermSpec, got {member!r}")
    return SmallnessReport(spec.name, window, tail_start, threshold, rows)


def _oracle_backed_perm(perm: PermSpec) -> bool:
    for side in (perm.forward, perm.inverse):
        spec = side.range_spec
        if spec is not None and spec.kind is SetKind.ORACLE_BACKED:
            return True
    return bool(perm.recipe and perm.recipe.get("oracle_backed"))
