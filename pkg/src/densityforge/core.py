"""Step-budgeted sets, partial functions and permutations on the naturals.

Everything in this package computes exact finite-prefix quantities.  A spec is
a pure function of (point, budget): verdicts are deterministic, monotone in
the budget, and never consult wall-clock time.  Budgets are abstract step
counts; the default comes from the DENSITY_FORGE_BUDGET environment variable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import ceil
from typing import Callable

DEFAULT_BUDGET_ENV = "DENSITY_FORGE_BUDGET"
_FALLBACK_BUDGET = 100_000

CLAIM_TOTAL = "total"
CLAIM_INJECTIVE = "injective"
CLAIM_STAR_INJECTIVE = "star-injective"
CLAIM_RANGE_DECIDABLE = "range-decidable"


class DomainError(ValueError):
    """Invalid argument or malformed input (CLI exit code 1)."""


class BudgetExhausted(RuntimeError):
    """The step budget ran out before the result resolved (CLI exit code 2)."""

    def __init__(self, message: str, progress=None):
        super().__init__(message)
        self.progress = progress


class ConstructionAbort(RuntimeError):
    """A construction met a violated precondition; carries the witness."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


def default_budget() -> int:
    raw = os.environ.get(DEFAULT_BUDGET_ENV)
    if raw is None:
        return _FALLBACK_BUDGET
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(
            f"{DEFAULT_BUDGET_ENV} must be a non-negative integer, got {raw!r}"
        ) from None
    if value < 0:
        raise DomainError(f"{DEFAULT_BUDGET_ENV} must be non-negative, got {value}")
    return value


def _resolve_budget(budget: int | None) -> int:
    if budget is None:
        return default_budget()
    if not isinstance(budget, int) or budget < 0:
        raise DomainError(f"budget must be a non-negative integer, got {budget!r}")
    return budget


class Verdict(Enum):
    """Three-valued membership answer at a finite budget."""

    IN = "in"
    OUT = "out"
    UNKNOWN = "unknown"

    def flip(self) -> "Verdict":
        if self is Verdict.IN:
            return Verdict.OUT
        if self is Verdict.OUT:
            return Verdict.IN
        return Verdict.UNKNOWN


class SetKind(Enum):
    DECIDABLE = "decidable"
    ENUMERABLE = "enumerable"
    ORACLE_BACKED = "oracle"


_KIND_ORDER = {SetKind.DECIDABLE: 0, SetKind.ENUMERABLE: 1, SetKind.ORACLE_BACKED: 2}


def weaker_kind(a: SetKind, b: SetKind) -> SetKind:
    return a if _KIND_ORDER[a] >= _KIND_ORDER[b] else b


@dataclass(frozen=True, eq=False)
class SetSpec:
    """A subset of the naturals with budgeted three-valued membership.

    membership_fn(n, budget) must be deterministic and budget-monotone: an
    IN/OUT verdict at budget b stays identical at every budget >= b.  The
    optional enumerator lists elements by index; when both are present they
    agree.  counter, when present, gives the exact member count below n
    (or None when the budget does not resolve it).  size is the total number
    of elements when the set is finite and that is known.
    """

    name: str
    kind: SetKind
    membership_fn: Callable[[int, int], Verdict]
    enumerator: Callable[[int], int] | None = None
    enumerator_increasing: bool = False
    counter: Callable[[int, int], int | None] | None = None
    warning: str | None = None
    size: int | None = None
    recipe: dict | None = field(default=None, repr=False)

    def membership(self, n: int, budget: int | None = None) -> Verdict:
        if not isinstance(n, int) or n < 0:
            raise DomainError(f"membership point must be a natural number, got {n!r}")
        return self.membership_fn(n, _resolve_budget(budget))

    def count_below(self, n: int, budget: int | None = None) -> int | None:
        """Exact |S ∩ [0, n)|, or None when it cannot be resolved in budget."""
        if n < 0:
            raise DomainError("count bound must be non-negative")
        b = _resolve_budget(budget)
        if self.counter is not None:
            return self.counter(n, b)
        if n > b:
            return None
        count = 0
        for m in range(n):
            v = self.membership_fn(m, b)
            if v is Verdict.UNKNOWN:
                return None
            if v is Verdict.IN:
                count += 1
        return count

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"SetSpec({self.name!r}, {self.kind.value})"


@dataclass(frozen=True, eq=False)
class FuncSpec:
    """A budgeted partial function: evaluate returns a value or None.

    None means "no value within this budget".  Defined results are
    budget-monotone and value-stable.  claims are assertions checked by the
    test suite on prefixes, never trusted blindly by constructions that can
    verify them locally.
    """

    name: str
    evaluate_fn: Callable[[int, int], int | None]
    claims: frozenset = frozenset()
    range_spec: SetSpec | None = None
    recipe: dict | None = field(default=None, repr=False)

    def evaluate(self, n: int, budget: int | None = None) -> int | None:
        if not isinstance(n, int) or n < 0:
            raise DomainError(f"function argument must be a natural number, got {n!r}")
        return self.evaluate_fn(n, _resolve_budget(budget))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"FuncSpec({self.name!r})"


@dataclass(frozen=True, eq=False)
class PermSpec:
    """A permutation given by forward and inverse FuncSpecs.

    On every resolved point the round trip holds: inverse(forward(n)) == n
    and forward(inverse(m)) == m.
    """

    name: str
    forward: FuncSpec
    inverse: FuncSpec
    recipe: dict | None = field(default=None, repr=False)

    def image_membership(self, m: int, base: SetSpec, budget: int | None = None) -> Verdict:
        """Membership of m in the image of base: resolved via the inverse."""
        b = _resolve_budget(budget)
        pre = self.inverse.evaluate(m, b)
        if pre is None:
            return Verdict.UNKNOWN
        return base.membership(pre, b)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"PermSpec({self.name!r})"


# ---------------------------------------------------------------------------
# set calculus


def membership(spec: SetSpec, n: int, budget: int | None = None) -> Verdict:
    return spec.membership(n, budget)


def explicit_set(name: str, elements, warning: str | None = None) -> SetSpec:
    """A finite set given outright; membership and counts by binary search."""
    from bisect import bisect_left

    items = tuple(elements)
    if any(not isinstance(v, int) or v < 0 for v in items):
        raise DomainError("explicit sets hold naturals only")
    if any(b <= a for a, b in zip(items, items[1:])):
        raise DomainError("explicit sets must be strictly increasing")

    def member(n: int, budget: int) -> Verdict:
        i = bisect_left(items, n)
        return Verdict.IN if i < len(items) and items[i] == n else Verdict.OUT

    def enumerator(i: int) -> int:
        if not 0 <= i < len(items):
            raise DomainError(f"{name} has {len(items)} elements, no index {i}")
        return items[i]

    return SetSpec(
        name=name,
        kind=SetKind.DECIDABLE,
        membership_fn=member,
        enumerator=enumerator,
        enumerator_increasing=True,
        counter=lambda n, budget: bisect_left(items, n),
        warning=warning,
        size=len(items),
        recipe={"combinator": "explicit", "elements": list(items)},
    )


def compose(outer: FuncSpec, inner: FuncSpec) -> FuncSpec:
    """outer after inner; divergence of either propagates."""

    def evaluate(n: int, budget: int) -> int | None:
        v = inner.evaluate_fn(n, budget)
        if v is None:
            return None
        return outer.evaluate_fn(v, budget)

    kept = outer.claims & inner.claims & {CLAIM_TOTAL, CLAIM_INJECTIVE}
    return FuncSpec(
        name=f"compose({outer.name},{inner.name})",
        evaluate_fn=evaluate,
        claims=frozenset(kept),
        range_spec=None,
        recipe={"combinator": "compose", "outer": outer.name, "inner": inner.name},
    )


@dataclass(frozen=True)
class PrefixVector:
    """Three-valued membership vector for [0, N)."""

    verdicts: tuple
    unresolved: int

    def __len__(self) -> int:
        return len(self.verdicts)

    def bits(self) -> list:
        """0/1/None per point; None marks Unknown."""
        out = []
        for v in self.verdicts:
            out.append(1 if v is Verdict.IN else 0 if v is Verdict.OUT else None)
        return out


def prefix(spec: SetSpec, upto: int, budget: int | None = None) -> PrefixVector:
    if upto < 0:
        raise DomainError("prefix length must be non-negative")
    b = _resolve_budget(budget)
    verdicts = tuple(spec.membership_fn(n, b) for n in range(upto))
    unresolved = sum(1 for v in verdicts if v is Verdict.UNKNOWN)
    return PrefixVector(verdicts, unresolved)


@dataclass(frozen=True)
class ImageWindow:
    """Image of S ∩ [0, N) under f, clipped below M.

    values is a subset of the true image window; unresolved_inputs and
    diverged_inputs list the points that kept it from being certified
    complete.  complete is True exactly when nothing was left unresolved.
    """

    values: frozenset
    unresolved_inputs: tuple
    diverged_inputs: tuple

    @property
    def complete(self) -> bool:
        return not self.unresolved_inputs and not self.diverged_inputs


def image_prefix(
    f: FuncSpec, spec: SetSpec, upto: int, clip: int, budget: int | None = None
) -> ImageWindow:
    """{f(a) : a ∈ S ∩ [0, upto), f(a) < clip} with unresolved-input reporting."""
    if upto < 0 or clip < 0:
        raise DomainError("image window bounds must be non-negative")
    b = _resolve_budget(budget)
    values = set()
    unresolved = []
    diverged = []
    for a in range(upto):
        v = spec.membership_fn(a, b)
        if v is Verdict.UNKNOWN:
            unresolved.append(a)
            continue
        if v is Verdict.OUT:
            continue
        y = f.evaluate_fn(a, b)
        if y is None:
            diverged.append(a)
        elif y < clip:
            values.add(y)
    return ImageWindow(frozenset(values), tuple(unresolved), tuple(diverged))


def join(a: SetSpec, b: SetSpec) -> SetSpec:
    """Disjoint union: evens copy a, odds copy b."""

    def member(n: int, budget: int) -> Verdict:
        half, parity = divmod(n, 2)
        return a.membership_fn(half, budget) if parity == 0 else b.membership_fn(half, budget)

    enumerator = None
    if a.enumerator is not None and b.enumerator is not None:
        ae, be = a.enumerator, b.enumerator

        def enumerator(i: int) -> int:
            half, parity = divmod(i, 2)
            return 2 * ae(half) if parity == 0 else 2 * be(half) + 1

    counter = None
    if a.counter is not None and b.counter is not None:
        ac, bc = a.counter, b.counter

        def counter(n: int, budget: int) -> int | None:
            ca = ac((n + 1) // 2, budget)
            cb = bc(n // 2, budget)
            if ca is None or cb is None:
                return None
            return ca + cb

    return SetSpec(
        name=f"join({a.name},{b.name})",
        kind=weaker_kind(a.kind, b.kind),
        membership_fn=member,
        enumerator=enumerator,
        counter=counter,
    )


def complement(spec: SetSpec) -> SetSpec:
    """Pointwise complement; non-decidable inputs downgrade to oracle-backed."""
    if spec.kind is SetKind.DECIDABLE:
        kind, warning = SetKind.DECIDABLE, None
    else:
        kind = SetKind.ORACLE_BACKED
        warning = f"complement of {spec.kind.value} spec {spec.name!r} is oracle-backed"

    def member(n: int, budget: int) -> Verdict:
        return spec.membership_fn(n, budget).flip()

    counter = None
    if spec.counter is not None:
        base_counter = spec.counter

        def counter(n: int, budget: int) -> int | None:
            c = base_counter(n, budget)
            return None if c is None else n - c

    return SetSpec(
        name=f"complement({spec.name})",
        kind=kind,
        membership_fn=member,
        counter=counter,
        warning=warning,
    )


def union(a: SetSpec, b: SetSpec) -> SetSpec:
    def member(n: int, budget: int) -> Verdict:
        va = a.membership_fn(n, budget)
        if va is Verdict.IN:
            return Verdict.IN
        vb = b.membership_fn(n, budget)
        if vb is Verdict.IN:
            return Verdict.IN
        if va is Verdict.OUT and vb is Verdict.OUT:
            return Verdict.OUT
        return Verdict.UNKNOWN

    enumerator = None
    if a.enumerator is not None and b.enumerator is not None:
        ae, be = a.enumerator, b.enumerator

        def enumerator(i: int) -> int:
            half, parity = divmod(i, 2)
            return ae(half) if parity == 0 else be(half)

    return SetSpec(
        name=f"union({a.name},{b.name})",
        kind=weaker_kind(a.kind, b.kind),
        membership_fn=member,
        enumerator=enumerator,
    )


@dataclass(frozen=True)
class StarInjectivityReport:
    """Collision census for f on [0, N).

    collision_values lists every value with two or more preimages among the
    resolved inputs; preimages maps each to its (sorted) witness inputs.
    tail_max is the exact maximum of ρ_n(V) over n in [tail_start,
    max_observed + 1], None when there is nothing to measure.
    """

    window: int
    collision_values: tuple
    preimages: dict
    partial: bool
    max_observed: int | None
    tail_start: int
    threshold: Fraction
    tail_max: Fraction | None
    tail_witness: int | None

    @property
    def tail_small(self) -> bool:
        return self.tail_max is None or self.tail_max < self.threshold


def star_injectivity_report(
    f: FuncSpec,
    upto: int,
    budget: int | None = None,
    threshold: Fraction | None = None,
    tail_start: int | None = None,
) -> StarInjectivityReport:
    """Report the values f hits more than once on [0, upto)."""
    if upto < 0:
        raise DomainError("window must be non-negative")
    b = _resolve_budget(budget)
    threshold = Fraction(1, 10) if threshold is None else Fraction(threshold)
    seen: dict = {}
    partial = False
    for n in range(upto):
        y = f.evaluate_fn(n, b)
        if y is None:
            partial = True
            continue
        seen.setdefault(y, []).append(n)
    collisions = {v: tuple(pres) for v, pres in seen.items() if len(pres) > 1}
    values = tuple(sorted(collisions))
    max_observed = max(seen) if seen else None
    if tail_start is None:
        tail_start = 1 if max_observed is None else max(1, ceil((max_observed + 1) / 10))
    tail_max = None
    tail_witness = None
    if values is not None and max_observed is not None:
        # ρ_n(V) only rises just past a collision value, so those points plus
        # the tail start are the only candidates for the maximum.
        candidates = {tail_start} | {v + 1 for v in values if v + 1 >= tail_start}
        candidates = {n for n in candidates if 1 <= n <= max_observed + 1}
        sorted_values = list(values)
        for n in sorted(candidates):
            count = _count_below(sorted_values, n)
            rho = Fraction(count, n)
            if tail_max is None or rho > tail_max:
                tail_max, tail_witness = rho, n
    return StarInjectivityReport(
        window=upto,
        collision_values=values,
        preimages=collisions,
        partial=partial,
        max_observed=max_observed,
        tail_start=tail_start,
        threshold=threshold,
        tail_max=tail_max,
        tail_witness=tail_witness,
    )


def _count_below(sorted_values: list, n: int) -> int:
    from bisect import bisect_left

    return bisect_left(sorted_values, n)


@dataclass(frozen=True)
class PermutationCheck:
    """Window verification of a PermSpec: bijectivity plus round trips."""

    window: int
    resolved: int
    duplicate_images: tuple
    round_trip_failures: tuple
    unresolved_forward: tuple

    @property
    def ok(self) -> bool:
        return not self.duplicate_images and not self.round_trip_failures


def verify_permutation_window(
    perm: PermSpec, upto: int, budget: int | None = None
) -> PermutationCheck:
    """Check forward injectivity and both round trips on [0, upto)."""
    b = _resolve_budget(budget)
    images: dict = {}
    duplicates = []
    failures = []
    unresolved = []
    for n in range(upto):
        v = perm.forward.evaluate_fn(n, b)
        if v is None:
            unresolved.append(n)
            continue
        if v in images:
            duplicates.append((images[v], n, v))
            continue
        images[v] = n
        back = perm.inverse.evaluate_fn(v, b)
        if back is not None and back != n:
            failures.append((n, v, back))
    return PermutationCheck(
        window=upto,
        resolved=upto - len(unresolved),
        duplicate_images=tuple(duplicates),
        round_trip_failures=tuple(failures),
        unresolved_forward=tuple(unresolved),
    )
