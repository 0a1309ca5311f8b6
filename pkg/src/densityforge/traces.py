"""Strong arrays, principal functions, weak traces, and gap constructions.

The objects here measure how spread out a set is.  Disjoint strong arrays
and their collapse functions turn cell-hitting into dense images; weak
traces ask how often a permuted set dips below factorial milestones; the
gap construction rebuilds a set so that its density dives under 1/(e+2)
infinitely often while coding a second set into the gap positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable

from .core import (
    BudgetExhausted,
    ConstructionAbort,
    DomainError,
    FuncSpec,
    PermSpec,
    SetKind,
    SetSpec,
    Verdict,
    _resolve_budget,
)

# ---------------------------------------------------------------------------
# strong arrays


@dataclass(frozen=True)
class StrongArray:
    """Pairwise disjoint nonempty finite cells, explicitly materialized."""

    cells: tuple

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(frozenset(c) for c in self.cells))
        seen = set()
        for i, cell in enumerate(self.cells):
            if not cell:
                raise DomainError(f"cell {i} is empty")
            if any(not isinstance(v, int) or v < 0 for v in cell):
                raise DomainError(f"cell {i} holds non-naturals")
            if seen & cell:
                raise DomainError(f"cell {i} overlaps an earlier cell")
            seen |= cell

    def __len__(self) -> int:
        return len(self.cells)

    def cell(self, k: int) -> frozenset:
        if not 0 <= k < len(self.cells):
            raise DomainError(f"array has {len(self.cells)} cells, no index {k}")
        return self.cells[k]

    def is_separated(self) -> bool:
        """max of each cell below min of the next."""
        return all(
            max(a) < min(b) for a, b in zip(self.cells, self.cells[1:])
        )


@dataclass(frozen=True)
class NormalizedArray:
    array: StrongArray
    requested: int

    @property
    def partial(self) -> bool:
        return len(self.array.cells) < self.requested


def normalize_array(array: StrongArray, count: int) -> NormalizedArray:
    """Greedily select cells so each min clears the previous max.

    Keeps the first cell, then scans forward for the next cell living
    entirely above everything kept so far.  Runs out of cells before
    `count` keepers: result flagged partial.
    """
    if count < 1:
        raise DomainError("need a positive number of cells")
    kept = []
    ceiling = -1
    for cell in array.cells:
        if len(kept) == count:
            break
        if min(cell) > ceiling:
            kept.append(cell)
            ceiling = max(cell)
    return NormalizedArray(array=StrongArray(tuple(kept)), requested=count)


def array_collapse(array: StrongArray, window: int) -> tuple:
    """Send cell k to 2k and everything else to fresh odd numbers.

    Returns (f, size_witness): f realized total on [0, window); the witness
    reports |f^{-1}(v)| over the window, which is the in-window cell size
    for even v and 1 for each realized odd.  A set hitting every cell with
    index below K pushes forward onto all of {0, 2, ..., 2(K-1)}.
    """
    if window < 1:
        raise DomainError("window must be positive")
    if not array.is_separated():
        raise ConstructionAbort(
            "array is not normalized", witness=[max(c) for c in array.cells]
        )
    owner = {}
    for k, cell in enumerate(array.cells):
        for v in cell:
            owner[v] = k
    values = []
    next_odd = 1
    for n in range(window):
        k = owner.get(n)
        if k is not None:
            values.append(2 * k)
        else:
            values.append(next_odd)
            next_odd += 2
    counts = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1

    table = dict(enumerate(values))
    recipe = {"combinator": "array_collapse", "cells": len(array.cells), "window": window}

    def evaluate(n: int, budget: int):
        return table.get(n)

    def witness(v: int, budget: int) -> int:
        return counts.get(v, 0)

    f = FuncSpec(name="array-collapse", evaluate_fn=evaluate, recipe=recipe)
    size_witness = FuncSpec(
        name="array-collapse-sizes", evaluate_fn=witness, recipe=recipe
    )
    return f, size_witness


# ---------------------------------------------------------------------------
# principal functions


def principal_prefix(spec: SetSpec, count: int, budget: int | None = None) -> list:
    """The first `count` elements of spec in increasing order."""
    if count < 0:
        raise DomainError("count must be a natural")
    if count == 0:
        return []
    if spec.size is not None and spec.size < count:
        raise DomainError(f"{spec.name} has only {spec.size} elements")
    b = _resolve_budget(budget)
    if spec.enumerator is not None and spec.enumerator_increasing:
        return [spec.enumerator(i) for i in range(count)]
    out = []
    for v in range(b):
        verdict = spec.membership_fn(v, b)
        if verdict is Verdict.UNKNOWN:
            raise BudgetExhausted(
                f"{spec.name} unresolved at {v}",
                progress={"found": len(out), "scanned_to": v},
            )
        if verdict is Verdict.IN:
            out.append(v)
            if len(out) == count:
                return out
    raise BudgetExhausted(
        f"found {len(out)} of {count} elements of {spec.name} in budget",
        progress={"found": len(out), "scanned_to": b},
    )


def principal_function(spec: SetSpec, k: int, budget: int | None = None) -> int:
    """The (k+1)-st element of spec in increasing order."""
    if k < 0:
        raise DomainError("index must be a natural")
    return principal_prefix(spec, k + 1, budget)[-1]


# ---------------------------------------------------------------------------
# weak traces


@dataclass(frozen=True, eq=False)
class Trace:
    """Cells bounded in size by a budget function.

    cells holds the explicitly materialized prefix; membership questions at
    larger indices resolve lazily through the underlying permutation when
    one is attached.
    """

    name: str
    cells: tuple
    bound_fn: Callable[[int], int]
    perm: PermSpec | None = field(default=None, repr=False)
    recipe: dict | None = field(default=None, repr=False)

    def bound(self, k: int) -> int:
        if k < 0:
            raise DomainError("trace index must be a natural")
        return self.bound_fn(k)

    def cell(self, k: int):
        """Explicit cell if materialized, else None."""
        return self.cells[k] if 0 <= k < len(self.cells) else None

    def contains(self, k: int, point: int, budget: int | None = None, bound: int | None = None) -> Verdict:
        """Is point in cells(k)?  bound may be passed to skip recomputation."""
        if 0 <= k < len(self.cells):
            return Verdict.IN if point in self.cells[k] else Verdict.OUT
        if self.perm is None:
            return Verdict.UNKNOWN
        image = self.perm.forward.evaluate(point, budget)
        if image is None:
            return Verdict.UNKNOWN
        if bound is None:
            bound = self.bound_fn(k)
        return Verdict.IN if image < bound else Verdict.OUT


def weak_trace_from_perm(
    perm: PermSpec, n_max: int, budget: int | None = None
) -> Trace:
    """Trace whose k-th cell is the preimage of [0, k!) under perm.

    Cells up to n_max are materialized by inverting every point below the
    bound; an unresolved inverse aborts.  Larger cells stay lazy.
    """
    if n_max < 0:
        raise DomainError("n_max must be a natural")
    b = _resolve_budget(budget)
    cells = []
    for k in range(n_max + 1):
        cell = set()
        for j in range(factorial(k)):
            pre = perm.inverse.evaluate_fn(j, b)
            if pre is None:
                raise ConstructionAbort(
                    f"{perm.name} has no resolved preimage for {j}",
                    witness={"cell": k, "point": j},
                )
            cell.add(pre)
        cells.append(frozenset(cell))
    return Trace(
        name=f"weak-trace({perm.name})",
        cells=tuple(cells),
        bound_fn=factorial,
        perm=perm,
        recipe={"combinator": "weak_trace", "perm": perm.name, "materialized": n_max},
    )


@dataclass
class TraceHitReport:
    """Hit count and the factorial-envelope inequality, checked per point.

    s counts indices k up to the window where the k-th ranked element of
    the set lands inside the k-th cell.  Each row fixes n, takes m maximal
    with m! <= n, and compares the exact image density against
    (s + m + 1) / m!.  unresolved rows could not be certified either way.
    """

    trace_name: str
    set_name: str
    window: int
    s: int
    hit_indices: tuple
    rows: list
    unresolved: list

    @property
    def ok(self) -> bool:
        return not self.unresolved and all(row["ok"] for row in self.rows)

    def to_dict(self) -> dict:
        return {
            "trace": self.trace_name,
            "set": self.set_name,
            "window": self.window,
            "hits": self.s,
            "hit_indices": list(self.hit_indices),
            "ok": self.ok,
            "unresolved": list(self.unresolved),
            "rows": self.rows,
        }


def trace_hit_report(
    trace: Trace, spec: SetSpec, window: int, budget: int | None = None
) -> TraceHitReport:
    """Count cell hits of spec's ranked elements, then verify the envelope.

    The image density on the left side is counted through the permutation
    inverse, so each point below the checkpoint is settled directly.
    """
    if window < 1:
        raise DomainError("window must be positive")
    if trace.perm is None:
        raise DomainError("hit report needs a permutation-backed trace")
    b = _resolve_budget(budget)
    ranked = principal_prefix(spec, window + 1, b)
    hits = []
    bound = 1
    for k in range(window + 1):
        if k > 0:
            bound *= k
        verdict = trace.contains(k, ranked[k], b, bound=bound)
        if verdict is Verdict.UNKNOWN:
            raise ConstructionAbort(
                "cell membership unresolved", witness={"index": k, "point": ranked[k]}
            )
        if verdict is Verdict.IN:
            hits.append(k)
    s = len(hits)

    rows = []
    unresolved = []
    count = 0
    m = 1
    m_fact = 1
    next_fact = 2
    for n in range(1, window + 1):
        pre = trace.perm.inverse.evaluate_fn(n - 1, b)
        if pre is None:
            unresolved.append(n - 1)
        else:
            v = spec.membership_fn(pre, b)
            if v is Verdict.UNKNOWN:
                unresolved.append(n - 1)
            elif v is Verdict.IN:
                count += 1
        while n >= next_fact:
            m += 1
            m_fact = next_fact
            next_fact *= m + 1
        lhs = Fraction(count, n)
        rhs = Fraction(s + m + 1, m_fact)
        rows.append(
            {
                "n": n,
                "image_count": count,
                "lhs_numerator": lhs.numerator,
                "lhs_denominator": lhs.denominator,
                "m": m,
                "rhs_numerator": rhs.numerator,
                "rhs_denominator": rhs.denominator,
                "ok": lhs <= rhs,
            }
        )
    return TraceHitReport(
        trace_name=trace.name,
        set_name=spec.name,
        window=window,
        s=s,
        hit_indices=tuple(hits),
        rows=rows,
        unresolved=unresolved,
    )


# ---------------------------------------------------------------------------
# gap construction


@dataclass(frozen=True)
class GapSequence:
    """Strictly separated gaps: each next u clears the previous gap end."""

    stages: tuple

    def __post_init__(self):
        for e, (u, m) in enumerate(self.stages):
            if m < 1:
                raise DomainError(f"gap {e} has width {m}")
            if e > 0:
                pu, pm = self.stages[e - 1]
                if u <= pu + pm:
                    raise DomainError(f"gap {e} starts at {u}, inside gap {e - 1}")

    def __len__(self) -> int:
        return len(self.stages)

    def rows(self):
        for e, (u, m) in enumerate(self.stages):
            yield (e, u, m)


@dataclass(frozen=True, eq=False)
class GapsResult:
    """Everything the gap construction realized.

    thinned is the rebuilt set with its density forced under 1/(e+2) at the
    end of each gap; gap_union collects the gaps whose index lies in the
    base set; filled is their union with thinned.  Membership of thinned is
    certified only up to the end of the last constructed gap; beyond that
    later stages could still edit, so verdicts stay unknown.
    """

    gaps: GapSequence
    thinned: SetSpec
    gap_union: SetSpec
    filled: SetSpec
    requested_stages: int
    scanned_to: int
    diagnostic: str | None

    @property
    def partial(self) -> bool:
        return len(self.gaps) < self.requested_stages

    def bound_transfer(self, f: FuncSpec) -> FuncSpec:
        """Shift f's argument past all gap mass at or below its index."""
        ms = [m for _, m in self.gaps.stages]
        prefix = []
        total = 0
        for m in ms:
            total += m
            prefix.append(total)

        def evaluate(n: int, budget: int):
            if n >= len(prefix):
                return None
            return f.evaluate_fn(n + prefix[n], budget)

        return FuncSpec(
            name=f"gap-shifted({f.name})",
            evaluate_fn=evaluate,
            recipe={"combinator": "bound_transfer", "base": f.name, "shifts": ms},
        )


def _stage_chain(point: int, stages: list) -> int | None:
    """Pull a point back through every gap edit; None when it sits in a gap."""
    q = point
    for u, m in reversed(stages):
        if q < u:
            continue
        if q < u + m:
            return None
        q -= m
    return q


def hypersimple_gaps(
    base: SetSpec, stages: int, budget: int | None = None
) -> GapsResult:
    """Push gaps into base so its density keeps collapsing below 1/(e+2).

    Stage e finds the first checkpoint u_e past the previous gap where the
    current set's density exceeds 1 - 1/(e+2), then shifts everything from
    u_e up by m_e = u_e(e+1) + 1, the least width dragging the density at
    the gap's end under 1/(e+2).  The scan is exact: a skip from a counted
    checkpoint covers only positions provably below the threshold, and the
    budget is charged per position covered.  Checkpoints the budget or the
    base's resolution cannot certify end the run with a partial result.

    The companion set fills the e-th gap back in exactly when e lies in
    base, so the gap pattern codes base while the gaps themselves are what
    force the density collapse.
    """
    if stages < 1:
        raise DomainError("need at least one stage")
    if base.enumerator is None:
        raise DomainError(f"{base.name} has no enumerator to rebuild from")
    b = _resolve_budget(budget)
    built = []
    spent = 0
    diagnostic = None
    scanned_to = 0

    def count_current(n: int):
        q = _stage_chain_count(n, built)
        return base.count_below(q, b)

    for e in range(stages):
        threshold = Fraction(e + 1, e + 2)
        n = built[-1][0] + built[-1][1] + 1 if built else 1
        found = None
        while True:
            if spent >= b:
                diagnostic = (
                    f"stage {e}: budget spent after covering up to {n}"
                )
                break
            c = count_current(n)
            if c is None:
                diagnostic = f"stage {e}: counts unresolved at {n}"
                break
            if Fraction(c, n) > threshold:
                found = n
                break
            # every n' <= (n-c)(e+2) still fails even if all new points join
            nxt = max(n + 1, (n - c) * (e + 2) + 1)
            spent += nxt - n
            scanned_to = max(scanned_to, nxt)
            n = nxt
        if found is None:
            break
        u = found
        m = u * (e + 1) + 1
        built.append((u, m))
        scanned_to = max(scanned_to, u + m)

    gaps = GapSequence(tuple(built))
    bound = built[-1][0] + built[-1][1] if built else -1
    stage_list = list(built)

    def member(p: int, budget: int) -> Verdict:
        if p > bound:
            return Verdict.UNKNOWN
        q = _stage_chain(p, stage_list)
        if q is None:
            return Verdict.OUT
        return base.membership_fn(q, budget)

    def counter(p: int, budget: int):
        if p > bound + 1:
            return None
        return base.count_below(_stage_chain_count(p, stage_list), budget)

    thinned = SetSpec(
        name=f"gap-thinned({base.name})",
        kind=SetKind.ENUMERABLE,
        membership_fn=member,
        counter=counter,
        warning=f"membership realized up to {bound}; later stages edit beyond",
        recipe={"combinator": "hypersimple_gaps", "base": base.name, "stages": len(built)},
    )

    included = []
    unknown_intervals = []
    for i, (u, m) in enumerate(stage_list):
        v = base.membership_fn(i, b)
        if v is Verdict.IN:
            included.append((u, m))
        elif v is Verdict.UNKNOWN:
            unknown_intervals.append((u, m))

    cumulative = []
    total = 0
    for u, m in included:
        total += m + 1
        cumulative.append(total)

    def union_member(p: int, budget: int) -> Verdict:
        for u, m in included:
            if u <= p <= u + m:
                return Verdict.IN
        for u, m in unknown_intervals:
            if u <= p <= u + m:
                return Verdict.UNKNOWN
        return Verdict.OUT

    def union_enumerator(i: int) -> int:
        if i < 0 or i >= total:
            raise DomainError(f"gap union holds {total} realized points")
        from bisect import bisect_right

        block = bisect_right(cumulative, i)
        start = cumulative[block - 1] if block > 0 else 0
        u, _ = included[block]
        return u + (i - start)

    def union_counter(p: int, budget: int) -> int:
        c = 0
        for u, m in included:
            if p > u:
                c += min(p - u, m + 1)
        return c

    gap_union = SetSpec(
        name=f"gap-union({base.name})",
        kind=SetKind.DECIDABLE,
        membership_fn=union_member,
        enumerator=union_enumerator if not unknown_intervals else None,
        enumerator_increasing=not unknown_intervals,
        counter=union_counter if not unknown_intervals else None,
        size=total if not unknown_intervals else None,
        recipe={"combinator": "gap_union", "base": base.name},
    )

    def filled_member(p: int, budget: int) -> Verdict:
        v = union_member(p, budget)
        if v is Verdict.IN:
            return Verdict.IN
        h = member(p, budget)
        if h is Verdict.IN:
            return Verdict.IN
        if v is Verdict.UNKNOWN or h is Verdict.UNKNOWN:
            return Verdict.UNKNOWN
        return Verdict.OUT

    filled = SetSpec(
        name=f"gap-filled({base.name})",
        kind=SetKind.ENUMERABLE,
        membership_fn=filled_member,
        warning=thinned.warning,
        recipe={"combinator": "gap_filled", "base": base.name},
    )
    return GapsResult(
        gaps=gaps,
        thinned=thinned,
        gap_union=gap_union,
        filled=filled,
        requested_stages=stages,
        scanned_to=scanned_to,
        diagnostic=diagnostic,
    )


def _stage_chain_count(n: int, stages: list) -> int:
    """Transport a counting bound back through the gap edits."""
    q = n
    for u, m in reversed(stages):
        if q <= u:
            continue
        elif q <= u + m:
            q = u
        else:
            q -= m
    return q
