"""Stage-based rebuilders: thinning, permutation upgrades, range surgery.

Each construction here walks inputs in order and commits one assignment per
stage, exactly the way the underlying existence arguments do.  The results
are immutable specs plus the realized assignment tables, so callers can both
evaluate lazily and audit every choice the greedy stage loop made.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

from .coding import factorial_index_ge2, nonfactorial_at, nonfactorial_rank
from .core import (
    CLAIM_INJECTIVE,
    CLAIM_TOTAL,
    BudgetExhausted,
    ConstructionAbort,
    DomainError,
    FuncSpec,
    PermSpec,
    SetSpec,
    Verdict,
    _resolve_budget,
    complement,
    explicit_set,
)

DIRECT = "direct"
FILL = "fill"
KEPT = "kept"
ZEROED = "zeroed"


# ---------------------------------------------------------------------------
# thinning a c.e. set


@dataclass(frozen=True)
class ThinResult:
    """Outcome of thinning: the explicit subset plus how far we got."""

    subset: SetSpec
    elements: tuple
    requested: int

    @property
    def partial(self) -> bool:
        return len(self.elements) < self.requested


def thin_ce_subset(ce: SetSpec, count: int, budget: int | None = None) -> ThinResult:
    """Pick an exponentially spreading subsequence of ce's enumeration.

    Keeps the first enumerated element, then repeatedly the first later one
    exceeding the last keeper by 2^(keepers so far).  The gaps force member
    counts below the n-th keeper to stay at most n+1, so the subset's density
    profile decays no matter how dense ce was.  Runs out of enumeration or
    budget before `count` keepers: the result is flagged partial.
    """
    if count < 1:
        raise DomainError("need a positive number of elements")
    if ce.enumerator is None:
        raise DomainError(f"{ce.name} has no enumerator to thin")
    b = _resolve_budget(budget)
    elements = []
    j = 0
    while len(elements) < count and j < b:
        try:
            c = ce.enumerator(j)
        except DomainError:
            break
        j += 1
        if not elements:
            elements.append(c)
        elif c > elements[-1] + (1 << (len(elements) - 1)):
            elements.append(c)
    partial = len(elements) < count
    subset = explicit_set(
        name=f"thin({ce.name})",
        elements=elements,
        warning=(
            f"enumeration gave {len(elements)} of {count} elements in budget"
            if partial
            else None
        ),
    )
    return ThinResult(subset=subset, elements=tuple(elements), requested=count)


# ---------------------------------------------------------------------------
# realized assignment tables


@dataclass(frozen=True)
class ForgedPermutation:
    """A permutation realized on [0, window) with its assignment audit trail.

    assignments rows are (input, image, source); fill_inputs lists the
    inputs whose direct value was displaced.
    """

    perm: PermSpec
    window: int
    assignments: tuple
    fill_inputs: tuple


@dataclass(frozen=True)
class ForgedInjection:
    func: FuncSpec
    window: int
    assignments: tuple
    collision_inputs: tuple


@dataclass(frozen=True)
class PatchedFunction:
    func: FuncSpec
    window: int
    assignments: tuple
    zeroed_inputs: tuple


def _table_funcs(name: str, values: list, recipe: dict, claims) -> tuple:
    """Forward/inverse FuncSpecs backed by a realized assignment list."""
    forward_map = dict(enumerate(values))
    inverse_map = {v: n for n, v in enumerate(values)}

    def forward(n: int, budget: int):
        return forward_map.get(n)

    def inverse(m: int, budget: int):
        return inverse_map.get(m)

    f = FuncSpec(name=name, evaluate_fn=forward, claims=claims, recipe=recipe)
    g = FuncSpec(
        name=f"inverse({name})", evaluate_fn=inverse, claims=claims, recipe=recipe
    )
    return f, g


def injective_to_permutation(
    f: FuncSpec,
    holes: SetSpec,
    window: int,
    budget: int | None = None,
) -> ForgedPermutation:
    """Reroute f's landings inside holes so the result stays injective.

    Inputs whose value avoids holes keep it; the rest greedily take the
    numerically least unused element of holes-union-non-range.  Keeping
    direct values outside holes and filling only from that pool means fills
    never collide with directs, so the window assignment is injective, and
    every window count of images of any A drops by at most the hole count.
    """
    if window < 1:
        raise DomainError("window must be positive")
    b = _resolve_budget(budget)
    spent = 0

    def charge(k: int = 1):
        nonlocal spent
        spent += k
        if spent > b:
            raise BudgetExhausted("permutation forging ran over budget", progress=spent)

    values = []
    image = {}
    for n in range(window):
        charge()
        v = f.evaluate_fn(n, b)
        if v is None:
            raise ConstructionAbort(
                f"{f.name} is not total on the window", witness=n
            )
        if v in image:
            raise ConstructionAbort(
                f"{f.name} repeats a value on the window", witness=(image[v], n, v)
            )
        image[v] = n
        values.append(v)

    # spot-check the hole set sits inside the realized range
    for h in range(window):
        charge()
        verdict = holes.membership_fn(h, b)
        if verdict is Verdict.UNKNOWN:
            raise ConstructionAbort(
                f"{holes.name} is not decidable on the window", witness=h
            )
        if verdict is Verdict.IN and h not in image:
            raise ConstructionAbort(
                f"{holes.name} reaches outside the realized range", witness=h
            )

    range_spec = f.range_spec

    def pool_member(v: int) -> bool:
        # fill pool: the holes plus everything outside f's range
        verdict = holes.membership_fn(v, b)
        if verdict is Verdict.IN:
            return True
        if range_spec is not None:
            return range_spec.membership_fn(v, b) is Verdict.OUT
        return v not in image

    assigned = []
    used = set()
    fills = []
    pool_next = 0
    for n in range(window):
        v = values[n]
        charge()
        if holes.membership_fn(v, b) is Verdict.OUT:
            assigned.append((n, v, DIRECT))
            used.add(v)
            continue
        # monotone scan: everything below pool_next is already used
        while True:
            charge()
            if pool_next not in used and pool_member(pool_next):
                break
            pool_next += 1
        assigned.append((n, pool_next, FILL))
        used.add(pool_next)
        fills.append(n)
        pool_next += 1

    final = [v for _, v, _ in assigned]
    name = f"forged-perm({f.name};{holes.name})"
    recipe = {
        "combinator": "injective_to_permutation",
        "base": f.name,
        "holes": holes.name,
        "window": window,
    }
    fwd, inv = _table_funcs(name, final, recipe, frozenset({CLAIM_INJECTIVE}))
    perm = PermSpec(name=name, forward=fwd, inverse=inv, recipe=recipe)
    return ForgedPermutation(
        perm=perm,
        window=window,
        assignments=tuple(assigned),
        fill_inputs=tuple(fills),
    )


def star_injective_to_injective(
    f: FuncSpec,
    pool: SetSpec,
    window: int,
    budget: int | None = None,
) -> ForgedInjection:
    """Make f injective by replaying repeated values from a reserve pool.

    The first input to claim a value keeps it; later claimants take the
    least pool element not yet assigned.  Injectivity on the window is
    forced by the used-set; the image loses at most one point per collision
    input plus whatever the pool contributes.
    """
    if window < 1:
        raise DomainError("window must be positive")
    b = _resolve_budget(budget)
    spent = 0

    def charge():
        nonlocal spent
        spent += 1
        if spent > b:
            raise BudgetExhausted("injection forging ran over budget", progress=spent)

    pool_iter_increasing = pool.enumerator is not None and pool.enumerator_increasing
    pool_index = 0
    pool_scan = 0

    def next_pool_element(used) -> int:
        nonlocal pool_index, pool_scan
        if pool_iter_increasing:
            while True:
                charge()
                try:
                    candidate = pool.enumerator(pool_index)
                except DomainError:
                    raise ConstructionAbort(
                        f"{pool.name} ran out of elements", witness=pool_index
                    ) from None
                pool_index += 1
                if candidate not in used:
                    return candidate
        while True:
            charge()
            verdict = pool.membership_fn(pool_scan, b)
            if verdict is Verdict.UNKNOWN:
                raise ConstructionAbort(
                    f"{pool.name} is not decidable at {pool_scan}", witness=pool_scan
                )
            if verdict is Verdict.IN and pool_scan not in used:
                candidate = pool_scan
                pool_scan += 1
                return candidate
            pool_scan += 1

    assigned = []
    used = set()
    collisions = []
    for n in range(window):
        charge()
        v = f.evaluate_fn(n, b)
        if v is None:
            raise ConstructionAbort(f"{f.name} is not total on the window", witness=n)
        if v not in used:
            used.add(v)
            assigned.append((n, v, DIRECT))
        else:
            collisions.append(n)
            fill = next_pool_element(used)
            used.add(fill)
            assigned.append((n, fill, FILL))

    final = [v for _, v, _ in assigned]
    name = f"forged-injection({f.name};{pool.name})"
    recipe = {
        "combinator": "star_injective_to_injective",
        "base": f.name,
        "pool": pool.name,
        "window": window,
    }
    fwd, _ = _table_funcs(name, final, recipe, frozenset({CLAIM_INJECTIVE}))
    return ForgedInjection(
        func=fwd,
        window=window,
        assignments=tuple(assigned),
        collision_inputs=tuple(collisions),
    )


def range_patch(
    f: FuncSpec,
    keep: SetSpec,
    window: int,
    budget: int | None = None,
) -> PatchedFunction:
    """Zero out every value of f that lands outside the kept set."""
    if window < 1:
        raise DomainError("window must be positive")
    b = _resolve_budget(budget)
    assigned = []
    zeroed = []
    for n in range(window):
        v = f.evaluate_fn(n, b)
        if v is None:
            raise ConstructionAbort(f"{f.name} is not total on the window", witness=n)
        verdict = keep.membership_fn(v, b)
        if verdict is Verdict.UNKNOWN:
            raise ConstructionAbort(f"{keep.name} is not decidable at {v}", witness=v)
        if verdict is Verdict.IN:
            assigned.append((n, v, KEPT))
        else:
            assigned.append((n, 0, ZEROED))
            zeroed.append(n)

    final = [v for _, v, _ in assigned]
    name = f"range-patch({f.name};{keep.name})"
    recipe = {
        "combinator": "range_patch",
        "base": f.name,
        "keep": keep.name,
        "window": window,
    }

    forward_map = dict(enumerate(final))

    def forward(n: int, budget: int):
        return forward_map.get(n)

    func = FuncSpec(name=name, evaluate_fn=forward, claims=frozenset(), recipe=recipe)
    return PatchedFunction(
        func=func,
        window=window,
        assignments=tuple(assigned),
        zeroed_inputs=tuple(zeroed),
    )


# ---------------------------------------------------------------------------
# the factorial swap


NONFACTORIAL_SIDE = "to-nonfactorial"
FACTORIAL_SIDE = "to-factorial"


def _element_of_rank(spec: SetSpec, rank: int, budget: int):
    if spec.enumerator is not None and spec.enumerator_increasing:
        return spec.enumerator(rank)
    if spec.counter is not None:
        found = _element_by_counting(spec, rank, budget)
        if found is not None:
            return found
    seen = 0
    for v in range(budget):
        verdict = spec.membership_fn(v, budget)
        if verdict is Verdict.UNKNOWN:
            return None
        if verdict is Verdict.IN:
            if seen == rank:
                return v
            seen += 1
    return None


def _element_by_counting(spec: SetSpec, rank: int, budget: int):
    """Binary-search the least m with count_below(m) > rank; element is m-1."""
    hi = 1
    while True:
        c = spec.counter(hi, budget)
        if c is None:
            return None
        if c >= rank + 1:
            break
        hi *= 2
        if hi > 1 << 62:
            # the set never reaches rank+1 members
            return None
    lo = 0
    while lo < hi:
        mid = (lo + hi) // 2
        c = spec.counter(mid, budget)
        if c is None:
            return None
        if c >= rank + 1:
            hi = mid
        else:
            lo = mid + 1
    return lo - 1


def factorial_swap(
    base: SetSpec, window: int, budget: int | None = None
) -> ForgedPermutation:
    """Order-preserving swap: base onto the non-factorials, the rest onto
    factorials at least 2.

    Each side is matched by rank, so the map is a bijection whenever base
    and its complement are both infinite; the window realization certifies
    totality and the round trips on [0, window).  The image of base avoids
    every factorial >= 2 outright, which pins its density near 1.
    """
    if window < 1:
        raise DomainError("window must be positive")
    b = _resolve_budget(budget)
    co = complement(base)

    def forward(n: int, budget: int):
        verdict = base.membership_fn(n, budget)
        if verdict is Verdict.UNKNOWN:
            return None
        if verdict is Verdict.IN:
            r = base.count_below(n, budget)
            return None if r is None else nonfactorial_at(r)
        r = co.count_below(n, budget)
        return None if r is None else factorial(r + 2)

    def inverse(m: int, budget: int):
        k = factorial_index_ge2(m)
        if k is not None:
            return _element_of_rank(co, k - 2, budget)
        return _element_of_rank(base, nonfactorial_rank(m), budget)

    name = f"factorial-swap({base.name})"
    recipe = {"combinator": "factorial_swap", "base": base.name, "window": window}
    fwd = FuncSpec(
        name=name,
        evaluate_fn=forward,
        claims=frozenset({CLAIM_TOTAL, CLAIM_INJECTIVE}),
        recipe=recipe,
    )
    inv = FuncSpec(
        name=f"inverse({name})",
        evaluate_fn=inverse,
        claims=frozenset({CLAIM_TOTAL, CLAIM_INJECTIVE}),
        recipe=recipe,
    )
    perm = PermSpec(name=name, forward=fwd, inverse=inv, recipe=recipe)

    assigned = []
    fills = []
    in_count = 0
    out_count = 0
    for n in range(window):
        verdict = base.membership_fn(n, b)
        if verdict is Verdict.UNKNOWN:
            raise ConstructionAbort(
                f"{base.name} unresolved inside the window",
                witness={"point": n, "matched": n},
            )
        if verdict is Verdict.IN:
            value = nonfactorial_at(in_count)
            in_count += 1
            tag = NONFACTORIAL_SIDE
        else:
            value = factorial(out_count + 2)
            out_count += 1
            tag = FACTORIAL_SIDE
            fills.append(n)
        back = inverse(value, b)
        if back != n:
            raise ConstructionAbort(
                "window round trip failed",
                witness={"point": n, "image": value, "back": back},
            )
        assigned.append((n, value, tag))
    return ForgedPermutation(
        perm=perm,
        window=window,
        assignments=tuple(assigned),
        fill_inputs=tuple(fills),
    )


# ---------------------------------------------------------------------------
# windowed image counting


def image_count_series(values, selected) -> list:
    """counts[n-1] = distinct images below n over selected inputs below n.

    values[a] is the (possibly None) value at input a; selected[a] says
    whether input a belongs to the set being pushed forward.  Both the input
    window and the value clip grow together, which is the reading under
    which every forge inequality is exact.
    """
    if len(values) != len(selected):
        raise DomainError("values and selection must align")
    present = set()
    count = 0
    out = []
    for n in range(1, len(values) + 1):
        if n - 1 in present:
            count += 1
        if selected[n - 1]:
            v = values[n - 1]
            if v is not None and v not in present:
                present.add(v)
                if v < n:
                    count += 1
        out.append(count)
    return out
