"""Approximate set descriptions, their windowed scoring, and oracle collapse.

A description guesses membership pointwise; its mode fixes which lapses are
tolerated.  A generic guesser may stay silent but never lie; a coarse guesser
must always answer but may err; a dense guesser may do either; an
effective-dense guesser must always answer yet may explicitly decline with a
box.  The mode's error set collects exactly the tolerated lapses (plus any
hard violations), so grading a description on a window means measuring that
set's density.  The oracle half of the module runs prefix-oracle machines
against finite strings coding injective-function graphs and searches for the
first string that makes a machine commit, replaying the computation on
extensions and on flipped unread bits to certify the commitment is stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import isqrt
from typing import Callable

from .core import (
    DomainError,
    PermSpec,
    SetKind,
    SetSpec,
    Verdict,
    _resolve_budget,
    weaker_kind,
)
from .density import (
    DEFAULT_THRESHOLD,
    DensityProfile,
    _classify,
    default_tail_start,
)


class Answer(Enum):
    ZERO = 0
    ONE = 1
    BOX = 2


class DescriptionMode(Enum):
    GENERIC = "generic"
    COARSE = "coarse"
    DENSE = "dense"
    EFFECTIVE_DENSE = "effective-dense"


# lapses each mode tolerates; anything else observed is a hard violation
_TOLERATED = {
    DescriptionMode.GENERIC: frozenset({"diverged"}),
    DescriptionMode.COARSE: frozenset({"wrong-answer"}),
    DescriptionMode.DENSE: frozenset({"diverged", "wrong-answer"}),
    DescriptionMode.EFFECTIVE_DENSE: frozenset({"box"}),
}

VALID_ON_WINDOW = "valid-on-window"
VIOLATED = "violated"


@dataclass(frozen=True, eq=False)
class Description:
    """A budgeted pointwise guesser with a declared tolerance mode.

    answer_fn(n, budget) returns an Answer or None when no answer arrives
    within the budget.  BOX is an explicit refusal to commit and is only
    legitimate in effective-dense mode.
    """

    name: str
    mode: DescriptionMode
    answer_fn: Callable[[int, int], Answer | None]
    recipe: dict | None = field(default=None, repr=False)

    def answer(self, n: int, budget: int | None = None) -> Answer | None:
        if n < 0:
            raise DomainError(f"descriptions live on the naturals, got {n}")
        return self.answer_fn(n, _resolve_budget(budget))


def _lapse(answer: Answer | None, actual: Verdict) -> str | None:
    """Classify one resolved point: None means agreement."""
    if answer is None:
        return "diverged"
    if answer is Answer.BOX:
        return "box"
    hit = (answer is Answer.ONE) == (actual is Verdict.IN)
    return None if hit else "wrong-answer"


@dataclass
class EvalReport:
    """Window scorecard of a description against a reference set.

    error_points is the explicit window prefix of the mode's error set:
    every tolerated lapse plus every hard violation.  agreements counts
    committed correct answers, unresolved counts points whose reference
    membership stayed unknown; the three buckets partition the window.
    """

    description: str
    set_name: str
    mode: DescriptionMode
    window: int
    agreements: int
    error_points: list
    unresolved: int
    violations: list
    domain_profile: DensityProfile
    agreement_profile: DensityProfile

    @property
    def errors(self) -> int:
        return len(self.error_points)

    @property
    def verdict(self) -> str:
        return VALID_ON_WINDOW if not self.violations else VIOLATED

    def error_density(self) -> Fraction:
        return Fraction(self.errors, self.window)

    def agreement_density(self) -> Fraction:
        return Fraction(self.agreements, self.window)

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "set": self.set_name,
            "mode": self.mode.value,
            "window": self.window,
            "agreements": self.agreements,
            "errors": self.errors,
            "error_points": list(self.error_points),
            "unresolved": self.unresolved,
            "verdict": self.verdict,
            "violations": [{"n": n, "kind": kind} for n, kind in self.violations],
        }


def _cumulative_profile(name: str, flags: list) -> DensityProfile:
    checkpoints = list(range(1, len(flags) + 1))
    counts = []
    total = 0
    for flag in flags:
        total += flag
        counts.append(total)
    values = [Fraction(c, n) for c, n in zip(counts, checkpoints)]
    return DensityProfile(name, checkpoints, counts, values, [0] * len(flags))


def evaluate_description(
    desc: Description,
    spec: SetSpec,
    window: int,
    budget: int | None = None,
) -> EvalReport:
    """Grade desc against spec on [0, window).

    Divergence and boxes are classified without consulting the set; committed
    answers are graded against it, and points whose membership stays unknown
    land in the unresolved bucket.  agreements + errors + unresolved always
    equals the window length.
    """
    if window < 1:
        raise DomainError("window must be positive")
    b = _resolve_budget(budget)
    tolerated = _TOLERATED[desc.mode]
    agreements = 0
    unresolved = 0
    error_points = []
    violations = []
    defined_flags = []
    agree_flags = []
    for n in range(window):
        a = desc.answer_fn(n, b)
        defined_flags.append(1 if a in (Answer.ZERO, Answer.ONE) else 0)
        if a is None or a is Answer.BOX:
            kind = "diverged" if a is None else "box"
            error_points.append(n)
            if kind not in tolerated:
                violations.append((n, kind))
            agree_flags.append(0)
            continue
        v = spec.membership_fn(n, b)
        if v is Verdict.UNKNOWN:
            unresolved += 1
            agree_flags.append(0)
            continue
        kind = _lapse(a, v)
        if kind is None:
            agreements += 1
            agree_flags.append(1)
        else:
            error_points.append(n)
            agree_flags.append(0)
            if kind not in tolerated:
                violations.append((n, kind))
    return EvalReport(
        description=desc.name,
        set_name=spec.name,
        mode=desc.mode,
        window=window,
        agreements=agreements,
        error_points=error_points,
        unresolved=unresolved,
        violations=violations,
        domain_profile=_cumulative_profile(f"defined({desc.name})", defined_flags),
        agreement_profile=_cumulative_profile(f"agree({desc.name},{spec.name})", agree_flags),
    )


def combine_total(desc: Description, name: str | None = None) -> Description:
    """Totalize a guesser by answering zero wherever it declines.

    Silence and boxes both become committed zeros, which makes the result a
    coarse-mode candidate.  A point that merely ran out of budget is answered
    zero too, so commitments on slow points can flip once the budget grows;
    that is the honest price of totalization.  Its error set against any
    reference stays inside the original's divergence and disagreement sets.
    """

    def answer(n: int, budget: int) -> Answer:
        a = desc.answer_fn(n, budget)
        if a is None or a is Answer.BOX:
            return Answer.ZERO
        return a

    return Description(
        name=name or f"totalized-{desc.name}",
        mode=DescriptionMode.COARSE,
        answer_fn=answer,
        recipe={"combinator": "combine_total", "description": desc.name},
    )


def error_spec(desc: Description, spec: SetSpec) -> SetSpec:
    """The description's error set against spec, as a set in its own right.

    A point is in when the description lapses there (diverges, boxes, or
    commits wrongly) and out when it commits correctly.  Points where the
    reference membership stays unknown stay unknown, except that lapses
    needing no reference answer (divergence, boxes) resolve immediately.
    """

    def member(n: int, budget: int) -> Verdict:
        a = desc.answer_fn(n, budget)
        if a is None or a is Answer.BOX:
            return Verdict.IN
        v = spec.membership_fn(n, budget)
        if v is Verdict.UNKNOWN:
            return Verdict.UNKNOWN
        return Verdict.OUT if _lapse(a, v) is None else Verdict.IN

    return SetSpec(
        name=f"errors({desc.name};{spec.name})",
        kind=weaker_kind(spec.kind, SetKind.DECIDABLE),
        membership_fn=member,
        recipe={"combinator": "error_spec", "description": desc.name, "set": spec.name},
    )


@dataclass
class IntrinsicReport:
    """Per-permutation windowed profiles of a description's error set.

    Each row classifies the image of the error set under one permutation,
    counted through the permutation inverse so every window point is
    interrogated directly.  A refuted row names a checkpoint where the image
    density provably reaches the threshold.
    """

    scorecard: EvalReport
    error_set_name: str
    window: int
    threshold: Fraction
    rows: list

    def to_dict(self) -> dict:
        return {
            "scorecard": self.scorecard.to_dict(),
            "error_set": self.error_set_name,
            "window": self.window,
            "threshold_numerator": self.threshold.numerator,
            "threshold_denominator": self.threshold.denominator,
            "rows": [row.to_dict() for row in self.rows],
        }


def intrinsic_report(
    spec: SetSpec,
    desc: Description,
    perms,
    window: int,
    threshold: Fraction | None = None,
    tail_start: int | None = None,
    budget: int | None = None,
    keep_profiles: bool = False,
) -> IntrinsicReport:
    """Score desc on spec, then profile its error set under each permutation."""
    b = _resolve_budget(budget)
    threshold = DEFAULT_THRESHOLD if threshold is None else Fraction(threshold)
    tail_start = default_tail_start(window) if tail_start is None else tail_start
    scorecard = evaluate_description(desc, spec, window, b)
    target = error_spec(desc, spec)
    rows = []
    for perm in perms:
        if not isinstance(perm, PermSpec):
            raise DomainError(f"intrinsic report rows need PermSpec, got {perm!r}")
        bits = []
        for m in range(window):
            v = perm.image_membership(m, target, b)
            bits.append(1 if v is Verdict.IN else 0 if v is Verdict.OUT else None)
        rows.append(
            _classify(bits, window, tail_start, threshold, perm.name, "full", keep_profiles)
        )
    return IntrinsicReport(scorecard, target.name, window, threshold, rows)


# ---------------------------------------------------------------------------
# pairing and injective-graph prefixes


def pair(x: int, y: int) -> int:
    """Diagonal pairing (x + y)(x + y + 1)/2 + y, a bijection on the naturals."""
    if x < 0 or y < 0:
        raise DomainError("pairing needs naturals")
    s = x + y
    return s * (s + 1) // 2 + y


def unpair(p: int) -> tuple:
    if p < 0:
        raise DomainError("pairing needs naturals")
    s = (isqrt(8 * p + 1) - 1) // 2
    y = p - s * (s + 1) // 2
    return s - y, y


def decode_graph_prefix(bits) -> dict | None:
    """Read bits as a prefix of an injective graph; None if inconsistent.

    Bit 1 at position pair(x, y) asserts the coded function maps x to y; the
    asserted pairs must stay single-valued and injective.
    """
    mapping = {}
    used = set()
    for p, bit in enumerate(bits):
        if bit not in (0, 1):
            raise DomainError(f"oracle strings are 0/1 sequences, got {bit!r}")
        if bit == 1:
            x, y = unpair(p)
            if x in mapping or y in used:
                return None
            mapping[x] = y
            used.add(y)
    return mapping


def injective_graph_prefix(mapping: dict, length: int) -> tuple:
    """Encode a finite injective map as a 0/1 string of the given length."""
    values = list(mapping.values())
    if len(set(values)) != len(values):
        raise DomainError("mapping must be injective")
    bits = [0] * length
    for x, y in mapping.items():
        p = pair(x, y)
        if p >= length:
            raise DomainError(f"pair({x},{y})={p} does not fit in length {length}")
        bits[p] = 1
    return tuple(bits)


# ---------------------------------------------------------------------------
# prefix-oracle machines


@dataclass(frozen=True)
class MachineOutcome:
    """One run against a finite oracle string.

    positions records every oracle bit the run actually read.  defined means
    the machine committed to value; otherwise it either wanted a bit beyond
    the string or ran out of budget (exhausted).
    """

    defined: bool
    value: int | None
    positions: tuple
    steps: int
    exhausted: bool = False

    @property
    def use(self) -> int:
        """Length of the oracle prefix the run depends on."""
        return 1 + max(self.positions) if self.positions else 0


@dataclass(frozen=True, eq=False)
class OracleMachineSpec:
    name: str
    run_fn: Callable[[tuple, int, int], MachineOutcome]
    recipe: dict | None = field(default=None, repr=False)

    def run(self, bits, value: int, budget: int | None = None) -> MachineOutcome:
        if value < 0:
            raise DomainError(f"machine inputs are naturals, got {value}")
        return self.run_fn(tuple(bits), value, _resolve_budget(budget))


def const_machine(value: int = 0, name: str | None = None) -> OracleMachineSpec:
    """Commits to a fixed value without reading the oracle."""

    def run(bits, k, budget):
        return MachineOutcome(defined=True, value=value, positions=(), steps=1)

    return OracleMachineSpec(
        name=name or f"const-{value}",
        run_fn=run,
        recipe={"machine": "const", "value": value},
    )


def echo_machine(probe: int = 1, name: str | None = None) -> OracleMachineSpec:
    """Answers the oracle bit asserting that the probe point maps to the input.

    Against the graph of any injective f this returns 1 exactly when the
    input is f(probe), so composed with the graph it recognizes {probe}.
    """

    def run(bits, k, budget):
        p = pair(probe, k)
        if budget < 1:
            return MachineOutcome(defined=False, value=None, positions=(), steps=0, exhausted=True)
        if p >= len(bits):
            return MachineOutcome(defined=False, value=None, positions=(), steps=1)
        return MachineOutcome(defined=True, value=bits[p], positions=(p,), steps=1)

    return OracleMachineSpec(
        name=name or f"echo-{probe}",
        run_fn=run,
        recipe={"machine": "echo", "probe": probe},
    )


def graph_lookup_machine(base: SetSpec, name: str | None = None) -> OracleMachineSpec:
    """Finds the preimage of the input in the oracle graph, answers base there.

    Scans positions pair(x, input) upward; on a valid injective graph the
    first asserted bit names the unique preimage, so against the graph of f
    this computes membership of f^{-1}(input) in base.
    """

    def run(bits, k, budget):
        x = 0
        steps = 0
        read = []
        while True:
            p = pair(x, k)
            if p >= len(bits):
                return MachineOutcome(
                    defined=False, value=None, positions=tuple(read), steps=steps
                )
            if steps >= budget:
                return MachineOutcome(
                    defined=False, value=None, positions=tuple(read), steps=steps, exhausted=True
                )
            steps += 1
            read.append(p)
            if bits[p] == 1:
                v = base.membership_fn(x, budget)
                if v is Verdict.UNKNOWN:
                    return MachineOutcome(
                        defined=False,
                        value=None,
                        positions=tuple(read),
                        steps=steps,
                        exhausted=True,
                    )
                return MachineOutcome(
                    defined=True,
                    value=1 if v is Verdict.IN else 0,
                    positions=tuple(read),
                    steps=steps,
                )
            x += 1

    return OracleMachineSpec(
        name=name or f"lookup-{base.name}",
        run_fn=run,
        recipe={"machine": "graph_lookup", "base": base.name},
    )


# ---------------------------------------------------------------------------
# collapse search


@dataclass(frozen=True)
class CollapseResult:
    """First oracle string that makes the machine commit on a mapped input.

    sigma is the least string in length-then-lexicographic order that is a
    valid injective-graph prefix, maps the input somewhere, and on which the
    machine commits when run on that image point.  found is False either
    because no string within sigma_bound works (exhausted False) or because
    the step budget ran out first (exhausted True).
    """

    machine: str
    input: int
    sigma_bound: int
    found: bool
    exhausted: bool
    sigma: tuple | None = None
    image_point: int | None = None
    value: int | None = None
    positions: tuple = ()
    leaves_checked: int = 0

    def to_dict(self) -> dict:
        return {
            "machine": self.machine,
            "input": self.input,
            "sigma_bound": self.sigma_bound,
            "found": self.found,
            "exhausted": self.exhausted,
            "sigma": None if self.sigma is None else "".join(map(str, self.sigma)),
            "image_point": self.image_point,
            "value": self.value,
            "positions": list(self.positions),
            "leaves_checked": self.leaves_checked,
        }


def oracle_collapse(
    machine: OracleMachineSpec,
    n: int,
    sigma_bound: int,
    budget: int | None = None,
    bits_only: bool = False,
) -> CollapseResult:
    """Search strings in length-then-lex order for the first committing one.

    Only valid injective-graph prefixes whose decoded map sends n somewhere
    are eligible.  bits_only additionally skips commitments outside {0, 1}.
    The search prunes branches that already violate injectivity or can no
    longer map n, which preserves the visiting order of surviving leaves.
    """
    if n < 0:
        raise DomainError(f"inputs are naturals, got {n}")
    if sigma_bound < 1:
        raise DomainError("sigma_bound must be positive")
    b = _resolve_budget(budget)
    first_dom_pos = pair(n, 0)
    if first_dom_pos >= sigma_bound:
        # no admissible string can map n at all
        return CollapseResult(
            machine=machine.name,
            input=n,
            sigma_bound=sigma_bound,
            found=False,
            exhausted=False,
        )
    spent = 0
    leaves = 0
    for length in range(first_dom_pos + 1, sigma_bound + 1):
        dom_positions = []
        y = 0
        while True:
            p = pair(n, y)
            if p >= length:
                break
            dom_positions.append(p)
            y += 1
        last_dom = dom_positions[-1]

        bits = [0] * length
        mapping = {}
        used = set()
        hit_outcome = None
        hit_sigma = None
        hit_image = None

        # DFS assigning positions left to right, 0 before 1: exact lex order
        def search(depth):
            nonlocal spent, leaves, hit_outcome, hit_sigma, hit_image
            if spent >= b:
                return "budget"
            spent += 1
            if depth == length:
                leaves += 1
                k = mapping.get(n)
                if k is None:
                    return None
                outcome = machine.run_fn(tuple(bits), k, b - spent)
                spent += max(outcome.steps, 1)
                if outcome.exhausted:
                    return "budget"
                if outcome.defined and (not bits_only or outcome.value in (0, 1)):
                    hit_outcome = outcome
                    hit_sigma = tuple(bits)
                    hit_image = k
                    return "found"
                return None
            # no way left to map n: the whole subtree is barren
            if depth > last_dom and n not in mapping:
                return None
            x, yy = unpair(depth)
            out = search(depth + 1)
            if out is not None:
                return out
            if x not in mapping and yy not in used:
                bits[depth] = 1
                mapping[x] = yy
                used.add(yy)
                out = search(depth + 1)
                bits[depth] = 0
                del mapping[x]
                used.discard(yy)
                if out is not None:
                    return out
            return None

        status = search(0)
        if status == "budget":
            return CollapseResult(
                machine=machine.name,
                input=n,
                sigma_bound=sigma_bound,
                found=False,
                exhausted=True,
                leaves_checked=leaves,
            )
        if status == "found":
            return CollapseResult(
                machine=machine.name,
                input=n,
                sigma_bound=sigma_bound,
                found=True,
                exhausted=False,
                sigma=hit_sigma,
                image_point=hit_image,
                value=hit_outcome.value,
                positions=hit_outcome.positions,
                leaves_checked=leaves,
            )
    return CollapseResult(
        machine=machine.name,
        input=n,
        sigma_bound=sigma_bound,
        found=False,
        exhausted=False,
        leaves_checked=leaves,
    )


def finite_use_replay(
    machine: OracleMachineSpec,
    result: CollapseResult,
    budget: int | None = None,
) -> bool:
    """Certify the committed run depends only on the bits it read.

    Three replays must reproduce the identical value and read positions:
    the original string with every unread bit flipped, a zero-padded
    extension, and an extension asserting one fresh mapping past the
    original length.
    """
    if not result.found or result.sigma is None:
        raise DomainError("replay needs a found collapse result")
    b = _resolve_budget(budget)
    base = list(result.sigma)
    k = result.image_point
    read = set(result.positions)

    def stable(bits) -> bool:
        outcome = machine.run_fn(tuple(bits), k, b)
        return (
            outcome.defined
            and outcome.value == result.value
            and outcome.positions == result.positions
        )

    flipped = [bit if p in read else 1 - bit for p, bit in enumerate(base)]
    if not stable(flipped):
        return False
    if not stable(base + [0] * 8):
        return False
    mapping = decode_graph_prefix(base)
    if mapping is None:
        raise DomainError("found sigma fails to decode; collapse is corrupted")
    x = 0
    while x in mapping:
        x += 1
    used = set(mapping.values())
    yv = 0
    while yv in used or pair(x, yv) < len(base):
        yv += 1
    p = pair(x, yv)
    extended = base + [0] * (p + 1 - len(base))
    extended[p] = 1
    if decode_graph_prefix(extended) is None:
        raise DomainError("fresh extension construction failed")
    return stable(extended)
