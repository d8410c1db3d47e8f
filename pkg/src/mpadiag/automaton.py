"""Labeled max-plus automata: data model, `.mpa` parsing, and structure ops.

An automaton is a set of states, weighted transitions over events that are
either observable (carrying an output label) or unobservable, a nonempty set
of initial states with initial weights, and a carrier-set kind.  All weights
are nonzero (minus infinity is forbidden on transitions and initial states).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Sequence

from .dioid import (
    NEG_INF,
    ONE,
    DioidKind,
    Weight,
    format_weight,
    otimes,
    parse_weight,
)


class MpaError(Exception):
    """Base error for model construction and parsing."""


class MpaSyntaxError(MpaError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MpaSemanticError(MpaError):
    pass


@dataclass(frozen=True)
class Event:
    """An event: observable with an output label, or unobservable (label None)."""

    name: str
    label: str | None
    faulty: bool = False
    synthetic: bool = False

    @property
    def observable(self) -> bool:
        return self.label is not None


@dataclass(frozen=True)
class Transition:
    src: str
    event: Event
    dst: str
    weight: Weight

    def __str__(self) -> str:
        return f"{self.src} -{self.event.name}/{format_weight(self.weight)}-> {self.dst}"

    def sort_key(self):
        return (self.src, self.event.name, self.dst, _weight_key(self.weight))


def _weight_key(w: Weight):
    return (0, Fraction(0)) if w.is_neg_inf else (1, w.frac)


@dataclass(frozen=True)
class Automaton:
    kind: DioidKind
    states: frozenset[str]
    initial: tuple[tuple[str, Weight], ...]
    events: tuple[Event, ...]
    transitions: tuple[Transition, ...]

    @staticmethod
    def build(
        kind: DioidKind,
        states: Iterable[str],
        initial: Iterable[tuple[str, Weight]],
        events: Iterable[Event],
        transitions: Iterable[Transition],
    ) -> "Automaton":
        """Validate and canonicalize; raises MpaSemanticError on violations."""
        states = frozenset(states)
        events = tuple(sorted(events, key=lambda e: e.name))
        initial = tuple(sorted(initial, key=lambda p: p[0]))
        transitions = tuple(sorted(transitions, key=Transition.sort_key))

        names = [e.name for e in events]
        if len(set(names)) != len(names):
            raise MpaSemanticError("duplicate event names")
        if not initial:
            raise MpaSemanticError("at least one initial state is required")
        init_names = [q for q, _ in initial]
        if len(set(init_names)) != len(init_names):
            raise MpaSemanticError("duplicate initial state")
        event_map = {e.name: e for e in events}
        for q, w in initial:
            if q not in states:
                raise MpaSemanticError(f"unknown initial state {q!r}")
            if w.is_neg_inf:
                raise MpaSemanticError(f"zero weight forbidden on initial state {q!r}")
            if not kind.admits(w):
                raise MpaSemanticError(
                    f"initial weight {format_weight(w)} not in {kind.value}"
                )
        seen: set[tuple[str, str, str]] = set()
        for t in transitions:
            if t.src not in states or t.dst not in states:
                raise MpaSemanticError(f"transition {t} references unknown state")
            if t.event.name not in event_map or event_map[t.event.name] != t.event:
                raise MpaSemanticError(f"transition {t} references unknown event")
            if t.weight.is_neg_inf:
                raise MpaSemanticError(f"zero weight forbidden on transition {t}")
            if not kind.admits(t.weight):
                raise MpaSemanticError(
                    f"weight {format_weight(t.weight)} not in {kind.value} on {t}"
                )
            key = (t.src, t.event.name, t.dst)
            if key in seen:
                raise MpaSemanticError(f"duplicate transition {t}")
            seen.add(key)
        return Automaton(kind, states, initial, events, transitions)

    @cached_property
    def event_map(self) -> dict[str, Event]:
        return {e.name: e for e in self.events}

    @cached_property
    def out_map(self) -> dict[str, tuple[Transition, ...]]:
        out: dict[str, list[Transition]] = {q: [] for q in self.states}
        for t in self.transitions:
            out[t.src].append(t)
        return {q: tuple(ts) for q, ts in out.items()}

    @cached_property
    def initial_states(self) -> frozenset[str]:
        return frozenset(q for q, _ in self.initial)

    @cached_property
    def faulty_events(self) -> frozenset[str]:
        return frozenset(e.name for e in self.events if e.faulty)

    def uo_transitions(self) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if not t.event.observable)

    def obs_transitions(self) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.event.observable)

    def reachable_states(self) -> frozenset[str]:
        seen = set(self.initial_states)
        stack = sorted(seen)
        while stack:
            q = stack.pop()
            for t in self.out_map.get(q, ()):
                if t.dst not in seen:
                    seen.add(t.dst)
                    stack.append(t.dst)
        return frozenset(seen)


@dataclass(frozen=True)
class Path:
    """A chained transition sequence; ``steps`` may be empty."""

    start: str
    steps: tuple[Transition, ...] = ()

    def __post_init__(self):
        at = self.start
        for t in self.steps:
            if t.src != at:
                raise MpaSemanticError(f"path breaks at {t} (expected src {at})")
            at = t.dst

    @property
    def end(self) -> str:
        return self.steps[-1].dst if self.steps else self.start

    def __len__(self) -> int:
        return len(self.steps)

    def weight(self) -> Weight:
        w = ONE
        for t in self.steps:
            w = otimes(w, t.weight)
        return w

    def events(self) -> tuple[str, ...]:
        return tuple(t.event.name for t in self.steps)

    def has_fault(self) -> bool:
        return any(t.event.faulty for t in self.steps)

    def concat(self, other: "Path") -> "Path":
        if other.start != self.end:
            raise MpaSemanticError("paths do not chain")
        return Path(self.start, self.steps + other.steps)


@dataclass(frozen=True)
class TimedWord:
    """Event sequence with accumulated weights (running products)."""

    entries: tuple[tuple[str, Weight], ...]


def timed_word(p: Path) -> TimedWord:
    entries = []
    acc = ONE
    for t in p.steps:
        acc = otimes(acc, t.weight)
        entries.append((t.event.name, acc))
    return TimedWord(tuple(entries))


def labeled_timed_word(p: Path) -> tuple[tuple[str, Weight], ...]:
    """Projection of the timed word through the labeling: unobservable entries drop."""
    out = []
    acc = ONE
    for t in p.steps:
        acc = otimes(acc, t.weight)
        if t.event.observable:
            out.append((t.event.label, acc))
    return tuple(out)


# ---------------------------------------------------------------------------
# .mpa format
# ---------------------------------------------------------------------------

_IDENT = re.compile(r"^[A-Za-z0-9_.$@'^-]+$")


def _check_ident(tok: str, what: str, line_no: int) -> str:
    if not _IDENT.match(tok):
        raise MpaSyntaxError(line_no, f"bad {what} name {tok!r}")
    return tok


def parse_automaton(text: str) -> Automaton:
    """Parse the line-based `.mpa` format.

    ::

        mpa 1
        dioid maxplus-q
        state q0 init 0
        state q1
        event f uo fault
        event a obs a
        trans q0 f q1 3

    '#' starts a comment; duplicate declarations and dangling references are
    rejected with the offending line number.
    """
    kind: DioidKind | None = None
    saw_header = False
    states: dict[str, int] = {}
    initial: list[tuple[str, Weight]] = []
    events: dict[str, Event] = {}
    transitions: list[Transition] = []
    trans_keys: set[tuple[str, str, str]] = set()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0]
        if head == "mpa":
            if saw_header:
                raise MpaSyntaxError(line_no, "duplicate header")
            if toks[1:] != ["1"]:
                raise MpaSyntaxError(line_no, "unsupported format version")
            saw_header = True
        elif head == "dioid":
            if kind is not None:
                raise MpaSyntaxError(line_no, "duplicate dioid line")
            if len(toks) != 2:
                raise MpaSyntaxError(line_no, "expected: dioid <kind>")
            try:
                kind = DioidKind.from_name(toks[1])
            except ValueError as exc:
                raise MpaSyntaxError(line_no, str(exc)) from exc
        elif head == "state":
            if len(toks) < 2:
                raise MpaSyntaxError(line_no, "expected: state <name> [init [w]]")
            name = _check_ident(toks[1], "state", line_no)
            if name in states:
                raise MpaSyntaxError(line_no, f"duplicate state {name!r}")
            states[name] = line_no
            rest = toks[2:]
            if rest:
                if rest[0] != "init" or len(rest) > 2:
                    raise MpaSyntaxError(line_no, "expected: state <name> [init [w]]")
                w = ONE
                if len(rest) == 2:
                    try:
                        w = parse_weight(rest[1])
                    except ValueError as exc:
                        raise MpaSyntaxError(line_no, str(exc)) from exc
                if w.is_neg_inf:
                    raise MpaSyntaxError(line_no, "zero weight forbidden")
                initial.append((name, w))
        elif head == "event":
            if len(toks) < 3:
                raise MpaSyntaxError(line_no, "expected: event <name> uo|obs ...")
            name = _check_ident(toks[1], "event", line_no)
            if name in events:
                raise MpaSyntaxError(line_no, f"duplicate event {name!r}")
            mode, rest = toks[2], toks[3:]
            faulty = False
            if rest and rest[-1] == "fault":
                faulty = True
                rest = rest[:-1]
            if mode == "uo":
                if rest:
                    raise MpaSyntaxError(line_no, "unexpected tokens after 'uo'")
                events[name] = Event(name, None, faulty)
            elif mode == "obs":
                if len(rest) != 1:
                    raise MpaSyntaxError(line_no, "expected: event <name> obs <label>")
                label = _check_ident(rest[0], "label", line_no)
                events[name] = Event(name, label, faulty)
            else:
                raise MpaSyntaxError(line_no, f"expected 'uo' or 'obs', got {mode!r}")
        elif head == "trans":
            if len(toks) != 5:
                raise MpaSyntaxError(line_no, "expected: trans <src> <event> <dst> <w>")
            src, ev_name, dst, w_tok = toks[1:]
            if src not in states:
                raise MpaSyntaxError(line_no, f"unknown state {src!r}")
            if dst not in states:
                raise MpaSyntaxError(line_no, f"unknown state {dst!r}")
            if ev_name not in events:
                raise MpaSyntaxError(line_no, f"unknown event {ev_name!r}")
            try:
                w = parse_weight(w_tok)
            except ValueError as exc:
                raise MpaSyntaxError(line_no, str(exc)) from exc
            if w.is_neg_inf:
                raise MpaSyntaxError(line_no, "zero weight forbidden")
            key = (src, ev_name, dst)
            if key in trans_keys:
                raise MpaSyntaxError(line_no, f"duplicate transition {key}")
            trans_keys.add(key)
            transitions.append(Transition(src, events[ev_name], dst, w))
        else:
            raise MpaSyntaxError(line_no, f"unknown directive {head!r}")

    if not saw_header:
        raise MpaSemanticError("missing 'mpa 1' header")
    if kind is None:
        raise MpaSemanticError("missing 'dioid' line")
    if not initial:
        raise MpaSemanticError("at least one initial state is required")
    return Automaton.build(kind, states, initial, events.values(), transitions)


def render_automaton(a: Automaton) -> str:
    """Canonical text form; parse(render(a)) reproduces a up to synthetic flags."""
    init = dict(a.initial)
    lines = ["mpa 1", f"dioid {a.kind.value}"]
    for q in sorted(a.states):
        if q in init:
            lines.append(f"state {q} init {format_weight(init[q])}")
        else:
            lines.append(f"state {q}")
    for e in a.events:
        tail = " fault" if e.faulty else ""
        if e.observable:
            lines.append(f"event {e.name} obs {e.label}{tail}")
        else:
            lines.append(f"event {e.name} uo{tail}")
    for t in a.transitions:
        lines.append(
            f"trans {t.src} {t.event.name} {t.dst} {format_weight(t.weight)}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Structure operations
# ---------------------------------------------------------------------------


def _fresh_name(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


def normalize_initial_weights(a: Automaton) -> Automaton:
    """Give every initial state the identity weight.

    Initial states whose weight is not the identity are demoted and fed from
    one fresh initial state through a fresh unobservable, non-faulty event
    whose transition weight carries the old initial weight.
    """
    offenders = [(q, w) for q, w in a.initial if w != ONE]
    if not offenders:
        return a
    taken_states = set(a.states)
    taken_events = {e.name for e in a.events}
    q0 = _fresh_name("q0$init", taken_states)
    ev = Event(_fresh_name("eps$init", taken_events), None, faulty=False, synthetic=True)
    keep = [(q, w) for q, w in a.initial if w == ONE]
    new_transitions = list(a.transitions)
    for q, w in offenders:
        new_transitions.append(Transition(q0, ev, q, w))
    return Automaton.build(
        a.kind,
        set(a.states) | {q0},
        keep + [(q0, ONE)],
        list(a.events) + [ev],
        new_transitions,
    )


def classify_states(a: Automaton) -> tuple[frozenset[str], frozenset[str]]:
    """Return (dead, stuck).

    Dead states have no outgoing transition.  A state is stuck when it is dead
    or every path out of it is instantaneous; equivalently, non-stuck states
    are those from which some transition of nonidentity weight is reachable.
    """
    dead = frozenset(q for q in a.states if not a.out_map.get(q))
    preds: dict[str, set[str]] = {q: set() for q in a.states}
    seeds: set[str] = set()
    for t in a.transitions:
        preds[t.dst].add(t.src)
        if t.weight != ONE:
            seeds.add(t.src)
    non_stuck = set(seeds)
    stack = sorted(seeds)
    while stack:
        q = stack.pop()
        for p in preds[q]:
            if p not in non_stuck:
                non_stuck.add(p)
                stack.append(p)
    return dead, frozenset(a.states - non_stuck)


# Weight strictly above the identity used on the padding sink loops; pumping
# it must grow without bound, which forces a positive value.
STUCK_PAD_WEIGHT = Weight(Fraction(1))


def make_stuck_free(a: Automaton) -> Automaton:
    """Pad every stuck state with a fresh weighted sink so no stuck state remains.

    Each stuck state gets its own fresh sink, reached by a fresh non-faulty
    unobservable event; the sink carries a self-loop of the same weight.
    Already stuck-free automata are returned unchanged.
    """
    _, stuck = classify_states(a)
    if not stuck:
        return a
    taken_states = set(a.states)
    taken_events = {e.name for e in a.events}
    ev = Event(_fresh_name("u$pad", taken_events), None, faulty=False, synthetic=True)
    new_states = set(a.states)
    new_transitions = list(a.transitions)
    for q in sorted(stuck):
        sink = _fresh_name(f"{q}$pad", taken_states)
        taken_states.add(sink)
        new_states.add(sink)
        new_transitions.append(Transition(q, ev, sink, STUCK_PAD_WEIGHT))
        new_transitions.append(Transition(sink, ev, sink, STUCK_PAD_WEIGHT))
    return Automaton.build(
        a.kind, new_states, a.initial, list(a.events) + [ev], new_transitions
    )


def _restrict(a: Automaton, kept: Sequence[Transition]) -> Automaton:
    """Keep transitions usable from the initial states, plus all initial states."""
    out: dict[str, list[Transition]] = {}
    for t in kept:
        out.setdefault(t.src, []).append(t)
    reach = set(a.initial_states)
    stack = sorted(reach)
    while stack:
        q = stack.pop()
        for t in out.get(q, ()):
            if t.dst not in reach:
                reach.add(t.dst)
                stack.append(t.dst)
    final = [t for t in kept if t.src in reach]
    states = set(a.initial_states)
    for t in final:
        states.add(t.src)
        states.add(t.dst)
    return Automaton.build(a.kind, states, a.initial, a.events, final)


def normal_subautomaton(a: Automaton) -> Automaton:
    """Drop all faulty transitions; trim to the part reachable from the initials."""
    return _restrict(a, [t for t in a.transitions if not t.event.faulty])


def faulty_subautomaton(a: Automaton) -> Automaton:
    """Faulty transitions plus their predecessors and successors.

    A transition precedes a faulty one when its destination reaches the faulty
    transition's source (length-0 reach included); successors are reachable
    from a faulty transition's destination.
    """
    faulty = [t for t in a.transitions if t.event.faulty]
    fwd: dict[str, set[str]] = {}
    bwd: dict[str, set[str]] = {}
    for t in a.transitions:
        fwd.setdefault(t.src, set()).add(t.dst)
        bwd.setdefault(t.dst, set()).add(t.src)

    def closure(seed: set[str], adj: dict[str, set[str]]) -> set[str]:
        seen = set(seed)
        stack = sorted(seed)
        while stack:
            q = stack.pop()
            for nxt in adj.get(q, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    reaches_fault = closure({t.src for t in faulty}, bwd)
    after_fault = closure({t.dst for t in faulty}, fwd)
    kept = [
        t
        for t in a.transitions
        if t.event.faulty or t.dst in reaches_fault or t.src in after_fault
    ]
    return _restrict(a, kept)


@dataclass(frozen=True)
class StructuralFlags:
    deterministic: bool
    deadlock_free: bool
    divergence_free: bool


def structural_checks(a: Automaton) -> StructuralFlags:
    """Flags: single-initial event-determinism, no reachable dead state, and
    no reachable cycle of unobservable transitions."""
    deterministic = len(a.initial) == 1
    seen_pairs: dict[tuple[str, str], str] = {}
    for t in a.transitions:
        key = (t.src, t.event.name)
        if key in seen_pairs and seen_pairs[key] != t.dst:
            deterministic = False
        seen_pairs[key] = t.dst

    reach = a.reachable_states()
    dead, _ = classify_states(a)
    deadlock_free = not (dead & reach)

    uo_adj: dict[str, list[str]] = {}
    for t in a.uo_transitions():
        if t.src in reach:
            uo_adj.setdefault(t.src, []).append(t.dst)
    divergence_free = not _has_cycle(uo_adj)
    return StructuralFlags(deterministic, deadlock_free, divergence_free)


def _has_cycle(adj: dict[str, list[str]]) -> bool:
    WHITE, GREY, BLACK = 0, 1, 2
    color: dict[str, int] = {}
    for root in sorted(adj):
        if color.get(root, WHITE) != WHITE:
            continue
        stack: list[tuple[str, Iterator[str]]] = [(root, iter(adj.get(root, ())))]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                c = color.get(nxt, WHITE)
                if c == GREY:
                    return True
                if c == WHITE:
                    color[nxt] = GREY
                    stack.append((nxt, iter(adj.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return False
