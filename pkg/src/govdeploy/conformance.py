"""Process conformance: reference Petri net, token-based replay, DFG mining.

The reference net accepts exactly the three valid lifecycle variants:
success (queue + execute + upgrade), rejection, and timeout. Rejection and
timeout are structurally the same trace shape (voting ends, nothing more
is emitted); governance state distinguishes them downstream.

Token-based replay walks a trace through the net, inserting missing
tokens where a transition fires under-enabled and counting leftovers at
the end; fitness = (1 - m/c)/2 + (1 - r/p)/2.
"""

from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ET
from collections import Counter, deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Optional

Marking = Counter  # place name -> token count


@dataclass(frozen=True)
class Transition:
    name: str
    label: Optional[str]  # None marks a silent transition
    pre: dict[str, int]
    post: dict[str, int]


@dataclass(frozen=True)
class PetriNet:
    places: frozenset[str]
    transitions: tuple[Transition, ...]
    initial_marking: dict[str, int]
    final_marking: dict[str, int]

    def labeled(self, activity: str) -> list[Transition]:
        return [t for t in self.transitions if t.label == activity]

    @property
    def silent(self) -> list[Transition]:
        return [t for t in self.transitions if t.label is None]

    @property
    def alphabet(self) -> set[str]:
        return {t.label for t in self.transitions if t.label is not None}


@dataclass(frozen=True)
class TraceEvent:
    activity: str
    timestamp: int  # seconds


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple[TraceEvent, ...]

    def activities(self) -> list[str]:
        return [e.activity for e in self.events]


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]


class EmptyLogError(ValueError):
    pass


@dataclass
class FitnessResult:
    produced: int
    consumed: int
    missing: int
    remaining: int

    @property
    def fitness(self) -> float:
        first = 1.0 - (self.missing / self.consumed if self.consumed else 0.0)
        second = 1.0 - (self.remaining / self.produced if self.produced else 0.0)
        return 0.5 * first + 0.5 * second


def reference_net() -> PetriNet:
    """The deployment-workflow net: create, package, vote one or more
    times, then either queue + the two execution events, or stop."""
    t = [
        Transition("proposal_created", "ProposalCreated", {"start": 1}, {"created": 1}),
        Transition("package_created", "ProposalPackageCreated", {"created": 1}, {"packaged": 1}),
        Transition("first_vote", "VoteCast", {"packaged": 1}, {"voted": 1}),
        Transition("repeat_vote", "VoteCast", {"voted": 1}, {"voted": 1}),
        Transition("queue_proposal", "ProposalQueued", {"voted": 1}, {"q_upg": 1, "q_exec": 1}),
        Transition("upgrade_executed", "DeterministicUpgradeExecuted", {"q_upg": 1}, {"d_upg": 1}),
        Transition("proposal_executed", "ProposalExecuted", {"q_exec": 1}, {"d_exec": 1}),
        Transition("finish_success", None, {"d_upg": 1, "d_exec": 1}, {"end": 1}),
        Transition("finish_without_deploy", None, {"voted": 1}, {"end": 1}),
    ]
    places = frozenset(
        {"start", "created", "packaged", "voted", "q_upg", "q_exec", "d_upg", "d_exec", "end"}
    )
    return PetriNet(places, tuple(t), {"start": 1}, {"end": 1})


def _enabled(marking: Marking, transition: Transition) -> bool:
    return all(marking[p] >= n for p, n in transition.pre.items())


def _fire(marking: Marking, transition: Transition) -> Marking:
    out = Marking(marking)
    for p, n in transition.pre.items():
        out[p] -= n
    for p, n in transition.post.items():
        out[p] += n
    return +out


def _marking_key(marking: Marking) -> tuple:
    return tuple(sorted((p, n) for p, n in marking.items() if n > 0))


def _silent_closure(marking: Marking, net: PetriNet, depth: int = 8):
    """All markings reachable by firing only silent transitions, with the
    silent sequence that reaches each (shortest first, deterministic)."""
    seen = {_marking_key(marking): []}
    queue = deque([(marking, [])])
    while queue:
        current, path = queue.popleft()
        if len(path) >= depth:
            continue
        for t in net.silent:
            if _enabled(current, t):
                nxt = _fire(current, t)
                key = _marking_key(nxt)
                if key not in seen:
                    seen[key] = path + [t]
                    queue.append((nxt, path + [t]))
    return [(Marking(dict(key)), seq) for key, seq in seen.items()]


def replay_trace(trace: Trace, net: PetriNet) -> FitnessResult:
    """Token-based replay of one trace; strict handling of unknown
    activities (one missing plus one remaining token each)."""
    marking = Marking(net.initial_marking)
    result = FitnessResult(
        produced=sum(net.initial_marking.values()), consumed=0, missing=0, remaining=0
    )

    def fire(transition: Transition) -> None:
        nonlocal marking
        result.consumed += sum(transition.pre.values())
        result.produced += sum(transition.post.values())
        marking = _fire(marking, transition)

    for activity in trace.activities():
        candidates = net.labeled(activity)
        if not candidates:
            result.consumed += 1
            result.missing += 1
            result.produced += 1
            result.remaining += 1
            continue
        # Prefer a directly enabled candidate, then one enabled after the
        # shortest silent sequence, then the one needing fewest insertions.
        chosen: Optional[Transition] = None
        silent_seq: list[Transition] = []
        direct = [t for t in candidates if _enabled(marking, t)]
        if direct:
            chosen = direct[0]
        else:
            best: Optional[tuple[int, int]] = None
            for reachable, seq in sorted(_silent_closure(marking, net), key=lambda x: len(x[1])):
                for idx, t in enumerate(candidates):
                    if _enabled(reachable, t):
                        rank = (len(seq), idx)
                        if best is None or rank < best:
                            best, chosen, silent_seq = rank, t, seq
            if chosen is None:
                deficits = [
                    (sum(max(0, n - marking[p]) for p, n in t.pre.items()), idx, t)
                    for idx, t in enumerate(candidates)
                ]
                _, _, chosen = min(deficits)
        for silent in silent_seq:
            fire(silent)
        for place, need in chosen.pre.items():
            deficit = need - marking[place]
            if deficit > 0:
                result.missing += deficit
                marking[place] += deficit
        fire(chosen)

    # Close the case: fire the shortest silent sequence that covers the
    # final marking, if one exists.
    for reachable, seq in sorted(_silent_closure(marking, net), key=lambda x: len(x[1])):
        if all(reachable[p] >= n for p, n in net.final_marking.items()):
            for silent in seq:
                fire(silent)
            break
    for place, need in net.final_marking.items():
        result.consumed += need
        available = marking[place]
        if available < need:
            result.missing += need - available
            marking[place] = 0
        else:
            marking[place] -= need
    result.remaining += sum(marking.values())
    return result


def token_replay(log: EventLog, net: PetriNet) -> tuple[list[FitnessResult], float]:
    """Per-trace fitness plus the mean over all traces."""
    if not log.traces:
        raise EmptyLogError("cannot replay an empty log")
    results = [replay_trace(trace, net) for trace in log.traces]
    return results, sum(r.fitness for r in results) / len(results)


def accepts(trace: Trace, net: PetriNet) -> bool:
    """Explicit reachability-based acceptor; independent of replay."""
    markings = {_marking_key(Marking(net.initial_marking))}
    for activity in trace.activities():
        following: set[tuple] = set()
        for key in markings:
            for reachable, _ in _silent_closure(Marking(dict(key)), net):
                for t in net.labeled(activity):
                    if _enabled(reachable, t):
                        following.add(_marking_key(_fire(reachable, t)))
        if not following:
            return False
        markings = following
    final = _marking_key(Marking(net.final_marking))
    return any(
        _marking_key(reachable) == final
        for key in markings
        for reachable, _ in _silent_closure(Marking(dict(key)), net)
    )


@dataclass(frozen=True)
class DfgEdge:
    from_activity: str
    to_activity: str
    frequency: int
    mean_duration: float  # seconds


def mine_dfg(log: EventLog) -> list[DfgEdge]:
    """Directly-follows edges with frequency and mean gap, sorted by
    (from, to) for deterministic output."""
    if not log.traces:
        raise EmptyLogError("cannot mine an empty log")
    gaps: dict[tuple[str, str], list[int]] = {}
    for trace in log.traces:
        for prev, nxt in zip(trace.events, trace.events[1:]):
            gaps.setdefault((prev.activity, nxt.activity), []).append(
                nxt.timestamp - prev.timestamp
            )
    return [
        DfgEdge(a, b, len(durations), sum(durations) / len(durations))
        for (a, b), durations in sorted(gaps.items())
    ]


def dfg_to_dot(edges: Iterable[DfgEdge]) -> str:
    lines = ["digraph dfg {", "  rankdir=LR;"]
    for e in edges:
        lines.append(
            f'  "{e.from_activity}" -> "{e.to_activity}" '
            f'[label="{e.frequency}x / {e.mean_duration:g}s"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- interchange ------------------------------------------------------------


def _iso(seconds: int) -> str:
    return (
        datetime.fromtimestamp(seconds, tz=timezone.utc).isoformat().replace("+00:00", "Z")
    )


def _from_iso(text: str) -> int:
    return int(datetime.fromisoformat(text.replace("Z", "+00:00")).timestamp())


def log_to_csv(log: EventLog) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["case_id", "activity", "timestamp", "tx_id", "payload_json"])
    for trace in log.traces:
        for event in trace.events:
            writer.writerow([trace.case_id, event.activity, _iso(event.timestamp), "", "{}"])
    return out.getvalue()


def log_from_csv(text: str) -> EventLog:
    traces: dict[str, list[TraceEvent]] = {}
    order: list[str] = []
    for row in csv.DictReader(io.StringIO(text)):
        case = row["case_id"]
        if case not in traces:
            traces[case] = []
            order.append(case)
        traces[case].append(TraceEvent(row["activity"], _from_iso(row["timestamp"])))
    return EventLog(tuple(Trace(case, tuple(traces[case])) for case in order))


def log_to_xes(log: EventLog) -> str:
    root = ET.Element("log", {"xes.version": "1.0", "xmlns": "http://www.xes-standard.org/"})
    for trace in log.traces:
        trace_el = ET.SubElement(root, "trace")
        ET.SubElement(trace_el, "string", {"key": "concept:name", "value": trace.case_id})
        for event in trace.events:
            event_el = ET.SubElement(trace_el, "event")
            ET.SubElement(event_el, "string", {"key": "concept:name", "value": event.activity})
            ET.SubElement(
                event_el, "date", {"key": "time:timestamp", "value": _iso(event.timestamp)}
            )
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def log_from_xes(text: str) -> EventLog:
    ns = {"xes": "http://www.xes-standard.org/"}
    root = ET.fromstring(text)
    traces = []
    for trace_el in root.findall("xes:trace", ns):
        case = ""
        for attr in trace_el.findall("xes:string", ns):
            if attr.get("key") == "concept:name":
                case = attr.get("value", "")
        events = []
        for event_el in trace_el.findall("xes:event", ns):
            activity, stamp = "", 0
            for attr in event_el:
                if attr.get("key") == "concept:name":
                    activity = attr.get("value", "")
                elif attr.get("key") == "time:timestamp":
                    stamp = _from_iso(attr.get("value", "1970-01-01T00:00:00Z"))
            events.append(TraceEvent(activity, stamp))
        traces.append(Trace(case, tuple(events)))
    return EventLog(tuple(traces))
