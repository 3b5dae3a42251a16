"""Reference net semantics, token replay with pinned values, DFG, interchange."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from govdeploy.conformance import (
    EmptyLogError,
    EventLog,
    Trace,
    TraceEvent,
    accepts,
    dfg_to_dot,
    log_from_csv,
    log_from_xes,
    log_to_csv,
    log_to_xes,
    mine_dfg,
    reference_net,
    replay_trace,
    token_replay,
)

NET = reference_net()

SUCCESS = (
    "ProposalCreated",
    "ProposalPackageCreated",
    "VoteCast",
    "VoteCast",
    "ProposalQueued",
    "DeterministicUpgradeExecuted",
    "ProposalExecuted",
)
NO_DEPLOY = ("ProposalCreated", "ProposalPackageCreated", "VoteCast", "VoteCast")
SINGLE_VOTE = ("ProposalCreated", "ProposalPackageCreated", "VoteCast")


def trace(activities, case="t", step=60) -> Trace:
    return Trace(case, tuple(TraceEvent(a, i * step) for i, a in enumerate(activities)))


# --- acceptor ----------------------------------------------------------------


@pytest.mark.parametrize("activities", [SUCCESS, NO_DEPLOY, SINGLE_VOTE])
def test_net_accepts_valid_variants(activities):
    assert accepts(trace(activities), NET)


def test_net_accepts_execution_order_swap():
    swapped = SUCCESS[:5] + ("ProposalExecuted", "DeterministicUpgradeExecuted")
    assert accepts(trace(swapped), NET)


@pytest.mark.parametrize(
    "activities",
    [
        (),
        ("ProposalCreated",),
        ("ProposalCreated", "ProposalPackageCreated"),
        ("VoteCast",) + SUCCESS,  # vote before creation
        SUCCESS + ("VoteCast",),  # vote after execution
        SUCCESS[:5],  # queued but never executed
        ("ProposalCreated", "ProposalQueued", "ProposalExecuted"),
        ("ProposalCreated", "ProposalPackageCreated", "ProposalQueued"),
    ],
)
def test_net_rejects_invalid_variants(activities):
    assert not accepts(trace(activities), NET)


def test_valid_variants_replay_at_one():
    for activities in (SUCCESS, NO_DEPLOY, SINGLE_VOTE):
        result = replay_trace(trace(activities), NET)
        assert result.fitness == 1.0
        assert result.missing == 0 and result.remaining == 0


# --- pinned replay values (computed by hand before running the code) ---------


def test_replay_empty_trace_pinned():
    result = replay_trace(trace(()), NET)
    assert (result.produced, result.consumed, result.missing, result.remaining) == (
        1,
        1,
        1,
        1,
    )
    assert result.fitness == 0.0


def test_replay_skipped_middle_pinned():
    # skips packaging and voting entirely
    result = replay_trace(
        trace(("ProposalCreated", "ProposalQueued", "ProposalExecuted")), NET
    )
    assert (result.produced, result.consumed, result.missing, result.remaining) == (
        5,
        4,
        2,
        3,
    )
    assert result.fitness == pytest.approx(0.45)


def test_replay_out_of_order_execution_pinned():
    # executes before queuing
    result = replay_trace(
        trace(
            (
                "ProposalCreated",
                "ProposalPackageCreated",
                "VoteCast",
                "ProposalExecuted",
                "ProposalQueued",
            )
        ),
        NET,
    )
    assert (result.produced, result.consumed, result.missing, result.remaining) == (
        7,
        6,
        2,
        3,
    )
    assert result.fitness == pytest.approx(13 / 21)


def test_replay_unknown_activity_pinned():
    # an activity the net does not know about, then votes without packaging
    result = replay_trace(
        trace(("ProposalCreated", "RoleGranted", "VoteCast", "VoteCast")), NET
    )
    assert (result.produced, result.consumed, result.missing, result.remaining) == (
        6,
        6,
        2,
        2,
    )
    assert result.fitness == pytest.approx(2 / 3)


def test_token_replay_aggregates_mean():
    log = EventLog((trace(SUCCESS, "a"), trace((), "b")))
    results, mean = token_replay(log, NET)
    assert [r.fitness for r in results] == [1.0, 0.0]
    assert mean == 0.5
    with pytest.raises(EmptyLogError):
        token_replay(EventLog(()), NET)


ALPHABET = sorted(NET.alphabet) + ["Bogus"]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(ALPHABET), max_size=10))
def test_fitness_bounds_and_acceptor_agreement(activities):
    t = trace(tuple(activities))
    result = replay_trace(t, NET)
    assert 0.0 <= result.fitness <= 1.0
    assert result.missing <= result.consumed
    assert result.remaining <= result.produced
    # perfect replay and language membership coincide
    assert (result.fitness == 1.0) == accepts(t, NET)


# --- directly-follows graph --------------------------------------------------


def test_dfg_frequencies_and_means():
    log = EventLog(
        (
            Trace("a", (TraceEvent("X", 0), TraceEvent("Y", 10), TraceEvent("Y", 30))),
            Trace("b", (TraceEvent("X", 100), TraceEvent("Y", 140))),
        )
    )
    edges = {(e.from_activity, e.to_activity): e for e in mine_dfg(log)}
    assert edges[("X", "Y")].frequency == 2
    assert edges[("X", "Y")].mean_duration == 25.0
    assert edges[("Y", "Y")].frequency == 1
    assert edges[("Y", "Y")].mean_duration == 20.0
    # frequency sum equals the number of adjacent pairs in the log
    assert sum(e.frequency for e in edges.values()) == 3
    with pytest.raises(EmptyLogError):
        mine_dfg(EventLog(()))


def test_dfg_output_sorted_and_dot_renders():
    log = EventLog((trace(SUCCESS),))
    edges = mine_dfg(log)
    keys = [(e.from_activity, e.to_activity) for e in edges]
    assert keys == sorted(keys)
    dot = dfg_to_dot(edges)
    assert dot.startswith("digraph dfg {")
    assert '"ProposalCreated" -> "ProposalPackageCreated"' in dot


# --- interchange -------------------------------------------------------------


def test_csv_round_trip():
    log = EventLog((trace(SUCCESS, "case-1"), trace(NO_DEPLOY, "case-2")))
    assert log_from_csv(log_to_csv(log)) == log


def test_xes_round_trip():
    log = EventLog((trace(SUCCESS, "case-1"), trace(NO_DEPLOY, "case-2")))
    text = log_to_xes(log)
    assert text.startswith('<?xml version="1.0"')
    assert "xes.version" in text
    assert log_from_xes(text) == log
