"""Stakeholder verification nodes: rebuild, check, report, vote."""

import json

from govdeploy.governance import Support
from govdeploy.harness import Engine
from govdeploy.packages import MemoryStore, package_from_bytes
from govdeploy.pipeline import (
    StakeholderConfig,
    StakeholderNode,
    verify_proposal,
)


def setup_proposal(engine=None):
    engine = engine or Engine()
    package = engine.default_package(1)
    _, pid = engine.propose_upgrade(package)
    return engine, package, engine.governance.proposal(pid)


def test_honest_package_yields_for():
    engine, package, prop = setup_proposal()
    config = StakeholderConfig(account=engine.stakeholders[0])
    report = verify_proposal(config, prop, engine.store, engine.registry_address)
    assert report.integrity
    assert report.decision is Support.FOR
    assert set(report.standard_results) == set(package.test_suite)
    assert all(report.standard_results.values())


def test_tampered_store_yields_against():
    engine, package, prop = setup_proposal()
    # poison the store: same cid key, different source content
    data = package.to_canonical_bytes()
    evil = package_from_bytes(
        data.replace(b"public posts", b"public doors", 1)
    )
    engine.store._objects[prop.package_cid] = evil.to_canonical_bytes()
    config = StakeholderConfig(account=engine.stakeholders[0])
    report = verify_proposal(config, prop, engine.store, engine.registry_address)
    assert not report.integrity
    assert report.decision is Support.AGAINST


def test_missing_package_yields_against():
    engine, _, prop = setup_proposal()
    config = StakeholderConfig(account=engine.stakeholders[0])
    report = verify_proposal(config, prop, MemoryStore(), engine.registry_address)
    assert not report.integrity
    assert report.decision is Support.AGAINST
    assert report.standard_results == {}


def test_failing_private_test_yields_against():
    engine, _, prop = setup_proposal()
    config = StakeholderConfig(
        account=engine.stakeholders[0],
        private_tests={"no-hub-allowed": lambda pkg, addrs: "hub" not in pkg.sources},
    )
    report = verify_proposal(config, prop, engine.store, engine.registry_address)
    assert report.integrity  # integrity holds, policy does not
    assert report.private_results == {"no-hub-allowed": False}
    assert report.decision is Support.AGAINST


def test_two_nodes_different_private_tests_disagree():
    engine, _, prop = setup_proposal()
    strict = StakeholderConfig(
        account=engine.stakeholders[0],
        private_tests={"reject-all": lambda pkg, addrs: False},
    )
    lenient = StakeholderConfig(account=engine.stakeholders[1])
    assert (
        verify_proposal(strict, prop, engine.store, engine.registry_address).decision
        is Support.AGAINST
    )
    assert (
        verify_proposal(lenient, prop, engine.store, engine.registry_address).decision
        is Support.FOR
    )


def test_report_persisted_and_deterministic(tmp_path):
    engine, _, prop = setup_proposal()
    config = StakeholderConfig(account=engine.stakeholders[0])
    first = verify_proposal(
        config, prop, engine.store, engine.registry_address, height=7, reports_dir=tmp_path
    )
    second = verify_proposal(
        config, prop, engine.store, engine.registry_address, height=7, reports_dir=tmp_path
    )
    assert first.to_json() == second.to_json()
    path = tmp_path / prop.id_hex() / f"{engine.stakeholders[0].hex_str()}.json"
    doc = json.loads(path.read_text(encoding="utf-8"))
    assert doc["decision"] == "For"
    assert doc["proposal_id"] == prop.id_hex()


def test_node_votes_after_configured_delay():
    engine, _, prop = setup_proposal()
    node = StakeholderNode(
        StakeholderConfig(account=engine.stakeholders[0], poll_interval=6),
        engine.ledger,
        engine.governance,
        engine.store,
        engine.registry_address,
        vote_at=30,
    )
    receipts = node.run_until(prop.creation_block + 60)
    committed = [r for r in receipts if r.committed]
    assert len(committed) == 1
    vote_event = committed[0].events[0]
    assert vote_event.name == "VoteCast"
    assert vote_event.payload["support"] == "For"
    # vote lands at the first poll at or after the configured delay
    assert prop.creation_block + 30 <= vote_event.block <= prop.creation_block + 36
    assert engine.stakeholders[0] in prop.voters


def test_three_nodes_reach_quorum_and_proposal_succeeds():
    engine, package, prop = setup_proposal()
    nodes = [
        StakeholderNode(
            StakeholderConfig(account=account),
            engine.ledger,
            engine.governance,
            engine.store,
            engine.registry_address,
            vote_at=10 * (i + 1),
        )
        for i, account in enumerate(engine.stakeholders)
    ]
    for node in nodes:
        node.run_until(prop.creation_block + 40)
    assert prop.for_votes == 3
    from govdeploy.governance import ProposalState

    assert (
        engine.governance.proposal_state(prop.id, engine.ledger.clock.height)
        is ProposalState.SUCCEEDED
    )


def test_node_verifies_each_proposal_once():
    engine, _, prop = setup_proposal()
    node = StakeholderNode(
        StakeholderConfig(account=engine.stakeholders[0]),
        engine.ledger,
        engine.governance,
        engine.store,
        engine.registry_address,
        vote_at=5,
    )
    node.run_until(prop.creation_block + 20)
    verified = [entry for entry in node.journal if entry["action"] == "verified"]
    assert len(verified) == 1
