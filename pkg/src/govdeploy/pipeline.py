"""Stakeholder-side verification: fetch, rebuild, check address, test, vote.

A node never trusts the proposer: it refetches the package by cid,
rebuilds the manifest from the sources it actually received, recomputes
the controller address itself, and only then runs the standard and
private test predicates. Any integrity failure forces an Against vote.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Union

from .governance import Governance, ProposalKind, Support
from .ledger import Address, Call, Hash256, Ledger, TxReceipt
from .packages import Package, UnknownCidError, build_package, BuildConfig
from .registry import ContractRef, derive_version_address

TestPredicate = Callable[[Package, dict[str, Address]], bool]


def _check_sources_nonempty(package: Package, _: dict[str, Address]) -> bool:
    return all(text.strip() for text in package.sources.values())


def _check_hashes_match(package: Package, _: dict[str, Address]) -> bool:
    from .packages import source_hash

    return all(
        source_hash(package.sources[c.name]) == c.source_hash
        for c in package.manifest.contracts
    )


def _check_controller_references_all(package: Package, _: dict[str, Address]) -> bool:
    referenced = {
        a.index
        for a in package.manifest.controller.constructor_args
        if isinstance(a, ContractRef)
    }
    return referenced == set(range(len(package.manifest.contracts) - 1))


STANDARD_TESTS: dict[str, TestPredicate] = {
    "sources-nonempty": _check_sources_nonempty,
    "hashes-match": _check_hashes_match,
    "controller-references-all": _check_controller_references_all,
}


@dataclass(frozen=True)
class StakeholderConfig:
    """Local configuration; private tests never leave this object."""

    account: Address
    private_tests: dict[str, TestPredicate] = field(default_factory=dict)
    poll_interval: int = 6  # blocks
    mainnet_rigor: bool = False  # case-specific; no behavioural difference


@dataclass
class VerificationReport:
    proposal_id: str
    integrity: bool
    standard_results: dict[str, bool]
    private_results: dict[str, bool]
    decision: Support
    produced_at: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "proposal_id": self.proposal_id,
                "integrity": self.integrity,
                "standard_results": self.standard_results,
                "private_results": self.private_results,
                "decision": self.decision.value,
                "produced_at": self.produced_at,
            },
            indent=2,
            sort_keys=True,
        )


def verify_proposal(
    config: StakeholderConfig,
    proposal: Any,
    store: Any,
    registry_address: Address,
    height: int = 0,
    reports_dir: Optional[Union[str, Path]] = None,
) -> VerificationReport:
    """Run the three checks (integrity, standard, private) on an upgrade
    proposal and decide the vote: For only if everything passes."""
    standard: dict[str, bool] = {}
    private: dict[str, bool] = {}
    integrity = False
    try:
        package = store.fetch(Hash256(proposal.package_cid))
    except UnknownCidError:
        package = None
    if package is not None:
        rebuilt = _rebuild(package)
        controller, addresses = derive_version_address(rebuilt.manifest, registry_address)
        integrity = (
            controller == proposal.expected_address
            and package.version_id == proposal.version_id
        )
        for name in package.test_suite:
            predicate = STANDARD_TESTS.get(name)
            standard[name] = bool(predicate and predicate(package, addresses))
        for name, predicate in config.private_tests.items():
            private[name] = bool(predicate(package, addresses))
    decision = (
        Support.FOR
        if integrity and all(standard.values()) and all(private.values())
        else Support.AGAINST
    )
    report = VerificationReport(
        proposal_id=proposal.id_hex(),
        integrity=integrity,
        standard_results=standard,
        private_results=private,
        decision=decision,
        produced_at=height,
    )
    if reports_dir is not None:
        persist_report(report, config.account, reports_dir)
    return report


def _rebuild(package: Package) -> Package:
    """Rebuild the manifest from the received sources rather than
    trusting the packaged hashes."""
    args: dict[str, tuple] = {
        c.name: c.constructor_args for c in package.manifest.contracts
    }
    return build_package(
        dict(package.sources),
        package.version_id,
        BuildConfig(
            controller=package.manifest.controller.name,
            constructor_args=args,
            contract_order=tuple(c.name for c in package.manifest.contracts),
            test_suite=package.test_suite,
            commit_ref=package.commit_ref,
        ),
    )


def persist_report(
    report: VerificationReport, account: Address, reports_dir: Union[str, Path]
) -> Path:
    directory = Path(reports_dir) / report.proposal_id
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{account.hex_str()}.json"
    path.write_text(report.to_json() + "\n", encoding="utf-8")
    return path


class StakeholderNode:
    """Polling actor: discovers upgrade proposals, verifies them, and
    casts the decided vote a configured delay after proposal creation."""

    def __init__(
        self,
        config: StakeholderConfig,
        ledger: Ledger,
        governance: Governance,
        store: Any,
        registry_address: Address,
        vote_at: int = 0,  # blocks after proposal creation
        reports_dir: Optional[Union[str, Path]] = None,
    ):
        self.config = config
        self.ledger = ledger
        self.governance = governance
        self.store = store
        self.registry_address = registry_address
        self.vote_at = vote_at
        self.reports_dir = reports_dir
        self.journal: list[dict[str, Any]] = []
        self._seen: set[bytes] = set()
        self._scheduled: list[tuple[int, Any, Support]] = []

    def tick(self) -> list[TxReceipt]:
        """One poll step: verify newly discovered proposals, cast due votes."""
        height = self.ledger.clock.height
        for prop in self.governance.proposals():
            if prop.kind is not ProposalKind.UPGRADE or prop.id in self._seen:
                continue
            self._seen.add(prop.id)
            report = verify_proposal(
                self.config,
                prop,
                self.store,
                self.registry_address,
                height=height,
                reports_dir=self.reports_dir,
            )
            self.journal.append({"action": "verified", "report": report})
            self._scheduled.append((prop.creation_block + self.vote_at, prop, report.decision))
        receipts = []
        still_pending = []
        for due, prop, decision in self._scheduled:
            if height >= due:
                receipt = self.ledger.submit_tx(
                    self.config.account,
                    Call(
                        "governance",
                        "cast_vote",
                        {"proposal_id": prop.id, "support": decision},
                    ),
                )
                self.journal.append({"action": "voted", "receipt": receipt})
                receipts.append(receipt)
            else:
                still_pending.append((due, prop, decision))
        self._scheduled = still_pending
        return receipts

    def run_until(self, target_height: int) -> list[TxReceipt]:
        """Advance the shared clock in poll-interval steps up to
        ``target_height``, polling at each step."""
        receipts = list(self.tick())
        while self.ledger.clock.height < target_height:
            step = min(self.config.poll_interval, target_height - self.ledger.clock.height)
            self.ledger.advance_blocks(step)
            receipts.extend(self.tick())
        return receipts
