"""Proposal lifecycle state machine: roles, voting windows, quorum, timelock.

Lifecycle: Pending -> Active -> {Succeeded, Defeated}; Succeeded -> Queued
-> Executed. A proposal succeeds iff for-votes reach the quorum AND strictly
exceed against-votes; abstention is simply not voting. Parameters are frozen
into each proposal at creation, so a ParameterChange never rewrites the
rules of an in-flight vote.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Optional

from .canon import canonical_json
from .keccak import keccak256
from .ledger import Address, ErrorCode, TxContext


class Role(str, Enum):
    STAKEHOLDER = "Stakeholder"
    PACKAGE_PROPOSER = "PackageProposer"
    PROPAGATOR = "Propagator"
    VOTER = "Voter"


class ProposalKind(str, Enum):
    UPGRADE = "Upgrade"
    STAKEHOLDER_CHANGE = "StakeholderChange"
    ROLE_ASSIGNMENT = "RoleAssignment"
    PARAMETER_CHANGE = "ParameterChange"


class ProposalState(str, Enum):
    PENDING = "Pending"
    ACTIVE = "Active"
    SUCCEEDED = "Succeeded"
    DEFEATED = "Defeated"
    QUEUED = "Queued"
    EXECUTED = "Executed"


class Support(str, Enum):
    FOR = "For"
    AGAINST = "Against"


@dataclass(frozen=True)
class GovernanceParams:
    voting_delay: int = 1          # blocks before voting opens
    voting_period: int = 2_160     # blocks the vote stays open
    timelock_delay: int = 7_200    # seconds between queue and execute
    quorum: int = 2                # approvals required

    def __post_init__(self) -> None:
        if self.voting_period <= 0:
            raise ValueError("voting_period must be positive")
        if self.voting_delay < 0:
            raise ValueError("voting_delay must be non-negative")
        if self.timelock_delay < 0:
            raise ValueError("timelock_delay must be non-negative")
        if self.quorum < 1:
            raise ValueError("quorum must be at least 1")


@dataclass
class Proposal:
    id: bytes
    kind: ProposalKind
    payload: dict[str, Any]
    proposer: Address
    params: GovernanceParams
    creation_block: int
    snapshot_block: int
    deadline_block: int
    version_id: Optional[int] = None
    expected_address: Optional[Address] = None
    package_cid: Optional[bytes] = None
    for_votes: int = 0
    against_votes: int = 0
    voters: set[Address] = field(default_factory=set)
    eta: Optional[int] = None
    queued: bool = False
    executed: bool = False

    def id_hex(self) -> str:
        return "0x" + self.id.hex()


class UnknownProposalError(KeyError):
    pass


def proposal_id(kind: ProposalKind, payload: dict[str, Any], version_id: Optional[int]) -> bytes:
    """Deterministic id so duplicate proposals are detectable."""
    return keccak256(
        canonical_json({"kind": kind, "payload": payload, "version_id": version_id})
    )


class Governance:
    """Governance + timelock, run as a ledger module.

    Role grants are open to the deployer while bootstrap is open; after
    :meth:`close_bootstrap` they only happen through an executed
    RoleAssignment / StakeholderChange proposal.
    """

    def __init__(self, deployer: Address, params: GovernanceParams = GovernanceParams()):
        self.deployer = deployer
        self.state: dict[str, Any] = {
            "params": params,
            "roles": {role: set() for role in Role},
            "proposals": {},  # id bytes -> Proposal
            "bootstrap_open": True,
        }

    # -- queries -------------------------------------------------------------

    @property
    def params(self) -> GovernanceParams:
        return self.state["params"]

    def has_role(self, account: Address, role: Role) -> bool:
        return account in self.state["roles"][role]

    def members(self, role: Role) -> set[Address]:
        return set(self.state["roles"][role])

    def eligible_voters(self) -> set[Address]:
        return self.members(Role.VOTER) | self.members(Role.STAKEHOLDER)

    def proposal(self, pid: bytes) -> Proposal:
        try:
            return self.state["proposals"][pid]
        except KeyError:
            raise UnknownProposalError(pid.hex()) from None

    def proposals(self) -> list[Proposal]:
        return list(self.state["proposals"].values())

    def proposal_state(self, pid: bytes, height: int) -> ProposalState:
        prop = self.proposal(pid)
        if prop.executed:
            return ProposalState.EXECUTED
        if prop.queued:
            return ProposalState.QUEUED
        if height < prop.snapshot_block:
            return ProposalState.PENDING
        if height <= prop.deadline_block and not self._all_voted(prop):
            return ProposalState.ACTIVE
        return self._outcome(prop)

    def _all_voted(self, prop: Proposal) -> bool:
        eligible = self.eligible_voters()
        return bool(eligible) and eligible <= prop.voters

    @staticmethod
    def _outcome(prop: Proposal) -> ProposalState:
        quorum = prop.params.quorum
        if prop.for_votes >= quorum and prop.for_votes > prop.against_votes:
            return ProposalState.SUCCEEDED
        return ProposalState.DEFEATED

    def approved_upgrade(
        self, ctx: TxContext, version_id: int, pid: Optional[bytes]
    ) -> Proposal:
        """Registry-side check that a queued, timelock-elapsed upgrade
        proposal exists for this version; reverts NoApprovedProposal."""
        candidates = [
            p
            for p in self.state["proposals"].values()
            if p.kind is ProposalKind.UPGRADE
            and p.version_id == version_id
            and (pid is None or p.id == pid)
        ]
        for prop in candidates:
            if prop.queued and not prop.executed and prop.eta is not None and ctx.timestamp >= prop.eta:
                return prop
        ctx.revert(
            ErrorCode.NO_APPROVED_PROPOSAL,
            f"no queued, timelock-elapsed upgrade proposal for version {version_id}",
        )
        raise AssertionError("unreachable")

    # -- transactions --------------------------------------------------------

    def propose(
        self,
        ctx: TxContext,
        kind: ProposalKind,
        payload: dict[str, Any],
        version_id: Optional[int] = None,
        expected_address: Optional[Address] = None,
        package_cid: Optional[bytes] = None,
    ) -> None:
        sender = ctx.sender
        if not (self.has_role(sender, Role.PACKAGE_PROPOSER) or self.has_role(sender, Role.STAKEHOLDER)):
            ctx.revert(ErrorCode.UNAUTHORIZED, "proposing requires PackageProposer or Stakeholder")
        if kind is ProposalKind.UPGRADE:
            if version_id is None or expected_address is None or package_cid is None:
                ctx.revert(ErrorCode.BAD_VERSION, "upgrade proposal is missing version binding")
            next_version = ctx.module("registry").next_version()
            if version_id != next_version:
                ctx.revert(
                    ErrorCode.BAD_VERSION,
                    f"version {version_id} is not the registry's next version {next_version}",
                )
        pid = proposal_id(kind, payload, version_id)
        existing = self.state["proposals"].get(pid)
        if existing is not None:
            # A defeated proposal may be re-proposed (e.g. after a corrected
            # rebuild of off-chain infrastructure); anything else is a duplicate.
            if self.proposal_state(pid, ctx.block) is not ProposalState.DEFEATED:
                ctx.revert(ErrorCode.DUPLICATE_PROPOSAL, pid.hex())
        params = self.params
        prop = Proposal(
            id=pid,
            kind=kind,
            payload=dict(payload),
            proposer=sender,
            params=params,
            creation_block=ctx.block,
            snapshot_block=ctx.block + params.voting_delay,
            deadline_block=ctx.block + params.voting_delay + params.voting_period,
            version_id=version_id,
            expected_address=expected_address,
            package_cid=package_cid,
        )
        for slot_field in ("core", "proposer", "schedule", "package"):
            ctx.write_slot(("gov", "proposal", pid, slot_field))
        self.state["proposals"][pid] = prop
        ctx.emit(
            "ProposalCreated",
            proposal_id=prop.id_hex(),
            kind=kind.value,
            proposer=sender.hex_str(),
        )
        if kind is ProposalKind.UPGRADE:
            ctx.emit(
                "ProposalPackageCreated",
                version_id=version_id,
                expected_address=expected_address.hex_str(),
                package_cid="0x" + package_cid.hex(),
            )

    def cast_vote(self, ctx: TxContext, proposal_id: bytes, support: Support) -> None:
        voter = ctx.sender
        if not (self.has_role(voter, Role.VOTER) or self.has_role(voter, Role.STAKEHOLDER)):
            ctx.revert(ErrorCode.UNAUTHORIZED, "voting requires Voter or Stakeholder")
        prop = self._proposal_or_revert(ctx, proposal_id)
        state = self.proposal_state(proposal_id, ctx.block)
        if state is ProposalState.PENDING:
            ctx.revert(ErrorCode.VOTING_NOT_STARTED, "voting delay has not elapsed")
        if voter in prop.voters:
            ctx.revert(ErrorCode.ALREADY_VOTED, voter.hex_str())
        if state is not ProposalState.ACTIVE:
            ctx.revert(ErrorCode.VOTING_CLOSED, f"proposal is {state.value}")
        ctx.write_slot(("gov", "proposal", proposal_id, "tally"))
        ctx.write_slot(("gov", "proposal", proposal_id, "receipt", voter))
        if support is Support.FOR:
            prop.for_votes += 1
        else:
            prop.against_votes += 1
        prop.voters.add(voter)
        ctx.emit(
            "VoteCast",
            proposal_id=prop.id_hex(),
            voter=voter.hex_str(),
            support=support.value,
        )

    def queue(self, ctx: TxContext, proposal_id: bytes) -> None:
        if not self.has_role(ctx.sender, Role.PROPAGATOR):
            ctx.revert(ErrorCode.UNAUTHORIZED, "queueing requires Propagator")
        prop = self._proposal_or_revert(ctx, proposal_id)
        state = self.proposal_state(proposal_id, ctx.block)
        if state is not ProposalState.SUCCEEDED:
            ctx.revert(ErrorCode.QUORUM_NOT_REACHED, f"proposal is {state.value}")
        prop.eta = ctx.timestamp + prop.params.timelock_delay
        prop.queued = True
        # Queuing stores the full timelock operation, making it the most
        # storage-heavy (and thus costliest) governance step.
        for slot_field in ("op_hash", "op_target", "op_payload", "op_eta", "queued_flag"):
            ctx.write_slot(("gov", "timelock", proposal_id, slot_field))
        ctx.emit("ProposalQueued", proposal_id=prop.id_hex(), eta=prop.eta)

    def execute(
        self, ctx: TxContext, proposal_id: bytes, entry_codes: Optional[list[bytes]] = None
    ) -> None:
        if not self.has_role(ctx.sender, Role.PROPAGATOR):
            ctx.revert(ErrorCode.UNAUTHORIZED, "executing requires Propagator")
        prop = self._proposal_or_revert(ctx, proposal_id)
        if not prop.queued or prop.executed:
            ctx.revert(ErrorCode.NOT_QUEUED, "proposal was not queued in the timelock")
        if ctx.timestamp < prop.eta:
            ctx.revert(
                ErrorCode.TIMELOCK_NOT_ELAPSED,
                f"eta {prop.eta}, now {ctx.timestamp}",
            )
        self._apply_effect(ctx, prop, entry_codes)
        prop.executed = True
        ctx.write_slot(("gov", "proposal", proposal_id, "executed"))
        ctx.emit("ProposalExecuted", proposal_id=prop.id_hex())

    def grant_role(self, ctx: TxContext, account: Address, role: Role) -> None:
        self._require_admin(ctx)
        self._grant(ctx, account, role)

    def revoke_role(self, ctx: TxContext, account: Address, role: Role) -> None:
        self._require_admin(ctx)
        self._revoke(ctx, account, role)

    def close_bootstrap(self, ctx: TxContext) -> None:
        self._require_admin(ctx)
        self.state["bootstrap_open"] = False

    # -- internals -----------------------------------------------------------

    def _proposal_or_revert(self, ctx: TxContext, pid: bytes) -> Proposal:
        try:
            return self.proposal(pid)
        except UnknownProposalError:
            ctx.revert(ErrorCode.UNKNOWN_PROPOSAL, pid.hex())
            raise AssertionError("unreachable")

    def _require_admin(self, ctx: TxContext) -> None:
        if not (self.state["bootstrap_open"] and ctx.sender == self.deployer):
            ctx.revert(
                ErrorCode.UNAUTHORIZED,
                "role changes after bootstrap require an executed proposal",
            )

    def _grant(self, ctx: TxContext, account: Address, role: Role) -> None:
        ctx.write_slot(("gov", "role", role, account))
        self.state["roles"][role].add(account)
        ctx.emit("RoleGranted", account=account.hex_str(), role=role.value)

    def _revoke(self, ctx: TxContext, account: Address, role: Role) -> None:
        if role is Role.STAKEHOLDER and self.members(Role.STAKEHOLDER) <= {account}:
            ctx.revert(ErrorCode.LAST_STAKEHOLDER, "cannot revoke the last stakeholder")
        ctx.write_slot(("gov", "role", role, account))
        self.state["roles"][role].discard(account)
        ctx.emit("RoleRevoked", account=account.hex_str(), role=role.value)

    def _apply_effect(
        self, ctx: TxContext, prop: Proposal, entry_codes: Optional[list[bytes]]
    ) -> None:
        if prop.kind is ProposalKind.UPGRADE:
            ctx.module("registry").deploy_version(
                ctx, prop.version_id, entry_codes or [], proposal_id=prop.id
            )
        elif prop.kind is ProposalKind.ROLE_ASSIGNMENT:
            account = Address.from_hex(prop.payload["account"])
            role = Role(prop.payload["role"])
            if prop.payload["action"] == "grant":
                self._grant(ctx, account, role)
            else:
                self._revoke(ctx, account, role)
        elif prop.kind is ProposalKind.STAKEHOLDER_CHANGE:
            account = Address.from_hex(prop.payload["account"])
            if prop.payload["action"] == "add":
                self._grant(ctx, account, Role.STAKEHOLDER)
            else:
                self._revoke(ctx, account, Role.STAKEHOLDER)
        elif prop.kind is ProposalKind.PARAMETER_CHANGE:
            allowed = {"voting_delay", "voting_period", "timelock_delay", "quorum"}
            changes = {k: v for k, v in prop.payload.items() if k in allowed}
            ctx.write_slot(("gov", "params"))
            self.state["params"] = replace(self.params, **changes)
