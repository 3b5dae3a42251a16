"""Scenario runner and gas reporter.

Bootstraps a fresh engine (ledger + governance + registry + store) per
scenario, drives it with exact simulated timing, and checks the outcome:
conforming runs must replay at fitness 1.0, violation runs must produce
the mapped revert code while their committed log still replays cleanly.

Benchmark configuration: three stakeholders with equal weight, voting
delay 1 block, voting period 2 160 blocks, quorum 2, timelock 7 200 s,
10 s per block. Vote arrivals: 1 h into the window for the first scenario,
2 h for the second, 3 h for the third, with follow-up votes 1 h apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from .conformance import (
    DfgEdge,
    EventLog,
    FitnessResult,
    Trace,
    TraceEvent,
    mine_dfg,
    reference_net,
    replay_trace,
)
from .governance import Governance, GovernanceParams, ProposalKind, Support
from .ledger import (
    Address,
    Call,
    ErrorCode,
    GasSchedule,
    Ledger,
    LedgerEvent,
    TxReceipt,
    assign_case_ids,
)
from .packages import BuildConfig, MemoryStore, Package, build_package
from .registry import Registry, derive_version_address

HOUR_BLOCKS = 360  # 1 h at 10 s/block

BENCHMARK_PARAMS = GovernanceParams(
    voting_delay=1, voting_period=2_160, timelock_delay=7_200, quorum=2
)


class Engine:
    """All modules wired together on one ledger, with named accounts."""

    def __init__(
        self,
        params: GovernanceParams = BENCHMARK_PARAMS,
        gas: GasSchedule = GasSchedule(),
        stakeholder_count: int = 3,
        reports_dir: Optional[str] = None,
    ):
        self.ledger = Ledger(gas)
        self.deployer = Address.from_label("deployer")
        self.proposer = Address.from_label("package-proposer")
        self.propagator = Address.from_label("propagator")
        self.stakeholders = [
            Address.from_label(f"stakeholder-{i}") for i in range(stakeholder_count)
        ]
        self.registry_address = Address.from_label("registry")
        self.governance = Governance(self.deployer, params)
        self.registry = Registry(self.registry_address)
        self.ledger.attach("governance", self.governance)
        self.ledger.attach("registry", self.registry)
        self.store = MemoryStore()
        self.reports_dir = reports_dir
        for account in [self.deployer, self.proposer, self.propagator, *self.stakeholders]:
            self.ledger.register_account(account)
        self.grant_receipts: list[TxReceipt] = []
        from .governance import Role

        for stakeholder in self.stakeholders:
            self.grant_receipts.append(self._grant(stakeholder, Role.STAKEHOLDER))
        self.grant_receipts.append(self._grant(self.proposer, Role.PACKAGE_PROPOSER))
        self.grant_receipts.append(self._grant(self.propagator, Role.PROPAGATOR))

    def _grant(self, account: Address, role: Any) -> TxReceipt:
        return self.ledger.submit_tx(
            self.deployer,
            Call("governance", "grant_role", {"account": account, "role": role}),
        )

    # -- convenience actions -------------------------------------------------

    def default_package(self, version_id: int = 1) -> Package:
        sources = {
            "hub": "contract Hub { mapping(address => bytes32) public posts; }\n",
            "controller": (
                "contract Controller { address public hub;"
                " constructor(address h) { hub = h; } }\n"
            ),
        }
        config = BuildConfig(
            controller="controller",
            test_suite=("sources-nonempty", "hashes-match", "controller-references-all"),
            commit_ref=f"v{version_id}",
        )
        return build_package(sources, version_id, config)

    def propose_upgrade(self, package: Package) -> tuple[TxReceipt, bytes]:
        cid = self.store.store(package)
        expected, _ = derive_version_address(package.manifest, self.registry_address)
        receipt = self.ledger.submit_tx(
            self.proposer,
            Call(
                "governance",
                "propose",
                {
                    "kind": ProposalKind.UPGRADE,
                    "payload": {"commit_ref": package.commit_ref},
                    "version_id": package.version_id,
                    "expected_address": expected,
                    "package_cid": cid.value,
                },
            ),
        )
        pid = next(
            bytes.fromhex(e.payload["proposal_id"].removeprefix("0x"))
            for e in receipt.events
            if e.name == "ProposalCreated"
        ) if receipt.committed else b""
        return receipt, pid

    def vote(self, voter: Address, pid: bytes, support: Support) -> TxReceipt:
        return self.ledger.submit_tx(
            voter, Call("governance", "cast_vote", {"proposal_id": pid, "support": support})
        )

    def queue(self, pid: bytes) -> TxReceipt:
        return self.ledger.submit_tx(
            self.propagator, Call("governance", "queue", {"proposal_id": pid})
        )

    def execute(self, pid: bytes, entry_codes: Optional[list[bytes]] = None) -> TxReceipt:
        return self.ledger.submit_tx(
            self.propagator,
            Call(
                "governance",
                "execute",
                {"proposal_id": pid, "entry_codes": entry_codes},
            ),
        )

    def proposal_trace(self, pid_hex: str) -> Trace:
        events = [
            TraceEvent(ev.name, ev.timestamp)
            for case, ev in assign_case_ids(self.ledger.events)
            if case == pid_hex
        ]
        return Trace(pid_hex, tuple(events))


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    description: str
    params: GovernanceParams = BENCHMARK_PARAMS
    stakeholder_count: int = 3
    # (stakeholder index, support, blocks after proposal creation)
    votes: tuple[tuple[int, Support, int], ...] = ()
    expected_revert: Optional[ErrorCode] = None

    @property
    def conforming(self) -> bool:
        return self.expected_revert is None


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    trace: Trace
    events: list[LedgerEvent]
    receipts: list[TxReceipt]
    fitness: FitnessResult
    dfg: list[DfgEdge]
    gas_steps: dict[str, TxReceipt]
    passed: bool
    details: str
    engine: Engine


_C1_VOTES = ((0, Support.FOR, 1 * HOUR_BLOCKS), (1, Support.FOR, 2 * HOUR_BLOCKS))
_C2_VOTES = ((0, Support.AGAINST, 2 * HOUR_BLOCKS), (1, Support.AGAINST, 3 * HOUR_BLOCKS))
_C3_VOTES = ((0, Support.FOR, 3 * HOUR_BLOCKS),)


def builtin_scenarios() -> dict[str, ScenarioSpec]:
    mk = ScenarioSpec
    return {
        "C1": mk("C1", "valid upgrade, quorum reached, deployed", votes=_C1_VOTES),
        "C2": mk("C2", "valid upgrade, rejected by against majority", votes=_C2_VOTES),
        "C3": mk("C3", "valid upgrade, quorum never reached", votes=_C3_VOTES),
        "N1": mk("N1", "execution attempted without queuing",
                 votes=_C1_VOTES, expected_revert=ErrorCode.NOT_QUEUED),
        "N2": mk("N2", "execution attempted before the timelock elapsed",
                 votes=_C1_VOTES, expected_revert=ErrorCode.TIMELOCK_NOT_ELAPSED),
        "N3": mk("N3", "vote attempted after the voting period",
                 votes=_C1_VOTES, expected_revert=ErrorCode.VOTING_CLOSED),
        "N4": mk("N4", "vote attempted before the voting delay",
                 votes=_C1_VOTES, expected_revert=ErrorCode.VOTING_NOT_STARTED),
        "N5": mk("N5", "second vote by the same voter",
                 votes=_C1_VOTES, expected_revert=ErrorCode.ALREADY_VOTED),
        "N6": mk("N6", "queue attempted while voting is still open",
                 votes=_C1_VOTES, expected_revert=ErrorCode.QUORUM_NOT_REACHED),
        "N7": mk("N7", "deployment attempted with tampered init code",
                 votes=_C1_VOTES, expected_revert=ErrorCode.ADDRESS_MISMATCH),
    }


def run_scenario(spec_or_id: Any) -> ScenarioResult:
    spec = (
        builtin_scenarios()[spec_or_id] if isinstance(spec_or_id, str) else spec_or_id
    )
    engine = Engine(params=spec.params, stakeholder_count=spec.stakeholder_count)
    package = engine.default_package(1)
    codes = package.entry_codes()
    receipts: list[TxReceipt] = []
    gas_steps: dict[str, TxReceipt] = {"grant_role": engine.grant_receipts[0]}

    def record(step: Optional[str], receipt: TxReceipt) -> TxReceipt:
        receipts.append(receipt)
        if step is not None:
            gas_steps[step] = receipt
        return receipt

    propose_receipt, pid = engine.propose_upgrade(package)
    record("propose", propose_receipt)
    h0 = engine.ledger.clock.height
    delay, period = spec.params.voting_delay, spec.params.voting_period
    deadline_offset = delay + period
    timelock_blocks = spec.params.timelock_delay // engine.ledger.clock.seconds_per_block

    def advance_to(offset: int) -> None:
        target = h0 + offset
        if target > engine.ledger.clock.height:
            engine.ledger.advance_blocks(target - engine.ledger.clock.height)

    if spec.id == "N4":
        record(None, engine.vote(engine.stakeholders[0], pid, Support.FOR))

    vote_step = "first_vote"
    for idx, support, offset in spec.votes:
        if spec.id == "N5" and vote_step == "subsequent_vote" and idx == 1:
            # Sneak in the duplicate before the second legitimate vote.
            advance_to(spec.votes[0][2] + 20)
            record(None, engine.vote(engine.stakeholders[0], pid, Support.FOR))
        if spec.id == "N6" and vote_step == "subsequent_vote" and idx == 1:
            advance_to(spec.votes[0][2] + 40)
            record(None, engine.queue(pid))
        advance_to(offset)
        record(vote_step, engine.vote(engine.stakeholders[idx], pid, support))
        vote_step = "subsequent_vote"

    deployed = False
    if spec.id in ("C2", "C3"):
        advance_to(deadline_offset + 1)
    else:
        if spec.id == "N3":
            advance_to(deadline_offset + 1)
            record(None, engine.vote(engine.stakeholders[2], pid, Support.FOR))
        if spec.id == "N1":
            advance_to(deadline_offset + 1)
            record(None, engine.execute(pid, codes))
        advance_to(deadline_offset + 1)
        record("queue", engine.queue(pid))
        queue_height = engine.ledger.clock.height
        if spec.id == "N2":
            advance_to(queue_height - h0 + timelock_blocks - 1)
            record(None, engine.execute(pid, codes))
        advance_to(queue_height - h0 + timelock_blocks)
        if spec.id == "N7":
            tampered = [codes[0][:-1] + bytes([codes[0][-1] ^ 0x01])] + codes[1:]
            record(None, engine.execute(pid, tampered))
        record("execute", engine.execute(pid, codes))
        deployed = True

    trace = engine.proposal_trace("0x" + pid.hex())
    fitness = replay_trace(trace, reference_net())
    dfg = mine_dfg(EventLog((trace,)))
    passed, details = _verdict(spec, engine, receipts, fitness, deployed)
    return ScenarioResult(
        spec=spec,
        trace=trace,
        events=list(engine.ledger.events),
        receipts=receipts,
        fitness=fitness,
        dfg=dfg,
        gas_steps=gas_steps,
        passed=passed,
        details=details,
        engine=engine,
    )


def _verdict(
    spec: ScenarioSpec,
    engine: Engine,
    receipts: list[TxReceipt],
    fitness: FitnessResult,
    deployed: bool,
) -> tuple[bool, str]:
    problems = []
    if fitness.fitness != 1.0:
        problems.append(f"committed log replays at {fitness.fitness:.4f}, not 1.0")
    if spec.conforming:
        if spec.id == "C1" and not deployed:
            problems.append("version was not deployed")
        if any(not r.committed for r in receipts):
            problems.append("conforming scenario produced a reverted receipt")
    else:
        reverted = [r for r in receipts if not r.committed]
        if not reverted:
            problems.append("no reverted receipt")
        elif not any(r.error is spec.expected_revert for r in reverted):
            codes = {r.error.value for r in reverted if r.error}
            problems.append(
                f"expected revert {spec.expected_revert.value}, saw {sorted(codes)}"
            )
    return (not problems, "; ".join(problems) or "ok")


def run_all(ids: Optional[list[str]] = None) -> dict[str, ScenarioResult]:
    specs = builtin_scenarios()
    return {sid: run_scenario(specs[sid]) for sid in (ids or list(specs))}


def conforming_log(results: dict[str, ScenarioResult]) -> EventLog:
    """Combined log of the conforming scenarios, for the performance DFG."""
    return EventLog(
        tuple(results[sid].trace for sid in ("C1", "C2", "C3") if sid in results)
    )


GAS_STEP_ORDER = ("grant_role", "propose", "first_vote", "subsequent_vote", "queue", "execute")


@dataclass
class GasReport:
    steps: list[tuple[str, int]]

    @property
    def total(self) -> int:
        return sum(gas for _, gas in self.steps)

    def render(self) -> str:
        width = max(len(name) for name, _ in self.steps)
        lines = [f"{name:<{width}}  {gas:>10,}" for name, gas in self.steps]
        lines.append(f"{'total':<{width}}  {self.total:>10,}")
        return "\n".join(lines).replace(",", " ")


def gas_report(result: ScenarioResult) -> GasReport:
    """Per-step gas of a complete successful lifecycle run."""
    steps = [
        (name, result.gas_steps[name].gas.gas_used)
        for name in GAS_STEP_ORDER
        if name in result.gas_steps
    ]
    report = GasReport(steps)
    by_name = dict(steps)
    if "first_vote" in by_name and "subsequent_vote" in by_name:
        assert by_name["first_vote"] > by_name["subsequent_vote"]
    return report
