"""Single-node simulated ledger: accounts, atomic calls, block clock, gas.

State machines (governance, registry) attach to a :class:`Ledger` and are
only mutated through :meth:`Ledger.submit_tx`, which gives every call
all-or-nothing semantics: a :class:`Revert` raised anywhere in the call
discards the whole state delta, records no events, but still meters gas.

Time only moves through :meth:`Ledger.advance_blocks`, so every timing
assertion in the test suite is exact.
"""

from __future__ import annotations

import copy
import csv
import io
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Hashable, Optional

from .canon import canonical_json
from .keccak import keccak256


@dataclass(frozen=True)
class Address:
    """20-byte account/contract identifier, rendered as 0x + 40 hex chars."""

    value: bytes

    def __post_init__(self) -> None:
        if len(self.value) != 20:
            raise ValueError(f"address must be 20 bytes, got {len(self.value)}")

    @classmethod
    def from_hex(cls, text: str) -> "Address":
        return cls(bytes.fromhex(text.lower().removeprefix("0x")))

    @classmethod
    def from_label(cls, label: str) -> "Address":
        """Deterministic throwaway address for simulation identities."""
        return cls(keccak256(b"govdeploy/account/" + label.encode())[-20:])

    def hex_str(self) -> str:
        return "0x" + self.value.hex()

    def __str__(self) -> str:
        return self.hex_str()


@dataclass(frozen=True)
class Hash256:
    """32-byte Keccak-256 digest."""

    value: bytes

    def __post_init__(self) -> None:
        if len(self.value) != 32:
            raise ValueError(f"hash must be 32 bytes, got {len(self.value)}")

    @classmethod
    def of(cls, data: bytes) -> "Hash256":
        return cls(keccak256(data))

    @classmethod
    def from_hex(cls, text: str) -> "Hash256":
        return cls(bytes.fromhex(text.lower().removeprefix("0x")))

    def hex_str(self) -> str:
        return "0x" + self.value.hex()

    def __str__(self) -> str:
        return self.hex_str()


class ErrorCode(str, Enum):
    """Closed enumeration of revert reasons."""

    UNAUTHORIZED = "Unauthorized"
    DUPLICATE_PROPOSAL = "DuplicateProposal"
    BAD_VERSION = "BadVersion"
    UNKNOWN_PROPOSAL = "UnknownProposal"
    VOTING_NOT_STARTED = "VotingNotStarted"
    VOTING_CLOSED = "VotingClosed"
    ALREADY_VOTED = "AlreadyVoted"
    QUORUM_NOT_REACHED = "QuorumNotReached"
    NOT_QUEUED = "NotQueued"
    TIMELOCK_NOT_ELAPSED = "TimelockNotElapsed"
    ADDRESS_MISMATCH = "AddressMismatch"
    NO_APPROVED_PROPOSAL = "NoApprovedProposal"
    VERSION_EXISTS = "VersionExists"
    NO_VERSION_DEPLOYED = "NoVersionDeployed"
    UNKNOWN_NAME = "UnknownName"
    LAST_STAKEHOLDER = "LastStakeholder"
    MALFORMED_MANIFEST = "MalformedManifest"
    UNKNOWN_CID = "UnknownCid"


class Revert(Exception):
    """Raised inside a transaction to abort it with an error code."""

    def __init__(self, code: ErrorCode, detail: str = ""):
        super().__init__(f"{code.value}: {detail}" if detail else code.value)
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class GasSchedule:
    """EVM-inspired cost constants; only their ordering is load-bearing."""

    base_tx_cost: int = 21_000
    cold_write_cost: int = 22_100
    warm_write_cost: int = 5_000
    event_base_cost: int = 375
    event_byte_cost: int = 8


@dataclass
class GasReceipt:
    gas_used: int = 0
    cold_slot_touches: int = 0
    warm_slot_touches: int = 0


@dataclass(frozen=True)
class LedgerEvent:
    name: str
    tx_id: int
    index: int
    block: int
    timestamp: int
    payload: dict[str, Any]


class TxStatus(str, Enum):
    COMMITTED = "Committed"
    REVERTED = "Reverted"


@dataclass(frozen=True)
class TxReceipt:
    tx_id: int
    status: TxStatus
    error: Optional[ErrorCode]
    gas: GasReceipt
    events: tuple[LedgerEvent, ...]

    @property
    def committed(self) -> bool:
        return self.status is TxStatus.COMMITTED


@dataclass
class BlockClock:
    height: int = 0
    seconds_per_block: int = 10

    @property
    def timestamp(self) -> int:
        return self.height * self.seconds_per_block

    def advance(self, blocks: int) -> int:
        if blocks < 0:
            raise ValueError("cannot rewind the block clock")
        self.height += blocks
        return self.height


@dataclass(frozen=True)
class Call:
    """Encoded state-machine call: target module, method, keyword args."""

    target: str
    method: str
    args: dict[str, Any] = field(default_factory=dict)


class TxContext:
    """Execution context handed to state-machine methods during a tx."""

    def __init__(self, ledger: "Ledger", sender: Address, tx_id: int):
        self.ledger = ledger
        self.sender = sender
        self.tx_id = tx_id
        self.gas = GasReceipt(gas_used=ledger.gas_schedule.base_tx_cost)
        self.pending_events: list[LedgerEvent] = []
        self._tx_touched: set[Hashable] = set()

    @property
    def block(self) -> int:
        return self.ledger.clock.height

    @property
    def timestamp(self) -> int:
        return self.ledger.clock.timestamp

    def module(self, name: str) -> Any:
        return self.ledger.modules[name]

    def revert(self, code: ErrorCode, detail: str = "") -> None:
        raise Revert(code, detail)

    def write_slot(self, slot: Hashable) -> int:
        """Meter a storage write; first touch in the ledger's life is cold."""
        schedule = self.ledger.gas_schedule
        if slot in self.ledger.touched_slots or slot in self._tx_touched:
            self.gas.warm_slot_touches += 1
            charge = schedule.warm_write_cost
        else:
            self.gas.cold_slot_touches += 1
            charge = schedule.cold_write_cost
        self._tx_touched.add(slot)
        self.gas.gas_used += charge
        return charge

    def emit(self, name: str, **payload: Any) -> None:
        schedule = self.ledger.gas_schedule
        body = canonical_json(payload)
        self.gas.gas_used += schedule.event_base_cost + schedule.event_byte_cost * len(body)
        self.pending_events.append(
            LedgerEvent(
                name=name,
                tx_id=self.tx_id,
                index=len(self.pending_events),
                block=self.block,
                timestamp=self.timestamp,
                payload=dict(payload),
            )
        )


class Ledger:
    """The simulation substrate. Single-writer; queries are side-effect free."""

    def __init__(self, gas_schedule: GasSchedule = GasSchedule(), seconds_per_block: int = 10):
        if seconds_per_block <= 0:
            raise ValueError("seconds_per_block must be positive")
        self.gas_schedule = gas_schedule
        self.clock = BlockClock(seconds_per_block=seconds_per_block)
        self.accounts: set[Address] = set()
        self.modules: dict[str, Any] = {}
        self.events: list[LedgerEvent] = []
        self.receipts: list[TxReceipt] = []
        self.touched_slots: set[Hashable] = set()
        self._next_tx_id = 0

    def register_account(self, address: Address) -> None:
        self.accounts.add(address)

    def attach(self, name: str, module: Any) -> None:
        """Attach a state machine; it must expose a deep-copyable ``state``."""
        self.modules[name] = module

    def advance_blocks(self, blocks: int) -> int:
        return self.clock.advance(blocks)

    @property
    def timestamp(self) -> int:
        return self.clock.timestamp

    def submit_tx(self, sender: Address, call: Optional[Call]) -> TxReceipt:
        if sender not in self.accounts:
            raise KeyError(f"unknown account {sender}")
        tx_id = self._next_tx_id
        self._next_tx_id += 1
        ctx = TxContext(self, sender, tx_id)
        if call is None:
            receipt = TxReceipt(tx_id, TxStatus.COMMITTED, None, ctx.gas, ())
            self.receipts.append(receipt)
            return receipt

        snapshots = {name: copy.deepcopy(mod.state) for name, mod in self.modules.items()}
        try:
            module = self.modules[call.target]
            getattr(module, call.method)(ctx, **call.args)
        except Revert as exc:
            for name, snap in snapshots.items():
                self.modules[name].state = snap
            receipt = TxReceipt(tx_id, TxStatus.REVERTED, exc.code, ctx.gas, ())
            self.receipts.append(receipt)
            return receipt
        self.touched_slots |= ctx._tx_touched
        self.events.extend(ctx.pending_events)
        receipt = TxReceipt(tx_id, TxStatus.COMMITTED, None, ctx.gas, tuple(ctx.pending_events))
        self.receipts.append(receipt)
        return receipt

    def state_root(self) -> Hash256:
        """Keccak-256 over the canonical serialization of all attached state."""
        doc = {name: mod.state for name, mod in sorted(self.modules.items())}
        return Hash256.of(canonical_json(doc))


def event_timestamp_iso(event: LedgerEvent) -> str:
    return (
        datetime.fromtimestamp(event.timestamp, tz=timezone.utc)
        .isoformat()
        .replace("+00:00", "Z")
    )


def assign_case_ids(events: list[LedgerEvent]) -> list[tuple[str, LedgerEvent]]:
    """Pair each event with its case id (the proposal it belongs to).

    Events without a proposal_id inherit the case of a co-emitted event in
    the same transaction (package/upgrade events share a tx with their
    proposal event); bootstrap events with no such neighbour get "".
    """
    tx_case: dict[int, str] = {}
    for ev in events:
        pid = ev.payload.get("proposal_id")
        if pid is not None:
            tx_case.setdefault(ev.tx_id, str(pid))
    return [(tx_case.get(ev.tx_id, ""), ev) for ev in events]


def export_events_csv(events: list[LedgerEvent]) -> str:
    """Render committed events as case_id,activity,timestamp,tx_id,payload_json."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["case_id", "activity", "timestamp", "tx_id", "payload_json"])
    for case_id, ev in assign_case_ids(events):
        writer.writerow(
            [
                case_id,
                ev.name,
                event_timestamp_iso(ev),
                ev.tx_id,
                canonical_json(ev.payload).decode(),
            ]
        )
    return out.getvalue()
