"""Quorum-governed deterministic deployment engine on a simulated ledger."""

from .governance import (
    Governance,
    GovernanceParams,
    Proposal,
    ProposalKind,
    ProposalState,
    Role,
    Support,
)
from .harness import Engine, GasReport, builtin_scenarios, gas_report, run_all, run_scenario
from .keccak import keccak256
from .ledger import (
    Address,
    Call,
    ErrorCode,
    GasSchedule,
    Hash256,
    Ledger,
    LedgerEvent,
    Revert,
    TxReceipt,
)
from .packages import BuildConfig, FileStore, MemoryStore, Package, build_package
from .registry import (
    ContractRef,
    ContractSpec,
    Registry,
    VersionManifest,
    derive_address,
    derive_version_address,
)

__all__ = [
    "Address",
    "BuildConfig",
    "Call",
    "ContractRef",
    "ContractSpec",
    "Engine",
    "ErrorCode",
    "FileStore",
    "GasReport",
    "GasSchedule",
    "Governance",
    "GovernanceParams",
    "Hash256",
    "Ledger",
    "LedgerEvent",
    "MemoryStore",
    "Package",
    "Proposal",
    "ProposalKind",
    "ProposalState",
    "Registry",
    "Revert",
    "Role",
    "Support",
    "TxReceipt",
    "VersionManifest",
    "build_package",
    "builtin_scenarios",
    "derive_address",
    "derive_version_address",
    "gas_report",
    "keccak256",
    "run_all",
    "run_scenario",
]
