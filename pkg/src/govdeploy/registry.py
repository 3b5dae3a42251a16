"""Deterministic registry: address derivation, version records, beacons.

A version's controller address is a cryptographic commitment to every
byte of every contract in the version: contract addresses are derived
CREATE2-style with the registry as deployer and the version id as salt,
and the controller's init code embeds all other contract addresses.
Deployment only commits if the recomputed controller address equals the
address the proposal was voted on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional, Union

from .keccak import keccak256
from .ledger import Address, ErrorCode, Hash256, Revert, TxContext


class MalformedManifestError(ValueError):
    """Manifest or init-code encoding violates the structural rules."""


@dataclass(frozen=True)
class ContractRef:
    """Constructor argument referring to an earlier contract's address."""

    index: int


ArgLiteral = Union[bytes, int, Address]
Arg = Union[ArgLiteral, ContractRef]


@dataclass(frozen=True)
class ContractSpec:
    name: str
    source_hash: Hash256
    constructor_args: tuple[Arg, ...] = ()


@dataclass(frozen=True)
class VersionManifest:
    """Dependency-ordered contracts; the version controller comes last."""

    version_id: int
    contracts: tuple[ContractSpec, ...]

    @property
    def controller(self) -> ContractSpec:
        return self.contracts[-1]

    def validate(self) -> None:
        if self.version_id < 1:
            raise MalformedManifestError("version_id must be >= 1")
        if not self.contracts:
            raise MalformedManifestError("manifest has no contracts")
        names = [c.name for c in self.contracts]
        if len(set(names)) != len(names):
            raise MalformedManifestError("duplicate contract names")
        for pos, contract in enumerate(self.contracts):
            for arg in contract.constructor_args:
                if isinstance(arg, ContractRef) and not 0 <= arg.index < pos:
                    raise MalformedManifestError(
                        f"{contract.name} references contract {arg.index}, "
                        f"which is not an earlier entry"
                    )
        referenced = {
            arg.index
            for arg in self.controller.constructor_args
            if isinstance(arg, ContractRef)
        }
        if referenced != set(range(len(self.contracts) - 1)):
            raise MalformedManifestError("controller must reference every other contract")


# --- canonical byte encoding ------------------------------------------------
#
# Entry   := lp(name_utf8) lp(source_hash) u32(arg_count) Arg*
# Arg     := 'B' lp(bytes) | 'I' uint256_be | 'A' addr20 | 'R' u32(index)
# lp(b)   := u32(len(b)) b
#
# 'R' args only appear in the pre-resolution (proposal/package) form; the
# init code that is actually hashed has them replaced by 'A' args.


def _lp(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


def encode_arg(arg: Arg) -> bytes:
    if isinstance(arg, ContractRef):
        return b"R" + arg.index.to_bytes(4, "big")
    if isinstance(arg, Address):
        return b"A" + arg.value
    if isinstance(arg, bool):
        raise MalformedManifestError("bool is not a supported argument type")
    if isinstance(arg, int):
        if arg < 0 or arg >= 1 << 256:
            raise MalformedManifestError("integer argument out of uint256 range")
        return b"I" + arg.to_bytes(32, "big")
    if isinstance(arg, (bytes, bytearray)):
        return b"B" + _lp(bytes(arg))
    raise MalformedManifestError(f"unsupported argument type {type(arg).__name__}")


def encode_contract(contract: ContractSpec) -> bytes:
    """Canonical (pre-resolution) byte encoding of one contract entry."""
    parts = [
        _lp(contract.name.encode("utf-8")),
        _lp(contract.source_hash.value),
        len(contract.constructor_args).to_bytes(4, "big"),
    ]
    parts.extend(encode_arg(a) for a in contract.constructor_args)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedManifestError("truncated encoding")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def take_lp(self) -> bytes:
        return self.take(int.from_bytes(self.take(4), "big"))


def decode_contract(data: bytes) -> ContractSpec:
    """Inverse of :func:`encode_contract`; rejects trailing bytes."""
    reader = _Reader(data)
    name = reader.take_lp().decode("utf-8", errors="strict")
    source_hash = reader.take_lp()
    if len(source_hash) != 32:
        raise MalformedManifestError("source hash must be 32 bytes")
    arg_count = int.from_bytes(reader.take(4), "big")
    args: list[Arg] = []
    for _ in range(arg_count):
        tag = reader.take(1)
        if tag == b"R":
            args.append(ContractRef(int.from_bytes(reader.take(4), "big")))
        elif tag == b"A":
            args.append(Address(reader.take(20)))
        elif tag == b"I":
            args.append(int.from_bytes(reader.take(32), "big"))
        elif tag == b"B":
            args.append(reader.take_lp())
        else:
            raise MalformedManifestError(f"unknown argument tag {tag!r}")
    if reader.pos != len(data):
        raise MalformedManifestError("trailing bytes after contract entry")
    return ContractSpec(name, Hash256(source_hash), tuple(args))


def derive_address(deployer: Address, salt: bytes, init_code: bytes) -> Address:
    """EIP-1014 formula: last 20 bytes of KEC(0xff || deployer || salt || KEC(init_code))."""
    if len(salt) != 32:
        raise ValueError("salt must be 32 bytes")
    return Address(keccak256(b"\xff" + deployer.value + salt + keccak256(init_code))[-20:])


def version_salt(version_id: int) -> bytes:
    return version_id.to_bytes(32, "big")


def resolve_init_code(contract: ContractSpec, earlier: list[Address]) -> bytes:
    """Replace reference args with the referenced derived addresses."""
    resolved = tuple(
        earlier[a.index] if isinstance(a, ContractRef) else a
        for a in contract.constructor_args
    )
    return encode_contract(ContractSpec(contract.name, contract.source_hash, resolved))


def derive_version_address(
    manifest: VersionManifest, registry_address: Address
) -> tuple[Address, dict[str, Address]]:
    """Fold over the manifest, deriving every address with the registry as
    deployer and the version id as salt; returns the controller address
    and the per-contract address map."""
    manifest.validate()
    salt = version_salt(manifest.version_id)
    addresses: list[Address] = []
    by_name: dict[str, Address] = {}
    for contract in manifest.contracts:
        init_code = resolve_init_code(contract, addresses)
        addr = derive_address(registry_address, salt, init_code)
        addresses.append(addr)
        by_name[contract.name] = addr
    return addresses[-1], by_name


@dataclass
class VersionRecord:
    version_id: int
    controller_address: Address
    contract_addresses: dict[str, Address]
    init_codes: tuple[bytes, ...]  # resolved, re-checkable post hoc
    deployed_block: int


class UnknownNameError(KeyError):
    pass


class NoVersionDeployedError(LookupError):
    pass


class Registry:
    """On-chain half of the deterministic registry, run as a ledger module."""

    def __init__(self, address: Address, governance_module: str = "governance"):
        self.address = address
        self.governance_module = governance_module
        self.state: dict[str, Any] = {
            "versions": {},  # version_id -> VersionRecord
            "beacons": {},   # name -> Address
            "current": None,
        }

    # -- queries -------------------------------------------------------------

    def next_version(self) -> int:
        return max(self.state["versions"], default=0) + 1

    def current_version(self) -> VersionRecord:
        if self.state["current"] is None:
            raise NoVersionDeployedError("no version deployed")
        return self.state["versions"][self.state["current"]]

    def resolve(self, name: str) -> Address:
        try:
            return self.state["beacons"][name]
        except KeyError:
            raise UnknownNameError(name) from None

    def version_history(self) -> list[VersionRecord]:
        return [self.state["versions"][v] for v in sorted(self.state["versions"])]

    # -- transactions --------------------------------------------------------

    def deploy_version(
        self,
        ctx: TxContext,
        version_id: int,
        entry_codes: list[bytes],
        proposal_id: Optional[bytes] = None,
    ) -> None:
        """Verify and record a version from its encoded contract entries.

        Only commits when the recomputed controller address matches the
        approved proposal's expected address; any tampering with the
        entry bytes (including breaking their encoding) surfaces as
        AddressMismatch, since tampered bytes cannot match the commitment.
        """
        governance = ctx.module(self.governance_module)
        proposal = governance.approved_upgrade(ctx, version_id, proposal_id)
        if version_id in self.state["versions"]:
            ctx.revert(ErrorCode.VERSION_EXISTS, f"version {version_id} already deployed")
        try:
            contracts = tuple(decode_contract(code) for code in entry_codes)
            manifest = VersionManifest(version_id=version_id, contracts=contracts)
            controller, by_name = derive_version_address(manifest, self.address)
        except (MalformedManifestError, UnicodeDecodeError) as exc:
            raise Revert(ErrorCode.ADDRESS_MISMATCH, f"undecodable init code: {exc}") from exc
        if controller != proposal.expected_address:
            ctx.revert(
                ErrorCode.ADDRESS_MISMATCH,
                f"derived {controller}, proposal commits to {proposal.expected_address}",
            )
        salt = version_salt(version_id)
        addresses: list[Address] = []
        resolved_codes = []
        for contract in contracts:
            code = resolve_init_code(contract, addresses)
            resolved_codes.append(code)
            addresses.append(derive_address(self.address, salt, code))
        record = VersionRecord(
            version_id=version_id,
            controller_address=controller,
            contract_addresses=by_name,
            init_codes=tuple(resolved_codes),
            deployed_block=ctx.block,
        )
        ctx.write_slot(("registry", "version", version_id))
        self.state["versions"][version_id] = record
        self.state["current"] = version_id
        for name, addr in by_name.items():
            ctx.write_slot(("registry", "beacon", name))
            self.state["beacons"][name] = addr
        ctx.emit(
            "DeterministicUpgradeExecuted",
            version_id=version_id,
            controller_address=controller.hex_str(),
        )
