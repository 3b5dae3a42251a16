"""Deterministic package building and a content-addressed store.

A package is the unit stakeholders vote on: normalized sources, the
version manifest derived from them, the standard test list, and a commit
reference. Its canonical serialization is byte-stable (sorted keys, LF
endings, no timestamps), so the content id is identical across hosts and
across any in-memory ordering of the inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .canon import canonical_json
from .keccak import keccak256
from .ledger import Hash256
from .registry import (
    Arg,
    ContractRef,
    ContractSpec,
    MalformedManifestError,
    VersionManifest,
    encode_contract,
)


class MissingControllerError(ValueError):
    pass


class EmptySourceError(ValueError):
    pass


class UnknownCidError(KeyError):
    pass


def normalize_source(text: str) -> bytes:
    """CRLF/CR to LF, UTF-8; hashing applies to these bytes only."""
    return text.replace("\r\n", "\n").replace("\r", "\n").encode("utf-8")


def source_hash(text: str) -> Hash256:
    return Hash256.of(normalize_source(text))


@dataclass(frozen=True)
class BuildConfig:
    """Everything besides the sources that influences the build output."""

    controller: str
    constructor_args: dict[str, tuple[Union[Arg, str], ...]] = field(default_factory=dict)
    contract_order: Optional[tuple[str, ...]] = None
    test_suite: tuple[str, ...] = ()
    commit_ref: str = ""


@dataclass(frozen=True)
class Package:
    """Built package: manifest + sources, canonically serializable."""

    version_id: int
    manifest: VersionManifest
    sources: dict[str, str]
    test_suite: tuple[str, ...]
    commit_ref: str

    def to_canonical_bytes(self) -> bytes:
        return canonical_json(
            {
                "version_id": self.version_id,
                "contracts": [
                    {
                        "name": c.name,
                        "source_hash": c.source_hash.hex_str(),
                        "constructor_args": [_arg_to_json(a) for a in c.constructor_args],
                    }
                    for c in self.manifest.contracts
                ],
                "sources": {
                    name: normalize_source(text).decode("utf-8")
                    for name, text in self.sources.items()
                },
                "test_suite": list(self.test_suite),
                "metadata": {"commit_ref": self.commit_ref},
            }
        )

    def cid(self) -> Hash256:
        return Hash256.of(self.to_canonical_bytes())

    def entry_codes(self) -> list[bytes]:
        """Canonical per-contract byte encodings, as passed to deployment."""
        return [encode_contract(c) for c in self.manifest.contracts]


def _arg_to_json(arg: Arg) -> dict:
    from .ledger import Address

    if isinstance(arg, ContractRef):
        return {"type": "ref", "value": arg.index}
    if isinstance(arg, Address):
        return {"type": "address", "value": arg.hex_str()}
    if isinstance(arg, int):
        return {"type": "uint", "value": arg}
    return {"type": "bytes", "value": "0x" + bytes(arg).hex()}


def _arg_from_json(doc: dict) -> Arg:
    from .ledger import Address

    kind, value = doc["type"], doc["value"]
    if kind == "ref":
        return ContractRef(int(value))
    if kind == "address":
        return Address.from_hex(value)
    if kind == "uint":
        return int(value)
    if kind == "bytes":
        return bytes.fromhex(str(value).removeprefix("0x"))
    raise MalformedManifestError(f"unknown argument type {kind!r}")


def build_package(
    source_tree: dict[str, str], version_id: int, config: BuildConfig
) -> Package:
    """Build the deterministic package for ``version_id``.

    Output bytes depend only on (sources, version_id, config): iteration
    order of the source map, host, and wall time never leak in. Named
    constructor-argument strings refer to other contracts and become
    positional references.
    """
    if not source_tree:
        raise EmptySourceError("source tree is empty")
    if config.controller not in source_tree:
        raise MissingControllerError(f"controller {config.controller!r} has no source")
    if config.contract_order is not None:
        order = list(config.contract_order)
        if sorted(order) != sorted(source_tree):
            raise MalformedManifestError("contract_order does not cover the source tree")
    else:
        order = sorted(n for n in source_tree if n != config.controller)
        order.append(config.controller)
    if order[-1] != config.controller:
        raise MissingControllerError("controller must be the last contract")

    index = {name: i for i, name in enumerate(order)}
    contracts = []
    for name in order:
        raw_args: Iterable[Union[Arg, str]] = config.constructor_args.get(name, ())
        if name == config.controller and name not in config.constructor_args:
            # Default controller wiring: reference every other contract.
            raw_args = tuple(order[:-1])
        args: list[Arg] = []
        for arg in raw_args:
            if isinstance(arg, str):
                if arg not in index:
                    raise MalformedManifestError(f"unknown contract reference {arg!r}")
                args.append(ContractRef(index[arg]))
            else:
                args.append(arg)
        contracts.append(ContractSpec(name, source_hash(source_tree[name]), tuple(args)))

    manifest = VersionManifest(version_id=version_id, contracts=tuple(contracts))
    manifest.validate()
    return Package(
        version_id=version_id,
        manifest=manifest,
        sources={name: source_tree[name] for name in order},
        test_suite=tuple(config.test_suite),
        commit_ref=config.commit_ref,
    )


def package_from_bytes(data: bytes) -> Package:
    doc = json.loads(data.decode("utf-8"))
    contracts = tuple(
        ContractSpec(
            name=c["name"],
            source_hash=Hash256.from_hex(c["source_hash"]),
            constructor_args=tuple(_arg_from_json(a) for a in c["constructor_args"]),
        )
        for c in doc["contracts"]
    )
    return Package(
        version_id=doc["version_id"],
        manifest=VersionManifest(version_id=doc["version_id"], contracts=contracts),
        sources=dict(doc["sources"]),
        test_suite=tuple(doc["test_suite"]),
        commit_ref=doc["metadata"]["commit_ref"],
    )


class MemoryStore:
    """In-memory content-addressed store; store is idempotent."""

    def __init__(self) -> None:
        self._objects: dict[bytes, bytes] = {}

    def store(self, package: Package) -> Hash256:
        data = package.to_canonical_bytes()
        cid = Hash256.of(data)
        self._objects[cid.value] = data
        return cid

    def fetch(self, cid: Hash256) -> Package:
        try:
            return package_from_bytes(self._objects[cid.value])
        except KeyError:
            raise UnknownCidError(cid.hex_str()) from None

    def __len__(self) -> int:
        return len(self._objects)


class FileStore:
    """Filesystem store keyed by hex cid; concurrent writes race benignly."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def store(self, package: Package) -> Hash256:
        data = package.to_canonical_bytes()
        cid = Hash256.of(data)
        (self.root / cid.value.hex()).write_bytes(data)
        return cid

    def fetch(self, cid: Hash256) -> Package:
        path = self.root / cid.value.hex()
        if not path.exists():
            raise UnknownCidError(cid.hex_str())
        return package_from_bytes(path.read_bytes())


def write_package_dir(package: Package, directory: Union[str, Path]) -> None:
    """Write the on-disk layout: package.json plus a sources/ directory."""
    directory = Path(directory)
    (directory / "sources").mkdir(parents=True, exist_ok=True)
    doc = json.loads(package.to_canonical_bytes().decode("utf-8"))
    del doc["sources"]
    (directory / "package.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for name, text in package.sources.items():
        (directory / "sources" / name).write_text(text, encoding="utf-8")


def read_package_dir(directory: Union[str, Path]) -> Package:
    directory = Path(directory)
    doc = json.loads((directory / "package.json").read_text(encoding="utf-8"))
    sources = {
        path.name: path.read_text(encoding="utf-8")
        for path in sorted((directory / "sources").iterdir())
    }
    doc["sources"] = sources
    return package_from_bytes(json.dumps(doc).encode("utf-8"))
