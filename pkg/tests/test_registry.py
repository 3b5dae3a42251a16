"""Address derivation, init-code encoding, and deployment authenticity."""

import random

import pytest

from govdeploy.governance import Support
from govdeploy.harness import Engine, HOUR_BLOCKS
from govdeploy.keccak import keccak256
from govdeploy.ledger import Address, ErrorCode, Hash256
from govdeploy.registry import (
    ContractRef,
    ContractSpec,
    MalformedManifestError,
    VersionManifest,
    decode_contract,
    derive_address,
    derive_version_address,
    encode_contract,
    resolve_init_code,
    version_salt,
)

ZERO20 = Address(b"\x00" * 20)
ZERO_SALT = b"\x00" * 32

# Published CREATE2 example vectors (deployer, salt, init code, address).
EIP1014_VECTORS = [
    ("00" * 20, "00" * 32, "00", "4d1a2e2bb4f88f0250f26ffff098b0b30b26bf38"),
    ("deadbeef" + "00" * 16, "00" * 32, "00", "b928f69bb1d91cd65274e3c79d8986362984fda3"),
    (
        "deadbeef" + "00" * 16,
        "000000000000000000000000feed000000000000000000000000000000000000",
        "00",
        "d04116cdd17bebe565eb2422f2497e06cc1c9833",
    ),
    ("00" * 20, "00" * 32, "deadbeef", "70f2b2914a2a4b783faefb75f459a580616fcb5e"),
    (
        "00" * 16 + "deadbeef",
        "00" * 28 + "cafebabe",
        "deadbeef",
        "60f3f640a8508fc6a86d45df051962668e1e8ac7",
    ),
    (
        "00" * 16 + "deadbeef",
        "00" * 28 + "cafebabe",
        "deadbeef" * 11,
        "1d8bfdc5d46dc4f61d6b6115972536ebe6a8854c",
    ),
    ("00" * 20, "00" * 32, "", "e33c0c7f7df4809055c3eba6c09cfe4baf1bd9e0"),
]


@pytest.mark.parametrize("deployer,salt,code,expected", EIP1014_VECTORS)
def test_derive_address_against_published_vectors(deployer, salt, code, expected):
    addr = derive_address(
        Address.from_hex(deployer), bytes.fromhex(salt), bytes.fromhex(code)
    )
    assert addr.value.hex() == expected


def test_derive_address_deterministic():
    a = derive_address(ZERO20, ZERO_SALT, b"\x00")
    b = derive_address(ZERO20, ZERO_SALT, b"\x00")
    assert a == b


def test_derive_address_rejects_bad_salt():
    with pytest.raises(ValueError):
        derive_address(ZERO20, b"\x00" * 31, b"")


def test_single_bit_flips_change_address():
    rng = random.Random(1014)
    init_code = bytes(rng.getrandbits(8) for _ in range(64))
    base = derive_address(ZERO20, ZERO_SALT, init_code)
    for _ in range(100):
        position = rng.randrange(len(init_code) * 8)
        mutated = bytearray(init_code)
        mutated[position // 8] ^= 1 << (position % 8)
        assert derive_address(ZERO20, ZERO_SALT, bytes(mutated)) != base


# --- canonical encoding -----------------------------------------------------


def _hash(tag: bytes) -> Hash256:
    return Hash256.of(tag)


def test_encode_decode_round_trip():
    contract = ContractSpec(
        "hub",
        _hash(b"hub-src"),
        (b"\x01\x02", 42, Address.from_label("ext"), ContractRef(0)),
    )
    assert decode_contract(encode_contract(contract)) == contract


def test_encoding_is_injective_on_field_boundaries():
    # name/arg content must not be confusable across field boundaries
    a = ContractSpec("ab", _hash(b"x"), (b"c",))
    b = ContractSpec("a", _hash(b"x"), (b"bc",))
    assert encode_contract(a) != encode_contract(b)


def test_decode_rejects_trailing_bytes():
    data = encode_contract(ContractSpec("a", _hash(b"s"), ()))
    with pytest.raises(MalformedManifestError):
        decode_contract(data + b"\x00")


def test_encode_rejects_unsupported_args():
    with pytest.raises(MalformedManifestError):
        encode_contract(ContractSpec("a", _hash(b"s"), (-1,)))
    with pytest.raises(MalformedManifestError):
        encode_contract(ContractSpec("a", _hash(b"s"), (1.5,)))


# --- manifest fold ----------------------------------------------------------


def _manifest_3() -> VersionManifest:
    return VersionManifest(
        version_id=7,
        contracts=(
            ContractSpec("storage", _hash(b"storage-src"), ()),
            ContractSpec("logic", _hash(b"logic-src"), (ContractRef(0), 99)),
            ContractSpec(
                "controller", _hash(b"controller-src"), (ContractRef(0), ContractRef(1))
            ),
        ),
    )


REGISTRY = Address.from_label("registry")


def test_single_contract_manifest_degenerate_fold():
    manifest = VersionManifest(
        version_id=1, contracts=(ContractSpec("controller", _hash(b"c"), ()),)
    )
    v, by_name = derive_version_address(manifest, REGISTRY)
    expected = derive_address(
        REGISTRY, version_salt(1), encode_contract(manifest.contracts[0])
    )
    assert v == expected == by_name["controller"]


def test_three_contract_fold_matches_hand_unrolled_oracle():
    manifest = _manifest_3()
    salt = version_salt(7)
    # unrolled, no loop: derive each address and substitute by hand
    a0 = derive_address(REGISTRY, salt, encode_contract(manifest.contracts[0]))
    c1 = ContractSpec("logic", _hash(b"logic-src"), (a0, 99))
    a1 = derive_address(REGISTRY, salt, encode_contract(c1))
    c2 = ContractSpec("controller", _hash(b"controller-src"), (a0, a1))
    v_expected = derive_address(REGISTRY, salt, encode_contract(c2))

    v, by_name = derive_version_address(manifest, REGISTRY)
    assert v == v_expected
    assert by_name == {"storage": a0, "logic": a1, "controller": v_expected}


def test_leaf_mutation_propagates_to_controller_address():
    manifest = _manifest_3()
    v_base, _ = derive_version_address(manifest, REGISTRY)
    mutated = VersionManifest(
        version_id=7,
        contracts=(
            ContractSpec("storage", _hash(b"storage-src-evil"), ()),
        ) + manifest.contracts[1:],
    )
    v_mut, _ = derive_version_address(mutated, REGISTRY)
    assert v_mut != v_base


def test_salt_binding_same_manifest_different_version():
    m7 = _manifest_3()
    m8 = VersionManifest(version_id=8, contracts=m7.contracts)
    assert derive_version_address(m7, REGISTRY)[0] != derive_version_address(m8, REGISTRY)[0]


def test_registry_address_binding():
    other = Address.from_label("other-registry")
    v_a, names_a = derive_version_address(_manifest_3(), REGISTRY)
    v_b, names_b = derive_version_address(_manifest_3(), other)
    assert v_a != v_b
    assert all(names_a[n] != names_b[n] for n in names_a)


def test_malformed_manifests_rejected():
    with pytest.raises(MalformedManifestError):
        derive_version_address(
            VersionManifest(1, ()), REGISTRY
        )
    with pytest.raises(MalformedManifestError):
        # forward reference
        VersionManifest(
            1,
            (
                ContractSpec("a", _hash(b"a"), (ContractRef(1),)),
                ContractSpec("ctl", _hash(b"c"), (ContractRef(0),)),
            ),
        ).validate()
    with pytest.raises(MalformedManifestError):
        # controller does not reference every other contract
        VersionManifest(
            1,
            (
                ContractSpec("a", _hash(b"a"), ()),
                ContractSpec("ctl", _hash(b"c"), ()),
            ),
        ).validate()


def test_commitment_soundness_random_mutations():
    rng = random.Random(31337)
    base = _manifest_3()
    v_base, _ = derive_version_address(base, REGISTRY)
    collisions = 0
    for _ in range(1000):
        which = rng.randrange(3)
        contracts = list(base.contracts)
        contract = contracts[which]
        mode = rng.randrange(3)
        if mode == 0:
            digest = bytearray(contract.source_hash.value)
            digest[rng.randrange(32)] ^= 1 << rng.randrange(8)
            contract = ContractSpec(
                contract.name, Hash256(bytes(digest)), contract.constructor_args
            )
        elif mode == 1:
            contract = ContractSpec(
                contract.name + rng.choice("xyz"),
                contract.source_hash,
                contract.constructor_args,
            )
            if which == 2:
                pass  # controller rename keeps structure valid
        else:
            contract = ContractSpec(
                contract.name,
                contract.source_hash,
                contract.constructor_args + (rng.getrandbits(64),),
            )
        contracts[which] = contract
        mutated = VersionManifest(base.version_id, tuple(contracts))
        try:
            v_mut, _ = derive_version_address(mutated, REGISTRY)
        except MalformedManifestError:
            continue
        if v_mut == v_base:
            collisions += 1
    assert collisions == 0


# --- deployment through governance ------------------------------------------


def _succeed_and_queue(engine: Engine):
    package = engine.default_package(1)
    _, pid = engine.propose_upgrade(package)
    engine.ledger.advance_blocks(HOUR_BLOCKS)
    engine.vote(engine.stakeholders[0], pid, Support.FOR)
    engine.vote(engine.stakeholders[1], pid, Support.FOR)
    engine.ledger.advance_blocks(2_161 + 1 - HOUR_BLOCKS)
    engine.queue(pid)
    engine.ledger.advance_blocks(720)
    return package, pid


def test_deploy_exact_codes_commits_and_repoints():
    engine = Engine()
    package, pid = _succeed_and_queue(engine)
    receipt = engine.execute(pid, package.entry_codes())
    assert receipt.committed
    record = engine.registry.current_version()
    assert record.version_id == 1
    expected, by_name = derive_version_address(package.manifest, engine.registry_address)
    assert record.controller_address == expected
    for name, addr in by_name.items():
        assert engine.registry.resolve(name) == addr


def test_deploy_tampered_byte_reverts_address_mismatch():
    engine = Engine()
    package, pid = _succeed_and_queue(engine)
    codes = package.entry_codes()
    tampered = [codes[0][:-1] + bytes([codes[0][-1] ^ 0xFF])] + codes[1:]
    receipt = engine.execute(pid, tampered)
    assert not receipt.committed
    assert receipt.error is ErrorCode.ADDRESS_MISMATCH
    # the whole tx reverted: still queued, re-executable with honest codes
    assert engine.execute(pid, codes).committed


def test_deploy_without_approved_proposal_reverts():
    engine = Engine()
    package = engine.default_package(1)
    from govdeploy.ledger import Call

    receipt = engine.ledger.submit_tx(
        engine.propagator,
        Call(
            "registry",
            "deploy_version",
            {"version_id": 1, "entry_codes": package.entry_codes()},
        ),
    )
    assert receipt.error is ErrorCode.NO_APPROVED_PROPOSAL


def test_version_history_and_current_after_two_upgrades():
    engine = Engine()
    package1, pid1 = _succeed_and_queue(engine)
    engine.execute(pid1, package1.entry_codes())

    sources = {
        "hub": "contract Hub { mapping(address => bytes32) public posts; uint v2; }\n",
        "controller": (
            "contract Controller { address public hub;"
            " constructor(address h) { hub = h; } }\n"
        ),
    }
    from govdeploy.packages import BuildConfig, build_package

    package2 = build_package(sources, 2, BuildConfig(controller="controller"))
    _, pid2 = engine.propose_upgrade(package2)
    engine.ledger.advance_blocks(HOUR_BLOCKS)
    engine.vote(engine.stakeholders[0], pid2, Support.FOR)
    engine.vote(engine.stakeholders[1], pid2, Support.FOR)
    engine.ledger.advance_blocks(2_162 - HOUR_BLOCKS)
    engine.queue(pid2)
    engine.ledger.advance_blocks(720)
    assert engine.execute(pid2, package2.entry_codes()).committed

    assert engine.registry.current_version().version_id == 2
    history = engine.registry.version_history()
    assert [r.version_id for r in history] == [1, 2]
    _, by_name_v2 = derive_version_address(package2.manifest, engine.registry_address)
    assert engine.registry.resolve("hub") == by_name_v2["hub"]


def test_resolved_init_codes_stored_for_audit():
    engine = Engine()
    package, pid = _succeed_and_queue(engine)
    engine.execute(pid, package.entry_codes())
    record = engine.registry.current_version()
    salt = version_salt(1)
    rederived = [
        derive_address(engine.registry_address, salt, code) for code in record.init_codes
    ]
    assert rederived[-1] == record.controller_address
