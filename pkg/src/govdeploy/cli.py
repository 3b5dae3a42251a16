"""Command-line entry points: scenarios, conformance tools, derivation, serving."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .conformance import (
    EventLog,
    dfg_to_dot,
    log_from_csv,
    log_from_xes,
    log_to_csv,
    log_to_xes,
    mine_dfg,
    reference_net,
    token_replay,
)
from .harness import conforming_log, gas_report, run_all, run_scenario
from .ledger import Address, Hash256, export_events_csv
from .packages import BuildConfig, build_package, write_package_dir
from .registry import ContractSpec, VersionManifest, derive_version_address


def _load_log(path: str) -> EventLog:
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".xes") or text.lstrip().startswith("<?xml"):
        return log_from_xes(text)
    return log_from_csv(text)


@click.group()
def main() -> None:
    """Decentralised-deployment governance engine (simulated ledger)."""


@main.command("run-scenario")
@click.argument("scenario_id")
@click.option("--out", type=click.Path(), default=None, help="Directory for exported logs.")
def run_scenario_cmd(scenario_id: str, out: str | None) -> None:
    """Run one benchmark scenario (C1..C3, N1..N7) or 'all'."""
    ids = None if scenario_id == "all" else [scenario_id]
    results = run_all(ids)
    failed = False
    for sid, result in results.items():
        status = "pass" if result.passed else "FAIL"
        click.echo(f"{sid}: {status} (fitness {result.fitness.fitness:.4f}) {result.details}")
        failed |= not result.passed
        if out:
            directory = Path(out)
            directory.mkdir(parents=True, exist_ok=True)
            (directory / f"{sid}.csv").write_text(
                export_events_csv(result.events), encoding="utf-8"
            )
    if out and all(sid in results for sid in ("C1", "C2", "C3")):
        (Path(out) / "conforming.xes").write_text(
            log_to_xes(conforming_log(results)), encoding="utf-8"
        )
    sys.exit(1 if failed else 0)


@main.command("replay")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
def replay_cmd(log_path: str) -> None:
    """Token-based replay of an event log against the reference net."""
    log = _load_log(log_path)
    results, aggregate = token_replay(log, reference_net())
    for trace, result in zip(log.traces, results):
        click.echo(
            f"{trace.case_id or '<no case>'}: fitness {result.fitness:.4f} "
            f"(p={result.produced} c={result.consumed} "
            f"m={result.missing} r={result.remaining})"
        )
    click.echo(f"aggregate: {aggregate:.4f}")


@main.command("dfg")
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--dot", is_flag=True, help="Emit DOT instead of a table.")
def dfg_cmd(log_path: str, dot: bool) -> None:
    """Mine the performance-annotated directly-follows graph of a log."""
    edges = mine_dfg(_load_log(log_path))
    if dot:
        click.echo(dfg_to_dot(edges), nl=False)
        return
    for edge in edges:
        click.echo(
            f"{edge.from_activity} -> {edge.to_activity}: "
            f"{edge.frequency}x, mean {edge.mean_duration:g}s"
        )


@main.command("gas-report")
def gas_report_cmd() -> None:
    """Per-step gas table for a complete successful lifecycle."""
    click.echo(gas_report(run_scenario("C1")).render())


@main.command("derive")
@click.argument("manifest_path", type=click.Path(exists=True))
@click.option("--registry", "registry_hex", default=None, help="Registry address (hex).")
def derive_cmd(manifest_path: str, registry_hex: str | None) -> None:
    """Print the controller and per-contract addresses for a manifest file."""
    doc = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    from .packages import _arg_from_json

    contracts = tuple(
        ContractSpec(
            name=c["name"],
            source_hash=Hash256.from_hex(c["source_hash"]),
            constructor_args=tuple(_arg_from_json(a) for a in c.get("constructor_args", [])),
        )
        for c in doc["contracts"]
    )
    manifest = VersionManifest(version_id=doc["version_id"], contracts=contracts)
    registry = (
        Address.from_hex(registry_hex) if registry_hex else Address.from_label("registry")
    )
    controller, by_name = derive_version_address(manifest, registry)
    for name, addr in by_name.items():
        click.echo(f"{name}: {addr.hex_str()}")
    click.echo(f"controller (v_{doc['version_id']}): {controller.hex_str()}")


@main.group("package")
def package_group() -> None:
    """Deterministic package operations."""


@package_group.command("build")
@click.argument("source_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--version", "version_id", required=True, type=int)
@click.option("--controller", default=None, help="Controller contract name (default: 'controller').")
@click.option("--out", type=click.Path(), default=None, help="Write package.json + sources/ here.")
def package_build_cmd(source_dir: str, version_id: int, controller: str | None, out: str | None) -> None:
    """Build a deterministic package from a directory of source files."""
    sources = {
        path.name: path.read_text(encoding="utf-8")
        for path in sorted(Path(source_dir).iterdir())
        if path.is_file()
    }
    package = build_package(
        sources, version_id, BuildConfig(controller=controller or "controller")
    )
    registry = Address.from_label("registry")
    v_i, _ = derive_version_address(package.manifest, registry)
    click.echo(f"cid: {package.cid().hex_str()}")
    click.echo(f"v_{version_id}: {v_i.hex_str()}")
    if out:
        write_package_dir(package, out)


@main.command("serve")
@click.option("--port", default=8000, type=int)
@click.option("--host", default="127.0.0.1")
@click.option("--reports-dir", default="reports", type=click.Path())
def serve_cmd(port: int, host: str, reports_dir: str) -> None:
    """Serve the REST API over a freshly bootstrapped engine with one
    open upgrade proposal (C1's setup), time control enabled."""
    import uvicorn

    from .api import create_app
    from .harness import Engine

    engine = Engine(reports_dir=reports_dir)
    package = engine.default_package(1)
    engine.propose_upgrade(package)
    engine.ledger.advance_blocks(engine.governance.params.voting_delay)
    uvicorn.run(create_app(engine), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
