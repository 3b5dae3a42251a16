"""REST service over a live engine, consumed by the dashboard.

Reads are snapshots of the ledger at request time; mutating endpoints
submit a transaction and surface a revert as 409 with the error code in
the body. Identity is asserted: requests name the simulation account
they act as (the real-world identity layer is out of scope).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .governance import ProposalKind, Support
from .harness import Engine
from .ledger import Address, Call, LedgerEvent, TxReceipt, event_timestamp_iso


class ProposeBody(BaseModel):
    sender: str
    kind: str
    payload: dict[str, Any] = {}
    version_id: Optional[int] = None
    expected_address: Optional[str] = None
    package_cid: Optional[str] = None


class VoteBody(BaseModel):
    voter: str
    support: str


class SenderBody(BaseModel):
    sender: str


class ExecuteBody(BaseModel):
    sender: str
    entry_codes: Optional[list[str]] = None


class AdvanceBody(BaseModel):
    blocks: int


def _receipt_json(receipt: TxReceipt) -> dict[str, Any]:
    return {
        "tx_id": receipt.tx_id,
        "status": receipt.status.value,
        "error": receipt.error.value if receipt.error else None,
        "gas_used": receipt.gas.gas_used,
        "events": [_event_json(e) for e in receipt.events],
    }


def _event_json(event: LedgerEvent) -> dict[str, Any]:
    return {
        "name": event.name,
        "tx_id": event.tx_id,
        "block": event.block,
        "timestamp": event.timestamp,
        "timestamp_iso": event_timestamp_iso(event),
        "payload": event.payload,
    }


def create_app(engine: Engine, allow_time_control: bool = True) -> FastAPI:
    app = FastAPI(title="govdeploy")
    governance = engine.governance
    ledger = engine.ledger

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "MalformedRequest"})

    def proposal_view(prop: Any) -> dict[str, Any]:
        return {
            "proposal_id": prop.id_hex(),
            "kind": prop.kind.value,
            "state": governance.proposal_state(prop.id, ledger.clock.height).value,
            "proposer": prop.proposer.hex_str(),
            "version_id": prop.version_id,
            "expected_address": prop.expected_address.hex_str() if prop.expected_address else None,
            "package_cid": "0x" + prop.package_cid.hex() if prop.package_cid else None,
            "for_votes": prop.for_votes,
            "against_votes": prop.against_votes,
            "voters": sorted(v.hex_str() for v in prop.voters),
            "snapshot_block": prop.snapshot_block,
            "deadline_block": prop.deadline_block,
            "eta": prop.eta,
        }

    def find_proposal(proposal_id: str):
        for prop in governance.proposals():
            if prop.id_hex() == proposal_id:
                return prop
        return None

    def submit(sender: str, call: Call) -> JSONResponse:
        account = Address.from_hex(sender)
        if account not in ledger.accounts:
            return JSONResponse(status_code=404, content={"error": "UnknownAccount"})
        receipt = ledger.submit_tx(account, call)
        if not receipt.committed:
            return JSONResponse(status_code=409, content={"error": receipt.error.value})
        return JSONResponse(status_code=200, content=_receipt_json(receipt))

    @app.get("/proposals")
    def list_proposals():
        return [proposal_view(p) for p in governance.proposals()]

    @app.get("/proposals/{proposal_id}")
    def get_proposal(proposal_id: str):
        prop = find_proposal(proposal_id)
        if prop is None:
            return JSONResponse(status_code=404, content={"error": "UnknownProposal"})
        return proposal_view(prop)

    @app.get("/proposals/{proposal_id}/reports")
    def get_reports(proposal_id: str):
        if find_proposal(proposal_id) is None:
            return JSONResponse(status_code=404, content={"error": "UnknownProposal"})
        reports = []
        if engine.reports_dir:
            directory = Path(engine.reports_dir) / proposal_id
            if directory.is_dir():
                for path in sorted(directory.glob("*.json")):
                    doc = json.loads(path.read_text(encoding="utf-8"))
                    doc["account"] = path.stem
                    reports.append(doc)
        return reports

    @app.post("/proposals")
    def post_proposal(body: ProposeBody):
        args: dict[str, Any] = {
            "kind": ProposalKind(body.kind),
            "payload": body.payload,
        }
        if body.version_id is not None:
            args["version_id"] = body.version_id
        if body.expected_address is not None:
            args["expected_address"] = Address.from_hex(body.expected_address)
        if body.package_cid is not None:
            args["package_cid"] = bytes.fromhex(body.package_cid.removeprefix("0x"))
        return submit(body.sender, Call("governance", "propose", args))

    @app.post("/proposals/{proposal_id}/vote")
    def post_vote(proposal_id: str, body: VoteBody):
        prop = find_proposal(proposal_id)
        if prop is None:
            return JSONResponse(status_code=404, content={"error": "UnknownProposal"})
        return submit(
            body.voter,
            Call(
                "governance",
                "cast_vote",
                {"proposal_id": prop.id, "support": Support(body.support)},
            ),
        )

    @app.post("/proposals/{proposal_id}/queue")
    def post_queue(proposal_id: str, body: SenderBody):
        prop = find_proposal(proposal_id)
        if prop is None:
            return JSONResponse(status_code=404, content={"error": "UnknownProposal"})
        return submit(body.sender, Call("governance", "queue", {"proposal_id": prop.id}))

    @app.post("/proposals/{proposal_id}/execute")
    def post_execute(proposal_id: str, body: ExecuteBody):
        prop = find_proposal(proposal_id)
        if prop is None:
            return JSONResponse(status_code=404, content={"error": "UnknownProposal"})
        codes = None
        if body.entry_codes is not None:
            codes = [bytes.fromhex(c.removeprefix("0x")) for c in body.entry_codes]
        elif prop.package_cid is not None:
            # Default to the voted-on package's own entry codes.
            from .ledger import Hash256

            try:
                codes = engine.store.fetch(Hash256(prop.package_cid)).entry_codes()
            except Exception:
                codes = None
        return submit(
            body.sender,
            Call("governance", "execute", {"proposal_id": prop.id, "entry_codes": codes}),
        )

    @app.get("/versions")
    def get_versions():
        return [
            {
                "version_id": record.version_id,
                "controller_address": record.controller_address.hex_str(),
                "contract_addresses": {
                    name: addr.hex_str()
                    for name, addr in record.contract_addresses.items()
                },
                "deployed_block": record.deployed_block,
            }
            for record in engine.registry.version_history()
        ]

    @app.get("/events")
    def get_events():
        return [_event_json(e) for e in ledger.events]

    @app.get("/accounts")
    def get_accounts():
        named = {
            "deployer": engine.deployer,
            "package_proposer": engine.proposer,
            "propagator": engine.propagator,
        }
        for i, account in enumerate(engine.stakeholders):
            named[f"stakeholder_{i}"] = account
        return {name: addr.hex_str() for name, addr in named.items()}

    @app.get("/time")
    def get_time():
        return {
            "height": ledger.clock.height,
            "timestamp": ledger.clock.timestamp,
            "seconds_per_block": ledger.clock.seconds_per_block,
        }

    @app.post("/time/advance")
    def post_advance(body: AdvanceBody):
        if not allow_time_control:
            return JSONResponse(status_code=409, content={"error": "TimeControlDisabled"})
        if body.blocks < 0:
            return JSONResponse(status_code=400, content={"error": "MalformedRequest"})
        height = ledger.advance_blocks(body.blocks)
        return {"height": height, "timestamp": ledger.clock.timestamp}

    return app
