"""Optional HTTP face for a provider connector.

Exposes the same messages the in-process simulator exchanges, with identical
semantics: POST /negotiate, POST /request, POST /evidence, GET /audit. All
handling is serialized through one lock per connector, mirroring the
single-threaded event loop. Requires the ``service`` extra (FastAPI).
"""

from __future__ import annotations

import threading

from .enforcement import EnforcementOutcome
from .model import Iri, TypedLiteral, parse_datetime
from .simulator import (
    IllegalTransitionError,
    ProviderConnector,
    ScenarioError,
    expand_curie,
)


def create_app(connector: ProviderConnector):
    try:
        from fastapi import FastAPI, HTTPException
        from fastapi.responses import PlainTextResponse
    except ImportError as exc:  # pragma: no cover - exercised only without extra
        raise RuntimeError(
            "the HTTP service needs the 'service' extra (pip install usagectl[service])"
        ) from exc

    app = FastAPI(title="usagectl connector")
    lock = threading.Lock()

    @app.post("/negotiate")
    def negotiate(payload: dict):
        with lock:
            try:
                state = connector.negotiate(
                    str(payload["offer"]),
                    Iri(payload["consumer"]),
                    accept=bool(payload.get("accept", True)),
                )
            except (KeyError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            except IllegalTransitionError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            return {
                "id": state.id,
                "phase": state.phase.value,
                "agreement": state.agreement.uid.value if state.agreement else None,
                "reason": state.reason,
            }

    @app.post("/request")
    def request(payload: dict):
        with lock:
            try:
                outcome = connector.handle_request(
                    str(payload["offer"]),
                    Iri(payload["requester"]),
                    expand_curie(str(payload.get("action", "odrl:read"))),
                    parse_datetime(payload["at"]),
                    units=int(payload.get("units", 1)),
                    attributes={
                        expand_curie(key): TypedLiteral(str(value))
                        for key, value in payload.get("attributes", {}).items()
                    },
                    ongoing=bool(payload.get("ongoing", False)),
                )
            except (KeyError, ValueError, ScenarioError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            decision = outcome.decision
            return {
                "outcome": outcome.outcome.value,
                "allowed": outcome.outcome is EnforcementOutcome.ALLOWED,
                "reason": outcome.reason,
                "decision": decision.outcome.value if decision else None,
                "duties": [duty.action.action.value for duty in outcome.duties],
            }

    @app.post("/evidence")
    def evidence(payload: dict):
        with lock:
            try:
                target = payload.get("target")
                record = connector.add_evidence(
                    Iri(payload["actor"]),
                    expand_curie(str(payload["action"])),
                    expand_curie(str(target)) if target else None,
                    parse_datetime(payload["at"]),
                    attributes={
                        str(k): str(v) for k, v in payload.get("attributes", {}).items()
                    },
                )
            except (KeyError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            return {"seq": record.seq, "outcome": record.outcome.value}

    @app.get("/audit", response_class=PlainTextResponse)
    def audit():
        with lock:
            return connector.log.dumps()

    return app
