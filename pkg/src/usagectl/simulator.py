"""Deterministic provider/consumer connector harness.

One process hosts both sides: the provider connector owns the asset catalog,
offers, negotiation states, usage counters, and the audit log; the consumer
is a scripted sequence of timed actions (negotiate, request, report-evidence,
skip-duty, close, revoke). Time is a logical clock that advances only by the
scenario's step; identical scenarios therefore produce byte-identical audit
logs. Negotiation is accept/decline only, with legal phase transitions
Offered -> Requested -> (Agreed | Declined) and Agreed -> Revoked, guarded by
the state object itself.

The run loop is single-threaded; the optional HTTP wrapper (see
``usagectl.service``) serializes handling through one lock per connector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from decimal import Decimal
from enum import Enum
from typing import Mapping, Sequence

from . import vocab
from .enforcement import (
    AuditLog,
    AuditOutcome,
    EnforcementAction,
    EnforcementOutcome,
    ObligationStatus,
    OngoingUsage,
    RevocationEvent,
    continuous_monitor_step,
    detective_check,
    pep_handle,
    record_evidence,
)
from .model import (
    Iri,
    Policy,
    PolicyKind,
    TypedLiteral,
    as_agreement,
    is_valid,
    parse_datetime,
    parse_duration,
    validate_policy,
)
from .patterns import combine, instantiate
from .pdp import AccessRequest, UsageState
from .pip import (
    Attestation,
    AttestationClaimProvider,
    AttributeService,
    ClockProvider,
    RegionHierarchy,
    StaticAttributeProvider,
)


class IllegalTransitionError(Exception):
    pass


class ScenarioError(ValueError):
    pass


class NegotiationPhase(str, Enum):
    OFFERED = "Offered"
    REQUESTED = "Requested"
    AGREED = "Agreed"
    DECLINED = "Declined"
    REVOKED = "Revoked"


_LEGAL_TRANSITIONS = {
    (NegotiationPhase.OFFERED, NegotiationPhase.REQUESTED),
    (NegotiationPhase.REQUESTED, NegotiationPhase.AGREED),
    (NegotiationPhase.REQUESTED, NegotiationPhase.DECLINED),
    (NegotiationPhase.AGREED, NegotiationPhase.REVOKED),
}


@dataclass(frozen=True)
class NegotiationState:
    id: str
    phase: NegotiationPhase
    offer: Policy
    agreement: Policy | None = None
    reason: str = ""

    def __post_init__(self) -> None:
        has_agreement = self.agreement is not None
        should_have = self.phase in (NegotiationPhase.AGREED, NegotiationPhase.REVOKED)
        if has_agreement != should_have:
            raise ValueError("agreement must be present exactly in Agreed/Revoked phases")

    def _advance(self, phase: NegotiationPhase, **changes) -> "NegotiationState":
        if (self.phase, phase) not in _LEGAL_TRANSITIONS:
            raise IllegalTransitionError(
                f"illegal transition {self.phase.value} -> {phase.value}"
            )
        return replace(self, phase=phase, **changes)

    def request(self) -> "NegotiationState":
        return self._advance(NegotiationPhase.REQUESTED)

    def agree(self, consumer: Iri) -> "NegotiationState":
        agreement = as_agreement(
            self.offer,
            assignee=consumer,
            uid=Iri(self.offer.uid.value + "-agreement"),
        )
        return self._advance(NegotiationPhase.AGREED, agreement=agreement)

    def decline(self, reason: str = "") -> "NegotiationState":
        return self._advance(NegotiationPhase.DECLINED, reason=reason)

    def revoke(self) -> "NegotiationState":
        return self._advance(NegotiationPhase.REVOKED)


def negotiate(
    offer: Policy, consumer: Iri, accept: bool = True, negotiation_id: str | None = None
) -> NegotiationState:
    """Run one accept/decline negotiation over an offer.

    Invalid offers are declined with the first violation as reason; there
    are no counter-proposals.
    """
    nid = negotiation_id or f"negotiation:{offer.uid.value}:{consumer.value}"
    state = NegotiationState(nid, NegotiationPhase.OFFERED, offer)
    state = state.request()
    if offer.kind is not PolicyKind.OFFER:
        return state.decline("offer policy kind is not Offer")
    violations = validate_policy(offer)
    if not is_valid(violations):
        return state.decline(f"invalid offer: {violations[0]}")
    if not accept:
        return state.decline("declined by consumer")
    return state.agree(consumer)


# ---------------------------------------------------------------------------
# scenario model

@dataclass(frozen=True)
class ScenarioAsset:
    uid: Iri
    title: str | None = None
    payload: str = ""


@dataclass(frozen=True)
class ScenarioOffer:
    id: str
    target: Iri
    patterns: tuple[tuple[str, dict], ...]
    uid: Iri | None = None


@dataclass(frozen=True)
class ScriptStep:
    at: datetime
    action: str
    args: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    provider: Iri
    consumer: Iri
    clock_start: datetime
    clock_step: timedelta
    end: datetime
    assets: tuple[ScenarioAsset, ...]
    offers: tuple[ScenarioOffer, ...]
    script: tuple[ScriptStep, ...]
    consumer_attributes: Mapping[Iri, TypedLiteral] = field(default_factory=dict)
    region_hierarchy: Mapping[str, Sequence[str]] = field(default_factory=dict)
    default_credit: Decimal = Decimal("0")
    currency: str = "EUR"
    attestations: tuple[Attestation, ...] = ()
    issuer_keys: Mapping[Iri, bytes] = field(default_factory=dict)


_CURIE_PREFIXES = {
    "odrl": vocab.ODRL,
    "dsp": vocab.DSP,
    "xsd": vocab.XSD,
    "rdf": vocab.RDF,
    "dc11": vocab.DC11,
}


def expand_curie(text: str) -> Iri:
    prefix, sep, local = text.partition(":")
    if sep and prefix in _CURIE_PREFIXES:
        return Iri(_CURIE_PREFIXES[prefix] + local)
    return Iri(text)


def validate_scenario(scenario: Scenario) -> None:
    asset_ids = {asset.uid for asset in scenario.assets}
    if len(asset_ids) != len(scenario.assets):
        raise ScenarioError("asset uids must be unique")
    offer_ids = set()
    for offer in scenario.offers:
        if offer.id in offer_ids:
            raise ScenarioError(f"duplicate offer id {offer.id!r}")
        offer_ids.add(offer.id)
        if offer.target not in asset_ids:
            raise ScenarioError(f"offer {offer.id!r} references unknown asset {offer.target}")
    previous: datetime | None = None
    for step in scenario.script:
        if previous is not None and step.at < previous:
            raise ScenarioError("script timestamps must be monotone non-decreasing")
        previous = step.at
        if step.action in ("negotiate", "request", "revoke"):
            ref = step.args.get("offer")
            if ref not in offer_ids:
                raise ScenarioError(f"script step references unknown offer {ref!r}")
        elif step.action not in ("report-evidence", "skip-duty", "close"):
            raise ScenarioError(f"unknown script action {step.action!r}")
    if scenario.end < scenario.clock_start:
        raise ScenarioError("scenario end precedes clock start")
    if scenario.clock_step <= timedelta(0):
        raise ScenarioError("clock_step must be positive")


def scenario_from_jsonable(data: Mapping) -> Scenario:
    try:
        assets = tuple(
            ScenarioAsset(
                uid=Iri(entry["uid"]),
                title=entry.get("title"),
                payload=entry.get("payload", ""),
            )
            for entry in data.get("assets", [])
        )
        offers = tuple(
            ScenarioOffer(
                id=entry["id"],
                target=Iri(entry["target"]),
                patterns=tuple(
                    (p["id"], dict(p.get("params", {}))) for p in entry.get("patterns", [])
                ),
                uid=Iri(entry["uid"]) if entry.get("uid") else None,
            )
            for entry in data.get("offers", [])
        )
        script = tuple(
            ScriptStep(
                at=parse_datetime(entry["at"]),
                action=entry["action"],
                args=dict(entry.get("args", {})),
            )
            for entry in data.get("script", [])
        )
        attributes = {
            expand_curie(key): TypedLiteral(str(value))
            for key, value in data.get("consumer_attributes", {}).items()
        }
        attestations = tuple(
            Attestation.from_json(json.dumps(entry)) for entry in data.get("attestations", [])
        )
        issuer_keys = {
            Iri(key): value.encode("utf-8") for key, value in data.get("issuer_keys", {}).items()
        }
        scenario = Scenario(
            name=data.get("name", "scenario"),
            provider=Iri(data["provider"]),
            consumer=Iri(data["consumer"]),
            clock_start=parse_datetime(data["clock_start"]),
            clock_step=parse_duration(data.get("clock_step", "PT1S")),
            end=parse_datetime(data["end"]),
            assets=assets,
            offers=offers,
            script=script,
            consumer_attributes=attributes,
            region_hierarchy=dict(data.get("region_hierarchy", {})),
            default_credit=Decimal(str(data.get("default_credit", "0"))),
            currency=data.get("currency", "EUR"),
            attestations=attestations,
            issuer_keys=issuer_keys,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"malformed scenario: {exc}") from exc
    validate_scenario(scenario)
    return scenario


def load_scenario(path: str) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_jsonable(json.load(fh))


# ---------------------------------------------------------------------------
# provider connector

class LogicalClock:
    def __init__(self, start: datetime) -> None:
        self.now = start

    def advance_to(self, at: datetime) -> None:
        if at < self.now:
            raise ValueError("logical clock cannot move backwards")
        self.now = at


def build_offer(scenario: Scenario, offer: ScenarioOffer) -> Policy:
    """Instantiate and merge the offer's patterns, then stamp it as an
    offer assigned by the scenario provider."""
    instances = []
    for pattern_id, raw_params in offer.patterns:
        params = dict(raw_params)
        params.setdefault("target", offer.target.value)
        params.setdefault("assigner", scenario.provider.value)
        instances.append(instantiate(pattern_id, params))
    uid = offer.uid or Iri(f"http://example.com/offers/{offer.id}")
    combined = combine(instances, uid=uid)
    policy = replace(combined, kind=PolicyKind.OFFER)
    violations = validate_policy(policy)
    if not is_valid(violations):
        raise ScenarioError(f"offer {offer.id!r} does not validate: {violations[0]}")
    return policy


class ProviderConnector:
    """Provider-side state: offers, negotiations, usage, audit log."""

    def __init__(
        self,
        provider: Iri,
        offers: Mapping[str, Policy],
        service: AttributeService,
        default_credit: Decimal = Decimal("0"),
        currency: str = "EUR",
    ) -> None:
        self.provider = provider
        self.offers = dict(offers)
        self.service = service
        self.default_credit = default_credit
        self.currency = currency
        self.log = AuditLog()
        self.negotiations: dict[str, NegotiationState] = {}
        self.usage: dict[str, UsageState] = {}
        self.ongoing: dict[str, list[OngoingUsage]] = {}
        self.revocations: list[RevocationEvent] = []
        self.decisions: list[dict] = []
        self._usage_counter = 0

    def negotiate(self, offer_id: str, consumer: Iri, accept: bool = True) -> NegotiationState:
        if offer_id not in self.offers:
            raise ScenarioError(f"unknown offer {offer_id!r}")
        if offer_id in self.negotiations:
            phase = self.negotiations[offer_id].phase
            raise IllegalTransitionError(
                f"illegal transition: negotiation for {offer_id!r} already {phase.value}"
            )
        state = negotiate(self.offers[offer_id], consumer, accept, negotiation_id=offer_id)
        self.negotiations[offer_id] = state
        if state.agreement is not None:
            key = state.agreement.uid.value
            self.usage[key] = UsageState(
                default_credit=self.default_credit, currency=self.currency
            )
            self.ongoing[key] = []
        return state

    def revoke(self, offer_id: str) -> NegotiationState:
        state = self.negotiations.get(offer_id)
        if state is None:
            raise ScenarioError(f"no negotiation for offer {offer_id!r}")
        state = state.revoke()
        self.negotiations[offer_id] = state
        return state

    def handle_request(
        self,
        offer_id: str,
        requester: Iri,
        action: Iri,
        at: datetime,
        units: int = 1,
        attributes: Mapping[Iri, TypedLiteral] | None = None,
        ongoing: bool = False,
    ) -> EnforcementAction:
        state = self.negotiations.get(offer_id)
        offer_policy = self.offers.get(offer_id)
        if offer_policy is None:
            raise ScenarioError(f"unknown offer {offer_id!r}")
        target = next(
            (r.target for r in offer_policy.rules if r.target is not None), None
        ) or Iri("http://example.com/assets/unknown")
        if state is None or state.agreement is None:
            self.log.append(
                at, requester, action, target, AuditOutcome.DENIED, "no agreement in place"
            )
            self.decisions.append(
                {
                    "at": at.isoformat(),
                    "offer": offer_id,
                    "action": action.value,
                    "outcome": EnforcementOutcome.BLOCKED.value,
                    "reason": "no agreement",
                }
            )
            return EnforcementAction(EnforcementOutcome.BLOCKED, None, (), "no agreement")
        agreement = state.agreement
        key = agreement.uid.value
        request = AccessRequest(
            requester=requester,
            target=target,
            action=action,
            timestamp=at,
            units_requested=units,
            attributes=dict(attributes or {}),
        )
        outcome, new_state = pep_handle(
            request,
            agreement,
            self.usage[key],
            self.service,
            self.log,
            revoked=state.phase is NegotiationPhase.REVOKED,
        )
        self.usage[key] = new_state
        self.decisions.append(
            {
                "at": at.isoformat(),
                "offer": offer_id,
                "action": action.value,
                "outcome": outcome.outcome.value,
                "reason": outcome.reason,
            }
        )
        if ongoing and outcome.outcome is EnforcementOutcome.ALLOWED:
            self._usage_counter += 1
            self.ongoing[key].append(
                OngoingUsage(
                    id=f"u{self._usage_counter}",
                    requester=requester,
                    action=action,
                    target=target,
                    started_at=at,
                )
            )
        return outcome

    def close_usage(self, usage_id: str, at: datetime) -> bool:
        for key, usages in self.ongoing.items():
            for usage in usages:
                if usage.id == usage_id:
                    usages.remove(usage)
                    self.usage[key] = self.usage[key].with_connection_released(
                        usage.requester, usage.action
                    )
                    return True
        return False

    def add_evidence(
        self,
        actor: Iri,
        action: Iri,
        target: Iri | None,
        at: datetime,
        attributes: Mapping[str, str] | None = None,
    ):
        return record_evidence(self.log, actor, action, target, at, attributes)

    def monitor(self, now: datetime) -> list[RevocationEvent]:
        events: list[RevocationEvent] = []
        for offer_id, state in self.negotiations.items():
            if state.agreement is None:
                continue
            key = state.agreement.uid.value
            usages = self.ongoing.get(key, [])
            if not usages:
                continue
            step_events = continuous_monitor_step(
                usages, state.agreement, self.service, now, self.log
            )
            revoked_ids = {event.usage_id for event in step_events}
            for usage in [u for u in usages if u.id in revoked_ids]:
                usages.remove(usage)
                self.usage[key] = self.usage[key].with_connection_released(
                    usage.requester, usage.action
                )
            events.extend(step_events)
        self.revocations.extend(events)
        return events

    def finish(self, now: datetime, window_start: datetime | None = None) -> list[ObligationStatus]:
        statuses: list[ObligationStatus] = []
        for state in self.negotiations.values():
            if state.agreement is None:
                continue
            statuses.extend(
                detective_check(
                    state.agreement,
                    self.log,
                    now,
                    service=self.service,
                    window_start=window_start,
                )
            )
        return statuses


@dataclass(frozen=True)
class SimulationResult:
    log: AuditLog
    obligations: tuple[ObligationStatus, ...]
    revocations: tuple[RevocationEvent, ...]
    negotiations: Mapping[str, NegotiationState]
    decisions: tuple[dict, ...]

    def report(self, scenario_name: str = "") -> dict:
        return {
            "scenario": scenario_name,
            "negotiations": {
                key: state.phase.value for key, state in sorted(self.negotiations.items())
            },
            "decisions": list(self.decisions),
            "obligations": [
                {
                    "action": status.duty.action.action.value,
                    "target": status.duty.target.value if status.duty.target else None,
                    "status": status.status.value,
                    "deadline": status.deadline.isoformat() if status.deadline else None,
                    "fulfilled_at": status.fulfilled_at.isoformat()
                    if status.fulfilled_at
                    else None,
                    "detail": status.detail,
                }
                for status in self.obligations
            ],
            "revocations": [
                {"usage": event.usage_id, "at": event.at.isoformat(), "reason": event.reason}
                for event in self.revocations
            ],
        }


def build_service(scenario: Scenario, clock: LogicalClock) -> AttributeService:
    providers = [ClockProvider(lambda: clock.now)]
    if scenario.consumer_attributes:
        values = {
            (operand, scenario.consumer): literal
            for operand, literal in scenario.consumer_attributes.items()
        }
        providers.append(StaticAttributeProvider(values))
    if scenario.attestations:
        providers.append(
            AttestationClaimProvider(scenario.attestations, scenario.issuer_keys)
        )
    return AttributeService(providers, RegionHierarchy(scenario.region_hierarchy))


def _step_actor(scenario: Scenario, raw: object) -> Iri:
    if raw == "provider":
        return scenario.provider
    if raw == "consumer" or raw is None:
        return scenario.consumer
    return expand_curie(str(raw))


def run(scenario: Scenario) -> SimulationResult:
    """Replay the scenario deterministically.

    Script steps execute at the first clock tick at or after their
    timestamp; continuous monitoring runs every tick; detective checking
    runs once at scenario end.
    """
    validate_scenario(scenario)
    clock = LogicalClock(scenario.clock_start)
    service = build_service(scenario, clock)
    offers = {offer.id: build_offer(scenario, offer) for offer in scenario.offers}
    connector = ProviderConnector(
        scenario.provider,
        offers,
        service,
        default_credit=scenario.default_credit,
        currency=scenario.currency,
    )

    steps = list(scenario.script)
    cursor = 0
    now = scenario.clock_start
    while True:
        clock.advance_to(now)
        while cursor < len(steps) and steps[cursor].at <= now:
            _execute_step(scenario, connector, steps[cursor], now)
            cursor += 1
        connector.monitor(now)
        if now >= scenario.end:
            break
        now = min(now + scenario.clock_step, scenario.end)

    obligations = connector.finish(scenario.end, window_start=scenario.clock_start)
    return SimulationResult(
        log=connector.log,
        obligations=tuple(obligations),
        revocations=tuple(connector.revocations),
        negotiations=dict(connector.negotiations),
        decisions=tuple(connector.decisions),
    )


def _execute_step(
    scenario: Scenario, connector: ProviderConnector, step: ScriptStep, now: datetime
) -> None:
    args = step.args
    if step.action == "negotiate":
        connector.negotiate(
            str(args["offer"]), scenario.consumer, accept=bool(args.get("accept", True))
        )
    elif step.action == "revoke":
        connector.revoke(str(args["offer"]))
    elif step.action == "request":
        attributes = {
            expand_curie(key): TypedLiteral(str(value))
            for key, value in dict(args.get("attributes", {})).items()
        }
        connector.handle_request(
            str(args["offer"]),
            scenario.consumer,
            expand_curie(str(args.get("action", "odrl:read"))),
            now,
            units=int(args.get("units", 1)),
            attributes=attributes,
            ongoing=bool(args.get("ongoing", False)),
        )
    elif step.action == "report-evidence":
        target = args.get("target")
        connector.add_evidence(
            _step_actor(scenario, args.get("actor")),
            expand_curie(str(args["action"])),
            expand_curie(str(target)) if target else None,
            now,
            attributes={str(k): str(v) for k, v in dict(args.get("attributes", {})).items()},
        )
    elif step.action == "close":
        connector.close_usage(str(args["usage"]), now)
    elif step.action == "skip-duty":
        pass  # documents a deliberately unfulfilled duty; nothing happens
    else:
        raise ScenarioError(f"unknown script action {step.action!r}")
