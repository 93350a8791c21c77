from __future__ import annotations

import io
import random
from datetime import datetime, timedelta, timezone
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import duty_status, window_is_fresh
from usagectl import vocab
from usagectl.enforcement import (
    AuditLog,
    AuditOutcome,
    EnforcementOutcome,
    ObligationState,
    OngoingUsage,
    check_up_to_dateness,
    continuous_monitor_step,
    detective_check,
    pep_handle,
    record_evidence,
)
from usagectl.model import Iri, TypedLiteral, as_agreement
from usagectl.patterns import combine, instantiate
from usagectl.pdp import AccessRequest, UsageState
from usagectl.pip import (
    AttestationClaimProvider,
    AttributeService,
    RegionHierarchy,
    issue_attestation,
)

from conftest import CONSUMER_IRI, FILE1, PROVIDER_IRI

T0 = datetime(2023, 7, 1, tzinfo=timezone.utc)
READ = vocab.ODRL_READ
DEADLINE = datetime(2023, 7, 10, tzinfo=timezone.utc)
EMPTY_SERVICE = AttributeService()

COMMON = {
    "target": FILE1.value,
    "assigner": PROVIDER_IRI.value,
    "assignee": CONSUMER_IRI.value,
}


def _request(at: datetime = T0, action: Iri = READ, attributes=None) -> AccessRequest:
    return AccessRequest(CONSUMER_IRI, FILE1, action, at, 1, attributes or {})


def _corpus_agreement(provider_bundle):
    return as_agreement(provider_bundle)


class TestAuditLog:
    def test_sequence_strictly_increasing(self):
        log = AuditLog()
        for i in range(5):
            record = log.append(T0, CONSUMER_IRI, READ, FILE1, AuditOutcome.EXECUTED, str(i))
            assert record.seq == i + 1
        assert [r.seq for r in log.records] == [1, 2, 3, 4, 5]

    def test_records_snapshot_is_immutable(self):
        log = AuditLog()
        log.append(T0, CONSUMER_IRI, READ, FILE1, AuditOutcome.EXECUTED)
        snapshot = log.records
        log.append(T0, CONSUMER_IRI, READ, FILE1, AuditOutcome.EXECUTED)
        assert len(snapshot) == 1
        assert isinstance(snapshot, tuple)

    def test_ndjson_round_trip(self):
        log = AuditLog()
        log.append(T0, CONSUMER_IRI, READ, FILE1, AuditOutcome.PERMITTED, "x")
        log.append(T0 + timedelta(seconds=5), CONSUMER_IRI, vocab.ODRL_DELETE, None,
                   AuditOutcome.EXECUTED)
        text = log.dumps()
        assert len(text.splitlines()) == 2
        restored = AuditLog.loads(text)
        assert restored.records == log.records
        buffer = io.StringIO()
        log.dump(buffer)
        assert buffer.getvalue() == text

    def test_rejects_non_increasing_sequence(self):
        record = AuditLog().append(T0, CONSUMER_IRI, READ, FILE1, AuditOutcome.EXECUTED)
        with pytest.raises(ValueError):
            AuditLog([record, record])

    @given(st.lists(st.sampled_from(list(AuditOutcome)), max_size=30))
    @settings(max_examples=50)
    def test_append_only_property(self, outcomes):
        log = AuditLog()
        seen: list[tuple] = []
        for i, outcome in enumerate(outcomes):
            log.append(T0 + timedelta(seconds=i), CONSUMER_IRI, READ, FILE1, outcome)
            current = [(r.seq, r.outcome) for r in log.records]
            assert current[: len(seen)] == seen  # existing records never change
            assert len(current) == len(seen) + 1
            seen = current
        sequences = [r.seq for r in log.records]
        assert sequences == sorted(set(sequences))


class TestRecordEvidence:
    def test_appends_executed_record(self):
        log = AuditLog()
        record = record_evidence(
            log, CONSUMER_IRI, vocab.ODRL_DELETE, FILE1,
            datetime(2023, 7, 8, tzinfo=timezone.utc),
        )
        assert record.outcome is AuditOutcome.EXECUTED
        assert record.actor == CONSUMER_IRI

    def test_duplicates_are_kept(self):
        log = AuditLog()
        record_evidence(log, CONSUMER_IRI, vocab.ODRL_DELETE, FILE1, T0)
        record_evidence(log, CONSUMER_IRI, vocab.ODRL_DELETE, FILE1, T0)
        assert len(log.records) == 2

    def test_out_of_order_report_is_flagged(self):
        log = AuditLog()
        record_evidence(log, CONSUMER_IRI, vocab.ODRL_DELETE, FILE1, T0)
        record = record_evidence(
            log, CONSUMER_IRI, vocab.ODRL_ANONYMIZE, FILE1, T0 - timedelta(hours=1)
        )
        assert "out_of_order" in record.detail


class TestPepHandle:
    def test_compliant_request_is_permitted_and_audited(self, provider_bundle):
        agreement = _corpus_agreement(provider_bundle)
        log = AuditLog()
        action, state = pep_handle(_request(), agreement, UsageState(), EMPTY_SERVICE, log)
        assert action.outcome is EnforcementOutcome.ALLOWED
        assert {d.action.action for d in action.duties} == {
            vocab.ODRL_DELETE, vocab.ODRL_ANONYMIZE,
        }
        assert [r.outcome for r in log.records] == [
            AuditOutcome.PERMITTED, AuditOutcome.EXECUTED,
        ]
        assert state.record_for(CONSUMER_IRI, READ).executed_count == 1

    def test_revoked_agreement_blocks(self, provider_bundle):
        agreement = _corpus_agreement(provider_bundle)
        log = AuditLog()
        action, state = pep_handle(
            _request(), agreement, UsageState(), EMPTY_SERVICE, log, revoked=True
        )
        assert action.outcome is EnforcementOutcome.BLOCKED
        assert log.records[-1].outcome is AuditOutcome.REVOKED
        assert state.record_for(CONSUMER_IRI, READ).executed_count == 0

    def test_denied_request_is_audited(self, provider_bundle):
        agreement = _corpus_agreement(provider_bundle)
        log = AuditLog()
        stranger = AccessRequest(
            Iri("https://www.example.com/stranger"), FILE1, READ, T0
        )
        action, _ = pep_handle(stranger, agreement, UsageState(), EMPTY_SERVICE, log)
        assert action.outcome is EnforcementOutcome.BLOCKED
        assert log.records[-1].outcome is AuditOutcome.DENIED

    def test_missing_attestation_fails_closed(self):
        claim = "http://example.com/claims/member"
        policy = instantiate("provable-attribute", {**COMMON, "claim": claim,
                                                    "action": READ.value})
        agreement = as_agreement(policy)
        log = AuditLog()
        action, _ = pep_handle(_request(), agreement, UsageState(), EMPTY_SERVICE, log)
        assert action.outcome is EnforcementOutcome.BLOCKED
        assert log.records[-1].outcome is AuditOutcome.DENIED

    def test_valid_attestation_admits(self):
        claim = Iri("http://example.com/claims/member")
        issuer = Iri("https://certifiers.example/authority")
        key = b"k"
        attestation = issue_attestation(
            issuer, CONSUMER_IRI, claim, TypedLiteral("yes"), T0 + timedelta(days=1), key
        )
        service = AttributeService([AttestationClaimProvider([attestation], {issuer: key})])
        policy = instantiate("provable-attribute", {**COMMON, "claim": claim.value,
                                                    "action": READ.value})
        agreement = as_agreement(policy)
        action, _ = pep_handle(_request(), agreement, UsageState(), service, AuditLog())
        assert action.outcome is EnforcementOutcome.ALLOWED

    def test_billing_charges_and_blocks_without_credit(self):
        policy = instantiate(
            "billing", {**COMMON, "amount": "2.50", "grant_action": READ.value}
        )
        agreement = as_agreement(policy)
        log = AuditLog()
        state = UsageState(default_credit=Decimal("4"))
        action, state = pep_handle(_request(), agreement, state, EMPTY_SERVICE, log)
        assert action.outcome is EnforcementOutcome.ALLOWED
        assert state.record_for(CONSUMER_IRI, READ).credit_balance == Decimal("1.50")
        assert any(r.outcome is AuditOutcome.DUTY_FULFILLED for r in log.records)
        # second access cannot be paid for
        action, state = pep_handle(
            _request(at=T0 + timedelta(minutes=1)), agreement, state, EMPTY_SERVICE, log
        )
        assert action.outcome is EnforcementOutcome.BLOCKED
        assert "insufficient credit" in log.records[-1].detail

    def test_pre_duty_delays_until_evidence(self):
        grant = instantiate("allow-access", {**COMMON, "action": READ.value})
        quality = instantiate(
            "data-quality",
            {
                "shape": "http://example.com/shacl-shape",
                "assigner": CONSUMER_IRI.value,
                "assignee": PROVIDER_IRI.value,
            },
        )
        agreement = as_agreement(combine([grant, quality]))
        log = AuditLog()
        action, _ = pep_handle(_request(), agreement, UsageState(), EMPTY_SERVICE, log)
        assert action.outcome is EnforcementOutcome.DELAYED
        assert log.records[-1].outcome is AuditOutcome.DELAYED
        assert action.duties[0].action.action == vocab.DSP_QUALITY_CONTROL
        # provider reports the quality-control run; the request now goes through
        record_evidence(
            log, PROVIDER_IRI, vocab.DSP_QUALITY_CONTROL, None, T0,
            attributes={vocab.DSP_CONFORMS_TO.value: "http://example.com/shacl-shape"},
        )
        action, _ = pep_handle(
            _request(at=T0 + timedelta(seconds=30)), agreement, UsageState(),
            EMPTY_SERVICE, log,
        )
        assert action.outcome is EnforcementOutcome.ALLOWED


def _deletion_agreement():
    policy = combine(
        [
            instantiate(
                "data-amount",
                {**COMMON, "unit": "MiB", "max_amount": 1024, "action": READ.value},
            ),
            instantiate(
                "deletion",
                {**COMMON, "deadline": "2023-07-10T00:00:00Z", "grant_action": READ.value},
            ),
            instantiate("anonymization", {**COMMON, "grant_action": READ.value}),
        ],
        uid=Iri("http://example.com/policies/bundle"),
    )
    return as_agreement(policy)


def _exercised_log() -> AuditLog:
    log = AuditLog()
    log.append(T0, CONSUMER_IRI, READ, FILE1, AuditOutcome.PERMITTED)
    log.append(T0, CONSUMER_IRI, READ, FILE1, AuditOutcome.EXECUTED)
    return log


class TestDetectiveCheck:
    def test_delete_before_deadline_is_fulfilled(self):
        agreement = _deletion_agreement()
        log = _exercised_log()
        record_evidence(
            log, CONSUMER_IRI, vocab.ODRL_DELETE, FILE1,
            datetime(2023, 7, 8, tzinfo=timezone.utc),
        )
        statuses = {
            s.duty.action.action: s for s in detective_check(agreement, log, DEADLINE)
        }
        assert statuses[vocab.ODRL_DELETE].status is ObligationState.FULFILLED
        assert statuses[vocab.ODRL_DELETE].fulfilled_at == datetime(
            2023, 7, 8, tzinfo=timezone.utc
        )

    def test_missing_delete_after_deadline_is_violated(self):
        agreement = _deletion_agreement()
        log = _exercised_log()
        now = datetime(2023, 7, 11, tzinfo=timezone.utc)
        statuses = {s.duty.action.action: s for s in detective_check(agreement, log, now)}
        assert statuses[vocab.ODRL_DELETE].status is ObligationState.VIOLATED
        assert statuses[vocab.ODRL_DELETE].deadline == DEADLINE

    def test_late_delete_still_violated(self):
        agreement = _deletion_agreement()
        log = _exercised_log()
        record_evidence(
            log, CONSUMER_IRI, vocab.ODRL_DELETE, FILE1,
            datetime(2023, 7, 12, tzinfo=timezone.utc),
        )
        now = datetime(2023, 7, 13, tzinfo=timezone.utc)
        statuses = {s.duty.action.action: s for s in detective_check(agreement, log, now)}
        assert statuses[vocab.ODRL_DELETE].status is ObligationState.VIOLATED

    def test_anonymization_is_evidence_gated(self):
        agreement = _deletion_agreement()
        log = _exercised_log()
        statuses = {s.duty.action.action: s for s in detective_check(agreement, log, T0)}
        assert statuses[vocab.ODRL_ANONYMIZE].status is ObligationState.PENDING
        record_evidence(log, CONSUMER_IRI, vocab.ODRL_ANONYMIZE, FILE1, T0)
        statuses = {s.duty.action.action: s for s in detective_check(agreement, log, T0)}
        assert statuses[vocab.ODRL_ANONYMIZE].status is ObligationState.FULFILLED

    def test_unexercised_permission_activates_no_duties(self):
        agreement = _deletion_agreement()
        assert detective_check(agreement, AuditLog(), DEADLINE) == []

    def test_contradicting_storage_evidence_is_violated(self):
        policy = instantiate(
            "location-storage", {**COMMON, "region": "EU", "grant_action": READ.value}
        )
        agreement = as_agreement(policy)
        service = AttributeService(regions=RegionHierarchy({"EU": ["AT"], "NA": ["US"]}))
        log = _exercised_log()
        record_evidence(
            log, CONSUMER_IRI, vocab.DSP_STORE, FILE1, T0,
            attributes={vocab.DSP_STORAGE_REGION.value: "US"},
        )
        statuses = detective_check(agreement, log, T0, service=service)
        assert statuses[0].status is ObligationState.VIOLATED
        assert "contradicts" in statuses[0].detail

    def test_compliant_storage_evidence_is_fulfilled(self):
        policy = instantiate(
            "location-storage", {**COMMON, "region": "EU", "grant_action": READ.value}
        )
        agreement = as_agreement(policy)
        service = AttributeService(regions=RegionHierarchy({"EU": ["AT"], "NA": ["US"]}))
        log = _exercised_log()
        record_evidence(
            log, CONSUMER_IRI, vocab.DSP_STORE, FILE1, T0,
            attributes={vocab.DSP_STORAGE_REGION.value: "AT"},
        )
        statuses = detective_check(agreement, log, T0, service=service)
        assert statuses[0].status is ObligationState.FULFILLED

    def test_idempotent(self):
        agreement = _deletion_agreement()
        log = _exercised_log()
        now = datetime(2023, 7, 11, tzinfo=timezone.utc)
        assert detective_check(agreement, log, now) == detective_check(agreement, log, now)

    def test_no_fulfilled_to_violated_transition(self):
        agreement = _deletion_agreement()
        log = _exercised_log()
        record_evidence(
            log, CONSUMER_IRI, vocab.ODRL_DELETE, FILE1,
            datetime(2023, 7, 8, tzinfo=timezone.utc),
        )
        checkpoints = [
            datetime(2023, 7, 9, tzinfo=timezone.utc),
            datetime(2023, 7, 11, tzinfo=timezone.utc),
            datetime(2023, 8, 1, tzinfo=timezone.utc),
        ]
        previous: dict = {}
        for now in checkpoints:
            statuses = {
                repr(s.duty.action.action): s.status
                for s in detective_check(agreement, log, now)
            }
            for key, status in statuses.items():
                if previous.get(key) is ObligationState.FULFILLED:
                    assert status is ObligationState.FULFILLED
            previous = statuses

    def test_randomized_logs_match_naive_scan(self):
        rng = random.Random(20230710)
        agreement = _deletion_agreement()
        actors = [CONSUMER_IRI.value, PROVIDER_IRI.value, "https://other.example/x"]
        actions = [vocab.ODRL_DELETE.value, vocab.ODRL_ANONYMIZE.value, READ.value]
        targets = [FILE1.value, "http://example.com/files/file2"]
        for _ in range(500):
            log = _exercised_log()
            evidence: list[tuple[datetime, str, str, str]] = []
            for _ in range(rng.randrange(6)):
                at = T0 + timedelta(hours=rng.randrange(0, 400))
                actor = rng.choice(actors)
                action = rng.choice(actions)
                target = rng.choice(targets)
                record_evidence(log, Iri(actor), Iri(action), Iri(target), at)
                evidence.append((at, actor, action, target))
            now = T0 + timedelta(hours=rng.randrange(0, 500))
            statuses = {
                s.duty.action.action.value: s.status.value
                for s in detective_check(agreement, log, now)
            }
            assert statuses[vocab.ODRL_DELETE.value] == duty_status(
                evidence, CONSUMER_IRI.value, vocab.ODRL_DELETE.value, FILE1.value,
                DEADLINE, now,
            )
            assert statuses[vocab.ODRL_ANONYMIZE.value] == duty_status(
                evidence, CONSUMER_IRI.value, vocab.ODRL_ANONYMIZE.value, FILE1.value,
                None, now,
            )


class TestUpToDateness:
    WINDOW = (T0, T0 + timedelta(minutes=5))

    def test_regular_updates_fulfil(self):
        events = [T0 + timedelta(seconds=30 * i) for i in range(1, 10)]
        status = check_up_to_dateness(events, timedelta(seconds=30), self.WINDOW)
        assert status.status is ObligationState.FULFILLED

    def test_single_gap_violates(self):
        events = [T0 + timedelta(seconds=s) for s in (30, 60, 105, 135, 165, 195, 225, 255, 285)]
        status = check_up_to_dateness(events, timedelta(seconds=30), self.WINDOW)
        assert status.status is ObligationState.VIOLATED
        assert "gap" in status.detail

    def test_empty_events_violate_nonempty_window(self):
        status = check_up_to_dateness([], timedelta(seconds=30), self.WINDOW)
        assert status.status is ObligationState.VIOLATED

    def test_agrees_with_oracle(self):
        rng = random.Random(5)
        window = (T0, T0 + timedelta(minutes=5))
        for _ in range(200):
            events = sorted(
                T0 + timedelta(seconds=rng.randrange(0, 300))
                for _ in range(rng.randrange(0, 15))
            )
            interval = timedelta(seconds=rng.choice([15, 30, 60, 120]))
            status = check_up_to_dateness(events, interval, window)
            expected = window_is_fresh(events, interval, *window)
            assert (status.status is ObligationState.FULFILLED) == expected

    def test_detective_check_uses_window_start(self, consumer_bundle):
        agreement = as_agreement(consumer_bundle, assigner=CONSUMER_IRI, assignee=PROVIDER_IRI)
        log = AuditLog()
        for i in range(1, 11):
            record_evidence(log, PROVIDER_IRI, vocab.DSP_UPDATE, FILE1,
                            T0 + timedelta(seconds=30 * i))
        now = T0 + timedelta(minutes=5)
        statuses = {
            s.duty.action.action: s
            for s in detective_check(agreement, log, now, window_start=T0)
        }
        assert statuses[vocab.DSP_UPDATE].status is ObligationState.FULFILLED


class TestContinuousMonitoring:
    def _time_limited_agreement(self):
        policy = instantiate(
            "time-restriction",
            {**COMMON, "start": "2023-07-01T00:00:00Z", "end": "2023-07-01T01:00:00Z",
             "action": READ.value},
        )
        return as_agreement(policy)

    def test_expired_window_revokes(self):
        agreement = self._time_limited_agreement()
        usage = OngoingUsage("u1", CONSUMER_IRI, READ, FILE1, T0)
        log = AuditLog()
        past_end = T0 + timedelta(hours=2)
        events = continuous_monitor_step([usage], agreement, EMPTY_SERVICE, past_end, log)
        assert [e.usage_id for e in events] == ["u1"]
        assert log.records[-1].outcome is AuditOutcome.REVOKED

    def test_all_satisfied_is_quiet(self):
        agreement = self._time_limited_agreement()
        usage = OngoingUsage("u1", CONSUMER_IRI, READ, FILE1, T0)
        log = AuditLog()
        events = continuous_monitor_step(
            [usage], agreement, EMPTY_SERVICE, T0 + timedelta(minutes=30), log
        )
        assert events == []
        assert len(log.records) == 0

    def test_connection_overflow_revokes_newest_first(self):
        policy = instantiate(
            "concurrent-connections",
            {**COMMON, "max_connections": 2, "action": READ.value},
        )
        agreement = as_agreement(policy)
        usages = [
            OngoingUsage("u1", CONSUMER_IRI, READ, FILE1, T0),
            OngoingUsage("u2", CONSUMER_IRI, READ, FILE1, T0 + timedelta(seconds=10)),
            OngoingUsage("u3", CONSUMER_IRI, READ, FILE1, T0 + timedelta(seconds=20)),
        ]
        log = AuditLog()
        events = continuous_monitor_step(
            usages, agreement, EMPTY_SERVICE, T0 + timedelta(minutes=1), log
        )
        assert [e.usage_id for e in events] == ["u3"]

    def test_location_change_revokes_and_notifies(self):
        policy = combine(
            [
                instantiate(
                    "location-access",
                    {**COMMON, "region": "EU", "action": READ.value},
                ),
                instantiate(
                    "activity-logging", {**COMMON, "grant_action": READ.value}
                ),
            ]
        )
        agreement = as_agreement(policy)
        from usagectl.pip import StaticAttributeProvider

        moved = AttributeService(
            [StaticAttributeProvider(
                {(vocab.ODRL_SPATIAL, CONSUMER_IRI): TypedLiteral("US")}
            )],
            RegionHierarchy({"EU": ["AT"], "NA": ["US"]}),
        )
        usage = OngoingUsage("u1", CONSUMER_IRI, READ, FILE1, T0)
        log = AuditLog()
        events = continuous_monitor_step([usage], agreement, moved, T0, log)
        assert len(events) == 1
        outcomes = [r.outcome for r in log.records]
        assert AuditOutcome.REVOKED in outcomes
        assert AuditOutcome.NOTIFIED in outcomes
