from __future__ import annotations

import itertools

from cookietrail.crawllog import (
    CookieSet,
    HttpRequest,
    Interaction,
    SentCookieObservation,
    VisitEnd,
    VisitStart,
    parse_log_text,
    serialize,
)
from cookietrail.detector import (
    Detector,
    IntractableFinding,
    channel_split,
    classify_cookie,
    detect_reset,
    detect_sync,
    is_simple_value,
    match_sent_to_jar,
    syncable_value,
)
from cookietrail.filterlist import TrackerDomainSet
from cookietrail.jar import CookieJar
from cookietrail.model import (
    Channel,
    CookieKey,
    CookieRecord,
    InteractionAction,
    InteractionStage,
    Iteration,
    Phase,
    VisitOutcome,
)
from cookietrail.psl import Party, load_psl

from test_jar import make_record

RULES = load_psl("com\nnet\nexample\n")
TRACKERS = TrackerDomainSet(frozenset({"tracker.net", "other-tracker.com", "shop.com"}))


def obs(name="id", value="123", target="cdn.tracker.net", sender="new.com",
        stage=InteractionStage.BEFORE_INTERACTION, channel=Channel.RESOURCE_FETCH,
        visit_id="v1", event_index=0) -> SentCookieObservation:
    return SentCookieObservation(name, value, target, sender, stage, channel, visit_id, event_index)


def jar_with(*records: CookieRecord) -> CookieJar:
    jar = CookieJar()
    for record in records:
        jar.upsert(record)
    return jar


class TestClassifyCookie:
    def test_third_party_tracking(self):
        flags = classify_cookie(make_record(host="tracker.net"), "shop.com", RULES, TRACKERS)
        assert flags.party is Party.THIRD_PARTY and flags.is_tracking

    def test_first_party_tracking_permitted(self):
        flags = classify_cookie(make_record(host="shop.com"), "shop.com", RULES, TRACKERS)
        assert flags.party is Party.FIRST_PARTY and flags.is_tracking

    def test_first_party_not_tracking(self):
        empty = TrackerDomainSet(frozenset())
        flags = classify_cookie(make_record(host="cdn.shop.com"), "shop.com", RULES, empty)
        assert flags.party is Party.FIRST_PARTY and not flags.is_tracking


class TestMatchSentToJar:
    def test_domain_match_on_subdomain_target(self):
        jar = jar_with(make_record("id", "tracker.net", value="123"))
        assert match_sent_to_jar(obs(target="a.tracker.net"), jar) == CookieKey("id", "tracker.net")

    def test_partitioned_entries_never_match(self):
        jar = jar_with(make_record("id", "tracker.net", partition="shop.com", value="123"))
        assert match_sent_to_jar(obs(target="tracker.net"), jar) is None

    def test_value_tie_break_wins_over_host_length(self):
        jar = jar_with(
            make_record("id", "tracker.net", value="123"),
            make_record("id", "a.tracker.net", value="999", set_at=1),
        )
        # Target a.tracker.net domain-matches both entries; the value match
        # must win even though the other host is shorter.
        got = match_sent_to_jar(obs(value="999", target="a.tracker.net"), jar)
        assert got == CookieKey("id", "a.tracker.net")
        got = match_sent_to_jar(obs(value="123", target="a.tracker.net"), jar)
        assert got == CookieKey("id", "tracker.net")

    def test_longest_host_among_equal_values(self):
        jar = jar_with(
            make_record("id", "tracker.net", value="same"),
            make_record("id", "a.tracker.net", value="same", set_at=1),
        )
        got = match_sent_to_jar(obs(value="same", target="b.a.tracker.net"), jar)
        assert got == CookieKey("id", "a.tracker.net")

    def test_no_candidate(self):
        jar = jar_with(make_record("id", "tracker.net"))
        assert match_sent_to_jar(obs(name="zz"), jar) is None
        assert match_sent_to_jar(obs(target="unrelated.org"), jar) is None

    def test_selection_invariant_under_insertion_order(self):
        """Brute force: result is identical for every insertion order of candidates."""
        records = [
            make_record("id", "tracker.net", value="123"),
            make_record("id", "a.tracker.net", value="999"),
            make_record("id", "b.a.tracker.net", value="999"),
            make_record("other", "a.tracker.net", value="999"),
        ]
        probes = [
            obs(value="999", target="b.a.tracker.net"),
            obs(value="123", target="a.tracker.net"),
            obs(value="zzz", target="x.b.a.tracker.net"),
        ]
        for probe in probes:
            results = set()
            for order in itertools.permutations(range(len(records))):
                jar = CookieJar()
                for position, i in enumerate(order):
                    jar.upsert(
                        make_record(
                            records[i].key.name,
                            records[i].key.host,
                            value=records[i].value,
                            set_at=position,
                        )
                    )
                results.add(match_sent_to_jar(probe, jar))
            assert len(results) == 1, (probe, results)


def _reject_visit_events(visit_id="v1", site="new.com", header="id=123",
                         target="cdn.tracker.net", outcome=VisitOutcome.REJECTED,
                         stage=InteractionStage.BEFORE_INTERACTION):
    events = [
        VisitStart(visit_id, site, 5, Phase.STATELESS_MEASURE, Iteration.REJECT_ITER, False),
    ]
    if stage is InteractionStage.BEFORE_INTERACTION:
        events.append(
            HttpRequest(visit_id, stage, target, f"https://{target}/px", Channel.RESOURCE_FETCH, header)
        )
    if outcome is VisitOutcome.REJECTED:
        events.append(Interaction(visit_id, InteractionAction.REJECT_CLICKED, InteractionStage.AFTER_REJECT))
        events.append(Interaction(visit_id, InteractionAction.RELOAD, InteractionStage.AFTER_RELOADED_REJECT))
        if stage is InteractionStage.AFTER_RELOADED_REJECT:
            events.append(
                HttpRequest(visit_id, stage, target, f"https://{target}/px", Channel.RESOURCE_FETCH, header)
            )
    events.append(VisitEnd(visit_id, outcome))
    return events


class TestDetect:
    def test_definitional_case_yields_one_finding(self):
        jar = jar_with(make_record("id", "tracker.net", value="123", setter="basic.com"))
        jar.mark_accepted("basic.com")
        events = parse_log_text(serialize(_reject_visit_events()))
        result = Detector(RULES, TRACKERS).detect(jar, events)
        assert len(result.canonical_findings) == 1
        finding = result.canonical_findings[0]
        assert finding.key == CookieKey("id", "tracker.net")
        assert finding.sender_site == "new.com"
        assert finding.tracker_domain == "tracker.net"
        assert finding.setter_sites == ("basic.com",)
        assert finding.stage is InteractionStage.BEFORE_INTERACTION

    def test_empty_jar_no_findings(self):
        events = parse_log_text(serialize(_reject_visit_events()))
        result = Detector(RULES, TRACKERS).detect(CookieJar(), events)
        assert result.findings == []

    def test_send_only_after_reload_is_staged_not_canonical(self):
        jar = jar_with(make_record("id", "tracker.net", value="123"))
        events = parse_log_text(
            serialize(_reject_visit_events(stage=InteractionStage.AFTER_RELOADED_REJECT))
        )
        # The builder emits a BEFORE request only for BEFORE stage, so here the
        # only send happens after reload.
        result = Detector(RULES, TRACKERS).detect(jar, events)
        canonical = result.canonical_findings
        staged = result.staged_findings
        assert canonical == []
        assert len(staged) == 1 and staged[0].stage is InteractionStage.AFTER_RELOADED_REJECT

    def test_failed_rejection_excluded_from_canonical(self):
        jar = jar_with(make_record("id", "tracker.net", value="123"))
        events = parse_log_text(
            serialize(_reject_visit_events(outcome=VisitOutcome.INTERACTION_FAILED))
        )
        result = Detector(RULES, TRACKERS).detect(jar, events)
        assert result.canonical_findings == []
        assert len(result.staged_findings) == 1
        assert result.stats.failed_rejections == 1

    def test_non_tracking_match_not_a_finding(self):
        jar = jar_with(make_record("pref", "benign.example", value="1"))
        events = parse_log_text(
            serialize(_reject_visit_events(header="pref=1", target="benign.example"))
        )
        result = Detector(RULES, TRACKERS).detect(jar, events)
        assert result.findings == []
        assert result.stats.non_tracking_matches == 1

    def test_send_only_at_after_accept_is_staged(self):
        jar = jar_with(make_record("id", "tracker.net", value="123"))
        events = [
            VisitStart("a1", "new.com", 5, Phase.STATELESS_MEASURE, Iteration.ACCEPT_ITER, False),
            Interaction("a1", InteractionAction.ACCEPT_CLICKED, InteractionStage.AFTER_ACCEPT),
            HttpRequest(
                "a1",
                InteractionStage.AFTER_ACCEPT,
                "cdn.tracker.net",
                "https://cdn.tracker.net/px",
                Channel.RESOURCE_FETCH,
                "id=123",
            ),
            VisitEnd("a1", VisitOutcome.ACCEPTED),
        ]
        result = Detector(RULES, TRACKERS).detect(jar, parse_log_text(serialize(events)))
        assert result.canonical_findings == []
        assert [f.stage for f in result.staged_findings] == [InteractionStage.AFTER_ACCEPT]

    def test_accept_iteration_before_sends_not_canonical(self):
        jar = jar_with(make_record("id", "tracker.net", value="123"))
        events = [
            VisitStart("a1", "new.com", 5, Phase.STATELESS_MEASURE, Iteration.ACCEPT_ITER, False),
            HttpRequest(
                "a1",
                InteractionStage.BEFORE_INTERACTION,
                "cdn.tracker.net",
                "https://cdn.tracker.net/px",
                Channel.RESOURCE_FETCH,
                "id=123",
            ),
            Interaction("a1", InteractionAction.ACCEPT_CLICKED, InteractionStage.AFTER_ACCEPT),
            VisitEnd("a1", VisitOutcome.ACCEPTED),
        ]
        result = Detector(RULES, TRACKERS).detect(jar, parse_log_text(serialize(events)))
        assert result.canonical_findings == []
        assert len(result.staged_findings) == 1

    def test_subset_and_uniques_identity(self):
        jar = jar_with(
            make_record("id", "tracker.net", value="1", setter="a.com"),
            make_record("sid", "tracker.net", value="2", setter="a.com", set_at=1),
            make_record("unsent", "tracker.net", value="3", setter="a.com", set_at=2),
        )
        events = parse_log_text(serialize(_reject_visit_events(header="id=1; sid=2")))
        result = Detector(RULES, TRACKERS).detect(jar, events)
        canonical = result.canonical_findings
        finding_keys = {f.key for f in canonical}
        assert finding_keys <= set(jar.entries)
        flagged = {
            key for key in jar.entries
            if (key.name, key.host) in {(f.key.name, f.key.host) for f in canonical}
        }
        assert {(k.name, k.host) for k in finding_keys} == {(k.name, k.host) for k in flagged}


class TestDetectReset:
    def _events_with_set(self, set_header="id=123; Domain=.tracker.net; Max-Age=60", context="cdn.tracker.net"):
        events = _reject_visit_events()
        events.insert(
            2,
            CookieSet("v1", InteractionStage.BEFORE_INTERACTION, set_header, context),
        )
        return parse_log_text(serialize(events))

    def _finding(self, **kwargs):
        base = dict(
            key=CookieKey("id", "tracker.net"),
            value_at_send="123",
            sender_site="new.com",
            tracker_domain="tracker.net",
            setter_sites=("basic.com",),
            stage=InteractionStage.BEFORE_INTERACTION,
            channel=Channel.RESOURCE_FETCH,
            visit_id="v1",
            event_index=1,
            canonical=True,
        )
        base.update(kwargs)
        return IntractableFinding(**base)

    def test_reset_detected(self):
        events = self._events_with_set()
        resets = detect_reset([self._finding()], events)
        assert len(resets) == 1
        assert resets[0].key == CookieKey("id", "tracker.net")
        assert resets[0].sender_site == "new.com"

    def test_unrelated_set_ignored(self):
        events = self._events_with_set(set_header="unrelated=1")
        assert detect_reset([self._finding()], events) == []

    def test_two_senders_two_resets(self):
        first = _reject_visit_events(visit_id="v1", site="s1.com")
        second = _reject_visit_events(visit_id="v2", site="s2.com")
        for visit in (first, second):
            visit.insert(
                2,
                CookieSet(
                    visit[0].visit_id,
                    InteractionStage.BEFORE_INTERACTION,
                    "id=9; Domain=.tracker.net; Max-Age=60",
                    "cdn.tracker.net",
                ),
            )
        events = parse_log_text(serialize(first + second))
        findings = [
            self._finding(visit_id="v1", sender_site="s1.com"),
            self._finding(visit_id="v2", sender_site="s2.com"),
        ]
        resets = detect_reset(findings, events)
        assert len(resets) == 2
        assert {r.sender_site for r in resets} == {"s1.com", "s2.com"}

    def test_non_canonical_findings_ignored(self):
        events = self._events_with_set()
        assert detect_reset([self._finding(canonical=False)], events) == []


class TestDetectSync:
    def _finding(self, value, **kwargs):
        base = dict(
            key=CookieKey("id", "tracker.net"),
            value_at_send=value,
            sender_site="new.com",
            tracker_domain="tracker.net",
            setter_sites=("basic.com",),
            stage=InteractionStage.BEFORE_INTERACTION,
            channel=Channel.RESOURCE_FETCH,
            visit_id="v1",
            event_index=1,
            canonical=True,
        )
        base.update(kwargs)
        return IntractableFinding(**base)

    def _events_with_redirect(self, url, target_host):
        events = _reject_visit_events()
        events.insert(
            2,
            HttpRequest(
                "v1",
                InteractionStage.BEFORE_INTERACTION,
                target_host,
                url,
                Channel.RESOURCE_FETCH,
                "",
                redirect_parent_url="https://cdn.tracker.net/px",
            ),
        )
        return parse_log_text(serialize(events))

    def test_sync_to_other_tracker(self):
        value = "AbCdEf123456"
        events = self._events_with_redirect(
            f"https://other-tracker.com/?uid={value}", "other-tracker.com"
        )
        syncs = detect_sync([self._finding(value)], events, RULES, TRACKERS)
        assert len(syncs) == 1
        sync = syncs[0]
        assert sync.origin_tracker == "tracker.net"
        assert sync.destination_tracker == "other-tracker.com"
        assert sync.parameter_name == "uid"

    def test_simple_values_excluded(self):
        events = self._events_with_redirect("https://other-tracker.com/?uid=true", "other-tracker.com")
        assert detect_sync([self._finding("true")], events, RULES, TRACKERS) == []

    def test_same_tracker_destination_excluded(self):
        value = "AbCdEf123456"
        events = self._events_with_redirect(f"https://a.tracker.net/?uid={value}", "a.tracker.net")
        assert detect_sync([self._finding(value)], events, RULES, TRACKERS) == []

    def test_non_redirect_requests_ignored(self):
        value = "AbCdEf123456"
        events = _reject_visit_events(header="")
        events.insert(
            2,
            HttpRequest(
                "v1",
                InteractionStage.BEFORE_INTERACTION,
                "other-tracker.com",
                f"https://other-tracker.com/?uid={value}",
                Channel.RESOURCE_FETCH,
                "",
            ),
        )
        parsed = parse_log_text(serialize(events))
        assert detect_sync([self._finding(value)], parsed, RULES, TRACKERS) == []

    def test_long_digit_values_still_sync(self):
        # Longer than ten characters is identifier-like even when numeric.
        value = "123456789012345"
        events = self._events_with_redirect(f"https://other-tracker.com/?x={value}", "other-tracker.com")
        assert len(detect_sync([self._finding(value)], events, RULES, TRACKERS)) == 1


class TestSimpleValues:
    def test_literals(self):
        for value in ["YES", "NO", "true", "false", "0", "1"]:
            assert is_simple_value(value)

    def test_short_numbers(self):
        assert is_simple_value("1234567890")
        assert not is_simple_value("12345678901")

    def test_syncable_requires_length(self):
        assert not syncable_value("shortvalue")
        assert syncable_value("AbCdEf123456")


class TestChannelSplit:
    def _finding(self, channel, i):
        return IntractableFinding(
            key=CookieKey("id", "tracker.net"),
            value_at_send="x",
            sender_site="s.com",
            tracker_domain="tracker.net",
            setter_sites=(),
            stage=InteractionStage.BEFORE_INTERACTION,
            channel=channel,
            visit_id=f"v{i}",
            event_index=i,
            canonical=True,
        )

    def test_all_resource(self):
        split = channel_split([self._finding(Channel.RESOURCE_FETCH, i) for i in range(4)])
        assert (split.resource_fraction, split.api_fraction) == (1.0, 0.0)

    def test_empty(self):
        split = channel_split([])
        assert split.empty and split.resource_fraction == 0.0 and split.api_fraction == 0.0

    def test_73_27_mix(self):
        findings = [self._finding(Channel.RESOURCE_FETCH, i) for i in range(73)]
        findings += [self._finding(Channel.API_CALL, 100 + i) for i in range(27)]
        split = channel_split(findings)
        assert (round(split.resource_fraction, 2), round(split.api_fraction, 2)) == (0.73, 0.27)
        assert split.resource_fraction + split.api_fraction == 1.0
