"""Classify cookies and detect cross-site transmission, resets, and syncing.

A finding is *canonical* when the cookie was sent before any banner
interaction on a visit whose banner was later successfully rejected; sends
matched at other stages (or on other visits) are kept for stage analysis
with ``canonical=False``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping
from urllib.parse import parse_qsl, urlsplit

from .crawllog import (
    CookieSet,
    CrawlEvent,
    HttpRequest,
    SentCookieObservation,
    VisitSummary,
    extract_sent,
    parse_set_cookie,
    summarize_visits,
)
from .errors import InputError, ParseIssue
from .filterlist import TrackerDomainSet, is_tracker
from .jar import CookieJar
from .model import (
    Channel,
    CookieKey,
    CookieRecord,
    InteractionStage,
    Iteration,
    Phase,
    SiteId,
    VisitOutcome,
    domain_match,
)
from .psl import Party, PslRuleSet, etld_plus_one, party_of


@dataclass(frozen=True)
class CookieFlags:
    party: Party
    is_tracking: bool


def classify_cookie(
    record: CookieRecord,
    visit_site: SiteId,
    rules: PslRuleSet,
    trackers: TrackerDomainSet,
) -> CookieFlags:
    """Party and tracking flags for one cookie on one visit.

    First- and third-party cookies are both eligible to be tracking cookies;
    the tracking flag depends only on the blocklist match of the host.
    """
    return CookieFlags(
        party=party_of(record.key.host, visit_site, rules),
        is_tracking=is_tracker(record.key.host, trackers),
    )


def match_sent_to_jar(obs: SentCookieObservation, jar: CookieJar) -> CookieKey | None:
    """Find the jar entry a sent cookie came from, or None.

    Candidates share the cookie name, are not partitioned (partitioned
    entries never travel cross-site), and their host domain-matches the
    request target.  Ties prefer an exact value match, then the longest
    host; the final host tie-break is lexicographic for determinism.
    """
    best: tuple[tuple[int, int, str], CookieKey] | None = None
    for key, record in jar.entries.items():
        if key.partition is not None or key.name != obs.name:
            continue
        if not domain_match(obs.target_host, key.host):
            continue
        rank = (0 if record.value == obs.value else 1, -len(key.host), key.host)
        if best is None or rank < best[0]:
            best = (rank, key)
    return best[1] if best else None


@dataclass(frozen=True)
class IntractableFinding:
    """One matched (jar entry, transmission) pair."""

    key: CookieKey
    value_at_send: str
    sender_site: SiteId
    tracker_domain: SiteId
    setter_sites: tuple[SiteId, ...]
    stage: InteractionStage
    channel: Channel
    visit_id: str
    event_index: int
    canonical: bool


@dataclass(frozen=True)
class ResetFinding:
    key: CookieKey
    sender_site: SiteId
    event_index: int


@dataclass(frozen=True)
class SyncFinding:
    source_key: CookieKey
    carrying_url: str
    origin_tracker: SiteId
    destination_tracker: SiteId
    parameter_name: str


@dataclass
class DetectionStats:
    visits: int = 0
    rejected_visits: int = 0
    failed_rejections: int = 0
    observations: int = 0
    unmatched_observations: int = 0
    non_tracking_matches: int = 0


@dataclass
class DetectionResult:
    findings: list[IntractableFinding]
    resets: list[ResetFinding]
    syncs: list[SyncFinding]
    stats: DetectionStats
    issues: list[ParseIssue] = field(default_factory=list)

    @property
    def canonical_findings(self) -> list[IntractableFinding]:
        return [f for f in self.findings if f.canonical]

    @property
    def staged_findings(self) -> list[IntractableFinding]:
        return [f for f in self.findings if not f.canonical]


def _is_canonical(obs: SentCookieObservation, visit: VisitSummary) -> bool:
    return (
        visit.phase is Phase.STATELESS_MEASURE
        and visit.iteration is Iteration.REJECT_ITER
        and visit.outcome is VisitOutcome.REJECTED
        and obs.stage is InteractionStage.BEFORE_INTERACTION
    )


def detect_intractable(
    jar: CookieJar,
    observations: Iterable[SentCookieObservation],
    visits: Mapping[str, VisitSummary],
    rules: PslRuleSet,
    trackers: TrackerDomainSet,
    *,
    issues: list[ParseIssue] | None = None,
    stats: DetectionStats | None = None,
) -> list[IntractableFinding]:
    """Match measure-phase sends against the jar and label each finding's stage.

    Only tracking cookies (blocklist match on the jar host) yield findings.
    Findings keep event order, so the output is deterministic however the
    observations were produced.
    """
    findings: list[IntractableFinding] = []
    for obs in observations:
        visit = visits[obs.visit_id]
        if visit.phase is not Phase.STATELESS_MEASURE:
            continue
        if stats is not None:
            stats.observations += 1
        key = match_sent_to_jar(obs, jar)
        if key is None:
            if stats is not None:
                stats.unmatched_observations += 1
            continue
        if not is_tracker(key.host, trackers):
            if stats is not None:
                stats.non_tracking_matches += 1
            continue
        try:
            tracker_domain = etld_plus_one(key.host, rules)
        except InputError as exc:
            if issues is not None:
                issues.append(ParseIssue(exc.code, f"cookie host {key.host!r}: {exc.message}"))
            continue
        findings.append(
            IntractableFinding(
                key=key,
                value_at_send=obs.value,
                sender_site=obs.sender_site,
                tracker_domain=tracker_domain,
                setter_sites=jar.setters_of(key),
                stage=obs.stage,
                channel=obs.channel,
                visit_id=obs.visit_id,
                event_index=obs.event_index,
                canonical=_is_canonical(obs, visit),
            )
        )
    return findings


def detect_reset(
    findings: Iterable[IntractableFinding],
    events: Iterable[CrawlEvent],
) -> list[ResetFinding]:
    """Canonical findings whose key is re-set within the sender's own visit."""
    per_visit_keys: dict[str, dict[CookieKey, SiteId]] = {}
    for finding in findings:
        if finding.canonical:
            per_visit_keys.setdefault(finding.visit_id, {})[finding.key] = finding.sender_site
    resets: list[ResetFinding] = []
    for event in events:
        if not isinstance(event, CookieSet):
            continue
        keys = per_visit_keys.get(event.visit_id)
        if not keys:
            continue
        try:
            fragment = parse_set_cookie(event.set_cookie_header, event.setter_context_host)
        except InputError:
            continue
        set_key = CookieKey(fragment.name, fragment.host, None)
        if fragment.partitioned or set_key not in keys:
            continue
        resets.append(ResetFinding(set_key, keys[set_key], event.event_index))
    return resets


_SIMPLE_LITERALS = frozenset({"YES", "NO", "true", "false", "0", "1"})


def is_simple_value(value: str) -> bool:
    """Preference-style values excluded from sync detection (flags, short numbers)."""
    return value in _SIMPLE_LITERALS or (value.isdigit() and len(value) <= 10)


def syncable_value(value: str) -> bool:
    return len(value) > 10 and not is_simple_value(value)


def detect_sync(
    findings: Iterable[IntractableFinding],
    events: Iterable[CrawlEvent],
    rules: PslRuleSet,
    trackers: TrackerDomainSet,
) -> list[SyncFinding]:
    """Identifier-looking cookie values reappearing in redirect URL parameters.

    A sync is recorded when a canonical finding's value shows up verbatim as
    a query-parameter value of a redirect target whose registrable domain is
    a different tracker.
    """
    by_value: dict[str, list[IntractableFinding]] = {}
    for finding in findings:
        if finding.canonical and syncable_value(finding.value_at_send):
            by_value.setdefault(finding.value_at_send, []).append(finding)
    if not by_value:
        return []
    syncs: list[SyncFinding] = []
    seen: set[SyncFinding] = set()
    for event in events:
        if not isinstance(event, HttpRequest) or event.redirect_parent_url is None:
            continue
        try:
            destination = etld_plus_one(event.target_host, rules)
        except InputError:
            continue
        if not is_tracker(event.target_host, trackers):
            continue
        params = parse_qsl(urlsplit(event.target_url).query, keep_blank_values=True)
        for name, value in params:
            for finding in by_value.get(value, ()):
                if destination == finding.tracker_domain:
                    continue
                sync = SyncFinding(
                    source_key=finding.key,
                    carrying_url=event.target_url,
                    origin_tracker=finding.tracker_domain,
                    destination_tracker=destination,
                    parameter_name=name,
                )
                if sync not in seen:
                    seen.add(sync)
                    syncs.append(sync)
    return syncs


@dataclass(frozen=True)
class ChannelSplit:
    resource_fraction: float
    api_fraction: float
    empty: bool = False


def channel_split(findings: Iterable[IntractableFinding]) -> ChannelSplit:
    """Fraction of findings sent while fetching resources vs. script API calls."""
    resource = api = 0
    for finding in findings:
        if finding.channel is Channel.RESOURCE_FETCH:
            resource += 1
        else:
            api += 1
    total = resource + api
    if total == 0:
        return ChannelSplit(0.0, 0.0, empty=True)
    return ChannelSplit(resource / total, api / total)


class Detector:
    """Bundles the rule inputs and runs the full detection pass over a log."""

    def __init__(self, rules: PslRuleSet, trackers: TrackerDomainSet):
        self.rules = rules
        self.trackers = trackers

    def detect(self, jar: CookieJar, events: Iterable[CrawlEvent]) -> DetectionResult:
        events = list(events)
        visits = summarize_visits(events)
        stats = DetectionStats()
        issues: list[ParseIssue] = []
        for visit in visits.values():
            if visit.phase is not Phase.STATELESS_MEASURE:
                continue
            stats.visits += 1
            if visit.iteration is Iteration.REJECT_ITER:
                if visit.outcome is VisitOutcome.REJECTED:
                    stats.rejected_visits += 1
                elif visit.outcome is VisitOutcome.INTERACTION_FAILED:
                    stats.failed_rejections += 1
        observations = extract_sent(events, issues=issues)
        findings = detect_intractable(
            jar, observations, visits, self.rules, self.trackers, issues=issues, stats=stats
        )
        resets = detect_reset(findings, events)
        syncs = detect_sync(findings, events, self.rules, self.trackers)
        return DetectionResult(findings=findings, resets=resets, syncs=syncs, stats=stats, issues=issues)
