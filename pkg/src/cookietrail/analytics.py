"""Aggregate findings into report tables and figure datasets.

All reports are deterministic functions of their inputs.  Unless a report
says otherwise, "unique" means grouped by cookie (name, host), averages are
means, and five-number summaries accompany any mean that summarizes a
per-site distribution.
"""

from __future__ import annotations

import enum
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Collection, Iterable, Mapping, Sequence

from .detector import IntractableFinding
from .errors import InputError
from .filterlist import TrackerDomainSet, is_tracker
from .jar import CookieJar
from .model import BannerType, SiteId
from .psl import PslRuleSet, etld_plus_one

DAY = 86400.0


class ExpiryBucket(enum.Enum):
    SESSION = "SESSION"
    D1 = "D1"  # <= 1 day
    D10 = "D10"  # (1 day, 10 days]
    M3 = "M3"  # (10 days, 90 days]
    Y1 = "Y1"  # (90 days, 365 days]
    OVER_Y1 = "OVER_Y1"  # > 365 days


class SetterBucket(enum.Enum):
    EXACTLY_ONE = "EXACTLY_ONE"
    LE_0_1_PCT = "LE_0_1_PCT"
    LE_1_PCT = "LE_1_PCT"
    LE_10_PCT = "LE_10_PCT"
    GT_10_PCT = "GT_10_PCT"


def expiry_bucket(original_expiry: float | None) -> ExpiryBucket:
    """Bucket a lifetime (seconds; None for session cookies)."""
    if original_expiry is None:
        return ExpiryBucket.SESSION
    if original_expiry <= 1 * DAY:
        return ExpiryBucket.D1
    if original_expiry <= 10 * DAY:
        return ExpiryBucket.D10
    if original_expiry <= 90 * DAY:
        return ExpiryBucket.M3
    if original_expiry <= 365 * DAY:
        return ExpiryBucket.Y1
    return ExpiryBucket.OVER_Y1


def setter_bucket(setter_count: int, accepted_count: int) -> SetterBucket:
    """Bucket a renewal count: set-once is its own row, the rest by share of accepted sites."""
    if setter_count <= 1:
        return SetterBucket.EXACTLY_ONE
    pct = 100.0 * setter_count / accepted_count if accepted_count else 100.0
    if pct <= 0.1:
        return SetterBucket.LE_0_1_PCT
    if pct <= 1.0:
        return SetterBucket.LE_1_PCT
    if pct <= 10.0:
        return SetterBucket.LE_10_PCT
    return SetterBucket.GT_10_PCT


def ecdf(values: Iterable[float]) -> list[tuple[float, float]]:
    """Step points of the empirical CDF; the last fraction is exactly 1."""
    ordered = sorted(values)
    total = len(ordered)
    if total == 0:
        return []
    points: list[tuple[float, float]] = []
    seen = 0
    for i, x in enumerate(ordered):
        seen += 1
        if i + 1 == total or ordered[i + 1] != x:
            points.append((x, seen / total))
    return points


@dataclass(frozen=True)
class FiveNumberSummary:
    count: int
    mean: float
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


def five_number_summary(values: Sequence[float]) -> FiveNumberSummary | None:
    if not values:
        return None
    ordered = sorted(values)
    if len(ordered) == 1:
        x = ordered[0]
        return FiveNumberSummary(1, x, x, x, x, x, x)
    q1, median, q3 = statistics.quantiles(ordered, n=4, method="inclusive")
    return FiveNumberSummary(
        len(ordered), statistics.fmean(ordered), ordered[0], q1, median, q3, ordered[-1]
    )


# --- expiry / renewal heatmap ------------------------------------------------


@dataclass(frozen=True)
class HeatmapCell:
    expiry_bucket: ExpiryBucket
    setter_bucket: SetterBucket
    count: int


def renewal_heatmap(
    jar: CookieJar,
    findings: Iterable[IntractableFinding],
    accepted_count: int,
) -> list[HeatmapCell]:
    """Unique intractable cookies by lifetime and by how many sites set them.

    Emits the full grid (zero cells included); cell counts sum to the number
    of unique intractable keys.
    """
    unique_keys = {f.key for f in findings if f.canonical}
    counts: Counter[tuple[ExpiryBucket, SetterBucket]] = Counter()
    for key in unique_keys:
        record = jar.entries[key]
        cell = (
            expiry_bucket(record.original_expiry),
            setter_bucket(len(jar.setters_of(key)), accepted_count),
        )
        counts[cell] += 1
    return [
        HeatmapCell(eb, sb, counts.get((eb, sb), 0))
        for eb in ExpiryBucket
        for sb in SetterBucket
    ]


# --- tracker table ------------------------------------------------------------


@dataclass(frozen=True)
class TrackerRow:
    tracker_domain: SiteId
    total_cookies: int
    unique_cookies: int
    senders: int


def tracker_table(findings: Iterable[IntractableFinding]) -> list[TrackerRow]:
    """Per-tracker totals over canonical findings, sorted by sender count."""
    total: Counter[SiteId] = Counter()
    uniques: dict[SiteId, set[tuple[str, str]]] = defaultdict(set)
    senders: dict[SiteId, set[SiteId]] = defaultdict(set)
    for f in findings:
        if not f.canonical:
            continue
        total[f.tracker_domain] += 1
        uniques[f.tracker_domain].add((f.key.name, f.key.host))
        senders[f.tracker_domain].add(f.sender_site)
    rows = [
        TrackerRow(domain, total[domain], len(uniques[domain]), len(senders[domain]))
        for domain in total
    ]
    rows.sort(key=lambda r: (-r.senders, r.tracker_domain))
    return rows


# --- rank tiers ----------------------------------------------------------------


@dataclass(frozen=True)
class RankTierRow:
    cutoff: int
    avg_sent: float | None
    avg_set: float | None
    sent_sites: int
    set_sites: int

    @property
    def empty_tier(self) -> bool:
        return self.sent_sites == 0 and self.set_sites == 0


def rank_tier_averages(
    findings: Iterable[IntractableFinding],
    jar: CookieJar,
    tiers: Sequence[int],
    *,
    site_ranks: Mapping[SiteId, int],
    rejected_sites: Collection[SiteId],
) -> list[RankTierRow]:
    """Average cookies sent per rejected site and set per accepted site, per top-N tier.

    ``avg_sent`` averages canonical findings over rejected sites whose rank is
    within the cutoff; ``avg_set`` averages intractable-cookie writes (jar
    history rows for intractable keys) over accepted sites in the cutoff.
    """
    canonical = [f for f in findings if f.canonical]
    sent_per_site: Counter[SiteId] = Counter()
    for f in canonical:
        sent_per_site[f.sender_site] += 1
    intractable_keys = {f.key for f in canonical}
    set_per_site: Counter[SiteId] = Counter()
    for row in jar.history:
        if not row.deleted and row.key in intractable_keys:
            set_per_site[row.setter_site] += 1
    rows = []
    for cutoff in tiers:
        senders = [s for s in rejected_sites if s in site_ranks and site_ranks[s] <= cutoff]
        setters = [s for s in jar.accepted_sites if s in site_ranks and site_ranks[s] <= cutoff]
        avg_sent = statistics.fmean(sent_per_site[s] for s in senders) if senders else None
        avg_set = statistics.fmean(set_per_site[s] for s in setters) if setters else None
        rows.append(RankTierRow(cutoff, avg_sent, avg_set, len(senders), len(setters)))
    return rows


# --- banner types ---------------------------------------------------------------


@dataclass(frozen=True)
class PaywallShareRow:
    threshold: int  # sites sending <= threshold canonical findings
    site_fraction: float
    paywall_share: float | None  # None when those sites sent nothing


@dataclass(frozen=True)
class BannerTypeReport:
    cmp_avg: float | None
    native_avg: float | None
    ratio: float | None  # None when either average is unavailable or native is 0
    cmp_sites: int
    native_sites: int
    paywall_shares: list[PaywallShareRow]


def banner_type_report(
    findings: Iterable[IntractableFinding],
    *,
    sender_banner_types: Mapping[SiteId, BannerType],
    rejected_sites: Collection[SiteId],
    paywall_setters: Collection[SiteId],
) -> BannerTypeReport:
    """Compare cookie volume across banner types of the rejected sender sites.

    ``paywall_shares``: for each distinct per-site finding count k, among the
    rejected sites sending at most k cookies, the fraction of their findings
    that were set (at least once) by a site with a cookie-paywall banner.
    """
    canonical = [f for f in findings if f.canonical]
    per_site: Counter[SiteId] = Counter()
    for f in canonical:
        per_site[f.sender_site] += 1
    cmp_counts = [per_site[s] for s in rejected_sites if sender_banner_types.get(s) is BannerType.CMP]
    native_counts = [per_site[s] for s in rejected_sites if sender_banner_types.get(s) is BannerType.NATIVE]
    cmp_avg = statistics.fmean(cmp_counts) if cmp_counts else None
    native_avg = statistics.fmean(native_counts) if native_counts else None
    ratio = None
    if cmp_avg is not None and native_avg is not None and native_avg > 0:
        ratio = cmp_avg / native_avg

    paywall_setters = set(paywall_setters)
    site_count = len(rejected_sites)
    shares: list[PaywallShareRow] = []
    if site_count:
        thresholds = sorted({per_site[s] for s in rejected_sites})
        for threshold in thresholds:
            covered = {s for s in rejected_sites if per_site[s] <= threshold}
            their_findings = [f for f in canonical if f.sender_site in covered]
            if their_findings:
                with_paywall = sum(
                    1 for f in their_findings if paywall_setters.intersection(f.setter_sites)
                )
                share = with_paywall / len(their_findings)
            else:
                share = None
            shares.append(PaywallShareRow(threshold, len(covered) / site_count, share))
    return BannerTypeReport(cmp_avg, native_avg, ratio, len(cmp_counts), len(native_counts), shares)


# --- GPC -------------------------------------------------------------------------


@dataclass(frozen=True)
class GpcReport:
    reduction_fraction: float
    overlap_with_reloaded_reject: float | None
    empty_baseline: bool = False


def _unique_keys(findings: Iterable[IntractableFinding]) -> set[tuple[str, str]]:
    return {(f.key.name, f.key.host) for f in findings}


def gpc_report(
    baseline_findings: Iterable[IntractableFinding],
    gpc_findings: Iterable[IntractableFinding],
    reloaded_reject_findings: Iterable[IntractableFinding],
) -> GpcReport:
    """Reduction from enabling the do-not-share signal, plus reload overlap.

    Reduction compares canonical finding counts between a matched baseline
    run and the signal-enabled run; overlap is on unique keys between the
    signal run and the baseline's after-reload sends.
    """
    baseline = [f for f in baseline_findings if f.canonical]
    gpc = [f for f in gpc_findings if f.canonical]
    reloaded = list(reloaded_reject_findings)
    if not baseline:
        return GpcReport(0.0, None, empty_baseline=True)
    reduction = 1.0 - len(gpc) / len(baseline)
    gpc_keys = _unique_keys(gpc)
    overlap = None
    if gpc_keys:
        overlap = len(gpc_keys & _unique_keys(reloaded)) / len(gpc_keys)
    return GpcReport(reduction, overlap)


# --- partitioned cookies -----------------------------------------------------------


@dataclass(frozen=True)
class PartitionedSummary:
    total_unique: int
    partitioned: int
    tracking_unique: int
    tracking_partitioned: int
    along_with_np: int


def partitioned_summary(
    jar: CookieJar,
    trackers: TrackerDomainSet,
    rules: PslRuleSet,
) -> PartitionedSummary:
    """Unique-cookie counts by partitioned and tracking status.

    ``along_with_np`` counts partitioned tracking cookies accompanied by a
    non-partitioned tracking cookie from the same registrable domain.
    """
    def registrable(host: str) -> SiteId | None:
        try:
            return etld_plus_one(host, rules)
        except InputError:
            return None

    groups: dict[tuple[str, str], bool] = {}
    np_tracking_domains: set[SiteId] = set()
    for key in jar.entries:
        group = (key.name, key.host)
        partitioned = key.partition is not None
        groups[group] = groups.get(group, False) or partitioned
        if not partitioned and is_tracker(key.host, trackers):
            domain = registrable(key.host)
            if domain is not None:
                np_tracking_domains.add(domain)
    total_unique = len(groups)
    partitioned_count = sum(1 for flagged in groups.values() if flagged)
    tracking_groups = {g: flagged for g, flagged in groups.items() if is_tracker(g[1], trackers)}
    tracking_partitioned = [g for g, flagged in tracking_groups.items() if flagged]
    along = sum(1 for _, host in tracking_partitioned if registrable(host) in np_tracking_domains)
    return PartitionedSummary(
        total_unique=total_unique,
        partitioned=partitioned_count,
        tracking_unique=len(tracking_groups),
        tracking_partitioned=len(tracking_partitioned),
        along_with_np=along,
    )
