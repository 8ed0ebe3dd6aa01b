"""Deterministic web-ecosystem simulator with an independent ground-truth oracle.

``generate`` turns a declarative ecosystem description into a crawl log:
an accept-everything stateful pass over the phase-1 sites, then per phase-2
site a reject iteration (reject, reload) and an accept iteration.  The
simulated browser attaches stored cookies whose host domain-matches the
request target and whose partition, if any, equals the visited site.

``ground_truth`` computes the cookies the detector must report by direct
enumeration over the configuration, sharing only the seeded derivation
discipline (and the banner-planning rules) with ``generate``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from . import _rand
from .errors import InputError
from .model import (
    BannerDescriptor,
    BannerLayer,
    BannerType,
    ButtonAction,
    Channel,
    CookieKey,
    InteractionAction,
    InteractionStage,
    Iteration,
    Phase,
    SiteId,
    VisitOutcome,
    canonicalize_host,
    domain_match,
)
from .crawllog import (
    BannerObserved,
    CookieSet,
    CrawlEvent,
    HttpRequest,
    Interaction,
    VisitEnd,
    VisitStart,
    banner_from_obj,
    banner_to_obj,
)

# --- banner interaction planning ---------------------------------------------


class RejectionOutcome(enum.Enum):
    REJECTED = "REJECTED"
    FAILED = "FAILED"
    ACCEPT_RISK = "ACCEPT_RISK"


@dataclass(frozen=True)
class PlannedClick:
    layer: int
    label: str
    action: ButtonAction


@dataclass(frozen=True)
class RejectionPlan:
    clicks: tuple[PlannedClick, ...]
    outcome: RejectionOutcome


@dataclass(frozen=True)
class SynonymTable:
    """Button labels that count as reject / save actions, case-insensitive."""

    reject: frozenset[str]
    save: frozenset[str]

    @classmethod
    def load_default(cls) -> "SynonymTable":
        text = resources.files("cookietrail").joinpath("data/reject_synonyms.json").read_text("utf-8")
        return cls.from_obj(json.loads(text))

    @classmethod
    def from_path(cls, path: str | Path) -> "SynonymTable":
        return cls.from_obj(json.loads(Path(path).read_text("utf-8")))

    @classmethod
    def from_obj(cls, obj: dict) -> "SynonymTable":
        return cls(
            reject=frozenset(label.casefold() for label in obj.get("reject", [])),
            save=frozenset(label.casefold() for label in obj.get("save", [])),
        )


_DEFAULT_SYNONYMS: SynonymTable | None = None


def default_synonyms() -> SynonymTable:
    global _DEFAULT_SYNONYMS
    if _DEFAULT_SYNONYMS is None:
        _DEFAULT_SYNONYMS = SynonymTable.load_default()
    return _DEFAULT_SYNONYMS


def _find_button(layer: BannerLayer, action: ButtonAction, labels: frozenset[str] = frozenset()):
    for button in layer.buttons:
        if button.action is action or button.label.casefold().strip() in labels:
            return button
    return None


def plan_rejection(banner: BannerDescriptor, synonyms: SynonymTable | None = None) -> RejectionPlan:
    """Plan the clicks needed to reject a banner without ever accepting.

    The main layer is tried first for a direct reject button.  Otherwise the
    settings layer is opened and searched for a reject button, then for a
    save-style button; saving counts as rejection only while every
    non-essential toggle is preselected off, otherwise the plan is flagged
    ACCEPT_RISK.
    """
    if banner.banner_type is BannerType.NONE:
        raise InputError("INVALID_CONFIG", "cannot plan rejection for a missing banner")
    synonyms = synonyms or default_synonyms()
    main = banner.layers[0] if banner.layers else BannerLayer()
    reject_btn = _find_button(main, ButtonAction.REJECT)
    if reject_btn is not None:
        return RejectionPlan((PlannedClick(0, reject_btn.label, ButtonAction.REJECT),), RejectionOutcome.REJECTED)
    settings_btn = _find_button(main, ButtonAction.SETTINGS)
    if settings_btn is None or len(banner.layers) < 2:
        return RejectionPlan((), RejectionOutcome.FAILED)
    clicks = [PlannedClick(0, settings_btn.label, ButtonAction.SETTINGS)]
    settings = banner.layers[1]
    deep_reject = _find_button(settings, ButtonAction.REJECT, synonyms.reject)
    if deep_reject is not None:
        clicks.append(PlannedClick(1, deep_reject.label, ButtonAction.REJECT))
        return RejectionPlan(tuple(clicks), RejectionOutcome.REJECTED)
    save_btn = _find_button(settings, ButtonAction.SAVE, synonyms.save)
    if save_btn is None:
        return RejectionPlan((), RejectionOutcome.FAILED)
    clicks.append(PlannedClick(1, save_btn.label, ButtonAction.SAVE))
    risky = any(t.preselected and not t.essential for t in settings.toggles)
    outcome = RejectionOutcome.ACCEPT_RISK if risky else RejectionOutcome.REJECTED
    return RejectionPlan(tuple(clicks), outcome)


def can_accept(banner: BannerDescriptor) -> bool:
    """True when the main layer offers a direct accept button."""
    if banner.banner_type is BannerType.NONE or not banner.layers:
        return False
    return _find_button(banner.layers[0], ButtonAction.ACCEPT) is not None


# --- ecosystem configuration ----------------------------------------------------


class EmbedLoadPolicy(enum.Enum):
    ALWAYS = "ALWAYS"  # fires pre-consent and again on reload / after accept
    PRE_CONSENT_ONLY = "PRE_CONSENT_ONLY"  # initial page load only (and its reload)
    POST_ACCEPT_ONLY = "POST_ACCEPT_ONLY"  # consent-gated, never pre-consent


@dataclass(frozen=True)
class ValueGenerator:
    kind: str = "hex"  # hex | digits | const
    length: int = 16
    const: str = ""

    def generate(self, seed: int, tracker: str, name: str, setter: str) -> str:
        if self.kind == "hex":
            return _rand.hex_token(seed, "cookie-value", tracker, name, setter, length=self.length)
        if self.kind == "digits":
            return _rand.digit_token(seed, "cookie-value", tracker, name, setter, length=self.length)
        if self.kind == "const":
            return self.const
        raise InputError("INVALID_CONFIG", f"unknown value generator kind {self.kind!r}")


@dataclass(frozen=True)
class CookieSpec:
    name: str
    value: ValueGenerator = ValueGenerator()
    lifetime: int | None = 365 * 86400  # whole seconds; None = session cookie


@dataclass(frozen=True)
class TrackerSpec:
    domain: SiteId
    cookies: tuple[CookieSpec, ...]
    honors_gpc: bool = False
    sets_partitioned: bool = False
    sync_partners: tuple[SiteId, ...] = ()
    drop_after_reject_prob: float = 0.0
    resets_on_send: bool = False
    listed: bool = True  # present in the tracker filter list handed to the detector


@dataclass(frozen=True)
class EmbedSpec:
    tracker: SiteId
    policy: EmbedLoadPolicy = EmbedLoadPolicy.ALWAYS
    channel: Channel = Channel.RESOURCE_FETCH


@dataclass(frozen=True)
class SiteSpec:
    site: SiteId
    rank: int
    banner: BannerDescriptor
    embeds: tuple[EmbedSpec, ...] = ()
    paywall: bool = False


@dataclass(frozen=True)
class Schedule:
    phase1: tuple[SiteId, ...]
    phase2: tuple[SiteId, ...]
    gpc_enabled: bool = False


@dataclass(frozen=True)
class EcosystemConfig:
    sites: tuple[SiteSpec, ...]
    trackers: tuple[TrackerSpec, ...]
    schedule: Schedule

    def validate(self) -> None:
        site_names = [s.site for s in self.sites]
        if len(set(site_names)) != len(site_names):
            raise InputError("INVALID_CONFIG", "duplicate site entries")
        tracker_names = [t.domain for t in self.trackers]
        if len(set(tracker_names)) != len(tracker_names):
            raise InputError("INVALID_CONFIG", "duplicate tracker entries")
        known_sites = set(site_names)
        known_trackers = set(tracker_names)
        overlap = set(self.schedule.phase1) & set(self.schedule.phase2)
        if overlap:
            raise InputError("INVALID_CONFIG", f"phase lists overlap: {sorted(overlap)}")
        for scheduled in (*self.schedule.phase1, *self.schedule.phase2):
            if scheduled not in known_sites:
                raise InputError("INVALID_CONFIG", f"scheduled site {scheduled!r} is not defined")
        for site in self.sites:
            if site.rank < 1:
                raise InputError("INVALID_CONFIG", f"{site.site}: rank must be positive")
            if site.paywall != (site.banner.banner_type is BannerType.PAYWALL):
                raise InputError("INVALID_CONFIG", f"{site.site}: paywall flag disagrees with banner type")
            for embed in site.embeds:
                if embed.tracker not in known_trackers:
                    raise InputError("INVALID_CONFIG", f"{site.site}: embedded tracker {embed.tracker!r} is not defined")
            if len({e.tracker for e in site.embeds}) != len(site.embeds):
                raise InputError("INVALID_CONFIG", f"{site.site}: duplicate tracker embeds")
        for tracker in self.trackers:
            if not 0.0 <= tracker.drop_after_reject_prob <= 1.0:
                raise InputError("INVALID_CONFIG", f"{tracker.domain}: drop probability outside [0, 1]")
            if not tracker.cookies:
                raise InputError("INVALID_CONFIG", f"{tracker.domain}: tracker defines no cookies")
            for partner in tracker.sync_partners:
                if partner not in known_trackers:
                    raise InputError("INVALID_CONFIG", f"{tracker.domain}: sync partner {partner!r} is not defined")

    def site(self, name: SiteId) -> SiteSpec:
        return self._site_index[name]

    def tracker(self, name: SiteId) -> TrackerSpec:
        return self._tracker_index[name]

    def __post_init__(self):
        object.__setattr__(self, "_site_index", {s.site: s for s in self.sites})
        object.__setattr__(self, "_tracker_index", {t.domain: t for t in self.trackers})

    def listed_tracker_domains(self) -> list[SiteId]:
        return sorted(t.domain for t in self.trackers if t.listed)

    # --- JSON form --------------------------------------------------------

    @classmethod
    def from_json(cls, text: str) -> "EcosystemConfig":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError("INVALID_CONFIG", f"config is not valid JSON: {exc.msg}") from None
        return cls.from_obj(obj)

    @classmethod
    def from_obj(cls, obj: dict) -> "EcosystemConfig":
        try:
            sites = tuple(
                SiteSpec(
                    site=canonicalize_host(s["site"]),
                    rank=s["rank"],
                    banner=banner_from_obj(s["banner"]),
                    embeds=tuple(
                        EmbedSpec(
                            tracker=canonicalize_host(e["tracker"]),
                            policy=EmbedLoadPolicy[e.get("policy", "ALWAYS")],
                            channel=Channel[e.get("channel", "RESOURCE_FETCH")],
                        )
                        for e in s.get("embeds", [])
                    ),
                    paywall=bool(s.get("paywall", False)),
                )
                for s in obj["sites"]
            )
            trackers = tuple(
                TrackerSpec(
                    domain=canonicalize_host(t["domain"]),
                    cookies=tuple(
                        CookieSpec(
                            name=c["name"],
                            value=ValueGenerator(**c.get("value", {})),
                            lifetime=_parse_lifetime(c.get("lifetime", "365d")),
                        )
                        for c in t["cookies"]
                    ),
                    honors_gpc=bool(t.get("honors_gpc", False)),
                    sets_partitioned=bool(t.get("sets_partitioned", False)),
                    sync_partners=tuple(canonicalize_host(p) for p in t.get("sync_partners", [])),
                    drop_after_reject_prob=float(t.get("drop_after_reject_prob", 0.0)),
                    resets_on_send=bool(t.get("resets_on_send", False)),
                    listed=bool(t.get("listed", True)),
                )
                for t in obj["trackers"]
            )
            schedule = Schedule(
                phase1=tuple(canonicalize_host(s) for s in obj["schedule"]["phase1"]),
                phase2=tuple(canonicalize_host(s) for s in obj["schedule"]["phase2"]),
                gpc_enabled=bool(obj["schedule"].get("gpc_enabled", False)),
            )
        except InputError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError("INVALID_CONFIG", f"bad ecosystem config: {exc!r}") from None
        config = cls(sites=sites, trackers=trackers, schedule=schedule)
        config.validate()
        return config

    def to_obj(self) -> dict:
        return {
            "sites": [
                {
                    "site": s.site,
                    "rank": s.rank,
                    "banner": banner_to_obj(s.banner),
                    "embeds": [
                        {"tracker": e.tracker, "policy": e.policy.name, "channel": e.channel.name}
                        for e in s.embeds
                    ],
                    "paywall": s.paywall,
                }
                for s in self.sites
            ],
            "trackers": [
                {
                    "domain": t.domain,
                    "cookies": [
                        {
                            "name": c.name,
                            "value": {"kind": c.value.kind, "length": c.value.length, "const": c.value.const},
                            "lifetime": c.lifetime,
                        }
                        for c in t.cookies
                    ],
                    "honors_gpc": t.honors_gpc,
                    "sets_partitioned": t.sets_partitioned,
                    "sync_partners": list(t.sync_partners),
                    "drop_after_reject_prob": t.drop_after_reject_prob,
                    "resets_on_send": t.resets_on_send,
                    "listed": t.listed,
                }
                for t in self.trackers
            ],
            "schedule": {
                "phase1": list(self.schedule.phase1),
                "phase2": list(self.schedule.phase2),
                "gpc_enabled": self.schedule.gpc_enabled,
            },
        }


_LIFETIME_UNITS = {"s": 1, "m": 60, "h": 3600, "d": 86400, "y": 365 * 86400}


def _parse_lifetime(raw) -> int | None:
    """None or "session" = session cookie; numbers are whole seconds; strings allow d/h/m/s/y suffixes."""
    if raw is None:
        return None
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return int(raw)
    if isinstance(raw, str):
        text = raw.strip().lower()
        if text == "session":
            return None
        unit = 1
        if text and text[-1] in _LIFETIME_UNITS:
            unit = _LIFETIME_UNITS[text[-1]]
            text = text[:-1]
        try:
            return int(float(text) * unit)
        except ValueError:
            pass
    raise InputError("INVALID_CONFIG", f"bad lifetime {raw!r}")


# --- ground truth ----------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruth:
    expected_findings: frozenset[tuple[CookieKey, SiteId, InteractionStage]]
    expected_jar_keys: frozenset[CookieKey]

    def to_obj(self) -> dict:
        def key_obj(key: CookieKey) -> dict:
            return {"name": key.name, "host": key.host, "partition": key.partition}

        return {
            "expected_jar_keys": [
                key_obj(k) for k in sorted(self.expected_jar_keys, key=lambda k: (k.name, k.host, k.partition or ""))
            ],
            "expected_findings": [
                {**key_obj(k), "sender_site": sender, "stage": stage.name}
                for k, sender, stage in sorted(
                    self.expected_findings,
                    key=lambda t: (t[1], t[0].name, t[0].host, t[0].partition or ""),
                )
            ],
        }


def _embed_target(tracker_domain: SiteId) -> str:
    return f"cdn.{tracker_domain}"


def _reload_dropped(seed: int, site: SiteId, tracker: TrackerSpec) -> bool:
    if tracker.drop_after_reject_prob <= 0.0:
        return False
    return _rand.unit_float(seed, "reload-drop", site, tracker.domain) < tracker.drop_after_reject_prob


def ground_truth(config: EcosystemConfig, seed: int) -> GroundTruth:
    """Enumerate the jar keys and pre-interaction findings the pipeline must report.

    Implemented by direct iteration over the configuration, independently of
    the event-emission path: phase-1 accepted sites contribute their embeds'
    cookies (latest write wins, non-positive lifetimes delete), phase-2
    successfully rejected sites send every attachable non-partitioned cookie
    before interaction, and ambiguous same-name sends resolve exactly like
    the detector's documented value-then-longest-host preference.
    """
    config.validate()
    jar_values: dict[CookieKey, str] = {}
    for site_name in config.schedule.phase1:
        site = config.site(site_name)
        if not can_accept(site.banner):
            continue
        for embed in site.embeds:
            tracker = config.tracker(embed.tracker)
            partition = site.site if tracker.sets_partitioned else None
            for cookie in tracker.cookies:
                key = CookieKey(cookie.name, tracker.domain, partition)
                if cookie.lifetime is not None and cookie.lifetime <= 0:
                    jar_values.pop(key, None)
                else:
                    jar_values[key] = cookie.value.generate(seed, tracker.domain, cookie.name, site.site)

    listed = {t.domain for t in config.trackers if t.listed}

    def listed_match(host: str) -> bool:
        return any(domain_match(host, entry) for entry in listed)

    def attachable(target: str) -> list[tuple[CookieKey, str]]:
        return [
            (key, value)
            for key, value in jar_values.items()
            if key.partition is None and domain_match(target, key.host)
        ]

    findings: set[tuple[CookieKey, SiteId, InteractionStage]] = set()

    def record_sends(target: str, sender: SiteId) -> None:
        attached = attachable(target)
        candidates = [key for key, _ in attached]
        for key, value in attached:
            resolved = _resolve_like_detector(key.name, value, candidates, jar_values)
            if listed_match(resolved.host):
                findings.add((resolved, sender, InteractionStage.BEFORE_INTERACTION))

    for site_name in config.schedule.phase2:
        site = config.site(site_name)
        if site.banner.banner_type is BannerType.NONE:
            continue
        if plan_rejection(site.banner).outcome is not RejectionOutcome.REJECTED:
            continue
        for embed in site.embeds:
            tracker = config.tracker(embed.tracker)
            if embed.policy is EmbedLoadPolicy.POST_ACCEPT_ONLY:
                continue
            if config.schedule.gpc_enabled and tracker.honors_gpc:
                continue
            target = _embed_target(tracker.domain)
            record_sends(target, site.site)
            # Sync redirects fire when the origin request carried at least one
            # of the origin tracker's cookies, and attach the partner's own.
            if tracker.sync_partners and attachable(target):
                for partner in tracker.sync_partners:
                    record_sends(f"sync.{partner}", site.site)
    return GroundTruth(frozenset(findings), frozenset(jar_values))


def _resolve_like_detector(
    name: str,
    value: str,
    candidates: Iterable[CookieKey],
    jar_values: dict[CookieKey, str],
) -> CookieKey:
    """The value-then-longest-host preference the detector applies to a send."""
    best = None
    for key in candidates:
        if key.name != name:
            continue
        rank = (0 if jar_values[key] == value else 1, -len(key.host), key.host)
        if best is None or rank < best[0]:
            best = (rank, key)
    assert best is not None
    return best[1]


# --- log generation ----------------------------------------------------------------


class _Emitter:
    def __init__(self):
        self.events: list[CrawlEvent] = []

    def emit(self, cls, **kwargs) -> None:
        self.events.append(cls(event_index=len(self.events), **kwargs))


def _attach_header(store: dict[CookieKey, str], target: str, visited_site: SiteId) -> str:
    """Cookie header the simulated browser sends to ``target`` from ``visited_site``."""
    sendable = [
        (key, value)
        for key, value in store.items()
        if domain_match(target, key.host) and key.partition in (None, visited_site)
    ]
    sendable.sort(key=lambda kv: (-len(kv[0].host), kv[0].host, kv[0].name, kv[0].partition or ""))
    return "; ".join(f"{key.name}={value}" for key, value in sendable)


def _set_cookie_header(cookie: CookieSpec, value: str, tracker: TrackerSpec) -> str:
    parts = [f"{cookie.name}={value}", f"Domain=.{tracker.domain}"]
    if cookie.lifetime is not None:
        parts.append(f"Max-Age={int(cookie.lifetime)}")
    if tracker.sets_partitioned:
        parts.append("Partitioned")
    return "; ".join(parts)


def generate(config: EcosystemConfig, seed: int, *, run_label: str = "") -> list[CrawlEvent]:
    """Produce the crawl log for one run; byte-identical for equal (config, seed).

    ``run_label`` prefixes every visit id so logs from several runs can be
    merged without visit-id collisions.
    """
    config.validate()
    emitter = _Emitter()
    store: dict[CookieKey, str] = {}
    gpc = config.schedule.gpc_enabled
    prefix = f"{run_label}-" if run_label else ""

    for position, site_name in enumerate(config.schedule.phase1):
        site = config.site(site_name)
        visit_id = f"{prefix}p1-{position:05d}"
        emitter.emit(
            VisitStart,
            visit_id=visit_id,
            site=site.site,
            rank=site.rank,
            phase=Phase.STATEFUL_ACCEPT,
            iteration=Iteration.ACCEPT_ITER,
            gpc_enabled=gpc,
        )
        if site.banner.banner_type is BannerType.NONE:
            emitter.emit(VisitEnd, visit_id=visit_id, outcome=VisitOutcome.NO_BANNER)
            continue
        emitter.emit(BannerObserved, visit_id=visit_id, banner=site.banner)
        if not can_accept(site.banner):
            emitter.emit(VisitEnd, visit_id=visit_id, outcome=VisitOutcome.INTERACTION_FAILED)
            continue
        emitter.emit(
            Interaction,
            visit_id=visit_id,
            action=InteractionAction.ACCEPT_CLICKED,
            resulting_stage=InteractionStage.AFTER_ACCEPT,
        )
        for embed in site.embeds:
            tracker = config.tracker(embed.tracker)
            target = _embed_target(tracker.domain)
            emitter.emit(
                HttpRequest,
                visit_id=visit_id,
                stage=InteractionStage.AFTER_ACCEPT,
                target_host=target,
                target_url=f"https://{target}/collect?site={site.site}",
                channel=embed.channel,
                cookie_header=_attach_header(store, target, site.site),
            )
            partition = site.site if tracker.sets_partitioned else None
            for cookie in tracker.cookies:
                value = cookie.value.generate(seed, tracker.domain, cookie.name, site.site)
                emitter.emit(
                    CookieSet,
                    visit_id=visit_id,
                    stage=InteractionStage.AFTER_ACCEPT,
                    set_cookie_header=_set_cookie_header(cookie, value, tracker),
                    setter_context_host=target,
                )
                key = CookieKey(cookie.name, tracker.domain, partition)
                if cookie.lifetime is not None and cookie.lifetime <= 0:
                    store.pop(key, None)
                else:
                    store[key] = value
        emitter.emit(VisitEnd, visit_id=visit_id, outcome=VisitOutcome.ACCEPTED)

    for position, site_name in enumerate(config.schedule.phase2):
        site = config.site(site_name)
        _generate_reject_visit(config, seed, emitter, store, site, f"{prefix}p2r-{position:05d}")
        if site.banner.banner_type is not BannerType.NONE:
            _generate_accept_visit(config, seed, emitter, store, site, f"{prefix}p2a-{position:05d}")
    return emitter.events


def _pre_consent_embeds(config: EcosystemConfig, site: SiteSpec) -> list[EmbedSpec]:
    embeds = []
    for embed in site.embeds:
        tracker = config.tracker(embed.tracker)
        if embed.policy is EmbedLoadPolicy.POST_ACCEPT_ONLY:
            continue
        if config.schedule.gpc_enabled and tracker.honors_gpc:
            continue
        embeds.append(embed)
    return embeds


def _emit_embed_requests(
    config: EcosystemConfig,
    emitter: _Emitter,
    store: dict[CookieKey, str],
    site: SiteSpec,
    visit_id: str,
    stage: InteractionStage,
    embeds: list[EmbedSpec],
) -> None:
    for embed in embeds:
        tracker = config.tracker(embed.tracker)
        target = _embed_target(tracker.domain)
        origin_url = f"https://{target}/px?site={site.site}"
        header = _attach_header(store, target, site.site)
        emitter.emit(
            HttpRequest,
            visit_id=visit_id,
            stage=stage,
            target_host=target,
            target_url=origin_url,
            channel=embed.channel,
            cookie_header=header,
        )
        attached_own = [
            (key, value)
            for key, value in store.items()
            if domain_match(target, key.host) and key.partition in (None, site.site)
        ]
        attached_own.sort(key=lambda kv: (kv[0].name, kv[0].host))
        if tracker.resets_on_send:
            for key, value in attached_own:
                spec = next((c for c in tracker.cookies if c.name == key.name), None)
                if spec is None or key.host != tracker.domain:
                    continue
                emitter.emit(
                    CookieSet,
                    visit_id=visit_id,
                    stage=stage,
                    set_cookie_header=_set_cookie_header(spec, value, tracker),
                    setter_context_host=target,
                )
        if tracker.sync_partners and attached_own:
            # Redirect chains carry the most identifier-like (longest) value.
            carried = max(attached_own, key=lambda kv: (len(kv[1]), kv[0].name, kv[0].host))[1]
            for partner in tracker.sync_partners:
                partner_host = f"sync.{partner}"
                emitter.emit(
                    HttpRequest,
                    visit_id=visit_id,
                    stage=stage,
                    target_host=partner_host,
                    target_url=f"https://{partner_host}/match?uid={carried}",
                    channel=Channel.RESOURCE_FETCH,
                    cookie_header=_attach_header(store, partner_host, site.site),
                    redirect_parent_url=origin_url,
                )


def _generate_reject_visit(config, seed, emitter, store, site: SiteSpec, visit_id: str) -> None:
    emitter.emit(
        VisitStart,
        visit_id=visit_id,
        site=site.site,
        rank=site.rank,
        phase=Phase.STATELESS_MEASURE,
        iteration=Iteration.REJECT_ITER,
        gpc_enabled=config.schedule.gpc_enabled,
    )
    if site.banner.banner_type is not BannerType.NONE:
        emitter.emit(BannerObserved, visit_id=visit_id, banner=site.banner)
    pre_embeds = _pre_consent_embeds(config, site)
    _emit_embed_requests(config, emitter, store, site, visit_id, InteractionStage.BEFORE_INTERACTION, pre_embeds)
    if site.banner.banner_type is BannerType.NONE:
        emitter.emit(VisitEnd, visit_id=visit_id, outcome=VisitOutcome.NO_BANNER)
        return
    plan = plan_rejection(site.banner)
    if plan.outcome is not RejectionOutcome.REJECTED:
        emitter.emit(VisitEnd, visit_id=visit_id, outcome=VisitOutcome.INTERACTION_FAILED)
        return
    emitter.emit(
        Interaction,
        visit_id=visit_id,
        action=InteractionAction.REJECT_CLICKED,
        resulting_stage=InteractionStage.AFTER_REJECT,
    )
    # Rejection triggers no additional sends; the reload re-issues the
    # pre-consent embeds minus the seeded per-(site, tracker) drops.
    emitter.emit(
        Interaction,
        visit_id=visit_id,
        action=InteractionAction.RELOAD,
        resulting_stage=InteractionStage.AFTER_RELOADED_REJECT,
    )
    surviving = [
        embed
        for embed in pre_embeds
        if not _reload_dropped(seed, site.site, config.tracker(embed.tracker))
    ]
    _emit_embed_requests(
        config, emitter, store, site, visit_id, InteractionStage.AFTER_RELOADED_REJECT, surviving
    )
    emitter.emit(VisitEnd, visit_id=visit_id, outcome=VisitOutcome.REJECTED)


def _generate_accept_visit(config, seed, emitter, store, site: SiteSpec, visit_id: str) -> None:
    emitter.emit(
        VisitStart,
        visit_id=visit_id,
        site=site.site,
        rank=site.rank,
        phase=Phase.STATELESS_MEASURE,
        iteration=Iteration.ACCEPT_ITER,
        gpc_enabled=config.schedule.gpc_enabled,
    )
    emitter.emit(BannerObserved, visit_id=visit_id, banner=site.banner)
    pre_embeds = _pre_consent_embeds(config, site)
    _emit_embed_requests(config, emitter, store, site, visit_id, InteractionStage.BEFORE_INTERACTION, pre_embeds)
    if not can_accept(site.banner):
        emitter.emit(VisitEnd, visit_id=visit_id, outcome=VisitOutcome.INTERACTION_FAILED)
        return
    emitter.emit(
        Interaction,
        visit_id=visit_id,
        action=InteractionAction.ACCEPT_CLICKED,
        resulting_stage=InteractionStage.AFTER_ACCEPT,
    )
    consented = [
        embed
        for embed in site.embeds
        if embed.policy is not EmbedLoadPolicy.PRE_CONSENT_ONLY
        and not (config.schedule.gpc_enabled and config.tracker(embed.tracker).honors_gpc)
    ]
    _emit_embed_requests(config, emitter, store, site, visit_id, InteractionStage.AFTER_ACCEPT, consented)
    # Accepting triggers fresh cookie writes from every consented tracker;
    # these happen outside the accept phase and never reach the jar.
    for embed in consented:
        tracker = config.tracker(embed.tracker)
        target = _embed_target(tracker.domain)
        for cookie in tracker.cookies:
            value = cookie.value.generate(seed, tracker.domain, cookie.name, site.site)
            emitter.emit(
                CookieSet,
                visit_id=visit_id,
                stage=InteractionStage.AFTER_ACCEPT,
                set_cookie_header=_set_cookie_header(cookie, value, tracker),
                setter_context_host=target,
            )
    emitter.emit(VisitEnd, visit_id=visit_id, outcome=VisitOutcome.ACCEPTED)
