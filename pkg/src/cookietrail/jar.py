"""The cookie jar: cookies accumulated during the stateful accept phase.

Every stored entry has its expiry overwritten to the fixed far-future
instant; a write whose own lifetime is already in the past deletes the entry
instead (deletions are honored, never extended).  The jar also keeps an
append-only history of writes for renewal analytics and the set of sites
whose banners were successfully accepted.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable

from . import crawllog
from .errors import InputError, ParseIssue
from .model import (
    FIXED_EXPIRY,
    ConsentState,
    CookieKey,
    CookieRecord,
    Phase,
    SiteId,
    VisitOutcome,
)

SNAPSHOT_FORMAT = "cookietrail-jar"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class HistoryEntry:
    key: CookieKey
    setter_site: SiteId
    event_index: int
    deleted: bool = False


@dataclass
class CookieJar:
    entries: dict[CookieKey, CookieRecord] = field(default_factory=dict)
    history: list[HistoryEntry] = field(default_factory=list)
    accepted_sites: set[SiteId] = field(default_factory=set)

    def upsert(self, record: CookieRecord) -> None:
        """Apply one phase-1 cookie write: latest write wins per key.

        A record whose original expiry is in the past removes the key; any
        other record is stored with the fixed expiry override.  Both kinds are
        appended to the history, deletions flagged.

        Raises:
            InputError: ``WRONG_PHASE`` for records outside the accept phase.
        """
        if record.phase is not Phase.STATEFUL_ACCEPT:
            raise InputError("WRONG_PHASE", f"jar writes require phase STATEFUL_ACCEPT, got {record.phase.value}")
        if record.is_deletion:
            self.entries.pop(record.key, None)
            self.history.append(HistoryEntry(record.key, record.setter_site, record.set_at, deleted=True))
            return
        self.entries[record.key] = dataclasses.replace(record, effective_expiry=FIXED_EXPIRY)
        self.history.append(HistoryEntry(record.key, record.setter_site, record.set_at))

    def mark_accepted(self, site: SiteId) -> None:
        self.accepted_sites.add(site)

    def setters_of(self, key: CookieKey) -> tuple[SiteId, ...]:
        """Distinct setter sites for a key, in first-write order (deletions excluded)."""
        seen: dict[SiteId, None] = {}
        for row in self.history:
            if row.key == key and not row.deleted:
                seen.setdefault(row.setter_site, None)
        return tuple(seen)

    def normalize_sample(self, n: int, seed: int) -> "CookieJar":
        """Restrict the jar to a uniform size-``n`` sample of accepted sites.

        The sample is reproducible across implementations: sites are ranked
        by ``sha256("<seed>\\x1f<site>")`` (hex, ties broken by site name) and
        the ``n`` smallest keep their cookies and history rows.

        Raises:
            InputError: ``SAMPLE_TOO_LARGE`` when ``n`` exceeds the number of
                accepted sites.
        """
        if n > len(self.accepted_sites):
            raise InputError(
                "SAMPLE_TOO_LARGE",
                f"requested {n} of {len(self.accepted_sites)} accepted sites",
            )
        ranked = sorted(
            self.accepted_sites,
            key=lambda site: (hashlib.sha256(f"{seed}\x1f{site}".encode()).hexdigest(), site),
        )
        keep = set(ranked[:n])
        return CookieJar(
            entries={k: r for k, r in self.entries.items() if r.setter_site in keep},
            history=[row for row in self.history if row.setter_site in keep],
            accepted_sites=keep,
        )

    # --- persistence --------------------------------------------------------

    def _payload(self) -> dict:
        entry_objs = []
        for key in sorted(self.entries, key=lambda k: (k.name, k.host, k.partition or "")):
            record = self.entries[key]
            entry_objs.append(
                {
                    "name": key.name,
                    "host": key.host,
                    "partition": key.partition,
                    "value": record.value,
                    "original_expiry": record.original_expiry,
                    "effective_expiry": record.effective_expiry.isoformat(),
                    "setter_site": record.setter_site,
                    "set_at": record.set_at,
                    "consent_state_at_set": record.consent_state_at_set.name,
                    "phase": record.phase.name,
                }
            )
        history_objs = [
            {
                "name": row.key.name,
                "host": row.key.host,
                "partition": row.key.partition,
                "setter_site": row.setter_site,
                "event_index": row.event_index,
                "deleted": row.deleted,
            }
            for row in self.history
        ]
        return {
            "entries": entry_objs,
            "history": history_objs,
            "accepted_sites": sorted(self.accepted_sites),
        }

    def save(self, path: str | Path) -> None:
        """Write a checksummed snapshot; byte-identical for equal jars."""
        payload = json.dumps(self._payload(), sort_keys=True, separators=(",", ":"))
        header = json.dumps(
            {
                "format": SNAPSHOT_FORMAT,
                "format_version": SNAPSHOT_VERSION,
                "payload_sha256": hashlib.sha256(payload.encode()).hexdigest(),
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        Path(path).write_text(header + "\n" + payload + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CookieJar":
        """Load a snapshot, verifying format and checksum.

        Raises:
            InputError: ``CORRUPT_SNAPSHOT`` on any structural or checksum
                mismatch.  I/O failures propagate as ``OSError``.
        """
        text = Path(path).read_text(encoding="utf-8")
        lines = text.splitlines()
        if len(lines) < 2:
            raise InputError("CORRUPT_SNAPSHOT", f"{path}: truncated snapshot")
        try:
            header = json.loads(lines[0])
            payload_line = lines[1]
            if header.get("format") != SNAPSHOT_FORMAT or header.get("format_version") != SNAPSHOT_VERSION:
                raise InputError("CORRUPT_SNAPSHOT", f"{path}: unrecognized snapshot header")
            if hashlib.sha256(payload_line.encode()).hexdigest() != header.get("payload_sha256"):
                raise InputError("CORRUPT_SNAPSHOT", f"{path}: checksum mismatch")
            payload = json.loads(payload_line)
            entries = {}
            for obj in payload["entries"]:
                key = CookieKey(obj["name"], obj["host"], obj["partition"])
                entries[key] = CookieRecord(
                    key=key,
                    value=obj["value"],
                    original_expiry=obj["original_expiry"],
                    setter_site=obj["setter_site"],
                    set_at=obj["set_at"],
                    consent_state_at_set=ConsentState[obj["consent_state_at_set"]],
                    phase=Phase[obj["phase"]],
                    effective_expiry=datetime.fromisoformat(obj["effective_expiry"]),
                )
            history = [
                HistoryEntry(
                    CookieKey(obj["name"], obj["host"], obj["partition"]),
                    obj["setter_site"],
                    obj["event_index"],
                    obj["deleted"],
                )
                for obj in payload["history"]
            ]
            accepted = set(payload["accepted_sites"])
        except InputError:
            raise
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError("CORRUPT_SNAPSHOT", f"{path}: {exc}") from None
        return cls(entries=entries, history=history, accepted_sites=accepted)


def build_jar(events: Iterable[crawllog.CrawlEvent], *, issues: list[ParseIssue] | None = None) -> CookieJar:
    """Replay a crawl log's accept phase into a jar.

    Only visits that ended with outcome ACCEPTED contribute: their cookie
    writes are applied in event order and their site joins the accepted set.
    """
    events = list(events)
    starts = crawllog.visit_starts(events)
    pending: dict[str, list[crawllog.CookieSet]] = {}
    jar = CookieJar()
    for event in events:
        visit = starts[event.visit_id]
        if visit.phase is not Phase.STATEFUL_ACCEPT:
            continue
        if isinstance(event, crawllog.CookieSet):
            pending.setdefault(event.visit_id, []).append(event)
        elif isinstance(event, crawllog.VisitEnd) and event.outcome is VisitOutcome.ACCEPTED:
            jar.mark_accepted(visit.site)
            for cookie_set in pending.pop(event.visit_id, []):
                jar.upsert(crawllog.record_from_cookie_set(cookie_set, visit, issues=issues))
    return jar
