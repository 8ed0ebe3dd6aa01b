"""Public Suffix List parsing and registrable-domain (eTLD+1) resolution."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import InputError
from .model import SiteId, canonicalize_host

_PRIVATE_BEGIN = "===BEGIN PRIVATE DOMAINS==="
_PRIVATE_END = "===END PRIVATE DOMAINS==="


class Party(enum.Enum):
    FIRST_PARTY = "FIRST_PARTY"
    THIRD_PARTY = "THIRD_PARTY"


@dataclass(frozen=True)
class PslRuleSet:
    """Parsed suffix rules, bucketed by kind.

    ``wildcard_rules`` holds the part after ``*.`` and ``exception_rules``
    the part after ``!``.  All rules are canonical lowercase punycode.
    """

    normal_rules: frozenset[str]
    wildcard_rules: frozenset[str]
    exception_rules: frozenset[str]

    def __len__(self) -> int:
        return len(self.normal_rules) + len(self.wildcard_rules) + len(self.exception_rules)


EMPTY_RULESET = PslRuleSet(frozenset(), frozenset(), frozenset())


def load_psl(text: str, *, include_private: bool = True) -> PslRuleSet:
    """Parse a suffix list in its canonical text format.

    Lines starting with ``//`` are comments; ``!`` marks exception rules and
    ``*.`` wildcard rules.  ``include_private`` keeps the private-domains
    section (the default); input order is irrelevant.

    Raises:
        InputError: ``MALFORMED_RULE`` when a rule has an empty or illegal label.
    """
    normal: set[str] = set()
    wildcard: set[str] = set()
    exception: set[str] = set()
    in_private = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("//"):
            if _PRIVATE_BEGIN in line:
                in_private = True
            elif _PRIVATE_END in line:
                in_private = False
            continue
        if in_private and not include_private:
            continue
        rule = line.split()[0]
        if rule.startswith("!"):
            bucket, body = exception, rule[1:]
        elif rule.startswith("*."):
            bucket, body = wildcard, rule[2:]
        else:
            bucket, body = normal, rule
        try:
            bucket.add(canonicalize_host(body))
        except InputError as exc:
            raise InputError("MALFORMED_RULE", f"line {lineno}: bad rule {rule!r} ({exc.message})") from None
    return PslRuleSet(frozenset(normal), frozenset(wildcard), frozenset(exception))


def _public_suffix_labels(labels: list[str], rules: PslRuleSet) -> int:
    """Number of labels in the host's public suffix, per the standard algorithm."""
    n = len(labels)
    # Exception rules defeat everything else; the winning suffix is the
    # exception rule minus its leftmost label.
    for i in range(n):
        if ".".join(labels[i:]) in rules.exception_rules:
            return (n - i) - 1
    best = 1  # the prevailing rule "*": unknown TLDs are single-label suffixes
    for i in range(n):
        candidate = ".".join(labels[i:])
        if candidate in rules.normal_rules:
            best = max(best, n - i)
        if i >= 1 and candidate in rules.wildcard_rules:
            best = max(best, n - i + 1)
    return best


def public_suffix(host: str, rules: PslRuleSet) -> str:
    """The public suffix of a canonical host (may equal the host itself)."""
    if not host:
        raise InputError("EMPTY_HOST", "empty hostname")
    labels = host.split(".")
    return ".".join(labels[len(labels) - _public_suffix_labels(labels, rules):])


def etld_plus_one(host: str, rules: PslRuleSet) -> SiteId:
    """Resolve the registrable domain (public suffix plus one label).

    ``host`` must already be canonical (see ``canonicalize_host``).

    Raises:
        InputError: ``HOST_IS_PUBLIC_SUFFIX`` when the host has no
            registrable part, ``EMPTY_HOST`` for empty input.
    """
    if not host:
        raise InputError("EMPTY_HOST", "empty hostname")
    labels = host.split(".")
    suffix_len = _public_suffix_labels(labels, rules)
    if len(labels) <= suffix_len:
        raise InputError("HOST_IS_PUBLIC_SUFFIX", f"{host!r} has no registrable part")
    return ".".join(labels[len(labels) - suffix_len - 1:])


def party_of(cookie_host: str, visit_site: SiteId, rules: PslRuleSet) -> Party:
    """FIRST_PARTY iff the cookie host's registrable domain equals the visited site."""
    if etld_plus_one(cookie_host, rules) == visit_site:
        return Party.FIRST_PARTY
    return Party.THIRD_PARTY
