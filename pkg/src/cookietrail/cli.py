"""Command-line entry point tying the pipeline together.

Subcommands: ``simulate``, ``build-jar``, ``detect``, ``report``,
``filter-convert``, ``validate-log``.  Exit codes: 0 on success, 1 on input
errors, 2 on invariant violations.  Diagnostics go to stderr (as JSON records
with ``--errors json``); data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import crawllog, filterlist, reports, simulator
from .detector import Detector, IntractableFinding
from .errors import InputError, InvariantError, PipelineError
from .jar import CookieJar, build_jar
from .model import BannerType, Channel, CookieKey, InteractionStage, Iteration, Phase, VisitOutcome
from .psl import EMPTY_RULESET, PslRuleSet, load_psl

DEFAULT_TIERS = (50, 500, 1000, 5000, 10000)


@dataclass(frozen=True)
class PipelineConfig:
    """Shared path/parameter defaults for build-jar, detect, and report.

    Loaded from a JSON file via ``--config``; explicit flags override any
    value it provides.  Input paths are checked for existence at load time.
    """

    psl_path: str | None = None
    plain_filter_lists: tuple[str, ...] = ()
    adblock_filter_lists: tuple[str, ...] = ()
    extra_tracker_domains_path: str | None = None
    jar_path: str | None = None
    log_paths: tuple[str, ...] = ()
    report_dir: str | None = None
    sample_n: int | None = None
    sample_seed: int = 0
    tier_cutoffs: tuple[int, ...] = DEFAULT_TIERS


def load_pipeline_config(path: str, *, jar_is_output: bool = False) -> PipelineConfig:
    """Load and validate a pipeline config file.

    Every referenced input path must exist; ``jar_is_output`` exempts the jar
    path for build-jar, which writes it.
    """
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError("INVALID_CONFIG", f"{path}: not valid JSON ({exc.msg})") from None
    filter_lists = obj.get("filter_lists", {})
    sample = obj.get("sample") or {}
    try:
        config = PipelineConfig(
            psl_path=obj.get("psl_path"),
            plain_filter_lists=tuple(filter_lists.get("plain", [])),
            adblock_filter_lists=tuple(filter_lists.get("adblock", [])),
            extra_tracker_domains_path=obj.get("extra_tracker_domains_path"),
            jar_path=obj.get("jar_path"),
            log_paths=tuple(obj.get("log_paths", [])),
            report_dir=obj.get("report_dir"),
            sample_n=sample.get("n"),
            sample_seed=sample.get("seed", 0),
            tier_cutoffs=tuple(obj.get("tier_cutoffs", DEFAULT_TIERS)),
        )
    except (TypeError, AttributeError) as exc:
        raise InputError("INVALID_CONFIG", f"{path}: bad pipeline config ({exc})") from None
    inputs = [
        config.psl_path,
        config.extra_tracker_domains_path,
        *config.plain_filter_lists,
        *config.adblock_filter_lists,
        *config.log_paths,
    ]
    if not jar_is_output:
        inputs.append(config.jar_path)
    for referenced in inputs:
        if referenced is not None and not Path(referenced).exists():
            raise InputError("INVALID_CONFIG", f"{path}: referenced path does not exist: {referenced}")
    return config


def _emit_error(exc: PipelineError, error_format: str) -> None:
    if error_format == "json":
        print(json.dumps(exc.as_record(), sort_keys=True), file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)


def _emit_issues(issues, error_format: str) -> None:
    for issue in issues:
        if error_format == "json":
            print(json.dumps(issue.as_record(), sort_keys=True), file=sys.stderr)
        else:
            line = f" (line {issue.line})" if issue.line is not None else ""
            print(f"warning: {issue.code}: {issue.detail}{line}", file=sys.stderr)


def _apply_config(args) -> None:
    """Fill unset per-command options from the --config pipeline file."""
    if getattr(args, "config", None):
        config = load_pipeline_config(args.config, jar_is_output=args.command == "build-jar")
    else:
        config = PipelineConfig()
    defaults = {
        "psl": config.psl_path,
        "trackers": list(config.plain_filter_lists) or None,
        "adblock": list(config.adblock_filter_lists) or None,
        "extra_domains": config.extra_tracker_domains_path,
        "jar": config.jar_path,
        "log": list(config.log_paths) or None,
        "out": None,
        "sample_n": config.sample_n,
        "sample_seed": config.sample_seed,
    }
    for name, value in defaults.items():
        if hasattr(args, name) and getattr(args, name) in (None, []) and value is not None:
            setattr(args, name, value)
    if hasattr(args, "tiers") and args.tiers is None and config.tier_cutoffs:
        args.tiers = ",".join(str(t) for t in config.tier_cutoffs)
    if hasattr(args, "out") and args.out is None and config.report_dir and args.command == "report":
        args.out = config.report_dir
    if hasattr(args, "out") and args.out is None and config.jar_path and args.command == "build-jar":
        args.out = config.jar_path


def _require_option(args, name: str, flag: str):
    value = getattr(args, name, None)
    if value in (None, []):
        raise InputError("INVALID_CONFIG", f"{flag} is required (set it on the command line or in --config)")
    return value


def _load_logs(paths) -> list[crawllog.CrawlEvent]:
    parsed = [crawllog.parse_log_text(Path(p).read_text(encoding="utf-8")) for p in paths]
    return crawllog.merge_logs(parsed)


def _load_rules(args) -> PslRuleSet:
    if args.psl:
        return load_psl(Path(args.psl).read_text(encoding="utf-8"), include_private=not args.no_private_psl)
    return EMPTY_RULESET


def _load_trackers(args, error_format: str) -> filterlist.TrackerDomainSet:
    sets = []
    for path in args.trackers or []:
        issues: list = []
        sets.append(
            filterlist.parse_domain_list(Path(path).read_text(encoding="utf-8"), Path(path).name, issues=issues)
        )
        _emit_issues(issues, error_format)
    for path in args.adblock or []:
        extraction = filterlist.extract_domains_from_adblock(Path(path).read_text(encoding="utf-8"), Path(path).name)
        _emit_issues(extraction.issues, error_format)
        sets.append(extraction.domains)
    if getattr(args, "extra_domains", None):
        issues = []
        sets.append(
            filterlist.parse_domain_list(
                Path(args.extra_domains).read_text(encoding="utf-8"), "extra-domains", issues=issues
            )
        )
        _emit_issues(issues, error_format)
    return filterlist.merge(sets) if sets else filterlist.EMPTY_TRACKER_SET


# --- findings NDJSON ---------------------------------------------------------


def finding_to_record(finding: IntractableFinding) -> dict:
    return {
        "name": finding.key.name,
        "host": finding.key.host,
        "partition": finding.key.partition,
        "value_at_send": finding.value_at_send,
        "sender_site": finding.sender_site,
        "tracker_domain": finding.tracker_domain,
        "setter_sites": list(finding.setter_sites),
        "stage": finding.stage.name,
        "channel": finding.channel.name,
        "visit_id": finding.visit_id,
        "event_index": finding.event_index,
        "canonical": finding.canonical,
    }


def finding_from_record(obj: dict) -> IntractableFinding:
    return IntractableFinding(
        key=CookieKey(obj["name"], obj["host"], obj["partition"]),
        value_at_send=obj["value_at_send"],
        sender_site=obj["sender_site"],
        tracker_domain=obj["tracker_domain"],
        setter_sites=tuple(obj["setter_sites"]),
        stage=InteractionStage[obj["stage"]],
        channel=Channel[obj["channel"]],
        visit_id=obj["visit_id"],
        event_index=obj["event_index"],
        canonical=obj["canonical"],
    )


NDJSON_VERSION = 1


def _write_ndjson(path: str, records) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps({"format_version": NDJSON_VERSION}, separators=(",", ":")) + "\n")
        for record in records:
            handle.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def _read_ndjson(path: str) -> list[dict]:
    """Read a versioned NDJSON file, validating its header record."""
    records = []
    header_seen = False
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError("MALFORMED_RECORD", f"{path}:{lineno}: {exc.msg}") from None
            if not header_seen:
                if not isinstance(obj, dict) or obj.get("format_version") != NDJSON_VERSION:
                    raise InputError("MALFORMED_RECORD", f"{path}:{lineno}: missing format_version header")
                header_seen = True
                continue
            records.append(obj)
    if not header_seen:
        raise InputError("MALFORMED_RECORD", f"{path}: missing format_version header")
    return records


def _read_findings(path: str) -> list[IntractableFinding]:
    findings = []
    for index, obj in enumerate(_read_ndjson(path)):
        try:
            findings.append(finding_from_record(obj))
        except (KeyError, TypeError) as exc:
            raise InputError("MALFORMED_RECORD", f"{path}: record {index}: {exc}") from None
    return findings


# --- subcommands ----------------------------------------------------------------


def _cmd_simulate(args, error_format: str) -> int:
    config = simulator.EcosystemConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
    events = simulator.generate(config, args.seed, run_label=args.run_id or "")
    Path(args.out).write_text(crawllog.serialize(events), encoding="utf-8")
    if args.trackers_out:
        Path(args.trackers_out).write_text(
            "".join(f"{d}\n" for d in config.listed_tracker_domains()), encoding="utf-8"
        )
    if args.truth_out:
        truth = simulator.ground_truth(config, args.seed)
        Path(args.truth_out).write_text(
            json.dumps(truth.to_obj(), sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_build_jar(args, error_format: str) -> int:
    _apply_config(args)
    events = _load_logs(_require_option(args, "log", "--log"))
    issues: list = []
    jar = build_jar(events, issues=issues)
    _emit_issues(issues, error_format)
    if args.sample_n is not None:
        jar = jar.normalize_sample(args.sample_n, args.sample_seed or 0)
    jar.save(_require_option(args, "out", "--out"))
    print(
        f"jar: {len(jar.entries)} entries, {len(jar.history)} history rows, "
        f"{len(jar.accepted_sites)} accepted sites",
        file=sys.stderr,
    )
    return 0


def _cmd_detect(args, error_format: str) -> int:
    _apply_config(args)
    jar = CookieJar.load(_require_option(args, "jar", "--jar"))
    events = _load_logs(_require_option(args, "log", "--log"))
    detector = Detector(_load_rules(args), _load_trackers(args, error_format))
    result = detector.detect(jar, events)
    _emit_issues(result.issues, error_format)
    _write_ndjson(args.out, (finding_to_record(f) for f in result.findings))
    if args.resets_out:
        _write_ndjson(
            args.resets_out,
            (
                {"name": r.key.name, "host": r.key.host, "partition": r.key.partition,
                 "sender_site": r.sender_site, "event_index": r.event_index}
                for r in result.resets
            ),
        )
    if args.syncs_out:
        _write_ndjson(
            args.syncs_out,
            (
                {"name": s.source_key.name, "host": s.source_key.host,
                 "partition": s.source_key.partition, "carrying_url": s.carrying_url,
                 "origin_tracker": s.origin_tracker, "destination_tracker": s.destination_tracker,
                 "parameter_name": s.parameter_name}
                for s in result.syncs
            ),
        )
    stats = result.stats
    print(
        f"detect: {len(result.canonical_findings)} canonical findings over "
        f"{stats.rejected_visits} rejected visits ({stats.observations} observations, "
        f"{len(result.resets)} resets, {len(result.syncs)} syncs)",
        file=sys.stderr,
    )
    return 0


def _cmd_report(args, error_format: str) -> int:
    _apply_config(args)
    findings = _read_findings(args.findings)
    jar = CookieJar.load(_require_option(args, "jar", "--jar"))
    events = _load_logs(_require_option(args, "log", "--log"))
    visits = crawllog.summarize_visits(events)
    rejected_sites = sorted(
        {
            v.site
            for v in visits.values()
            if v.phase is Phase.STATELESS_MEASURE
            and v.iteration is Iteration.REJECT_ITER
            and v.outcome is VisitOutcome.REJECTED
        }
    )
    site_ranks = {v.site: v.rank for v in visits.values()}
    sender_banner_types = {
        v.site: v.banner_type
        for v in visits.values()
        if v.phase is Phase.STATELESS_MEASURE and v.iteration is Iteration.REJECT_ITER
    }
    paywall_setters = {
        v.site
        for v in visits.values()
        if v.phase is Phase.STATEFUL_ACCEPT
        and v.outcome is VisitOutcome.ACCEPTED
        and v.banner_type is BannerType.PAYWALL
    }
    gpc_findings = _read_findings(args.gpc_findings) if args.gpc_findings else None
    tiers = [int(t) for t in args.tiers.split(",")] if args.tiers else list(DEFAULT_TIERS)
    inputs = reports.ReportInputs(
        findings=findings,
        jar=jar,
        rules=_load_rules(args),
        trackers=_load_trackers(args, error_format),
        rejected_sites=rejected_sites,
        site_ranks=site_ranks,
        sender_banner_types=sender_banner_types,
        paywall_setters=paywall_setters,
        tier_cutoffs=tiers,
        gpc_findings=gpc_findings,
        resets=_read_ndjson(args.resets) if args.resets else None,
        syncs=_read_ndjson(args.syncs) if args.syncs else None,
    )
    out_dir = _require_option(args, "out", "--out")
    manifest = reports.write_report_suite(out_dir, inputs)
    print(f"report: wrote {len(manifest['files'])} files to {out_dir}", file=sys.stderr)
    return 0


def _cmd_filter_convert(args, error_format: str) -> int:
    sets = []
    ignored = 0
    for path in args.adblock:
        extraction = filterlist.extract_domains_from_adblock(Path(path).read_text(encoding="utf-8"), Path(path).name)
        _emit_issues(extraction.issues, error_format)
        ignored += extraction.ignored_rules
        sets.append(extraction.domains)
    merged = filterlist.merge(sets)
    text = "".join(f"{d}\n" for d in sorted(merged.domains))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"filter-convert: {len(merged.domains)} domains, {ignored} rules ignored", file=sys.stderr)
    return 0


def _cmd_validate_log(args, error_format: str) -> int:
    events = _load_logs([args.log])
    issues = crawllog.strict_issues(events)
    if issues:
        _emit_issues(issues, error_format)
        return 1
    print(f"validate-log: {len(events)} events OK", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cookietrail", description=__doc__)
    parser.add_argument("--errors", choices=["text", "json"], default="text",
                        help="diagnostic format on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a crawl log from an ecosystem config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--run-id", help="visit-id prefix, for merging logs from several runs")
    p.add_argument("--trackers-out", help="also write the listed tracker domains")
    p.add_argument("--truth-out", help="also write the ground-truth JSON")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("build-jar", help="replay the accept phase of a log into a jar snapshot")
    p.add_argument("--config", help="pipeline config file supplying path defaults")
    p.add_argument("--log", action="append", help="crawl log (repeatable)")
    p.add_argument("--out", help="jar snapshot path")
    p.add_argument("--sample-n", type=int, help="normalize to a random sample of accepted sites")
    p.add_argument("--sample-seed", type=int)
    p.set_defaults(func=_cmd_build_jar)

    def add_rule_args(p):
        p.add_argument("--psl", help="public suffix list file")
        p.add_argument("--no-private-psl", action="store_true",
                       help="ignore the private-domains section of the suffix list")
        p.add_argument("--trackers", action="append", help="plain tracker domain list (repeatable)")
        p.add_argument("--adblock", action="append", help="adblock-syntax list (repeatable)")
        p.add_argument("--extra-domains", help="explicit extra tracker domains file")

    p = sub.add_parser("detect", help="match measure-phase sends against a jar")
    p.add_argument("--config", help="pipeline config file supplying path defaults")
    p.add_argument("--jar", help="jar snapshot from build-jar")
    p.add_argument("--log", action="append", help="crawl log (repeatable)")
    p.add_argument("--out", required=True, help="findings output (NDJSON)")
    p.add_argument("--resets-out")
    p.add_argument("--syncs-out")
    add_rule_args(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("report", help="write the CSV report suite from findings")
    p.add_argument("--config", help="pipeline config file supplying path defaults")
    p.add_argument("--findings", required=True)
    p.add_argument("--jar", help="jar snapshot from build-jar")
    p.add_argument("--log", action="append", help="crawl log (repeatable)")
    p.add_argument("--out", help="report directory")
    p.add_argument("--tiers", help="comma-separated rank cutoffs")
    p.add_argument("--gpc-findings", help="findings file from a signal-enabled run")
    p.add_argument("--resets", help="resets file from detect, for the totals table")
    p.add_argument("--syncs", help="syncs file from detect, for the totals table")
    add_rule_args(p)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("filter-convert", help="extract plain domains from adblock lists")
    p.add_argument("--adblock", action="append", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_filter_convert)

    p = sub.add_parser("validate-log", help="check log structure and cookie headers")
    p.add_argument("--log", required=True)
    p.set_defaults(func=_cmd_validate_log)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, args.errors)
    except InvariantError as exc:
        _emit_error(exc, args.errors)
        return 2
    except InputError as exc:
        _emit_error(exc, args.errors)
        return 1
    except OSError as exc:
        _emit_error(InputError("IO_ERROR", str(exc)), args.errors)
        return 1


if __name__ == "__main__":
    sys.exit(main())
