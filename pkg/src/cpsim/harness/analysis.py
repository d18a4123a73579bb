"""Multi-run analyses and trace replay."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Sequence

from ..attacks import CATALOG, AttackId
from ..cps import RedundancyParams
from ..messages.codec import decode
from ..messages.types import DetectorId
from .config import ScenarioConfig
from .runner import RunMetrics, run_scenario


@dataclass(frozen=True)
class SweepRow:
    cbr_threshold: float
    d4_detection_rate: float
    mean_cbr: float


def _d4_rate(metrics: RunMetrics, victim_cert: int, start_ms: int, stop_ms: int) -> float:
    """Fraction of one-second attack windows holding a D4 verdict that names
    the victim."""
    stop_ms = min(stop_ms, metrics.duration_ms)
    if stop_ms <= start_ms:
        return 0.0
    hits = [
        v["t"]
        for v in metrics.verdicts
        if v["detector"] == "D4" and v["suspect"] == victim_cert and start_ms <= v["t"] < stop_ms
    ]
    buckets = range(start_ms, stop_ms, 1000)
    if not buckets:
        return 0.0
    covered = sum(1 for b in buckets if any(b <= t < b + 1000 for t in hits))
    return covered / len(list(buckets))


def sweep_redundancy_tension(
    base_config: ScenarioConfig,
    thresholds: Sequence[float],
    seeds: int = 20,
) -> list[SweepRow]:
    """Trade-off study: per channel-busy threshold, how often the cross-CPM
    check still catches the suppression attack, and what the channel load
    looks like. Rows come back ordered by threshold."""
    target = None
    for spec in base_config.attacks:
        info = CATALOG[spec.attack_id]
        if info.mapped_detector is DetectorId.D4 and spec.victim is not None:
            target = spec
            break
    if target is None:
        raise ValueError("sweep needs a D4-detectable attack with a victim in the base config")
    if len(base_config.stations()) < 3:
        raise ValueError("sweep needs at least 3 stations")
    rows = []
    for threshold in sorted(thresholds):
        redundancy = dataclasses.replace(base_config.redundancy, enabled=True, cbr_threshold=float(threshold))
        config = base_config.with_redundancy(redundancy)
        rates = []
        cbrs = []
        for i in range(seeds):
            metrics, _ = run_scenario(config, seed_override=base_config.seed + i, collect_trace=False)
            rates.append(_d4_rate(metrics, target.victim, target.start_ms, target.stop_ms))
            cbrs.append(metrics.mean_cbr)
        rows.append(
            SweepRow(
                cbr_threshold=float(threshold),
                d4_detection_rate=sum(rates) / len(rates),
                mean_cbr=sum(cbrs) / len(cbrs),
            )
        )
    return rows


def attack_catalog_lines() -> list[str]:
    """One line per attack: id, catalog row, injection point, mapped detector."""
    lines = [f"{'id':10} {'row':6} {'injection':12} {'detector':9} summary"]
    lines.append("-" * 78)
    for attack_id in AttackId:
        info = CATALOG[attack_id]
        det = info.mapped_detector.name if info.mapped_detector else "-"
        lines.append(f"{attack_id.value:10} {info.row:6} {info.injection_point.value:12} {det:9} {info.summary}")
    lines.append("")
    lines.append(f"{len(AttackId)} attacks")
    return lines


@dataclass
class ReplaySummary:
    header: dict
    records: int
    sends: int
    recvs: int
    verdicts: int
    mbrs: int
    eebl_transitions: dict[str, list]
    trace_hash: str
    hash_ok: bool
    evidence_ok: bool


def replay_trace(lines: Sequence[str]) -> ReplaySummary:
    """Re-read a trace, recompute its hash, and check every report's
    evidence chain resolves to sent envelopes."""
    if not lines:
        raise ValueError("empty trace")
    records = [json.loads(line) for line in lines]
    if records[0].get("rec") != "header":
        raise ValueError("trace missing header record")
    if records[-1].get("rec") != "end":
        raise ValueError("trace missing end record")
    h = hashlib.sha256()
    for line in lines[:-1]:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    claimed = records[-1].get("trace_hash", "")
    sends = [r for r in records if r.get("rec") == "send"]
    sent_digests = {r["digest"] for r in sends}
    mbrs = [r for r in records if r.get("rec") == "mbr"]
    evidence_ok = all(all(ref in sent_digests for ref in r.get("evidence", [])) for r in mbrs)
    for r in mbrs:
        decode(bytes.fromhex(r["bytes"]))  # must parse back
    eebl: dict[str, list] = {}
    last: dict[str, str] = {}
    for r in records:
        if r.get("rec") != "station":
            continue
        sid = str(r["sid"])
        if last.get(sid) != r["eebl"]:
            eebl.setdefault(sid, []).append({"t": r["t"], "state": r["eebl"]})
            last[sid] = r["eebl"]
    return ReplaySummary(
        header=records[0],
        records=len(records),
        sends=len(sends),
        recvs=sum(1 for r in records if r.get("rec") == "recv"),
        verdicts=sum(1 for r in records if r.get("rec") == "verdict"),
        mbrs=len(mbrs),
        eebl_transitions=eebl,
        trace_hash=claimed,
        hash_ok=h.hexdigest() == claimed,
        evidence_ok=evidence_ok,
    )
