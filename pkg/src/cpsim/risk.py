"""Risk-rating engine for the attack catalog.

An overall rating is the majority of the three criteria ratings
(reproducibility, impact, stealthiness); when all three differ the overall
is Medium. Published per-row ratings are data to compare against, never
silently overridden: rows where the printed rating violates the rule get a
mismatch flag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from importlib import resources
from typing import Iterable, Optional


class Rating(IntEnum):
    LOW = 0
    MEDIUM = 1
    HIGH = 2

    @classmethod
    def parse(cls, text: str) -> "Rating":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown rating {text!r}") from None

    def __str__(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class CriteriaTriple:
    reproducibility: Rating
    impact: Rating
    stealthiness: Rating

    def as_tuple(self) -> tuple[Rating, Rating, Rating]:
        return (self.reproducibility, self.impact, self.stealthiness)


@dataclass(frozen=True)
class CatalogRow:
    row_ref: str  # e.g. "III-A", "IV-C"
    attack_id: str
    triple: CriteriaTriple
    published_overall: Rating
    use_case: str = ""
    attack: str = ""
    defense: str = ""


@dataclass(frozen=True)
class RowResult:
    row: CatalogRow
    computed: Rating
    matches_published: bool


@dataclass(frozen=True)
class CatalogReport:
    results: tuple[RowResult, ...]
    computed_tally: dict[str, int]
    published_tally: dict[str, int]
    claimed_tally: Optional[dict[str, int]]

    @property
    def mismatched_rows(self) -> list[str]:
        return [r.row.row_ref for r in self.results if not r.matches_published]


def overall_risk(triple: CriteriaTriple) -> Rating:
    """Majority rating of the three criteria; all distinct gives Medium."""
    values = triple.as_tuple()
    for v in values:
        if values.count(v) >= 2:
            return v
    return Rating.MEDIUM


def _tally(ratings: Iterable[Rating]) -> dict[str, int]:
    out = {"High": 0, "Medium": 0, "Low": 0}
    for r in ratings:
        out[str(r)] += 1
    return out


def evaluate_catalog(rows: Iterable[CatalogRow], claimed_tally: Optional[dict[str, int]] = None) -> CatalogReport:
    """Recompute every row's overall rating and flag published mismatches."""
    rows = list(rows)
    seen = set()
    for row in rows:
        if row.row_ref in seen:
            raise ValueError(f"duplicate row_ref {row.row_ref}")
        seen.add(row.row_ref)
    results = []
    for row in rows:
        computed = overall_risk(row.triple)
        results.append(RowResult(row, computed, computed == row.published_overall))
    return CatalogReport(
        results=tuple(results),
        computed_tally=_tally(r.computed for r in results),
        published_tally=_tally(row.published_overall for row in rows),
        claimed_tally=dict(claimed_tally) if claimed_tally else None,
    )


def load_catalog_dict(data: dict) -> tuple[list[CatalogRow], Optional[dict[str, int]]]:
    rows = []
    for raw in data["rows"]:
        rows.append(
            CatalogRow(
                row_ref=raw["row_ref"],
                attack_id=raw["attack_id"],
                triple=CriteriaTriple(
                    Rating.parse(raw["reproducibility"]),
                    Rating.parse(raw["impact"]),
                    Rating.parse(raw["stealthiness"]),
                ),
                published_overall=Rating.parse(raw["published_overall"]),
                use_case=raw.get("use_case", ""),
                attack=raw.get("attack", ""),
                defense=raw.get("defense", ""),
            )
        )
    claimed = data.get("claimed_tally")
    return rows, claimed


def load_catalog_file(path) -> tuple[list[CatalogRow], Optional[dict[str, int]]]:
    with open(path, "r", encoding="utf-8") as fh:
        return load_catalog_dict(json.load(fh))


def load_builtin_catalog() -> tuple[list[CatalogRow], Optional[dict[str, int]]]:
    """The checked-in 16-row catalog."""
    text = resources.files("cpsim.data").joinpath("risk_catalog.json").read_text(encoding="utf-8")
    return load_catalog_dict(json.loads(text))


def render_report(report: CatalogReport) -> str:
    """Plain-text table of the evaluation."""
    lines = []
    header = f"{'row':6} {'attack':10} {'repro':7} {'impact':7} {'stealth':7} {'computed':9} {'published':10} match"
    lines.append(header)
    lines.append("-" * len(header))
    for r in report.results:
        t = r.row.triple
        lines.append(
            f"{r.row.row_ref:6} {r.row.attack_id:10} {str(t.reproducibility):7} {str(t.impact):7} "
            f"{str(t.stealthiness):7} {str(r.computed):9} {str(r.row.published_overall):10} "
            f"{'yes' if r.matches_published else 'MISMATCH'}"
        )
    lines.append("")
    lines.append(f"computed tally : {report.computed_tally}")
    lines.append(f"published tally: {report.published_tally}")
    if report.claimed_tally is not None:
        lines.append(f"claimed tally  : {report.claimed_tally} (stated summary; printed for comparison)")
    if report.mismatched_rows:
        lines.append(f"majority-rule mismatches: {', '.join(report.mismatched_rows)}")
    else:
        lines.append("majority-rule mismatches: none")
    return "\n".join(lines)
