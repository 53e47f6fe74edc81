"""Append-only attempt logging, campaign reload, and text exports.

Each campaign owns one directory: a write-once config snapshot, a
JSON-lines attempt log (one self-delimiting record per line, flushed on
every write), and any exports. A torn final line from a crash is detected
on reload, skipped, and truncated away before appending resumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import ValidationError
from .model import (
    AttemptOutcome,
    AttemptRecord,
    ScanResult,
    SuccessStats,
    TriggerPlan,
    die_key,
)
from .stats import format_rate

CONFIG_FILENAME = "config.json"
LOG_FILENAME = "attempts.jsonl"


class CampaignLog:
    """Single-writer append log plus the campaign's config snapshot."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.config_path = self.directory / CONFIG_FILENAME
        self.log_path = self.directory / LOG_FILENAME
        self._fh = None

    # -- config snapshot ------------------------------------------------

    def write_config(self, config: dict) -> None:
        """Persist the config snapshot once; later calls must match it."""
        if self.config_path.exists():
            existing = json.loads(self.config_path.read_text())
            if existing != config:
                raise ValidationError(
                    "campaign directory already holds a different config snapshot"
                )
            return
        self.config_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")

    def read_config(self) -> dict:
        return json.loads(self.config_path.read_text())

    # -- log writing ------------------------------------------------------

    def append(self, record: AttemptRecord) -> None:
        if self._fh is None:
            self._fh = open(self.log_path, "a", encoding="utf-8")
        self._fh.write(json.dumps(record.to_dict(), separators=(",", ":")) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "CampaignLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- log reading ------------------------------------------------------

    def load(self) -> tuple[list[AttemptRecord], bool]:
        """All complete records plus a flag for a truncated final line."""
        if not self.log_path.exists():
            return [], False
        records: list[AttemptRecord] = []
        data = self.log_path.read_text(encoding="utf-8")
        truncated = bool(data) and not data.endswith("\n")
        lines = data.splitlines()
        if truncated:
            lines = lines[:-1]
        for idx, line in enumerate(lines):
            if not line:
                continue
            try:
                records.append(AttemptRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValidationError):
                # A malformed last line is crash debris; a malformed interior
                # line would break seq continuity and is a real error.
                if idx == len(lines) - 1:
                    truncated = True
                    break
                raise
        return records, truncated

    def prepare_resume(self) -> list[AttemptRecord]:
        """Drop any torn tail so appends start on a clean line boundary."""
        records, truncated = self.load()
        if truncated:
            keep = "".join(
                json.dumps(r.to_dict(), separators=(",", ":")) + "\n" for r in records
            )
            # Rewrite from the parsed records: byte-identical to the intact
            # prefix because serialization is deterministic.
            self.log_path.write_text(keep, encoding="utf-8")
        return records


@dataclass
class LoadedCampaign:
    directory: Path
    config: dict
    records: list[AttemptRecord]
    truncated: bool


def load_campaign(directory: str | Path) -> LoadedCampaign:
    log = CampaignLog(directory)
    records, truncated = log.load()
    config = log.read_config() if log.config_path.exists() else {}
    return LoadedCampaign(
        directory=Path(directory), config=config, records=records, truncated=truncated
    )


# -- reconstruction ------------------------------------------------------


def scan_result_from_records(
    records: Iterable[AttemptRecord],
    anchor_xy: tuple[float, float],
    offset_xy: tuple[float, float],
    attempts_per_position: int,
) -> ScanResult:
    """Rebuild the per-position histograms from persisted stage positions."""
    result = ScanResult(attempts_per_position)
    ax, ay = anchor_xy
    dx, dy = offset_xy
    for rec in records:
        x, y = die_key(rec.position.x - ax - dx, rec.position.y - ay - dy)
        result.add(x, y, rec.outcome)
    return result


def attack_stats_from_records(records: Iterable[AttemptRecord]) -> SuccessStats:
    successes = 0
    attempts = 0
    for rec in records:
        attempts += 1
        if rec.outcome is AttemptOutcome.BYPASS_SUCCESS:
            successes += 1
    return SuccessStats(successes, attempts)


# -- exports --------------------------------------------------------------

HEATMAP_HEADER = "x_mm,y_mm,attempts,faults,crashes,bypasses"


def export_heatmap(result: ScanResult) -> str:
    """CSV with one row per scanned position, in scan order."""
    lines = [HEATMAP_HEADER]
    for key in result.order:
        hist = result.histograms[key]
        attempts = result.attempts_at(key)
        faults = hist.get(AttemptOutcome.PAYLOAD_FAULT, 0)
        crashes = hist.get(AttemptOutcome.CRASH, 0)
        bypasses = hist.get(AttemptOutcome.BYPASS_SUCCESS, 0)
        lines.append(
            f"{key[0]:.2f},{key[1]:.2f},{attempts},{faults},{crashes},{bypasses}"
        )
    return "\n".join(lines) + "\n"


SUMMARY_HEADER = "Delay/ΔDelay | Success/Attempts | Success Rate"


def export_summary(rows: Iterable[tuple[TriggerPlan, SuccessStats]]) -> str:
    """Success-rate table, one row per evaluated trigger plan."""
    lines = [SUMMARY_HEADER]
    for plan, stats in rows:
        rate = format_rate(stats) if stats.attempts > 0 else "n/a"
        lines.append(
            f"{plan.delay}/{plan.window} | {stats.successes}/{stats.attempts} | {rate}"
        )
    return "\n".join(lines) + "\n"


def write_export(directory: str | Path, filename: str, content: str) -> Path:
    path = Path(directory) / filename
    path.write_text(content, encoding="utf-8")
    return path
