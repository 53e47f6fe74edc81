"""Regenerate the frontend test fixtures from a seeded campaign.

Writes tests/fixtures/events.jsonl (the event stream a subscriber would
receive) and tests/fixtures/heatmap.csv (the server-side export for the
same campaign). The heatmap test replays the former and must reproduce
the latter byte for byte.

Usage: python3 scripts/make_fixtures.py   (from the frontend directory)
"""

import json
import tempfile
from pathlib import Path

from emfi_rig.campaign import build_sim_rig
from emfi_rig.dut import FaultBlob, FaultEffect, FaultModel, VsocGate
from emfi_rig.server.manager import RigManager

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

MODEL = FaultModel(
    blobs=(
        FaultBlob(center=(13.4, 4.3), sigma=0.7, p_max=0.45, effect=FaultEffect.LOOP_FAULT),
        FaultBlob(center=(12.4, 3.1), sigma=0.6, p_max=0.12, effect=FaultEffect.CRASH),
    ),
    voltage_knee=350.0,
    vsoc_gate=VsocGate(0.60, 0.0),
    seed=0,
)

CONFIG = {
    "version": 1,
    "mode": "scan",
    "payload": {"kind": "counter_loop", "iterations": 1000},
    "pulse": {"voltage": 500, "width_ns": 73, "probe": {"diameter_mm": 4, "winding": "CW"}},
    "supplies": {"v_soc": 0.59, "v_core": 1.1},
    "seed": 1,
    "epoch": "2025-01-01T00:00:00+00:00",
    "plan": {"delay": 2000, "window": 0},
    "grid": {"x0": 11.0, "y0": 2.0, "width": 5.0, "height": 4.0, "pitch": 1.0},
    "attempts_per_position": 50,
}


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as ws:
        manager = RigManager(build_sim_rig(fault_model=MODEL), ws)
        cid = manager.start_campaign(CONFIG)
        handle = manager.get_campaign(cid)
        handle.thread.join(timeout=120)
        assert handle.state == "completed", handle.state

        lines = []
        for event in manager.event_stream(cid):
            if event["type"] == "attempt":
                lines.append(
                    json.dumps(
                        {"event": "attempt", "id": event["seq"], "data": event["record"]},
                        separators=(",", ":"),
                    )
                )
            else:
                payload = {k: v for k, v in event.items() if k != "type"}
                lines.append(
                    json.dumps({"event": "lifecycle", "data": payload}, separators=(",", ":"))
                )
        (FIXTURES / "events.jsonl").write_text("\n".join(lines) + "\n")
        (FIXTURES / "heatmap.csv").write_text(manager.heatmap_csv(cid))
    print(f"wrote {FIXTURES / 'events.jsonl'} ({len(lines)} events)")
    print(f"wrote {FIXTURES / 'heatmap.csv'}")


if __name__ == "__main__":
    main()
