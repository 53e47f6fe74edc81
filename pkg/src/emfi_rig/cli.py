"""Command-line entry points: serve the rig, run campaigns against a
running server (thin client), or run them locally without HTTP.

`scan`, `attack` and `sweep` read the same campaign config documents the
server accepts; they force the matching mode so a mislabelled file fails
fast.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import httpx

from .campaign import CampaignConfig, build_sim_rig, run_campaign
from .dut import load_fault_model
from .errors import RigError
from .persistence import (
    attack_stats_from_records,
    export_heatmap,
    export_summary,
    load_campaign,
    scan_result_from_records,
    write_export,
)
from .model import TriggerPlan
from .stats import format_rate

DEFAULT_URL = "http://127.0.0.1:8765"


@click.group()
def main():
    """EMFI campaign orchestration."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="Server config JSON (bind, port, workspace, fault_model).")
@click.option("--host", default=None, help="Bind address (overrides config and EMFI_RIG_BIND).")
@click.option("--port", default=None, type=int)
@click.option("--workspace", default=None, type=click.Path(path_type=Path))
@click.option("--fault-model", default=None, type=click.Path(exists=True, path_type=Path))
def serve(config_path, host, port, workspace, fault_model):
    """Run the control server with a simulated rig.

    Precedence for each setting: flag, then environment, then config
    file, then built-in default.
    """
    import uvicorn

    from .server.app import create_app, create_manager

    doc = json.loads(config_path.read_text()) if config_path else {}
    bind = host or os.environ.get("EMFI_RIG_BIND") or doc.get("bind", "127.0.0.1")
    port = port if port is not None else int(doc.get("port", 8765))
    env_ws = os.environ.get("EMFI_RIG_WORKSPACE")
    ws = workspace or (Path(env_ws) if env_ws else None) or Path(doc.get("workspace", "workspace"))
    model = fault_model or (Path(doc["fault_model"]) if doc.get("fault_model") else None)
    manager = create_manager(ws, model)
    app = create_app(manager)
    uvicorn.run(app, host=bind, port=port)


def _load_config(path: Path, mode: str) -> dict:
    doc = json.loads(path.read_text())
    if doc.get("mode") != mode:
        raise click.ClickException(
            f"config file is for mode {doc.get('mode')!r}, expected {mode!r}"
        )
    return doc


def _run_remote(url: str, doc: dict) -> None:
    with httpx.Client(base_url=url, timeout=None) as client:
        created = client.post("/campaigns", json=doc)
        if created.status_code != 201:
            raise click.ClickException(f"server refused campaign: {created.text}")
        cid = created.json()["id"]
        click.echo(f"campaign {cid}")
        done = 0
        with client.stream("GET", "/events", params={"campaign_id": cid}) as stream:
            for line in stream.iter_lines():
                if line.startswith("data: "):
                    done += 1
                    if done % 500 == 0:
                        click.echo(f"  {done} events")
        final = client.get(f"/campaigns/{cid}").json()
        click.echo(json.dumps(final, indent=2))


def _run_local(doc: dict, out: Path, fault_model: Path | None) -> None:
    config = CampaignConfig.from_dict(doc)
    model = load_fault_model(fault_model) if fault_model else None
    rig = build_sim_rig(fault_model=model)
    result = run_campaign(rig, config, out)
    click.echo(f"{result.records} attempts -> {out}")
    if result.scan is not None:
        best = result.scan.argmax()
        total = result.scan.total_stats()
        click.echo(f"faults {total.successes}/{total.attempts}, argmax {best}")
    if result.stats is not None:
        click.echo(f"success {result.stats.successes}/{result.stats.attempts}"
                   f" = {format_rate(result.stats)}")
    if result.groups is not None:
        for g in result.groups:
            click.echo(f"delay group median {g.median} span [{g.lo}, {g.hi}]")


def _campaign_command(mode: str):
    @click.argument("config", type=click.Path(exists=True, path_type=Path))
    @click.option("--url", default=DEFAULT_URL, show_default=True, help="Server to drive.")
    @click.option("--local", is_flag=True, help="Run in-process without a server.")
    @click.option("--out", type=click.Path(path_type=Path), default=None,
                  help="Campaign directory for --local runs.")
    @click.option("--fault-model", type=click.Path(exists=True, path_type=Path), default=None,
                  help="Fault model JSON for --local runs.")
    def cmd(config, url, local, out, fault_model):
        doc = _load_config(config, mode)
        try:
            if local:
                _run_local(doc, out or Path(f"campaigns/{mode}-local"), fault_model)
            else:
                _run_remote(url, doc)
        except RigError as exc:
            raise click.ClickException(str(exc))

    cmd.__name__ = mode
    return cmd


main.command(name="scan", help="Run a grid scan campaign.")(_campaign_command("scan"))
main.command(name="attack", help="Run a fixed-point attack campaign.")(_campaign_command("attack"))
main.command(name="sweep", help="Run a trigger-delay sweep campaign.")(_campaign_command("sweep"))


@main.command()
@click.argument("campaign_dir", type=click.Path(exists=True, path_type=Path))
def export(campaign_dir):
    """Regenerate heatmap/summary exports from a campaign directory."""
    loaded = load_campaign(campaign_dir)
    if loaded.truncated:
        click.echo("warning: log ended in a torn line; it was skipped", err=True)
    cfg = loaded.config
    if not cfg:
        raise click.ClickException("campaign directory has no config snapshot")
    mode = cfg.get("mode")
    if mode == "scan":
        anchor = (cfg["anchor"]["corner"]["x"], cfg["anchor"]["corner"]["y"])
        offset = (cfg["offset"]["dx"], cfg["offset"]["dy"])
        result = scan_result_from_records(
            loaded.records, anchor, offset, cfg.get("attempts_per_position", 100)
        )
        path = write_export(campaign_dir, "heatmap.csv", export_heatmap(result))
        click.echo(str(path))
    elif mode == "attack":
        stats = attack_stats_from_records(loaded.records)
        plan = TriggerPlan(**cfg["plan"])
        path = write_export(campaign_dir, "summary.txt", export_summary([(plan, stats)]))
        click.echo(str(path))
    else:
        raise click.ClickException(f"no exporter for mode {mode!r}")


if __name__ == "__main__":
    sys.exit(main())
