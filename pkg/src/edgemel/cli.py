"""Command-line front end: a thin client of the HTTP service.

Every subcommand builds a request, sends it to the service (an in-process
instance by default, a remote one with ``--server``), and renders the
response; all solving happens service-side.  Exit codes: 0 success, 2 parse
error, 3 infeasible, 4 solver non-convergence.
"""

from __future__ import annotations

import pathlib
import sys

import click

EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_NONCONVERGENCE = 4

_KIND_EXIT = {
    "parse_error": EXIT_PARSE,
    "infeasible": EXIT_INFEASIBLE,
    "non_convergence": EXIT_NONCONVERGENCE,
}


def _make_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=3600.0)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            body = resp.json()
        except ValueError:
            body = {"kind": "parse_error", "detail": resp.text}
        detail = body.get("detail", resp.text)
        kind = body.get("kind", "parse_error")
        if isinstance(detail, list):  # pydantic request validation
            detail = "; ".join(str(d.get("msg", d)) for d in detail)
            kind = "parse_error"
        click.echo(f"error ({kind}): {detail}", err=True)
        sys.exit(_KIND_EXIT.get(kind, 1))
    return resp.json()


def _read_file(path: str) -> str:
    p = pathlib.Path(path)
    if not p.exists():
        click.echo(f"error (parse_error): file not found: {path}", err=True)
        sys.exit(EXIT_PARSE)
    return p.read_text(encoding="utf-8")


def _write_files(out: str, files: list[dict]):
    out_dir = pathlib.Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for f in files:
        (out_dir / f["name"]).write_text(f["content"], encoding="utf-8")
    return out_dir


def _render_table(columns, rows) -> str:
    table = [columns] + [[("" if r.get(c) is None else str(r.get(c))) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(columns))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]
    return "\n".join(lines)


@click.group()
def main():
    """Task allocation and training simulation for heterogeneous edge learners."""


_common = [
    click.option("--server", default=None, help="Remote service URL (default: in-process)."),
]


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@main.command()
@click.argument("scenario_file")
@click.option("--scheme", default=None, help="Override the scenario's allocation scheme.")
@click.option("--staleness", type=int, default=None, help="Override the staleness cap.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--format", "fmt", type=click.Choice(["csv", "table"]), default="table")
@click.option("--out", default=None, help="Also write the allocation CSV into this directory.")
@common_options
def allocate(scenario_file, scheme, staleness, seed, fmt, out, server):
    """One-shot allocation for a scenario file."""
    client = _make_client(server)
    body = _post(
        client,
        "/allocate",
        {"scenario": _read_file(scenario_file), "scheme": scheme, "staleness": staleness, "seed": seed},
    )
    columns = ("learner", "tau", "d", "time_s", "energy_j")
    rows = [
        {
            "learner": k,
            "tau": body["tau"][k],
            "d": body["d"][k],
            "time_s": body["predicted_time_s"][k],
            "energy_j": body["predicted_energy_j"][k],
        }
        for k in range(len(body["tau"]))
    ]
    csv_text = ",".join(columns) + "\n" + "\n".join(
        ",".join(str(r[c]) for c in columns) for r in rows
    ) + "\n"
    if fmt == "csv":
        click.echo(csv_text, nl=False)
    else:
        click.echo(_render_table(columns, rows))
        click.echo(
            f"scheme={body['scheme']} objective={body['objective']:.6g} "
            f"staleness={body['staleness']}"
            + (f" dual_bound={body['dual_bound']:.6g}" if body.get("dual_bound") else "")
        )
    if out:
        out_dir = _write_files(out, [{"name": f"{body['scenario_id']}__allocation.csv", "content": csv_text}])
        click.echo(f"wrote {out_dir}/{body['scenario_id']}__allocation.csv", err=True)


@main.command()
@click.argument("scenario_file")
@click.option("--scheme", default=None)
@click.option("--staleness", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", default=".", help="Directory for trace and summary CSVs.")
@click.option("--format", "fmt", type=click.Choice(["csv", "table"]), default="table")
@common_options
def simulate(scenario_file, scheme, staleness, seed, out, fmt, server):
    """Simulate one scenario over its configured global cycles."""
    client = _make_client(server)
    body = _post(
        client,
        "/simulate",
        {"scenario": _read_file(scenario_file), "scheme": scheme, "staleness": staleness, "seed": seed},
    )
    out_dir = _write_files(out, body["files"])
    if fmt == "table":
        click.echo(_render_table(tuple(body["summary"].keys()), [body["summary"]]))
    else:
        click.echo(",".join(str(v) for v in body["summary"].values()))
    click.echo(f"stopping: {body['stopping']}; files in {out_dir}", err=True)


@main.command()
@click.argument("manifest_file")
@click.option("--out", default=None, help="Output directory (default: manifest's own).")
@common_options
def suite(manifest_file, out, server):
    """Run every scenario of a suite manifest and write its CSVs."""
    text = _read_file(manifest_file)
    client = _make_client(server)
    body = _post(client, "/suite", {"manifest": text})
    if out is None:
        # the manifest's out dir lives client-side; re-read it cheaply
        import yaml

        try:
            out = str((yaml.safe_load(text) or {}).get("out", "results"))
        except Exception:
            out = "results"
    out_dir = _write_files(out, body["files"])
    click.echo(
        f"suite {body['suite_id']}: {body['scenario_count']} scenarios, "
        f"{len(body['files'])} files -> {out_dir} (input sha256 {body['content_hash'][:12]})"
    )
    for sid, msg in body["failures"]:
        click.echo(f"  failed: {sid}: {msg}", err=True)
    if body["failures"]:
        sys.exit(EXIT_INFEASIBLE)


@main.command()
@click.argument("summary_files", nargs=-1, required=True)
@click.option("--out", default=None, help="Write compare.csv into this directory.")
@click.option("--format", "fmt", type=click.Choice(["csv", "table"]), default="table")
@common_options
def compare(summary_files, out, fmt, server):
    """Compare schemes across one or more summary CSVs."""
    client = _make_client(server)
    body = _post(client, "/compare", {"summaries": [_read_file(f) for f in summary_files]})
    if fmt == "csv":
        click.echo(body["report_csv"], nl=False)
    else:
        header = body["report_csv"].split("\n", 1)[0].split(",")
        click.echo(_render_table(tuple(header), body["rows"]))
    if out:
        _write_files(out, [{"name": "compare.csv", "content": body["report_csv"]}])


@main.command()
@click.argument("scenario_file")
@click.argument("trace_file")
@common_options
def validate(scenario_file, trace_file, server):
    """Re-check a trace CSV against its scenario's invariants."""
    client = _make_client(server)
    body = _post(
        client,
        "/validate",
        {"scenario": _read_file(scenario_file), "trace_csv": _read_file(trace_file)},
    )
    if body["ok"]:
        click.echo("trace OK")
    else:
        for v in body["violations"]:
            click.echo(f"violation: {v}", err=True)
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
