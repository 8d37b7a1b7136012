"""Command-line client for the modeling service.

Each subcommand builds a request, sends it to the service, and writes the
response to --out (or stdout). Without --server the app runs in-process
through an ASGI test transport, so no separate server is needed; with
--server URL the same requests go over the network. Module failures exit
nonzero with a structured error JSON on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys

from .service import schemas as S

DEFAULT_DEMO_STUDY = {
    "scenarios": [
        {"label": "copula-demo", "variant": "copula", "n_events": 300,
         "params": {"dep": 1.5}},
        {"label": "mln-demo", "variant": "mln", "n_events": 300,
         "params": {"dep": 0.1445}},
    ],
    "fits": [{"variant": "mln"}, {"variant": "copula"}],
    "replicates": 10,
}


class CliError(RuntimeError):
    pass


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*httpx.*")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json()
        except ValueError:
            detail = {"error": "HTTPError", "message": resp.text}
        raise CliError(json.dumps(detail))
    return resp.json()


def _load_config(path: str | None) -> S.RunConfig:
    if path is None:
        return S.RunConfig()
    with open(path, encoding="utf-8") as fh:
        return S.RunConfig.model_validate(json.load(fh))


def _write_out(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _ingest(client, data_path: str, cfg: S.RunConfig) -> dict:
    with open(data_path, encoding="utf-8") as fh:
        csv_text = fh.read()
    return _post(client, "/ingest", {
        "csv_text": csv_text, "mapping": cfg.mapping,
        "date_min": cfg.date_min, "date_max": cfg.date_max,
    })


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    variant = args.variant or cfg.variant
    with _client(args.server) as client:
        history = _ingest(client, args.data, cfg)
        result = _post(client, "/fit", {
            "history": history,
            "variant": variant,
            "optimizer": cfg.optimizer.model_dump(),
            "seed": args.seed if args.seed is not None else cfg.seed,
        })
    _write_out(json.dumps(result, indent=2), args.out)
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    req = cfg.simulate or S.SimulateRequest()
    payload = req.model_dump()
    if args.variant:
        payload["variant"] = args.variant
    if args.n_events:
        payload["n_events"] = args.n_events
    if args.seed is not None:
        payload["seed"] = args.seed
    with _client(args.server) as client:
        result = _post(client, "/simulate", payload)
    _write_out(result["csv_text"], args.out)
    return 0


def cmd_study(args) -> int:
    cfg = _load_config(args.config)
    req = cfg.study or S.StudyRequest.model_validate(DEFAULT_DEMO_STUDY)
    payload = req.model_dump()
    if args.replicates:
        payload["replicates"] = args.replicates
    if args.seed is not None:
        payload["master_seed"] = args.seed
    with _client(args.server) as client:
        result = _post(client, "/study", payload)
    _write_out(result["csv_text"], args.out)
    return 0


def cmd_diagnose(args) -> int:
    cfg = _load_config(args.config)
    with open(args.fit, encoding="utf-8") as fh:
        fitted = json.load(fh)
    estimates = fitted["estimates"]
    params = {k: v for k, v in estimates.items() if k not in ("eta", "alpha")}
    params["dep"] = estimates.get("eta", estimates.get("alpha"))
    with _client(args.server) as client:
        history = _ingest(client, args.data, cfg)
        result = _post(client, "/diagnose", {
            "history": history,
            "variant": fitted["variant"],
            "params": params,
            "grid_step": args.grid_step if args.grid_step is not None else cfg.grid_step,
        })
    buf = _io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["event_type", "t", "estimated_H", "observed_N"])
    for j in ("1", "2"):
        s = result["series"][j]
        for t, est, obs in zip(s["t"], s["estimated"], s["observed"]):
            writer.writerow([j, f"{t:.10g}", f"{est:.10g}", obs])
    _write_out(buf.getvalue(), args.out)
    return 0


def cmd_summarize(args) -> int:
    cfg = _load_config(args.config)
    with _client(args.server) as client:
        history = _ingest(client, args.data, cfg)
        result = _post(client, "/summarize", {"history": history})
    _write_out(json.dumps(result, indent=2), args.out)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("carp.service:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carp",
                                     description="Bivariate recurrent-event modeling client")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False):
        p.add_argument("--config", help="JSON config file (RunConfig schema)")
        p.add_argument("--seed", type=int, default=None, help="RNG seed")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--server", help="service URL; defaults to in-process execution")
        if data:
            p.add_argument("data", help="event CSV (header: time,duration,geyser)")

    p = sub.add_parser("fit", help="maximum-likelihood fit on an event CSV")
    common(p, data=True)
    p.add_argument("--variant", choices=["mln", "copula"])
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="generate a synthetic event CSV")
    common(p)
    p.add_argument("--variant", choices=["mln", "copula"])
    p.add_argument("--n-events", type=int, dest="n_events")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="run a simulation study grid")
    common(p)
    p.add_argument("--replicates", type=int)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("diagnose", help="cumulative-intensity diagnostics for a prior fit")
    common(p, data=True)
    p.add_argument("--fit", required=True, help="FitResult JSON from `carp fit`")
    p.add_argument("--grid-step", type=float, dest="grid_step")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("summarize", help="per-type counts and gap/duration moments")
    common(p, data=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    from pydantic import ValidationError

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(str(exc) + "\n")
        return 1
    except (OSError, ValueError, ValidationError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
