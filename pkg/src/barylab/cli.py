"""Command-line batch front end; a thin client over the HTTP service.

Subcommands cover the sweep tasks (phase, asymptotics, threshold,
compare-ball, sweep), one-shot reports (solve1d, stability, flow), and
`serve` to run the service over a socket.  By default requests are
dispatched to the service in process through an ASGI transport, so no
server needs to be running; `--base-url` points the same client at a
remote instance instead.

Numeric grids accept `lo:hi:step` ranges (inclusive ends) or comma lists.
Tables are emitted as CSV with 17-significant-digit floats (byte-identical
for identical requests) or as JSON mirroring the CSV plus metadata; `--out`
writes atomically, otherwise the table goes to stdout.

Exit codes: 0 success; 1 a consistency check or the service failed;
2 invalid arguments.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys

import httpx

from . import sweeps
from ._version import __version__
from .errors import DomainError

__all__ = ["main", "build_parser", "ServiceClient"]


class ServiceError(RuntimeError):
    """Non-2xx service response, carrying the HTTP status and detail."""

    def __init__(self, status_code: int, detail: str):
        super().__init__(f"service returned {status_code}: {detail}")
        self.status_code = status_code
        self.detail = detail


class ServiceClient:
    """POST/GET wrapper that works in process (default) or over HTTP."""

    def __init__(self, base_url: str | None = None):
        self.base_url = base_url

    def _request_remote(self, method: str, path: str, payload: dict | None) -> httpx.Response:
        with httpx.Client(base_url=self.base_url, timeout=None) as client:
            return client.request(method, path, json=payload)

    def _request_inprocess(self, method: str, path: str, payload: dict | None) -> httpx.Response:
        from .api import app

        async def go() -> httpx.Response:
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://barylab.internal", timeout=None
            ) as client:
                return await client.request(method, path, json=payload)

        return asyncio.run(go())

    def request(self, method: str, path: str, payload: dict | None = None) -> dict:
        if self.base_url:
            response = self._request_remote(method, path, payload)
        else:
            response = self._request_inprocess(method, path, payload)
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise ServiceError(response.status_code, str(detail))
        return response.json()

    def get(self, path: str) -> dict:
        return self.request("GET", path)

    def post(self, path: str, payload: dict) -> dict:
        return self.request("POST", path, payload)


# ---------------------------------------------------------------------------
# output helpers


def _emit_table(table: dict, args) -> None:
    if args.format == "json":
        text = json.dumps(table, indent=2, sort_keys=True) + "\n"
    else:
        text = sweeps.rows_to_csv(tuple(table["columns"]), table["rows"])
    if args.out:
        sweeps.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _emit_json(payload: dict, args) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        sweeps.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_phase(client: ServiceClient, args) -> None:
    table = client.post(
        "/phase",
        {
            "s_values": list(sweeps.parse_values(args.s)),
            "eps0_values": list(sweeps.parse_values(args.eps0)),
        },
    )
    _emit_table(table, args)


def _cmd_asymptotics(client: ServiceClient, args) -> None:
    table = client.post("/asymptotics", {"s_values": list(sweeps.parse_values(args.s))})
    _emit_table(table, args)


def _cmd_threshold(client: ServiceClient, args) -> None:
    table = client.post("/threshold", {"s_values": list(sweeps.parse_values(args.s))})
    _emit_table(table, args)


def _cmd_compare_ball(client: ServiceClient, args) -> None:
    table = client.post("/compare-ball", {"volume": args.volume})
    _emit_table(table, args)


def _cmd_sweep(client: ServiceClient, args) -> None:
    payload = client.post(
        "/sweep",
        {
            "s_values": list(sweeps.parse_values(args.s)),
            "eps0_values": list(sweeps.parse_values(args.eps0)),
            "tasks": args.tasks.split(","),
            "seed": args.seed,
            "volume": args.volume,
        },
    )
    if args.out:
        sweeps.write_artifacts(payload, args.out, args.format)
    elif args.format == "json":
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        for name, table in payload["tasks"].items():
            sys.stdout.write(f"# task {name}\n")
            sys.stdout.write(sweeps.rows_to_csv(tuple(table["columns"]), table["rows"]))


def _cmd_solve1d(client: ServiceClient, args) -> None:
    payload = {"s": args.s, "eps0": args.eps0, "n_grid": args.n_grid}
    if args.brute_k is not None:
        payload["brute_force_k"] = args.brute_k
        payload["brute_grid"] = args.brute_grid
    _emit_json(client.post("/solve1d", payload), args)


def _cmd_stability(client: ServiceClient, args) -> None:
    payload = {
        "s": args.s,
        "eps0": args.eps0,
        "candidate": args.candidate,
        "basis_size": args.basis_size,
        "locate_critical": not args.no_locate_critical,
    }
    _emit_json(client.post("/stability", payload), args)


def _cmd_flow(client: ServiceClient, args) -> None:
    payload = {
        "s": args.s,
        "eps0": args.eps0,
        "topology": args.topology,
        "seed": args.seed,
        "amplitude": args.amplitude,
        "n_nodes": args.nodes,
        "half_width": args.half_width,
        "max_steps": args.max_steps,
        "grad_tol": args.grad_tol,
        "include_profile": args.snapshot is not None,
    }
    report = client.post("/flow", payload)
    if args.snapshot is not None:
        from . import profiles

        prof = report.pop("profile")
        import numpy as np

        profiles.save_profile(
            args.snapshot,
            profiles.Profile(prof["topology"], np.asarray(prof["grid"]), np.asarray(prof["values"])),
        )
    else:
        report.pop("profile", None)
    _emit_json(report, args)


def _cmd_serve(client: ServiceClient, args) -> None:
    import uvicorn

    from .api import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="barylab",
        description="Numerical laboratory for Gaussian isoperimetry with barycenter repulsion.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--base-url", default=None, help="remote service URL (default: in process)")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("phase", help="winner map over an (s, eps0) grid")
    p.add_argument("--s", required=True, help="s grid: lo:hi:step or comma list")
    p.add_argument("--eps0", required=True, help="eps0 grid: lo:hi:step or comma list")
    common(p)
    p.set_defaults(fn=_cmd_phase)

    p = sub.add_parser("asymptotics", help="scaled strip gap/perimeter and threshold vs s")
    p.add_argument("--s", required=True)
    common(p)
    p.set_defaults(fn=_cmd_asymptotics)

    p = sub.add_parser("threshold", help="threshold eps0(s) and window placement")
    p.add_argument("--s", required=True)
    common(p)
    p.set_defaults(fn=_cmd_threshold)

    p = sub.add_parser("compare-ball", help="ball vs strip perimeter at equal volume")
    p.add_argument("--volume", type=float, default=0.5)
    common(p)
    p.set_defaults(fn=_cmd_compare_ball)

    p = sub.add_parser("sweep", help="run several tasks over one grid")
    p.add_argument("--s", required=True)
    p.add_argument("--eps0", default="1.3")
    p.add_argument("--tasks", default="phase", help="comma list from: " + ",".join(sweeps.TASKS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--volume", type=float, default=0.5)
    common(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("solve1d", help="reduced 1D minimization report at one (s, eps0)")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--eps0", type=float, required=True)
    p.add_argument("--n-grid", type=int, default=10_000)
    p.add_argument("--brute-k", type=int, default=None, help="brute-force union oracle, k intervals")
    p.add_argument("--brute-grid", type=int, default=9)
    common(p)
    p.set_defaults(fn=_cmd_solve1d)

    p = sub.add_parser("stability", help="second-variation spectrum at one (s, eps0)")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--eps0", type=float, required=True)
    p.add_argument("--candidate", choices=("strip", "half_space"), default="strip")
    p.add_argument("--basis-size", type=int, default=16)
    p.add_argument("--no-locate-critical", action="store_true")
    common(p)
    p.set_defaults(fn=_cmd_stability)

    p = sub.add_parser("flow", help="profile descent run")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--eps0", type=float, required=True)
    p.add_argument("--topology", choices=("single", "double"), default="single")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--amplitude", type=float, default=0.1)
    p.add_argument("--nodes", type=int, default=257)
    p.add_argument("--half-width", type=float, default=8.0)
    p.add_argument("--max-steps", type=int, default=5000)
    p.add_argument("--grad-tol", type=float, default=1e-8)
    p.add_argument("--snapshot", default=None, help="write the converged profile table here")
    common(p)
    p.set_defaults(fn=_cmd_flow)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    client = ServiceClient(getattr(args, "base_url", None))
    try:
        args.fn(client, args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ServiceError as exc:
        print(f"error: {exc.detail}", file=sys.stderr)
        return 2 if exc.status_code in (400, 422) else 1
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
