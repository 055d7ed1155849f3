"""Command-line client for the feasmap service.

Every subcommand builds the same request model the HTTP endpoint accepts and
either calls the service layer in-process (default; no server needed) or
sends it to a running server given with ``--server``.  Exit codes: 0 success,
2 configuration error, 3 stage/runtime failure, 4 degenerate single-class
data.
"""

from __future__ import annotations

import argparse
import json
import sys

from pydantic import BaseModel, ValidationError

from .errors import FeasmapError
from .service import ops, schemas

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3
EXIT_DEGENERATE = 4

_KIND_EXIT = {
    "config": EXIT_CONFIG,
    "invalid-argument": EXIT_CONFIG,
    "unsupported-dimension": EXIT_CONFIG,
    "degenerate-data": EXIT_DEGENERATE,
}


def _exit_code_for(kind: str) -> int:
    return _KIND_EXIT.get(kind, EXIT_STAGE)


class Client:
    """Transport wrapper: in-process ops by default, HTTP when given a server."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def call(self, op, method: str, path: str, request: BaseModel | None = None) -> dict:
        if self.server is None:
            result = op() if request is None else op(request)
            return result.model_dump()
        import httpx

        with httpx.Client(base_url=self.server, timeout=None) as http:
            if method == "GET":
                resp = http.get(path)
            else:
                body = request.model_dump() if request is not None else {}
                resp = http.post(path, json=body)
        if resp.status_code >= 400:
            try:
                payload = resp.json()
            except ValueError:
                payload = {"detail": resp.text, "kind": "stage"}
            raise _RemoteError(payload.get("detail", "error"), payload.get("kind", "stage"))
        return resp.json()


class _RemoteError(Exception):
    def __init__(self, detail: str, kind: str):
        super().__init__(detail)
        self.kind = kind


def _emit(data: dict, args, lines) -> None:
    if args.json:
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        for line in lines(data):
            print(line)


# --- command handlers -------------------------------------------------------


def _cmd_sample(args, client: Client) -> dict:
    req = schemas.SampleRequest(
        model=args.model, n=args.n, start_index=args.start_index, out=args.out
    )
    return client.call(ops.sample, "POST", "/sample", req)


def _cmd_label(args, client: Client) -> dict:
    req = schemas.LabelRequest(
        config_path=args.config, samples=args.samples, out=args.out, workers=args.workers
    )
    return client.call(ops.label, "POST", "/label", req)


def _cmd_train(args, client: Client) -> dict:
    req = schemas.TrainRequest(
        labels=args.labels,
        sigma=args.sigma,
        regularization_L=args.L,
        kkt_tol=args.kkt_tol,
        max_passes=args.max_passes,
        seed=args.seed,
        out=args.out,
    )
    return client.call(ops.train_model, "POST", "/train", req)


def _cmd_calibrate(args, client: Client) -> dict:
    req = schemas.CalibrateRequest(
        model=args.model,
        labels=args.labels,
        delta=args.delta,
        mode=args.mode,
        w_bar=args.wbar,
        out=args.out,
    )
    return client.call(ops.calibrate_region, "POST", "/calibrate", req)


def _cmd_boundary(args, client: Client) -> dict:
    req = schemas.BoundaryRequest(
        region=args.region, resolution=args.res, out=args.out, model=args.system
    )
    return client.call(ops.boundary, "POST", "/boundary", req)


def _cmd_erode(args, client: Client) -> dict:
    req = schemas.ErodeRequest(p_file=args.P_file, mu=args.mu, w_bar=args.wbar)
    return client.call(ops.erode, "POST", "/erode", req)


def _cmd_export_grid(args, client: Client) -> dict:
    req = schemas.ExportGridRequest(
        region=args.region,
        boundary=args.boundary,
        resolution=args.res,
        out=args.out,
        model=args.system,
    )
    return client.call(ops.export_grid, "POST", "/export-grid", req)


def _cmd_pipeline(args, client: Client) -> dict:
    req = schemas.PipelineRequest(
        config_path=args.config,
        preset=args.preset,
        out_dir=args.out_dir,
        force=args.force,
    )
    return client.call(ops.pipeline, "POST", "/pipeline", req)


def _cmd_compare(args, client: Client) -> dict:
    req = schemas.CompareRequest(
        manifest_a=args.manifest_a, manifest_b=args.manifest_b, slack=args.slack
    )
    return client.call(ops.compare, "POST", "/compare", req)


def _cmd_classify(args, client: Client) -> dict:
    points = []
    for token in args.points:
        try:
            points.append([float(v) for v in token.split(",")])
        except ValueError:
            raise FeasmapError(f"point '{token}' is not comma-separated numbers")
    req = schemas.ClassifyRequest(
        region=args.region, boundary=args.boundary, points=points, model=args.system
    )
    return client.call(ops.classify_points, "POST", "/classify", req)


def _cmd_preset(args, client: Client) -> dict:
    return client.call(lambda: ops.get_preset(args.name), "GET", f"/presets/{args.name}")


def _cmd_serve(args, client: Client) -> dict:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return {}


# --- rendering --------------------------------------------------------------


def _lines_sample(d):
    return [f"wrote {d['count']} samples (dim {d['dim']}) to {d['path']}"]


def _lines_label(d):
    out = [
        f"labeled {d['count']} samples: {d['positive']} feasible, "
        f"{d['negative']} infeasible -> {d['path']}"
    ]
    if d.get("mu_effective") is not None:
        out.append(f"robust terminal level mu0 = {d['mu_effective']:.9g}")
    if d.get("degenerate"):
        out.append("warning: single-class labels; training will fail on this file")
    return out


def _lines_train(d):
    status = "converged" if d["converged"] else "NOT converged"
    return [
        f"trained on {d['training_size']} samples: {d['n_support']} support vectors, "
        f"bias {d['bias']:.6g} ({status}) -> {d['path']}"
    ]


def _lines_calibrate(d):
    return [
        f"calibrated thresholds eps+ = {d['eps_plus']:.6g}, "
        f"eps- = {d['eps_minus']:.6g} -> {d['path']}"
    ]


def _lines_boundary(d):
    return [f"extracted {d['points']} boundary points -> {d['path']}"]


def _lines_erode(d):
    return [
        f"mu0 = {d['mu0']:.9g}",
        f"lambda_max = {d['lambda_max']:.9g}",
        f"max admissible margin = {d['max_margin']:.9g}",
    ]


def _lines_export(d):
    return [f"wrote {d['rows']} grid rows -> {d['path']}"]


def _lines_pipeline(d):
    out = [f"pipeline complete in {d['out_dir']}"]
    for stage in d["stages"]:
        mark = "skipped" if stage["skipped"] else f"{stage['seconds']:.2f}s"
        out.append(f"  {stage['name']:<10} {mark}")
    if d.get("positive_labels") is not None:
        out.append(f"feasible labels: {d['positive_labels']}")
    out.append(f"manifest: {d['manifest_path']}")
    return out


def _lines_compare(d):
    return [
        f"inner fraction A = {d['inner_fraction_a']:.4f}, "
        f"B = {d['inner_fraction_b']:.4f} (diff {d['inner_difference']:+.4f})",
        f"feasible labels A = {d['positive_labels_a']}, B = {d['positive_labels_b']}",
        d["verdict"],
    ]


def _lines_classify(d):
    return [
        f"{verdict}  (phi = {phi:.6g})"
        for verdict, phi in zip(d["verdicts"], d["phi"])
    ]


def _lines_preset(d):
    return [d["text"].rstrip("\n")]


_RENDER = {
    "sample": _lines_sample,
    "label": _lines_label,
    "train": _lines_train,
    "calibrate": _lines_calibrate,
    "boundary": _lines_boundary,
    "erode": _lines_erode,
    "export-grid": _lines_export,
    "pipeline": _lines_pipeline,
    "compare": _lines_compare,
    "classify": _lines_classify,
    "preset": _lines_preset,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feasmap",
        description="Estimate feasible regions of constrained nonlinear MPC by "
        "sampling, SVM learning, and disturbance erosion.",
    )
    parser.add_argument("--server", help="base URL of a running feasmap server")
    parser.add_argument("--json", action="store_true", help="print raw JSON responses")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="generate low-discrepancy samples")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--model", default="cart_spring")
    p.add_argument("--start-index", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("label", help="label samples with the feasibility oracle")
    p.add_argument("--config", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(handler=_cmd_label)

    p = sub.add_parser("train", help="train the kernel SVM on labeled samples")
    p.add_argument("--labels", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--kkt-tol", type=float, default=1e-3)
    p.add_argument("--max-passes", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("calibrate", help="calibrate strict inner/outer thresholds")
    p.add_argument("--model", required=True, help="trained model file (.svm)")
    p.add_argument("--labels", required=True)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--mode", choices=("strict", "margin"), default="strict")
    p.add_argument("--wbar", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_calibrate)

    p = sub.add_parser("boundary", help="extract the zero level set of the classifier")
    p.add_argument("--region", required=True)
    p.add_argument("--res", type=int, default=128)
    p.add_argument("--system", default="cart_spring")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_boundary)

    p = sub.add_parser("erode", help="erode an ellipsoid level by a margin")
    p.add_argument("--P-file", required=True, help="CSV matrix file")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--wbar", type=float, required=True)
    p.set_defaults(handler=_cmd_erode)

    p = sub.add_parser("export-grid", help="export phi and verdicts on a grid")
    p.add_argument("--region", required=True)
    p.add_argument("--boundary", default=None)
    p.add_argument("--res", type=int, default=200)
    p.add_argument("--system", default="cart_spring")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_export_grid)

    p = sub.add_parser("pipeline", help="run the full pipeline from a config")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--config")
    group.add_argument("--preset", choices=("fig1", "fig2", "fig3"))
    p.add_argument("--out-dir", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(handler=_cmd_pipeline)

    p = sub.add_parser("compare", help="compare two completed runs")
    p.add_argument("manifest_a")
    p.add_argument("manifest_b")
    p.add_argument("--slack", type=float, default=0.01)
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("classify", help="classify points against a region")
    p.add_argument("--region", required=True)
    p.add_argument("--boundary", default=None)
    p.add_argument("--system", default="cart_spring")
    p.add_argument(
        "points",
        nargs="+",
        help="points as x1,x2[,...]; put -- before values starting with a minus",
    )
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("preset", help="print a bundled scenario config")
    p.add_argument("name", choices=("fig1", "fig2", "fig3"))
    p.set_defaults(handler=_cmd_preset)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    client = Client(args.server)
    try:
        data = args.handler(args, client)
    except FeasmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc.error_kind)
    except _RemoteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc.kind)
    except ValidationError as exc:
        print(f"error: invalid request: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    if args.command == "serve":
        return EXIT_OK
    _emit(data, args, _RENDER.get(args.command, lambda d: [json.dumps(d)]))
    return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
