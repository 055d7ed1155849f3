"""Artifact persistence: CSV tables and versioned structured-text models.

Floats are written with ``repr``, the shortest digit string that round-trips
to the same double, so reruns are byte-identical and loaded models reproduce
decision values exactly.  Format schemas are documented in docs/FORMATS.md.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .oracle import LabeledSample
from .region import RegionModel
from .svm import KernelSpec, SvmModel

SVM_MAGIC = "feasmap-svm"
REGION_MAGIC = "feasmap-region"
FORMAT_VERSION = 1


def fmt(x: float) -> str:
    return repr(float(x))


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _coord_header(dim: int) -> list[str]:
    return [f"x{i + 1}" for i in range(dim)]


def write_samples_csv(path: str | Path, points: np.ndarray) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_coord_header(pts.shape[1]))
        for row in pts:
            writer.writerow([fmt(v) for v in row])


def read_samples_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not header[0].startswith("x"):
            raise InvalidArgumentError(f"{path}: missing x1..xn header row")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise InvalidArgumentError(f"{path}: no sample rows")
    return np.asarray(rows, dtype=float)


def write_labels_csv(path: str | Path, labeled) -> None:
    samples = list(labeled)
    if not samples:
        raise InvalidArgumentError("refusing to write an empty labels file")
    dim = np.asarray(samples[0].state).shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_coord_header(dim) + ["label", "violation"])
        for s in samples:
            writer.writerow(
                [fmt(v) for v in np.asarray(s.state)]
                + [str(int(s.label)), fmt(s.violation)]
            )


def read_labels_csv(path: str | Path) -> list[LabeledSample]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-2:] != ["label", "violation"]:
            raise InvalidArgumentError(f"{path}: expected x1..xn,label,violation header")
        dim = len(header) - 2
        out = []
        for row in reader:
            if not row:
                continue
            state = np.array([float(v) for v in row[:dim]])
            out.append(
                LabeledSample(
                    state=state, label=int(row[dim]), violation=float(row[dim + 1])
                )
            )
    if not out:
        raise InvalidArgumentError(f"{path}: no labeled rows")
    return out


def write_boundary_csv(path: str | Path, cloud: np.ndarray) -> None:
    pts = np.atleast_2d(np.asarray(cloud, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        dim = pts.shape[1] if pts.size else 2
        writer.writerow(_coord_header(dim))
        for row in pts:
            writer.writerow([fmt(v) for v in row])


def read_boundary_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InvalidArgumentError(f"{path}: empty boundary file")
        rows = [[float(v) for v in row] for row in reader if row]
    dim = len(header)
    return np.asarray(rows, dtype=float).reshape(-1, dim)


def write_grid_csv(
    path: str | Path, points: np.ndarray, phi: np.ndarray, verdicts
) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "phi", "verdict"])
        for row, p, verdict in zip(pts, phi, verdicts):
            writer.writerow([fmt(row[0]), fmt(row[1]), fmt(p), verdict])


def read_grid_csv(path: str | Path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x1", "x2", "phi", "verdict"]:
            raise InvalidArgumentError(f"{path}: expected x1,x2,phi,verdict header")
        pts, phi, verdicts = [], [], []
        for row in reader:
            if not row:
                continue
            pts.append([float(row[0]), float(row[1])])
            phi.append(float(row[2]))
            verdicts.append(row[3])
    return np.asarray(pts), np.asarray(phi), verdicts


# --- structured-text model files -------------------------------------------


def _svm_lines(model: SvmModel) -> list[str]:
    lines = [
        f"{SVM_MAGIC} {FORMAT_VERSION}",
        f"kernel {model.kernel.family}",
        f"sigma {fmt(model.kernel.sigma)}",
        f"regularization_L {fmt(model.regularization_L)}",
        f"kkt_tol {fmt(model.kkt_tol)}",
        f"bias {fmt(model.bias)}",
        f"training_size {model.training_size}",
        f"converged {int(model.converged)}",
        f"support {model.n_support} {model.dim if model.n_support else 0}",
    ]
    for point, alpha, label in zip(model.support_points, model.alphas, model.labels):
        coords = " ".join(fmt(v) for v in point)
        lines.append(f"{coords} {fmt(alpha)} {int(label)}")
    return lines


def _take_kv(lines, idx: int, key: str) -> tuple[str, int]:
    if idx >= len(lines):
        raise InvalidArgumentError(f"truncated model file: expected '{key}'")
    parts = lines[idx].split(maxsplit=1)
    if parts[0] != key or len(parts) != 2:
        raise InvalidArgumentError(f"model file line {idx + 1}: expected '{key} ...'")
    return parts[1], idx + 1


def _parse_svm_lines(lines: list[str], idx: int = 0) -> tuple[SvmModel, int]:
    head, idx = _take_kv(lines, idx, SVM_MAGIC)
    if int(head) != FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported svm format version {head}")
    family, idx = _take_kv(lines, idx, "kernel")
    sigma, idx = _take_kv(lines, idx, "sigma")
    reg, idx = _take_kv(lines, idx, "regularization_L")
    kkt, idx = _take_kv(lines, idx, "kkt_tol")
    bias, idx = _take_kv(lines, idx, "bias")
    tsize, idx = _take_kv(lines, idx, "training_size")
    conv, idx = _take_kv(lines, idx, "converged")
    support, idx = _take_kv(lines, idx, "support")
    n_support, dim = (int(v) for v in support.split())
    pts = np.zeros((n_support, dim))
    alphas = np.zeros(n_support)
    labels = np.zeros(n_support)
    for k in range(n_support):
        parts = lines[idx + k].split()
        if len(parts) != dim + 2:
            raise InvalidArgumentError(f"support vector line {idx + k + 1} malformed")
        pts[k] = [float(v) for v in parts[:dim]]
        alphas[k] = float(parts[dim])
        labels[k] = float(parts[dim + 1])
    idx += n_support
    model = SvmModel(
        support_points=pts,
        alphas=alphas,
        labels=labels,
        bias=float(bias),
        kernel=KernelSpec(sigma=float(sigma), family=family),
        regularization_L=float(reg),
        training_size=int(tsize),
        kkt_tol=float(kkt),
        converged=bool(int(conv)),
    )
    return model, idx


def save_svm_model(path: str | Path, model: SvmModel) -> None:
    Path(path).write_text("\n".join(_svm_lines(model)) + "\n")


def load_svm_model(path: str | Path) -> SvmModel:
    lines = Path(path).read_text().splitlines()
    model, _ = _parse_svm_lines(lines)
    return model


def save_region(path: str | Path, region: RegionModel) -> None:
    lines = [
        f"{REGION_MAGIC} {FORMAT_VERSION}",
        f"eps_plus {fmt(region.eps_plus)}",
        f"eps_minus {fmt(region.eps_minus)}",
        f"w_bar {fmt(region.w_bar)}",
        f"calibration {region.calibration}",
    ]
    lines.extend(_svm_lines(region.svm))
    cloud = region.boundary_cloud
    if cloud is None:
        lines.append("boundary - 0")
    else:
        lines.append(f"boundary {cloud.shape[0]} {cloud.shape[1] if cloud.size else region.dim}")
        for row in cloud:
            lines.append(" ".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_region(path: str | Path) -> RegionModel:
    lines = Path(path).read_text().splitlines()
    head, idx = _take_kv(lines, 0, REGION_MAGIC)
    if int(head) != FORMAT_VERSION:
        raise InvalidArgumentError(f"unsupported region format version {head}")
    eps_plus, idx = _take_kv(lines, idx, "eps_plus")
    eps_minus, idx = _take_kv(lines, idx, "eps_minus")
    w_bar, idx = _take_kv(lines, idx, "w_bar")
    calibration, idx = _take_kv(lines, idx, "calibration")
    model, idx = _parse_svm_lines(lines, idx)
    boundary, idx = _take_kv(lines, idx, "boundary")
    first = boundary.split()[0]
    cloud = None
    if first != "-":
        count, dim = (int(v) for v in boundary.split())
        cloud = np.zeros((count, dim))
        for k in range(count):
            cloud[k] = [float(v) for v in lines[idx + k].split()]
    return RegionModel(
        svm=model,
        eps_plus=float(eps_plus),
        eps_minus=float(eps_minus),
        w_bar=float(w_bar),
        calibration=calibration,
        boundary_cloud=cloud,
    )
