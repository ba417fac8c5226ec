"""On-disk formats: versioned CSV tables, datasets and FD solution dumps.

Every CSV starts with ``# schema: <name>/<version>`` followed by the column
header. Floats are written with ``repr`` (shortest round-trip form), so a
reload reproduces the exact 64-bit values.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .fdsolve import FdSolution, label_errors
from .mms import eval_mms
from .scenarios import LabeledPoints, ScenarioDataset, normalize_tag

CSV_VERSION = 1
DATASET_COLUMNS = ("x", "scaled_nu", "nu", "label", "source_tag")
FD_COLUMNS = ("x", "u_numeric", "u_analytic", "epsilon")
PARETO_COLUMNS = ("alpha", "iter", "l_pde", "l_d", "is_final")
POINT_CLASSES = ("collocation", "train", "test", "bc", "warmup_fake")


class SchemaError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, schema: str, columns, rows) -> None:
    buf = io.StringIO()
    buf.write(f"# schema: {schema}/{CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def read_csv(path, schema: str) -> tuple[list[str], list[list[str]]]:
    """Return (columns, rows as strings); checks the schema line."""
    lines = Path(path).read_text().splitlines()
    expected = f"# schema: {schema}/{CSV_VERSION}"
    if not lines or lines[0] != expected:
        raise SchemaError(f"{path}: expected header {expected!r}")
    rows = list(csv.reader(lines[1:]))
    return rows[0], rows[1:]


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- datasets --------------------------------------------------------------

def dataset_dir(root, mode: str, tag: str) -> Path:
    return Path(root) / "datasets" / mode / normalize_tag(tag)


def save_dataset(ds: ScenarioDataset, root) -> Path:
    d = dataset_dir(root, ds.mode, ds.tag)
    for name in POINT_CLASSES:
        pts = getattr(ds, name)
        if pts is None:
            continue
        labels = pts.label if pts.label is not None else [None] * len(pts)
        rows = zip(pts.x, pts.scaled_nu, pts.nu, labels, [pts.source_tag] * len(pts))
        write_csv(d / f"{name}.csv", "dataset", DATASET_COLUMNS, rows)
    write_json(d / "meta.json", {"mode": ds.mode, "tag": ds.tag, **ds.meta})
    return d


def _load_points(path, mode) -> LabeledPoints:
    cols, rows = read_csv(path, "dataset")
    if tuple(cols) != DATASET_COLUMNS:
        raise SchemaError(f"{path}: unexpected columns {cols}")
    if not rows:
        raise SchemaError(f"{path}: no rows")
    x = np.array([float(r[0]) for r in rows])
    nu = np.array([float(r[2]) for r in rows])
    label = None if rows[0][3] == "" else np.array([float(r[3]) for r in rows])
    return LabeledPoints(x, nu, label, rows[0][4], mode)


def load_dataset(root, mode: str, tag: str) -> ScenarioDataset:
    """Rebuild a dataset written by :func:`save_dataset`. Raises FileNotFoundError if absent."""
    d = dataset_dir(root, mode, tag)
    meta_path = d / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no dataset at {d} (run generate-data first)")
    meta = json.loads(meta_path.read_text())
    parts = {}
    for name in POINT_CLASSES:
        p = d / f"{name}.csv"
        if p.exists():
            parts[name] = _load_points(p, mode)
        elif name != "warmup_fake":
            raise FileNotFoundError(f"missing {p}")
    extra = {k: v for k, v in meta.items() if k not in ("mode", "tag")}
    return ScenarioDataset(mode, normalize_tag(tag), parts["collocation"], parts["train"], parts["test"],
                           parts["bc"], parts.get("warmup_fake"), extra)


# -- FD dumps --------------------------------------------------------------

def save_fd_solution(sol: FdSolution, path) -> None:
    x = sol.mesh.nodes
    eps = label_errors(sol).epsilon
    exact = eval_mms(x, sol.nu, sol.log_base)
    write_csv(path, "fd-solution", FD_COLUMNS, zip(x, sol.values, exact, eps))
