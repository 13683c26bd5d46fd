"""File formats: framework JSON documents and trajectory CSV/JSON.

Framework document schema (unknown keys are rejected at every level)::

    {
      "dimension": 2,                                   // optional, must be 2
      "vertices": [{"id": "1", "mass": 1.0}, ...],
      "edges":    [{"ends": ["1", "2"], "length": 1.0}, ...],
      "positions": {"1": [0.0, 0.0], ...}               // one entry per vertex
    }

Trajectory CSV columns, in order: ``t``, ``q_<v>_x``, ``q_<v>_y`` per vertex,
``p_<v>_x``, ``p_<v>_y`` per vertex, ``tension_<a>-<b>`` per edge, then
``energy``, ``c1_max``, ``c2_max``, ``c3_max``.  Floats are written with 17
significant digits so identical runs produce byte-identical files.
"""

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import FrameworkError, SerializationError
from .framework import Configuration, PhasePoint, RodFramework

__all__ = [
    "load_framework",
    "dump_framework",
    "trajectory_csv_text",
    "trajectory_json_text",
    "write_trajectory",
    "read_trajectory",
    "atomic_write_text",
]

_TOP_KEYS = {"dimension", "vertices", "edges", "positions"}
_VERTEX_KEYS = {"id", "mass"}
_EDGE_KEYS = {"ends", "length"}


def _fmt(x):
    return format(float(x), ".17g")


def _reject_unknown(obj, allowed, where):
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise FrameworkError(f"unknown keys {unknown} in {where}")


def load_framework(source):
    """Read a framework document; returns ``(framework, configuration)``.

    ``source`` may be a path or an open text file.  Parse errors keep the
    json module's line and column diagnostics.
    """
    if hasattr(source, "read"):
        text = source.read()
        where = getattr(source, "name", "<stream>")
    else:
        where = str(source)
        with open(source, "r", encoding="utf-8") as handle:
            text = handle.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FrameworkError(f"{where}: parse error: {exc}") from exc

    if not isinstance(doc, dict):
        raise FrameworkError(f"{where}: top level must be an object")
    _reject_unknown(doc, _TOP_KEYS, "framework document")
    for key in ("vertices", "edges", "positions"):
        if key not in doc:
            raise FrameworkError(f"{where}: missing required key {key!r}")

    dimension = doc.get("dimension", 2)
    if dimension != 2:
        raise FrameworkError(f"{where}: only dimension 2 is supported")

    vertices = []
    if not isinstance(doc["vertices"], list) or not doc["vertices"]:
        raise FrameworkError(f"{where}: 'vertices' must be a non-empty list")
    for entry in doc["vertices"]:
        if not isinstance(entry, dict):
            raise FrameworkError(f"{where}: vertex entries must be objects")
        _reject_unknown(entry, _VERTEX_KEYS, "vertex entry")
        if "id" not in entry or "mass" not in entry:
            raise FrameworkError(f"{where}: vertex entries need 'id' and 'mass'")
        if not isinstance(entry["id"], str):
            raise FrameworkError(f"{where}: vertex id must be a string")
        vertices.append((entry["id"], float(entry["mass"])))

    edges = []
    if not isinstance(doc["edges"], list):
        raise FrameworkError(f"{where}: 'edges' must be a list")
    for entry in doc["edges"]:
        if not isinstance(entry, dict):
            raise FrameworkError(f"{where}: edge entries must be objects")
        _reject_unknown(entry, _EDGE_KEYS, "edge entry")
        if "ends" not in entry or "length" not in entry:
            raise FrameworkError(f"{where}: edge entries need 'ends' and 'length'")
        ends = entry["ends"]
        if not isinstance(ends, list) or len(ends) != 2:
            raise FrameworkError(f"{where}: edge 'ends' must list two vertex ids")
        edges.append(((ends[0], ends[1]), float(entry["length"])))

    framework = RodFramework(vertices, edges, dimension=dimension)
    positions = doc["positions"]
    if not isinstance(positions, dict):
        raise FrameworkError(f"{where}: 'positions' must map vertex ids to points")
    configuration = Configuration.from_mapping(framework, positions)
    return framework, configuration


def dump_framework(framework, configuration):
    """Inverse of :func:`load_framework`, as a plain dict."""
    coords = configuration.coords
    return {
        "dimension": framework.dimension,
        "vertices": [
            {"id": vid, "mass": float(m)}
            for vid, m in zip(framework.vertex_ids, framework.masses)
        ],
        "edges": [
            {"ends": [a, b], "length": float(length)}
            for (a, b), length in zip(framework.edges, framework.rest_lengths)
        ],
        "positions": {
            vid: [float(x) for x in coords[k]]
            for k, vid in enumerate(framework.vertex_ids)
        },
    }


def trajectory_columns(framework):
    cols = ["t"]
    axes = "xyz"[: framework.dimension]
    for vid in framework.vertex_ids:
        cols.extend(f"q_{vid}_{axis}" for axis in axes)
    for vid in framework.vertex_ids:
        cols.extend(f"p_{vid}_{axis}" for axis in axes)
    cols.extend(f"tension_{label}" for label in framework.edge_labels)
    cols.extend(["energy", "c1_max", "c2_max", "c3_max"])
    return cols


def trajectory_csv_text(framework, trajectory):
    """Render a trajectory as CSV with deterministic float formatting."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(trajectory_columns(framework))
    n = len(trajectory)
    for k in range(n):
        row = [_fmt(trajectory.times[k])]
        row.extend(_fmt(x) for x in trajectory.positions[k].ravel())
        row.extend(_fmt(x) for x in trajectory.momenta[k].ravel())
        row.extend(_fmt(x) for x in trajectory.tensions[k])
        row.extend(
            _fmt(x)
            for x in (
                trajectory.energies[k],
                trajectory.c1_max[k],
                trajectory.c2_max[k],
                trajectory.c3_max[k],
            )
        )
        writer.writerow(row)
    return out.getvalue()


def trajectory_json_text(framework, trajectory):
    """Render a trajectory as JSON with the same fields nested per sample."""
    samples = []
    for k in range(len(trajectory)):
        samples.append(
            {
                "t": float(trajectory.times[k]),
                "q": {
                    vid: [float(x) for x in trajectory.positions[k, i]]
                    for i, vid in enumerate(framework.vertex_ids)
                },
                "p": {
                    vid: [float(x) for x in trajectory.momenta[k, i]]
                    for i, vid in enumerate(framework.vertex_ids)
                },
                "tension": {
                    label: float(trajectory.tensions[k, e])
                    for e, label in enumerate(framework.edge_labels)
                },
                "energy": float(trajectory.energies[k]),
                "c1_max": float(trajectory.c1_max[k]),
                "c2_max": float(trajectory.c2_max[k]),
                "c3_max": float(trajectory.c3_max[k]),
            }
        )
    doc = {
        "vertices": list(framework.vertex_ids),
        "edges": list(framework.edge_labels),
        "samples": samples,
    }
    return json.dumps(doc, indent=1) + "\n"


def write_trajectory(framework, trajectory, path, fmt=None):
    """Write a trajectory file atomically; format from ``fmt`` or suffix."""
    fmt = fmt or ("json" if str(path).endswith(".json") else "csv")
    if fmt == "csv":
        text = trajectory_csv_text(framework, trajectory)
    elif fmt == "json":
        text = trajectory_json_text(framework, trajectory)
    else:
        raise SerializationError(f"unknown trajectory format {fmt!r}")
    atomic_write_text(path, text)


def _states_from_arrays(times, positions, momenta, tensions):
    states = [
        PhasePoint(positions[k], momenta[k], tensions[k])
        for k in range(len(times))
    ]
    return np.asarray(times, dtype=float), states


def read_trajectory(framework, path, fmt=None):
    """Read a trajectory file; returns ``(times, states)``.

    Only the state columns are consumed; derived observables are
    recomputable from the states.
    """
    fmt = fmt or ("json" if str(path).endswith(".json") else "csv")
    nv, ne, d = framework.n_vertices, framework.n_edges, framework.dimension
    if fmt == "json":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                doc = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise SerializationError(f"{path}: {exc}") from exc
        try:
            samples = doc["samples"]
            times = [s["t"] for s in samples]
            positions = [
                [s["q"][vid] for vid in framework.vertex_ids] for s in samples
            ]
            momenta = [
                [s["p"][vid] for vid in framework.vertex_ids] for s in samples
            ]
            tensions = [
                [s["tension"][label] for label in framework.edge_labels]
                for s in samples
            ]
        except (KeyError, TypeError) as exc:
            raise SerializationError(f"{path}: malformed trajectory JSON: {exc}")
        return _states_from_arrays(
            times, np.asarray(positions, float), np.asarray(momenta, float),
            np.asarray(tensions, float),
        )
    if fmt != "csv":
        raise SerializationError(f"unknown trajectory format {fmt!r}")
    expected = trajectory_columns(framework)
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            rows = [[float(x) for x in row] for row in reader if row]
    except (OSError, ValueError) as exc:
        raise SerializationError(f"{path}: {exc}") from exc
    if header != expected:
        raise SerializationError(
            f"{path}: header does not match this framework's trajectory schema"
        )
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(expected):
        raise SerializationError(f"{path}: ragged or empty trajectory table")
    times = data[:, 0]
    qs = data[:, 1 : 1 + nv * d].reshape(-1, nv, d)
    ps = data[:, 1 + nv * d : 1 + 2 * nv * d].reshape(-1, nv, d)
    taus = data[:, 1 + 2 * nv * d : 1 + 2 * nv * d + ne]
    return _states_from_arrays(times, qs, ps, taus)


def atomic_write_text(path, text):
    """Write via a temporary file and rename, so readers never see partials."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp_name = tempfile.mkstemp(
        dir=directory, prefix=f".{path.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise
