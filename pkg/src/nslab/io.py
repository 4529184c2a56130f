"""NSRF snapshot files and trajectory archives.

NSRF layout (little-endian): b"NSRF", u32 version (=1), u32 dims,
u32 N per axis (dims values), f64 L, u32 components, then
components * N^dims f64 values in row-major order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .grid import GridSpec, PhysicalField

MAGIC = b"NSRF"
VERSION = 1


def encode_field(f: PhysicalField) -> bytes:
    g = f.grid
    head = MAGIC + struct.pack("<II", VERSION, g.dims)
    head += struct.pack(f"<{g.dims}I", *g.shape)
    head += struct.pack("<dI", g.half_width, f.components)
    return head + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def decode_field(buf: bytes) -> PhysicalField:
    if buf[:4] != MAGIC:
        raise ValueError("not an NSRF file (bad magic)")
    version, dims = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise ValueError(f"unsupported NSRF version {version}")
    off = 12
    ns = struct.unpack_from(f"<{dims}I", buf, off)
    off += 4 * dims
    if len(set(ns)) != 1:
        raise ValueError("non-cubic grids are not supported")
    L, comps = struct.unpack_from("<dI", buf, off)
    off += 12
    count = comps * int(np.prod(ns))
    if len(buf) - off != 8 * count:
        raise ValueError("NSRF payload size does not match header")
    vals = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape((comps,) + tuple(ns))
    return PhysicalField(GridSpec(dims, ns[0], L), vals.astype(float))


def write_field(path: str | Path, f: PhysicalField) -> None:
    Path(path).write_bytes(encode_field(f))


def read_field(path: str | Path) -> PhysicalField:
    return decode_field(Path(path).read_bytes())


def write_archive(directory: str | Path, traj, extra: dict | None = None) -> Path:
    """Write snapshots as NSRF files plus manifest.json (times, config, seeds).

    A reference trajectory, if attached, is stored alongside as w_*.nsrf.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for i, snap in enumerate(traj.snapshots):
        name = f"u_{i:05d}.nsrf"
        write_field(d / name, snap)
        names.append(name)
    ref_names = []
    if traj.reference is not None:
        for i, snap in enumerate(traj.reference.snapshots):
            name = f"w_{i:05d}.nsrf"
            write_field(d / name, snap)
            ref_names.append(name)
    manifest = {
        "grid": {"dims": traj.grid.dims, "n": traj.grid.n, "half_width": traj.grid.half_width},
        "times": [float(t) for t in traj.times],
        "files": names,
        "reference_files": ref_names,
        "meta": traj.meta,
        "series": {k: [float(x) for x in v] for k, v in traj.series.items()},
    }
    if extra:
        manifest.update(extra)
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable))
    return d


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return str(x)


def read_archive(directory: str | Path):
    from .solver import Trajectory

    d = Path(directory)
    mpath = d / "manifest.json"
    if not mpath.exists():
        raise FileNotFoundError(f"{d} is not a trajectory archive (no manifest.json)")
    manifest = json.loads(mpath.read_text())
    snaps = [read_field(d / name) for name in manifest["files"]]
    times = np.asarray(manifest["times"])
    series = {k: np.asarray(v) for k, v in manifest.get("series", {}).items()}
    ref = None
    if manifest.get("reference_files"):
        ref = Trajectory(snaps[0].grid, times, [read_field(d / n) for n in manifest["reference_files"]])
    return Trajectory(snaps[0].grid, times, snaps, meta=manifest.get("meta", {}), series=series,
                      reference=ref)
