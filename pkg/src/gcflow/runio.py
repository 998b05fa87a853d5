"""Run configuration and bit-exact output formats.

All numeric text output uses 17 significant digits ('%.17g'), which
round-trips IEEE doubles exactly.  Field snapshots are binary PGM (P5,
maxval 255) with per-frame min-max normalization over interior nodes and a
JSON sidecar '<frame>.minmax.json' recording the range; exterior and
boundary pixels are 0.  Row 0 of a frame is the top of the domain (y_max).
"""

import json
import os
from contextlib import contextmanager

import numpy as np

from gcflow.errors import ConfigError

DEGENERATE_RANGE = 1e-30


def fmt17(x):
    return f"{float(x):.17g}"


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def apply_overrides(cfg, tokens):
    """Apply '--a.b.c=value' override tokens onto a config dict.

    Values are parsed as JSON scalars where possible, else kept as strings.
    """
    for tok in tokens:
        if not tok.startswith("--") or "=" not in tok:
            raise ConfigError(
                f"unrecognized argument {tok!r}; overrides look like --grid.nx=200"
            )
        path, raw = tok[2:].split("=", 1)
        if not path:
            raise ConfigError(f"empty override key in {tok!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = path.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return cfg


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt17(v) for v in row) + "\n")


def read_csv(path):
    """Parse a CSV written by write_csv back into (header, float array)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = [
            [float(v) for v in line.strip().split(",")]
            for line in fh
            if line.strip()
        ]
    return header, np.array(data, dtype=float)


def write_frame(field, path):
    """Write a field as a P5 PGM frame plus a min-max sidecar.

    Width nx, height ny, row 0 at y_max.  Interior pixels map the field's
    [vmin, vmax] range onto 0..255; a (near-)constant field gets the
    degenerate path: interior pixels 128 and a flag in the sidecar.
    """
    topo = field.topology
    grid = topo.grid
    interior = topo.interior_mask
    vals = field.values
    packed = vals[topo.ii, topo.jj]
    vmin = float(np.min(packed))
    vmax = float(np.max(packed))
    degenerate = (vmax - vmin) < DEGENERATE_RANGE

    pix = np.zeros((grid.nx, grid.ny), dtype=np.uint8)
    if degenerate:
        pix[interior] = 128
    else:
        scaled = np.rint(255.0 * (vals - vmin) / (vmax - vmin))
        pix[interior] = np.clip(scaled[interior], 0, 255).astype(np.uint8)

    raster = pix.T[::-1, :]  # row 0 = y_max, columns follow x
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.nx} {grid.ny}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())
    sidecar = (
        "{"
        f'"vmin": {fmt17(vmin)}, "vmax": {fmt17(vmax)}, '
        f'"degenerate_range": {"true" if degenerate else "false"}'
        "}\n"
    )
    with open(f"{path}.minmax.json", "w", encoding="utf-8") as fh:
        fh.write(sidecar)


def write_summary(path, summary):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


@contextmanager
def run_dir_lock(out_dir):
    """One writer per run directory, via an exclusive lockfile."""
    os.makedirs(out_dir, exist_ok=True)
    lock_path = os.path.join(out_dir, ".lock")
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise ConfigError(
            f"run directory {out_dir} is locked by another writer "
            f"(remove {lock_path} if stale)"
        ) from exc
    try:
        os.close(fd)
        yield
    finally:
        try:
            os.remove(lock_path)
        except OSError:
            pass
