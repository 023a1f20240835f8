"""Result serialization: CSV tables, binary field files, run manifests.

CSV floats are written with repr-stable %.17g formatting so identical runs
produce byte-identical files.  Field files carry a magic header
(b"QTF1", uint32 N, uint8 boundary code) followed by float64 node values.
"""

import json
import struct
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .function_space import GridFunction

FIELD_MAGIC = b"QTF1"
_BOUNDARY_CODE = {"periodic": 0, "clamped": 1}
_BOUNDARY_NAME = {0: "periodic", 1: "clamped"}


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_field(path, g):
    path = Path(path)
    blob = FIELD_MAGIC + struct.pack("<IB", g.n, _BOUNDARY_CODE[g.boundary])
    blob += np.ascontiguousarray(g.values, dtype="<f8").tobytes()
    path.write_bytes(blob)
    return path


def read_field(path):
    blob = Path(path).read_bytes()
    if blob[:4] != FIELD_MAGIC:
        raise ConfigError(f"{path}: not a qthermo field file")
    n, bcode = struct.unpack("<IB", blob[4:9])
    values = np.frombuffer(blob[9:], dtype="<f8")
    if values.size != n:
        raise ConfigError(f"{path}: truncated field file")
    return GridFunction(values.copy(), _BOUNDARY_NAME[bcode])


def write_function_csv(path, g):
    """(x, value) snapshot of a grid function."""
    return write_csv(path, ["x", "value"], zip(g.nodes(), g.values))


def write_manifest(out_dir, command, config_text, seed, started, elapsed_s, outputs):
    from . import __version__
    doc = {
        "command": command,
        "config": json.loads(config_text),
        "seed": seed,
        "version": __version__,
        "started": started,
        "elapsed_s": elapsed_s,
        "outputs": sorted(str(o) for o in outputs),
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def write_error_record(out_dir, command, kind, message):
    path = Path(out_dir) / "error.json"
    doc = {"command": command, "error": kind, "message": message,
           "timestamp": time.time()}
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
