"""Binary field/control files and CSV tables; every write is atomic."""

import csv
import io
import os
import struct
import tempfile

import numpy as np

from .field import GridSpec, ScalarField
from .velocity import StreamControl

FIELD_MAGIC = b"CHF1"
CONTROL_MAGIC = b"CHU1"


def atomic_write_bytes(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def encode_field(f):
    g = f.grid
    head = FIELD_MAGIC + struct.pack("<II", g.nx, g.ny) + struct.pack("<dd", g.lx, g.ly)
    return head + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def decode_field(data):
    if data[:4] != FIELD_MAGIC:
        raise ValueError("not a CHF1 file")
    nx, ny = struct.unpack_from("<II", data, 4)
    lx, ly = struct.unpack_from("<dd", data, 12)
    body = data[28:]
    if len(body) != 8 * nx * ny:
        raise ValueError("truncated CHF1 file")
    values = np.frombuffer(body, dtype="<f8").reshape(ny, nx).astype(float)
    return ScalarField(GridSpec(nx, ny, lx, ly), values)


def write_field(path, f):
    atomic_write_bytes(path, encode_field(f))


def read_field(path):
    with open(path, "rb") as fh:
        return decode_field(fh.read())


def encode_control(ctrl):
    head = CONTROL_MAGIC + struct.pack("<II", ctrl.n_steps, ctrl.k_u) + struct.pack("<d", ctrl.dt)
    return head + np.ascontiguousarray(ctrl.psi, dtype="<f8").tobytes()


def decode_control(data, grid):
    """Decode a CHU1 blob; the grid is not stored and must be supplied."""
    if data[:4] != CONTROL_MAGIC:
        raise ValueError("not a CHU1 file")
    n_steps, k_u = struct.unpack_from("<II", data, 4)
    (dt,) = struct.unpack_from("<d", data, 12)
    body = data[20:]
    if len(body) != 8 * n_steps * k_u * k_u:
        raise ValueError("truncated CHU1 file")
    psi = np.frombuffer(body, dtype="<f8").reshape(n_steps, k_u, k_u).astype(float)
    return StreamControl(grid, n_steps, dt, psi)


def write_control(path, ctrl):
    atomic_write_bytes(path, encode_control(ctrl))


def read_control(path, grid):
    with open(path, "rb") as fh:
        return decode_control(fh.read(), grid)


def format_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write_text(path, format_csv(header, rows))


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
