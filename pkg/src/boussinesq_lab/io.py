"""PBSF snapshot container, CSV tables and JSON documents.

PBSF layout (little endian)::

    b"PBSF" | u32 version=1 | u32 n1, n2, n3 | u32 ncomp=4
    | f64 L1, L2, L3 | f64 eps, nu, nu', t
    | n1*n2*n3*4 complex128 coefficients, component-major, then row-major (k1, k2, k3)

Coefficients are stored in FFT storage order under the forward-normalised
convention of :mod:`boussinesq_lab.spectral`.
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import FourierGrid, SpectralField

__all__ = ["PBSFHeader", "write_pbsf", "read_pbsf", "write_csv", "read_csv", "write_json", "fmt"]

MAGIC = b"PBSF"
VERSION = 1
_HEAD = struct.Struct("<4sIIIII3d4d")


@dataclass(frozen=True)
class PBSFHeader:
    dims: tuple
    box: tuple
    eps: float
    nu: float
    nu_p: float
    t: float
    version: int = VERSION


def write_pbsf(path, f: SpectralField, eps: float, nu: float, nu_p: float, t: float) -> Path:
    if f.ncomp != 4:
        raise ValueError("PBSF stores four-component fields")
    g = f.grid
    head = _HEAD.pack(MAGIC, VERSION, *g.dims, 4, *g.box, eps, nu, nu_p, t)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes(order="C"))
    return path


def read_pbsf(path) -> tuple[SpectralField, PBSFHeader]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size:
        raise ValueError("truncated PBSF header")
    magic, version, n1, n2, n3, ncomp, L1, L2, L3, eps, nu, nu_p, t = _HEAD.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not a PBSF file")
    if version != VERSION:
        raise ValueError(f"unsupported PBSF version {version}")
    if ncomp != 4:
        raise ValueError(f"PBSF component count must be 4, got {ncomp}")
    count = n1 * n2 * n3 * ncomp
    body = raw[_HEAD.size :]
    if len(body) != 16 * count:
        raise ValueError("PBSF payload size does not match the header")
    coeffs = np.frombuffer(body, dtype="<c16").reshape(ncomp, n1, n2, n3).astype(complex)
    grid = FourierGrid((n1, n2, n3), (L1, L2, L3))
    return SpectralField(grid, coeffs), PBSFHeader((n1, n2, n3), (L1, L2, L3), eps, nu, nu_p, t, version)


def fmt(v) -> str:
    """Round-trip exact text for floats; plain ``str`` otherwise."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n")
    return path
