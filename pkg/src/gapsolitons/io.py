"""File formats: binary field arrays, CSV tables and the run configuration.

Binary array layout (all little-endian)::

    8 bytes   magic  b"GSFIELD\\0"
    uint8     format version (1)
    uint8     dtype code (1 = complex128 interleaved re/im, 2 = float64)
    uint8     spatial dimension d
    uint32    component count N
    d uint64  grid points per axis
    d float64 lower corner
    d float64 spacing
    payload   N * prod(shape) values in C order
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import UniformGrid, VectorField

MAGIC = b"GSFIELD\0"
VERSION = 1
_DTYPES = {1: np.dtype("<c16"), 2: np.dtype("<f8")}


def write_field(path, field):
    """Write a :class:`VectorField` (or a real one) in the binary format."""
    values = np.asarray(field.values)
    code = 2 if np.isrealobj(values) else 1
    grid = field.grid
    d = grid.dim
    head = MAGIC + struct.pack("<BBBI", VERSION, code, d, values.shape[0])
    head += struct.pack(f"<{d}Q", *grid.shape)
    head += struct.pack(f"<{d}d", *grid.lower)
    head += struct.pack(f"<{d}d", *grid.spacing)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(values, dtype=_DTYPES[code]).tobytes())


def read_field(path):
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ConfigError(f"{path}: not a field file (bad magic)")
    version, code, d, n = struct.unpack_from("<BBBI", data, 8)
    if version != VERSION:
        raise ConfigError(f"{path}: unsupported format version {version}")
    if code not in _DTYPES:
        raise ConfigError(f"{path}: unknown dtype code {code}")
    off = 8 + struct.calcsize("<BBBI")
    shape = struct.unpack_from(f"<{d}Q", data, off)
    off += 8 * d
    lower = struct.unpack_from(f"<{d}d", data, off)
    off += 8 * d
    spacing = struct.unpack_from(f"<{d}d", data, off)
    off += 8 * d
    dtype = _DTYPES[code]
    count = n * int(np.prod(shape))
    if len(data) - off != count * dtype.itemsize:
        raise ConfigError(f"{path}: payload size does not match header")
    values = np.frombuffer(data, dtype=dtype, count=count, offset=off).reshape((n, *shape))
    grid = UniformGrid(tuple(lower), tuple(h * m for h, m in zip(spacing, shape)), tuple(shape))
    return VectorField(values.astype(complex), grid)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt_cell(x) for x in r])


def _fmt_cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# configuration


def parse_rational(text):
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a rational number: {text!r}") from exc


def _parse_vector(text, conv=float):
    text = text.strip()
    if not text:
        return ()
    return tuple(conv(x) for x in text.split(","))


def _fmt_vector(v):
    return ", ".join(_fmt_scalar(x) for x in v)


def _fmt_scalar(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _parse_carriers(text):
    """``band @ p/q, p/q; band @ ...`` -> list of (band, Fraction vector)."""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "@" not in part:
            raise ConfigError(f"carrier {part!r} must read 'band @ k1, k2'")
        band, k = part.split("@", 1)
        out.append((int(band), _parse_vector(k, parse_rational)))
    return tuple(out)


def _fmt_carriers(cs):
    return "; ".join(f"{b} @ {_fmt_vector(k)}" for b, k in cs)


def _parse_terms(text):
    """``c @ l1, l2; ...`` -> list of (float, Fraction vector): ``sum c cos(l.x)``."""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "@" not in part:
            raise ConfigError(f"term {part!r} must read 'amplitude @ l1, l2'")
        c, l = part.split("@", 1)
        out.append((float(c), _parse_vector(l, parse_rational)))
    return tuple(out)


def _fmt_terms(ts):
    return "; ".join(f"{c!r} @ {_fmt_vector(l)}" for c, l in ts)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


_KINDS = {
    "int": (lambda s: int(s.strip()), str),
    "float": (lambda s: float(s.strip()), repr),
    "str": (lambda s: s.strip(), str),
    "bool": (_bool, lambda b: "true" if b else "false"),
    "floats": (_parse_vector, _fmt_vector),
    "rationals": (lambda s: _parse_vector(s, parse_rational), _fmt_vector),
    "carriers": (_parse_carriers, _fmt_carriers),
    "terms": (_parse_terms, _fmt_terms),
    "strs": (lambda s: tuple(x.strip() for x in s.split(",") if x.strip()), lambda v: ", ".join(v)),
}

# section -> key -> (kind, default, positive?)
SCHEMA = {
    "problem": {
        "dim": ("int", 2, True),
        "potential": ("str", "cosine_product", False),
        "potential_amplitude": ("float", 1.0, False),
        "potential_file": ("str", "", False),
        "perturbation": ("terms", (), False),
        "sigma": ("float", 1.0, False),
        "carriers": ("carriers", (), False),
        "epsilon": ("float", 0.1, True),
    },
    "bloch": {
        "cutoff": ("int", 12, True),
        "bands": ("int", 6, True),
        "tol_omega": ("float", 1e-6, True),
    },
    "cme": {
        "model_file": ("str", "", False),
        "quadrature_points": ("int", 0, False),
    },
    "dispersion": {
        "window": ("floats", (-10.0, 10.0), False),
        "radius": ("float", 40.0, True),
        "h_k": ("float", 0.05, True),
        "h_omega": ("float", 1e-2, True),
    },
    "edge": {
        "band": ("int", 0, False),
        "k0": ("floats", (), False),
        "side": ("str", "lower", False),
        "h": ("float", 1e-3, True),
    },
    "nls": {
        "lambda": ("float", 1.0, False),
        "steps": ("int", 10, True),
        "points": ("int", 256, True),
        "tol": ("float", 1e-9, True),
    },
    "soliton": {
        "half_width": ("float", 60.0, True),
        "points": ("int", 256, True),
        "seed_file": ("str", "", False),
        "tol_update": ("float", 1e-10, True),
        "tol_residual": ("float", 1e-8, True),
        "max_iter": ("int", 1000, True),
        "dist_min": ("float", 1e-3, True),
    },
    "continuation": {
        "target": ("str", "", False),
        "step": ("float", 1e-2, True),
        "step_min": ("float", 1e-4, True),
        "max_points": ("int", 1024, True),
    },
    "dynamics": {
        "cells": ("int", 60, True),
        "points_per_cell": ("int", 8, True),
        "dt_gp": ("float", 1e-3, True),
        "dt_cme": ("float", 1e-3, True),
        "t0": ("float", 0.5, True),
        "epsilons": ("floats", (0.15, 0.1, 0.067), False),
        "envelope_width": ("float", 2.0, True),
    },
    "pipeline": {
        "stages": ("strs", ("bloch", "cme", "gap", "edge", "nls", "soliton", "continuation"), False),
        "output": ("str", "run", False),
    },
}


@dataclass
class RunConfig:
    """Typed view of a sectioned key-value configuration file."""

    values: dict

    @classmethod
    def defaults(cls):
        return cls({s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()})

    @classmethod
    def from_text(cls, text):
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg = cls.defaults()
        for section in cp.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in cp.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                kind = SCHEMA[section][key][0]
                try:
                    cfg.values[section][key] = _KINDS[kind][0](raw)
                except ConfigError:
                    raise
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)

    def to_text(self):
        buf = io.StringIO()
        for section, keys in SCHEMA.items():
            buf.write(f"[{section}]\n")
            for key, (kind, _, _) in keys.items():
                buf.write(f"{key} = {_KINDS[kind][1](self.values[section][key])}\n")
            buf.write("\n")
        return buf.getvalue()

    def validate(self):
        for section, keys in SCHEMA.items():
            for key, (kind, _, positive) in keys.items():
                v = self.values[section][key]
                if positive and not v > 0:
                    raise ConfigError(f"[{section}] {key} must be positive, got {v!r}")
        p = self.values["problem"]
        for band, k in p["carriers"]:
            if band < 1:
                raise ConfigError("carrier bands are 1-based")
            if len(k) != p["dim"]:
                raise ConfigError(f"carrier wavevector {k} does not have dimension {p['dim']}")
        for c, l in p["perturbation"]:
            if len(l) != p["dim"]:
                raise ConfigError(f"perturbation wavevector {l} does not have dimension {p['dim']}")
        w = self.values["dispersion"]["window"]
        if len(w) != 2 or not w[1] > w[0]:
            raise ConfigError("dispersion window must be 'lo, hi' with lo < hi")
        t = self.values["continuation"]["target"]
        if t:
            try:
                float(t)
            except ValueError as exc:
                raise ConfigError(f"continuation target {t!r} is not a number") from exc

    def __getitem__(self, section):
        return self.values[section]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values
