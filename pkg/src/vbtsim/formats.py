"""On-disk formats: sensor configs, marker layouts, float rasters, images and CSV tables.

Config files are flat ``key: value`` text with dotted keys for nested
records; floats are written with ``repr`` so a load of a dump is bit-exact.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import os
import tempfile
import types
import typing
from pathlib import Path

import numpy as np
from PIL import Image

from .core import (
    CameraSpec,
    ElastomerSpec,
    IlluminationSpec,
    ImmParams,
    LayoutKind,
    MarkerSpec,
    MechanicsParams,
    SensorConfig,
    SkinSpec,
    Stiffness,
    TirParams,
)
from .errors import ConfigError, SchemaVersionError
from .markers import Disk, Frame, Marker, MarkerLayout, Polygon
from .optics import TactileImage

SCHEMA_VERSION = 1
LAYOUT_VERSION = 1

_RECORDS = (CameraSpec, ElastomerSpec, IlluminationSpec, ImmParams, MarkerSpec, MechanicsParams,
            SensorConfig, SkinSpec, TirParams)
_HINTS = {cls: typing.get_type_hints(cls) for cls in _RECORDS}


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# config

def _fmt(v) -> str:
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(_fmt(x) for x in v)
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _flatten(obj, prefix: str, out: list[tuple[str, str]]):
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        key = prefix + f.name
        if dataclasses.is_dataclass(v):
            _flatten(v, key + ".", out)
        elif v is None:
            out.append((key, "none"))
        else:
            out.append((key, _fmt(v)))


def dumps_config(cfg: SensorConfig) -> str:
    rows = [("schema_version", str(SCHEMA_VERSION))]
    _flatten(cfg, "", rows)
    return "".join(f"{k}: {v}\n" for k, v in rows)


def save_config(cfg: SensorConfig, path: str | Path) -> None:
    atomic_write_text(path, dumps_config(cfg))


def _strip_optional(hint):
    args = typing.get_args(hint)
    if typing.get_origin(hint) in (typing.Union, types.UnionType) and type(None) in args:
        rest = [a for a in args if a is not type(None)]
        return rest[0], True
    return hint, False


def _parse(hint, text: str, key: str):
    try:
        if hint is float:
            return float(text)
        if hint is int:
            return int(text)
        if hint is str:
            return text
        if isinstance(hint, type) and issubclass(hint, enum.Enum):
            return hint(text)
        if typing.get_origin(hint) is tuple:
            args = typing.get_args(hint)
            if len(args) == 2 and args[1] is Ellipsis:
                inner = args[0]
                sep = ";" if typing.get_origin(inner) is tuple else ","
                return tuple(_parse(inner, p.strip(), key) for p in text.split(sep) if p.strip())
            parts = [p.strip() for p in text.split(",")]
            if len(parts) != len(args):
                raise ValueError(f"expected {len(args)} values")
            return tuple(_parse(a, p, key) for a, p in zip(args, parts))
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} ({exc})") from None
    raise ConfigError(f"{key}: unsupported field type {hint!r}")


def _build(cls, flat: dict[str, str], prefix: str, used: set[str]):
    kwargs = {}
    for name, hint in _HINTS[cls].items():
        key = prefix + name
        hint, optional = _strip_optional(hint)
        if dataclasses.is_dataclass(hint):
            if optional and flat.get(key) == "none":
                used.add(key)
                kwargs[name] = None
                continue
            if not any(k.startswith(key + ".") for k in flat):
                if optional:
                    kwargs[name] = None
                    continue
                if name == "mechanics":
                    continue  # default mechanics
                raise ConfigError(f"missing section {key!r}")
            kwargs[name] = _build(hint, flat, key + ".", used)
        elif key in flat:
            used.add(key)
            kwargs[name] = None if optional and flat[key] == "none" else _parse(hint, flat[key], key)
        else:
            field = next(f for f in dataclasses.fields(cls) if f.name == name)
            if field.default is dataclasses.MISSING and field.default_factory is dataclasses.MISSING:
                raise ConfigError(f"missing key {key!r}")
    return cls(**kwargs)


def loads_config(text: str) -> SensorConfig:
    flat: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition(":")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key: value'")
        flat[key.strip()] = val.strip()
    version = flat.pop("schema_version", None)
    if version is None:
        raise ConfigError("missing schema_version")
    if version.split(".")[0] != str(SCHEMA_VERSION):
        raise SchemaVersionError(f"unsupported config schema_version {version}")
    used: set[str] = set()
    cfg = _build(SensorConfig, flat, "", used)
    unknown = sorted(set(flat) - used)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    return cfg


def load_config(path: str | Path) -> SensorConfig:
    return loads_config(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# layout

def _nums(vals) -> str:
    return ",".join(repr(float(v)) for v in vals)


def _pts(pts) -> str:
    return ";".join(_nums(p) for p in pts)


def _geometry_field(g) -> str:
    if isinstance(g, Disk):
        return f"disk={_nums((*g.center, g.radius))}"
    if isinstance(g, Polygon):
        return f"polygon={_pts(g.vertices)}"
    return f"frame={_pts((g.origin, *g.endpoints))} axis_colors={_pts(g.axis_colors)}"


def dumps_layout(layout: MarkerLayout) -> str:
    lines = [
        f"layout_version: {LAYOUT_VERSION}",
        f"kind: {layout.kind.value}",
        f"bounds: {_nums(layout.bounds)}",
        f"min_clearance: {layout.min_clearance!r}",
        f"layer_separation: {layout.layer_separation!r}",
        f"count: {len(layout)}",
    ]
    for m in layout.markers:
        lines.append(f"marker id={m.id} layer={m.layer} stiffness={m.stiffness.value} "
                     f"color={_nums(m.color)} {_geometry_field(m.geometry)}")
    return "\n".join(lines) + "\n"


def save_layout(layout: MarkerLayout, path: str | Path) -> None:
    atomic_write_text(path, dumps_layout(layout))


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(","))


def _points(s: str) -> tuple[tuple[float, ...], ...]:
    return tuple(_floats(p) for p in s.split(";"))


def _parse_marker(line: str) -> Marker:
    fields = dict(tok.split("=", 1) for tok in line.split()[1:])
    if "disk" in fields:
        x, y, r = _floats(fields["disk"])
        geom = Disk((x, y), r)
    elif "polygon" in fields:
        geom = Polygon(_points(fields["polygon"]))
    elif "frame" in fields:
        pts = _points(fields["frame"])
        geom = Frame(pts[0], tuple(pts[1:4]), tuple(_points(fields["axis_colors"])))
    else:
        raise ConfigError(f"marker record without geometry: {line!r}")
    return Marker(id=int(fields["id"]), layer=int(fields["layer"]), geometry=geom,
                  color=_floats(fields["color"]), stiffness=Stiffness(fields["stiffness"]))


def loads_layout(text: str) -> MarkerLayout:
    head: dict[str, str] = {}
    markers = []
    try:
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("marker "):
                markers.append(_parse_marker(line))
            else:
                k, _, v = line.partition(":")
                head[k.strip()] = v.strip()
        if head.get("layout_version", "").split(".")[0] != str(LAYOUT_VERSION):
            raise SchemaVersionError(f"unsupported layout_version {head.get('layout_version')!r}")
        if "count" in head and int(head["count"]) != len(markers):
            raise ConfigError(f"layout declares {head['count']} markers but lists {len(markers)}")
        return MarkerLayout(markers=tuple(markers), kind=LayoutKind(head["kind"]),
                            bounds=_floats(head["bounds"]), min_clearance=float(head["min_clearance"]),
                            layer_separation=float(head["layer_separation"]))
    except (KeyError, ValueError) as exc:
        if isinstance(exc, (ConfigError, SchemaVersionError)):
            raise
        raise ConfigError(f"malformed layout file: {exc}") from None


def load_layout(path: str | Path) -> MarkerLayout:
    return loads_layout(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# rasters and images

def write_pfm(path: str | Path, data: np.ndarray) -> None:
    """Portable float map: ``Pf`` for one channel, ``PF`` for three; rows stored bottom-up."""
    a = np.asarray(data, dtype=np.float32)
    if a.ndim == 2:
        tag = b"Pf"
    elif a.ndim == 3 and a.shape[2] == 3:
        tag = b"PF"
    else:
        raise ValueError("PFM holds (rows, cols) or (rows, cols, 3) arrays")
    h, w = a.shape[:2]
    with open(path, "wb") as fh:
        fh.write(tag + b"\n%d %d\n-1.0\n" % (w, h))
        fh.write(np.ascontiguousarray(a[::-1]).astype("<f4").tobytes())


def read_pfm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        tag = fh.readline().strip()
        w, h = (int(x) for x in fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        nch = 3 if tag == b"PF" else 1
        a = np.frombuffer(fh.read(), dtype=dtype, count=w * h * nch)
    a = a.reshape((h, w, nch) if nch == 3 else (h, w))[::-1]
    return a.astype(np.float64)


def to_uint8(pixels) -> np.ndarray:
    return np.round(np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(path: str | Path, img) -> None:
    pix = img.pixels if isinstance(img, TactileImage) else np.asarray(img)
    q = to_uint8(pix)
    Image.fromarray(q, mode="RGB" if q.ndim == 3 else "L").save(path, format="PNG")


def write_pgm(path: str | Path, gray: np.ndarray) -> None:
    Image.fromarray(to_uint8(gray), mode="L").save(path, format="PPM")


def write_mask_png(path: str | Path, mask: np.ndarray) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")


def read_image(path: str | Path) -> TactileImage:
    with Image.open(path) as im:
        a = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return TactileImage(a, "", 0)


def read_mask(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 127


# ---------------------------------------------------------------------------
# CSV tables

CORRESPONDENCE_HEADER = ("index", "color_class", "ref_x", "ref_y", "cur_x", "cur_y", "dx", "dy", "stretch")


def write_correspondences_csv(path: str | Path, corr) -> None:
    """One row per marker; positions in pixels, ``stretch`` = apparent size ratio."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CORRESPONDENCE_HEADER)
        for k, v in enumerate(corr):
            dx, dy = v.delta
            w.writerow([k, v.color_class, repr(v.ref[0]), repr(v.ref[1]), repr(v.cur[0]), repr(v.cur[1]),
                        repr(dx), repr(dy), repr(v.stretch)])


def write_features_csv(path: str | Path, rows, names) -> None:
    """``rows``: iterable of ``(sample_id, values)``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("sample_id", *names))
        for sid, vals in rows:
            w.writerow([sid, *(repr(float(x)) for x in vals)])
