"""Dataset bundles: a JSON manifest, a CSV records file and an embeddings file.

See ``docs/formats.md`` for the byte-level layout.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Dataset, DataError, ModelRun, Partition, TaskKind, per_datapoint_error, validate_dataset

MAGIC = b"DENB"
HEADER = struct.Struct("<4sII")
MANIFEST_NAME = "manifest.json"
FORMAT_NAME = "den-bundle"
FORMAT_VERSION = 1


@dataclass
class ModelEntry:
    name: str
    errors: np.ndarray
    run: Optional[ModelRun] = None


@dataclass
class Bundle:
    embeddings: np.ndarray
    models: dict = field(default_factory=dict)
    identity: Optional[Partition] = None
    groups: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.embeddings.shape[0])

    def dataset(self, model: Optional[str] = None) -> Dataset:
        if not self.models:
            raise DataError("bundle has no model errors")
        name = model if model is not None else next(iter(self.models))
        if name not in self.models:
            raise DataError(f"bundle has no model {name!r}")
        return Dataset(self.embeddings, self.models[name].errors, self.identity, dict(self.groups))

    def digest(self) -> str:
        """SHA-256 over the parsed content, independent of the on-disk encoding."""
        h = hashlib.sha256()
        h.update(struct.pack("<II", *self.embeddings.shape))
        h.update(self.embeddings.astype("<f4").tobytes())
        for name, entry in self.models.items():
            h.update(b"model\0" + name.encode() + b"\0")
            h.update(np.asarray(entry.errors, dtype="<f8").tobytes())
        parts = [("identity", self.identity)] + [(f"group:{k}", v) for k, v in sorted(self.groups.items())]
        for label, part in parts:
            if part is not None:
                h.update(label.encode() + b"\0")
                h.update("\x1f".join(str(v) for v in part.values()).encode())
        return h.hexdigest()


def _fmt32(v) -> str:
    return str(np.float32(v))


def write_embeddings_binary(path: Path, emb: np.ndarray) -> None:
    emb = np.asarray(emb, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, emb.shape[0], emb.shape[1]))
        fh.write(np.ascontiguousarray(emb).tobytes())


def read_embeddings_binary(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise DataError(f"{path}: file too short for the DENB header ({len(raw)} bytes)")
    magic, n, d = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    expected = HEADER.size + 4 * n * d
    if len(raw) != expected:
        raise DataError(f"{path}: header declares {n} x {d} floats ({expected} bytes) but file has {len(raw)} bytes")
    emb = np.frombuffer(raw, dtype="<f4", offset=HEADER.size).reshape(n, d)
    return emb.astype(np.float64)


def write_embeddings_csv(path: Path, emb: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(emb, dtype=np.float32):
            w.writerow([_fmt32(v) for v in row])


def read_embeddings_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                vals = [np.float32(float(v)) for v in row]
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparseable embedding row") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DataError(f"{path}:{lineno}: row has {len(vals)} columns, expected {width}")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no embedding rows")
    return np.asarray(rows, dtype=np.float32).astype(np.float64)


def _label_column(values: list):
    try:
        return Partition.from_values([int(v) for v in values])
    except ValueError:
        return Partition.from_values(values)


def _float_column(path, rows, header, col) -> np.ndarray:
    if col not in header:
        raise DataError(f"{path}: missing column {col!r}")
    j = header.index(col)
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        try:
            out[i] = float(row[j])
        except ValueError:
            raise DataError(f"{path}:{i + 2}: column {col!r} value {row[j]!r} is not a number") from None
        if not np.isfinite(out[i]):
            raise DataError(f"{path}:{i + 2}: column {col!r} is not finite")
    return out


def _manifest_path(path) -> Path:
    p = Path(path)
    return p / MANIFEST_NAME if p.is_dir() else p


def read_bundle(path) -> Bundle:
    """Parse and validate a bundle given its directory or manifest path."""
    mpath = _manifest_path(path)
    if not mpath.exists():
        raise DataError(f"{mpath}: manifest not found")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{mpath}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    for key in ("n", "d", "records", "embeddings"):
        if key not in manifest:
            raise DataError(f"{mpath}: manifest lacks {key!r}")
    root = mpath.parent
    n, d = int(manifest["n"]), int(manifest["d"])

    epath = root / manifest["embeddings"]
    if not epath.exists():
        raise DataError(f"{epath}: embeddings file not found")
    kind = manifest.get("embeddings_format", "binary")
    if kind == "binary":
        emb = read_embeddings_binary(epath)
    elif kind == "csv":
        emb = read_embeddings_csv(epath)
    else:
        raise DataError(f"{mpath}: unknown embeddings_format {kind!r}")
    if emb.shape != (n, d):
        raise DataError(f"{epath}: embeddings are {emb.shape[0]} x {emb.shape[1]}, manifest says {n} x {d}")
    bad = np.argwhere(~np.isfinite(emb))
    if len(bad):
        raise DataError(f"{epath}: non-finite embedding value at row {bad[0][0]}, column {bad[0][1]}")

    rpath = root / manifest["records"]
    if not rpath.exists():
        raise DataError(f"{rpath}: records file not found")
    with open(rpath, newline="") as fh:
        table = [row for row in csv.reader(fh) if row]
    if not table:
        raise DataError(f"{rpath}: empty records file")
    header, rows = table[0], table[1:]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{rpath}:{i + 2}: row has {len(row)} fields, header has {len(header)}")
    if len(rows) != n:
        raise DataError(f"{rpath}: {len(rows)} records but embeddings have {n} rows")
    if "index" in header:
        idx = _float_column(rpath, rows, header, "index")
        wrong = np.flatnonzero(idx != np.arange(n))
        if len(wrong):
            raise DataError(f"{rpath}:{wrong[0] + 2}: index {rows[wrong[0]][header.index('index')]} out of sequence")

    def labels(col):
        if col not in header:
            raise DataError(f"{rpath}: missing label column {col!r}")
        j = header.index(col)
        return _label_column([row[j] for row in rows])

    identity = labels(manifest["identity"]) if manifest.get("identity") else None
    groups = {g: labels(g) for g in manifest.get("groups", [])}

    models = {}
    specs = manifest.get("models")
    if specs is None:
        specs = [{"name": "model", "error": "error"}] if "error" in header else []
    for spec in specs:
        name = spec["name"]
        if name in models:
            raise DataError(f"{mpath}: duplicate model name {name!r}")
        if "error" in spec:
            models[name] = ModelEntry(name, _float_column(rpath, rows, header, spec["error"]))
        else:
            run = ModelRun(name, _float_column(rpath, rows, header, spec["prediction"]),
                           _float_column(rpath, rows, header, spec["label"]),
                           TaskKind(spec.get("task", "regression")))
            models[name] = ModelEntry(name, per_datapoint_error(run), run)

    bundle = Bundle(emb, models, identity, groups)
    for entry in models.values():
        problems = validate_dataset(Dataset(emb, entry.errors, identity, groups))
        if problems:
            raise DataError(f"{rpath}: model {entry.name!r}: " + "; ".join(problems))
    return bundle


def load_bundle(path, model: Optional[str] = None) -> Dataset:
    """Load a bundle as a validated :class:`Dataset` for one model (default: the first)."""
    return read_bundle(path).dataset(model)


def save_bundle(path, embeddings, models: dict, identity=None, groups=None,
                embeddings_format: str = "binary") -> Path:
    """Write a bundle directory and return the manifest path.

    ``models`` maps a name to either an error vector or a :class:`ModelRun`.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim == 1:
        emb = emb.reshape(-1, 1)
    n, d = emb.shape
    groups = groups or {}

    header = ["index"]
    columns = [list(range(n))]
    manifest_models = []
    for name, value in models.items():
        if isinstance(value, ModelRun):
            header += [f"prediction:{name}", f"label:{name}"]
            columns += [[repr(float(v)) for v in value.predictions], [repr(float(v)) for v in value.labels]]
            manifest_models.append({"name": name, "prediction": f"prediction:{name}",
                                    "label": f"label:{name}", "task": value.task.value})
        else:
            errs = np.asarray(value, dtype=np.float64).reshape(-1)
            header.append(f"error:{name}")
            columns.append([repr(float(v)) for v in errs])
            manifest_models.append({"name": name, "error": f"error:{name}"})

    def label_values(v):
        return v.values() if isinstance(v, Partition) else list(np.asarray(v).tolist())

    if identity is not None:
        header.append("identity")
        columns.append(label_values(identity))
    for g in sorted(groups):
        header.append(g)
        columns.append(label_values(groups[g]))
    for col, vals in zip(header, columns):
        if len(vals) != n:
            raise DataError(f"column {col!r} has {len(vals)} values, expected {n}")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(zip(*columns))
    (root / "records.csv").write_text(buf.getvalue())

    if embeddings_format == "binary":
        efile = "embeddings.bin"
        write_embeddings_binary(root / efile, emb)
    elif embeddings_format == "csv":
        efile = "embeddings.csv"
        write_embeddings_csv(root / efile, emb)
    else:
        raise DataError(f"unknown embeddings format {embeddings_format!r}")

    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n": n,
        "d": d,
        "records": "records.csv",
        "embeddings": efile,
        "embeddings_format": embeddings_format,
        "identity": "identity" if identity is not None else None,
        "groups": sorted(groups),
        "models": manifest_models,
    }
    mpath = root / MANIFEST_NAME
    mpath.write_text(json.dumps(manifest, indent=2) + "\n")
    return mpath


def save_dataset(path, ds: Dataset, name: str = "model", embeddings_format: str = "binary") -> Path:
    return save_bundle(path, ds.embeddings, {name: ds.errors}, ds.identity, dict(ds.groups), embeddings_format)
