"""On-disk formats.

Sample file      CSV, one row per node, T comma-separated values.
Manifest         JSON: {"version": "ncdd-dataset/1", "n_nodes", "t_len",
                 "sampling_rate_hz", "entries": [{"path", "label", "timestamp",
                 "sample_index"}]}; paths are relative to the manifest.
Similarity       CSV, N rows of N values written with 17 significant digits.
Adjacency        CSV of 0/1 integers.
Parameter file   little-endian binary:
                   bytes 0..7    magic b"NCDDPRM\\0"
                   bytes 8..11   uint32 format version (currently 1)
                   bytes 12..15  uint32 header length H
                   next H bytes  UTF-8 JSON header, sorted keys: domain, d0, K,
                                 psi_mode, theta_mode, t_tilde, bins,
                                 band_of_bin, theta_scale, seed, n_free, extra
                   remainder     n_free float64 free variables
Metrics          JSON, sorted keys, two-space indent.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (
    ConfigError,
    GraphSignalSample,
    NCDDError,
    ParseError,
    SimilarityMatrix,
    Topology,
    VersionMismatch,
    validate_sample,
)
from .training import ParameterLayout, TrainableParameters

MANIFEST_VERSION = "ncdd-dataset/1"
PARAM_MAGIC = b"NCDDPRM\x00"
PARAM_VERSION = 1


def window_recording(recording: np.ndarray, window_s: float, overlap_s: float, rate_hz: float,
                     label: Optional[int] = None, start_index: int = 0) -> list[GraphSignalSample]:
    """Cut an N x L_total recording into overlapping windows that lie fully inside it."""
    if not window_s > overlap_s >= 0:
        raise ConfigError("need window_s > overlap_s >= 0")
    t = window_s * rate_hz
    stride = (window_s - overlap_s) * rate_hz
    if abs(t - round(t)) > 1e-9 or abs(stride - round(stride)) > 1e-9:
        raise ConfigError(f"window ({t}) and stride ({stride}) must be whole sample counts")
    t, stride = int(round(t)), int(round(stride))
    x = np.asarray(recording, dtype=np.float64)
    out = []
    for k, off in enumerate(range(0, x.shape[1] - t + 1, stride)):
        out.append(
            GraphSignalSample(x[:, off : off + t], sample_index=start_index + k,
                              timestamp=off / rate_hz, label=label)
        )
    return out


def _read_csv_matrix(path: Path) -> np.ndarray:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError:
        raise ParseError(f"{path}: file not found") from None
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        row = []
        for col, tok in enumerate(line.split(","), start=1):
            try:
                row.append(float(tok))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: column {col}: cannot parse {tok.strip()!r}") from None
        if rows and len(row) != len(rows[0]):
            raise ParseError(f"{path}:{lineno}: expected {len(rows[0])} columns, found {len(row)}")
        rows.append(row)
    if not rows:
        raise ParseError(f"{path}: empty matrix file")
    return np.array(rows, dtype=np.float64)


def _write_csv_matrix(m: np.ndarray, path: Path, fmt: str = "%.17g") -> None:
    np.savetxt(path, np.atleast_2d(m), delimiter=",", fmt=fmt)


def write_sample(sample: GraphSignalSample, path) -> None:
    _write_csv_matrix(sample.values, path)


def read_sample(path, **meta) -> GraphSignalSample:
    return GraphSignalSample(_read_csv_matrix(path), **meta)


@dataclass(frozen=True)
class DatasetManifest:
    n_nodes: int
    t_len: int
    sampling_rate_hz: float
    entries: tuple
    version: str = MANIFEST_VERSION


def write_dataset(samples: Sequence[GraphSignalSample], directory, sampling_rate_hz: float,
                  name: str = "manifest.json") -> Path:
    directory = Path(directory)
    (directory / "samples").mkdir(parents=True, exist_ok=True)
    entries = []
    for s in samples:
        rel = f"samples/sample_{s.sample_index:06d}.csv"
        write_sample(s, directory / rel)
        entries.append({"path": rel, "label": s.label, "timestamp": s.timestamp,
                        "sample_index": s.sample_index})
    n, t = samples[0].values.shape
    doc = {"version": MANIFEST_VERSION, "n_nodes": n, "t_len": t,
           "sampling_rate_hz": sampling_rate_hz, "entries": entries}
    path = directory / name
    write_json(doc, path)
    return path


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ParseError(f"{path}: manifest not found") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or doc.get("version") != MANIFEST_VERSION:
        raise VersionMismatch(f"{path}: expected version {MANIFEST_VERSION!r}, got {doc.get('version') if isinstance(doc, dict) else None!r}")
    for key in ("n_nodes", "t_len", "sampling_rate_hz", "entries"):
        if key not in doc:
            raise ParseError(f"{path}: missing key {key!r}")
    return DatasetManifest(int(doc["n_nodes"]), int(doc["t_len"]), float(doc["sampling_rate_hz"]),
                           tuple(doc["entries"]))


def read_dataset(path) -> tuple[DatasetManifest, list[GraphSignalSample]]:
    path = Path(path)
    manifest = read_manifest(path)
    samples = []
    for k, e in enumerate(manifest.entries):
        f = path.parent / e["path"]
        if not f.exists():
            raise ParseError(f"{path}: entry {k} references missing file {f}")
        s = read_sample(f, sample_index=int(e.get("sample_index", k)),
                        timestamp=e.get("timestamp"), label=e.get("label"))
        try:
            validate_sample(s, manifest.n_nodes, manifest.t_len)
        except Exception as exc:
            raise ParseError(f"{f}: {exc}") from exc
        samples.append(s)
    return manifest, samples


def write_similarity(s: SimilarityMatrix | np.ndarray, path) -> None:
    _write_csv_matrix(s.values if isinstance(s, SimilarityMatrix) else s, path)


def read_similarity(path) -> SimilarityMatrix:
    return SimilarityMatrix(_read_csv_matrix(path))


def write_adjacency(topology: Topology, path) -> None:
    _write_csv_matrix(topology.adjacency, path, fmt="%d")


def read_adjacency(path) -> Topology:
    m = _read_csv_matrix(path)
    try:
        return Topology(m.astype(np.int8) if np.all((m == 0) | (m == 1)) else m)
    except (ValueError, NCDDError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_parameters(params: TrainableParameters, path, extra: Optional[dict] = None) -> None:
    lay = params.layout
    header = {
        "domain": lay.domain, "d0": lay.d0, "K": lay.K,
        "psi_mode": lay.psi_mode, "theta_mode": lay.theta_mode,
        "t_tilde": lay.t_tilde, "bins": lay.bins,
        "band_of_bin": list(lay.band_of_bin) if lay.band_of_bin is not None else None,
        "theta_scale": lay.theta_scale, "seed": params.seed,
        "n_free": lay.n_free, "extra": extra or {},
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(PARAM_MAGIC)
        fh.write(struct.pack("<II", PARAM_VERSION, len(hb)))
        fh.write(hb)
        fh.write(np.asarray(params.values, dtype="<f8").tobytes())


def read_parameters(path) -> tuple[TrainableParameters, dict]:
    """Return the parameters and the free-form ``extra`` header dictionary."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != PARAM_MAGIC:
        raise VersionMismatch(f"{path}: not a parameter file (bad magic)")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != PARAM_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {PARAM_VERSION}")
    try:
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
        layout = ParameterLayout(
            domain=header["domain"], d0=header["d0"], K=header["K"],
            psi_mode=header["psi_mode"], theta_mode=header["theta_mode"],
            t_tilde=header["t_tilde"], bins=header["bins"],
            band_of_bin=tuple(header["band_of_bin"]) if header["band_of_bin"] is not None else None,
            theta_scale=header["theta_scale"],
        )
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise VersionMismatch(f"{path}: corrupt header ({exc})") from None
    body = data[16 + hlen :]
    if len(body) != 8 * layout.n_free or header.get("n_free") != layout.n_free:
        raise ParseError(f"{path}: offset {16 + hlen}: expected {layout.n_free} float64 values, "
                         f"found {len(body)} bytes")
    values = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return TrainableParameters(layout, values, int(header["seed"])), header.get("extra", {})


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(doc, path) -> None:
    Path(path).write_text(json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n")


def write_loss_trace(trace: Sequence[float], path) -> None:
    lines = ["epoch,mean_loss"] + [f"{i},{v!r}" for i, v in enumerate(trace)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_loss_trace(path) -> list[float]:
    rows = Path(path).read_text().splitlines()[1:]
    return [float(r.split(",")[1]) for r in rows if r]
