"""Deterministic CSV/JSON writers and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path

import numpy as np


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows):
    """RFC-4180 CSV, UTF-8, header row, shortest-roundtrip float formatting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonify(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def config_hash(raw_config: dict) -> str:
    canon = json.dumps(_jsonify(raw_config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class RunManifest:
    """Reproducibility record: config hash, seed, versions, stages, files."""

    def __init__(self, command: str, raw_config: dict, seed: int, out_dir):
        import scipy

        from . import __version__

        self.out_dir = Path(out_dir)
        self.data = {
            "schema": "run-manifest/1",
            "command": command,
            "config_hash": config_hash(raw_config),
            "seed": int(seed),
            "versions": {
                "admitlab": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "stages": [],
            "files": [],
        }
        self._stage_start = None
        self._stage_name = None

    def start(self, name: str):
        self.finish()
        self._stage_name = name
        self._stage_start = time.perf_counter()

    def finish(self):
        if self._stage_name is not None:
            self.data["stages"].append({
                "name": self._stage_name,
                "seconds": time.perf_counter() - self._stage_start,
            })
            self._stage_name = None

    def record(self, path) -> Path:
        rel = str(Path(path).relative_to(self.out_dir))
        if rel not in self.data["files"]:
            self.data["files"].append(rel)
        return Path(path)

    def write(self) -> Path:
        self.finish()
        self.data["files"].sort()
        return write_json(self.out_dir / "manifest.json", self.data)
