"""Persistence: CSV tables and profiles, JSON indices and an append-only
JSON-lines manifest."""

import csv
import json
import os
import time
from pathlib import Path

import numpy as np

from .radial import PANEL_ORDER, RadialProfile

MANIFEST_SCHEMA = 1
INDEX_NAME = "index.json"
MANIFEST_NAME = "manifest.jsonl"


def tool_version():
    from . import __version__
    return __version__


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_table(path, header, rows):
    """CSV with a header row; floats at full precision."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def save_dataset(directory, params, entries, extra=None):
    """Write one CSV per successful shot plus an index describing them all."""
    d = Path(directory)
    (d / "profiles").mkdir(parents=True, exist_ok=True)
    items = []
    for i, e in enumerate(entries):
        item = {"index": i, "M": e.M, "eps": e.eps, "error": e.error, "file": None}
        if e.profile is not None:
            name = f"profiles/profile_{i:03d}.csv"
            e.profile.to_csv(d / name)
            item["file"] = name
            item["panel_order"] = e.profile.panel_order
        items.append(item)
    index = {"schema": MANIFEST_SCHEMA, "problem": params.to_dict(), "entries": items}
    if extra:
        index.update(extra)
    write_json(d / INDEX_NAME, index)
    return index


def load_dataset(directory):
    """Returns (index, profiles) with failed shots skipped."""
    d = Path(directory)
    index = read_json(d / INDEX_NAME)
    pr = index["problem"]
    profiles = []
    for item in index["entries"]:
        if item.get("file"):
            profiles.append(RadialProfile.from_csv(
                d / item["file"], pr["N"], pr["q"], item["eps"], item["M"],
                item.get("panel_order", PANEL_ORDER)))
    return index, profiles


class Manifest:
    """Collects checks and stage timings for one command, then appends a
    single JSON line to the manifest file."""

    def __init__(self, command, config):
        self.entry = {"schema": MANIFEST_SCHEMA, "tool_version": tool_version(),
                      "command": command, "config": copy_plain(config),
                      "stages": {}, "checks": [], "outputs": [], "notes": []}
        self._t = None

    def stage(self, name):
        manifest = self

        class _Timer:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                manifest.entry["stages"][name] = time.perf_counter() - self.t
                return False

        return _Timer()

    def check(self, name, value, tolerance, passed, claim=""):
        self.entry["checks"].append({"name": name, "value": _plain(value),
                                     "tolerance": _plain(tolerance),
                                     "passed": bool(passed), "claim": claim})

    def output(self, path):
        self.entry["outputs"].append(str(path))

    def note(self, text):
        self.entry["notes"].append(text)

    @property
    def all_passed(self):
        return all(c["passed"] for c in self.entry["checks"])

    def append_to(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.entry["passed"] = self.all_passed
        with open(d / MANIFEST_NAME, "a") as fh:
            fh.write(json.dumps(_plain(self.entry), sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())


def copy_plain(v):
    return _plain(v)


def read_manifest(directory):
    p = Path(directory) / MANIFEST_NAME
    if not p.exists():
        return []
    with open(p) as fh:
        return [json.loads(line) for line in fh if line.strip()]
