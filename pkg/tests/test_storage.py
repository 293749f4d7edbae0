import json

import numpy as np

from bnreduce.radial import SweepEntry, epsilon_for_height
from bnreduce.reduced import ProblemParams
from bnreduce.storage import (Manifest, load_dataset, read_json, read_manifest, save_dataset,
                              write_json, write_table, read_table)


def test_json_handles_numpy(tmp_path):
    obj = {"a": np.arange(3), "b": np.float64(0.1), "c": np.bool_(True), "d": (np.int64(2),)}
    write_json(tmp_path / "x.json", obj)
    assert read_json(tmp_path / "x.json") == {"a": [0, 1, 2], "b": 0.1, "c": True, "d": [2]}


def test_table_full_precision(tmp_path):
    v = 1 / 3
    write_table(tmp_path / "t.csv", ["a", "b"], [[1, v]])
    header, rows = read_table(tmp_path / "t.csv")
    assert header == ["a", "b"] and float(rows[0][1]) == v


def test_dataset_round_trip(tmp_path):
    params = ProblemParams(5, 3.0)
    s = epsilon_for_height(params, 200.0)
    entries = [SweepEntry(200.0, s.eps, s.profile), SweepEntry(5.0, error="ValueError: too low")]
    index = save_dataset(tmp_path, params, entries)
    assert index["entries"][1]["file"] is None
    index2, profiles = load_dataset(tmp_path)
    assert index2 == json.loads(json.dumps(index))
    assert len(profiles) == 1
    assert np.array_equal(profiles[0].u, s.profile.u) and profiles[0].eps == s.eps


def test_manifest_append(tmp_path):
    for k in range(2):
        m = Manifest("demo", {"k": k})
        with m.stage("work"):
            pass
        m.check("ok", 1.0, 2.0, True)
        m.append_to(tmp_path)
    entries = read_manifest(tmp_path)
    assert [e["config"]["k"] for e in entries] == [0, 1]
    assert all(e["passed"] and "work" in e["stages"] for e in entries)
    assert read_manifest(tmp_path / "empty") == []
