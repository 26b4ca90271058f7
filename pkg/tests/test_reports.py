import json

import numpy as np

from cstarindex.reports import SCHEMA_VERSION, eigenpath_csv, plot_eigenpath, render_json, write_eigenpath_csv


def test_json_is_deterministic_and_clean():
    payload = {"b": 1 + 2j, "a": [np.float64(np.inf), np.nan, np.int64(3)], "c": np.array([1.0, 2.0])}
    one = render_json(payload, timestamp=False)
    assert one == render_json(payload, timestamp=False)
    doc = json.loads(one)
    assert doc["schema_version"] == SCHEMA_VERSION
    assert doc["b"] == [1.0, 2.0] and doc["a"] == ["inf", "nan", 3]
    assert list(doc) == sorted(doc)
    assert "timestamp" in json.loads(render_json(payload))


def test_eigenpath_csv(tmp_path):
    ts = np.linspace(0, 1, 3)
    path = np.array([[-1.0, 1.0], [-0.5, 1.5], [0.0, 2.0]])
    text = eigenpath_csv(ts, path)
    lines = text.strip().splitlines()
    assert lines[0] == "t,lambda_1,lambda_2" and len(lines) == 4
    out = write_eigenpath_csv(ts, path, tmp_path / "x" / "p.csv")
    assert out.read_text() == text
    png = plot_eigenpath(ts, path, tmp_path / "p.png", "demo")
    assert png.stat().st_size > 0
