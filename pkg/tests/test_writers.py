import json
from pathlib import Path

import numpy as np
import pandas as pd

from sddc.cli.writers import dumps, to_jsonable, write_csv, write_json
from sddc.model.mdp import PowerConditioning


def test_csv_format(tmp_path):
    frame = pd.DataFrame({"a": [0.1, np.nan], "b": [1, 2]})
    path = write_csv(frame, tmp_path / "nested" / "out.csv")
    assert path.read_bytes() == b"a,b\n0.10000000000000001,1\nN/A,2\n"


def test_json_is_sorted_and_finite():
    text = dumps({"b": np.float64(np.inf), "a": np.int64(3), "c": (1, np.float32(0.5))})
    data = json.loads(text)
    assert data == {"schema": 1, "a": 3, "b": None, "c": [1, 0.5]}
    assert text.index('"a"') < text.index('"b"') < text.index('"schema"')
    assert text.endswith("\n")


def test_to_jsonable():
    value = to_jsonable({
        "flag": np.bool_(True),
        "cond": PowerConditioning.SOURCE,
        "path": Path("out") / "x.json",
        "matrix": np.eye(2),
        1: "key",
    })
    assert value == {
        "flag": True,
        "cond": "source",
        "path": str(Path("out") / "x.json"),
        "matrix": [[1.0, 0.0], [0.0, 1.0]],
        "1": "key",
    }
    assert type(value["flag"]) is bool


def test_write_json_is_deterministic(tmp_path):
    data = {"x": [1.0, 2.5], "y": {"z": None}}
    first = write_json(data, tmp_path / "a" / "one.json").read_bytes()
    second = write_json(dict(reversed(list(data.items()))), tmp_path / "two.json").read_bytes()
    assert first == second
