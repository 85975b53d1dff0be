import json
import math

from hypothesis import given, strategies as st

from conetrace import __version__
from conetrace._io import config_hash, dumps_canonical, format_number, read_csv, write_csv, write_json


def test_number_format():
    assert format_number(0.1) == "0.10000000000000001"
    assert format_number(-0.0) == "0"
    assert format_number(3) == "3"
    assert format_number(True) == "true"
    assert format_number(math.inf) == "inf"
    assert format_number(math.nan) == "nan"


def test_canonical_json_sorts_keys_and_spells_non_finite():
    text = dumps_canonical({"b": [1, 2.5], "a": {"z": math.nan, "y": 1j}})
    assert text.index('"a"') < text.index('"b"')
    data = json.loads(text)
    assert data == {"a": {"y": [0.0, 1.0], "z": "nan"}, "b": [1, 2.5]}


def test_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1.5, 2]}) == config_hash({"b": [1.5, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_csv_and_json_headers(tmp_path):
    p = write_csv(tmp_path / "x.csv", ["t", "v"], [[0.5, 1.0 / 3], [1, "true"]], "abc")
    first = p.read_text().splitlines()[0]
    assert first == f"# conetrace {__version__} config_sha256=abc"
    header, rows = read_csv(p)
    assert header == ["t", "v"] and rows[1] == ["1", "true"]
    assert float(rows[0][1]) == 1.0 / 3
    j = json.loads(write_json(tmp_path / "x.json", {"k": 1}, "abc").read_text())
    assert j == {"k": 1, "config_sha256": "abc", "version": __version__}


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_number_format_round_trips(x):
    assert float(format_number(x)) == x
