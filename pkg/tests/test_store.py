"""Tests for RNLS1 snapshots and the JSON / CSV writers."""

import json
import math
import struct

import numpy as np
import pandas as pd
import pytest

from rnls_lab.core_layer.grid import make_grid, mesh
from rnls_lab.errors import UsageError
from rnls_lab.models import Field, ModelParams
from rnls_lab.store import MAGIC, dumps_json, read_field, write_csv, write_field


@pytest.fixture
def field_2d():
    grid = make_grid(2, 1, [8, 10], [4.0, 5.0])
    x, y = mesh(grid)
    return Field(grid=grid, values=np.exp(-x ** 2 - y ** 2) * (1 + 0.5j * x))


class TestSnapshots:

    def test_layout(self, field_2d, tmp_path):
        blob = write_field(field_2d, tmp_path / "u.rnls").read_bytes()
        assert blob[:4] == MAGIC
        assert struct.unpack_from("<3I", blob, 4) == (1, 2, 1)
        assert struct.unpack_from("<2I", blob, 16) == (8, 10)
        assert struct.unpack_from("<2d", blob, 24) == (4.0, 5.0)
        assert len(blob) == 40 + 16 * 80

    def test_read_back(self, field_2d, tmp_path):
        path = write_field(field_2d, tmp_path / "u.rnls")
        back = read_field(path)
        assert back.grid == field_2d.grid
        np.testing.assert_array_equal(back.values, field_2d.values)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_field(tmp_path / "absent.rnls")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.rnls"
        path.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(UsageError):
            read_field(path)

    def test_truncated_payload(self, field_2d, tmp_path):
        path = write_field(field_2d, tmp_path / "u.rnls")
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(UsageError):
            read_field(path)


class TestJson:

    def test_sorted_keys_and_full_precision(self):
        text = dumps_json({"b": 0.1, "a": 1, "c": [True, None]})
        assert text.index('"a"') < text.index('"b"') < text.index('"c"')
        assert "0.10000000000000001" in text

    def test_non_finite_floats_become_strings(self):
        text = dumps_json({"x": math.inf, "y": -math.inf, "z": math.nan})
        assert '"inf"' in text and '"-inf"' in text and '"nan"' in text

    def test_strings_with_control_characters_parse_back(self):
        document = {"error": "bad\tvalue\r", "out": 'C:\\runs\\"quoted"\n', "tag": "ω₁ ✅"}
        assert json.loads(dumps_json(document)) == document

    def test_output_is_valid_json(self):
        document = {"x": [1.5, -2.0, 3], "nested": {"flag": True, "none": None}, "inf": math.inf}
        parsed = json.loads(dumps_json(document))
        assert parsed == {"x": [1.5, -2.0, 3], "nested": {"flag": True, "none": None}, "inf": "inf"}

    def test_models_are_serialized(self):
        text = dumps_json(ModelParams(d=1, k=0, p=2.0, omega=1.0))
        assert '"omega": 1.0' in text
        assert '"m": null' in text


class TestCsv:

    def test_seventeen_digits_and_unix_newlines(self, tmp_path):
        path = write_csv(pd.DataFrame({"t": [0.1, 0.2], "M": [1.0, 2.0]}), tmp_path / "x.csv")
        text = path.read_bytes().decode()
        assert text.splitlines()[0] == "t,M"
        assert "0.10000000000000001" in text
        assert "\r" not in text
