"""Tests for torsion files and the JSON writer."""

import json

import numpy as np
import pytest

from src.api.io import dumps, read_torsion, torsion_from_dict, torsion_to_dict, write_torsion
from src.core.exceptions import InvalidTorsionError, OutputWriteError, TorsionFormatError
from src.geometry.tensor import build_torsion


class TestTorsionFile:
    """Test reading and writing the torsion format."""

    def test_read_fixture(self, fixtures_dir):
        """Test the unit surface fixture with T^1_{12} = -1."""
        torsion = read_torsion(fixtures_dir / "unit_surface.json")
        assert torsion.n == 2
        assert torsion.component(1, 1, 2) == -1

    def test_unordered_lower_pair(self):
        """Test that lower indices must be increasing."""
        data = {"n": 2, "entries": [{"upper": 1, "lower": [2, 1], "value": [1.0, 0.0]}]}
        with pytest.raises(TorsionFormatError) as exc_info:
            torsion_from_dict(data)
        assert exc_info.value.exit_code == 2

    @pytest.mark.parametrize(
        "data",
        [
            {"n": 2, "entries": [{"upper": 1, "lower": [1], "value": [1.0, 0.0]}]},
            {"n": 2, "entries": [{"upper": 1, "lower": [1, 2], "value": [1.0]}]},
            {"n": 2, "entries": [], "extra": True},
            {"n": 0, "entries": []},
        ],
    )
    def test_schema_violations(self, data):
        """Test malformed documents."""
        with pytest.raises(TorsionFormatError):
            torsion_from_dict(data)

    def test_missing_entries_means_zero(self):
        """Test that an absent entry list is the zero tensor."""
        assert torsion_from_dict({"n": 2}).entries() == []

    def test_out_of_range_is_invalid_torsion(self):
        """Test that index range errors come from the tensor layer."""
        data = {"n": 2, "entries": [{"upper": 3, "lower": [1, 2], "value": [1.0, 0.0]}]}
        with pytest.raises(InvalidTorsionError):
            torsion_from_dict(data)

    def test_broken_json(self, tmp_path):
        """Test that unreadable files raise TorsionFormatError."""
        path = tmp_path / "broken.json"
        path.write_text("{")
        with pytest.raises(TorsionFormatError):
            read_torsion(path)
        with pytest.raises(TorsionFormatError):
            read_torsion(tmp_path / "missing.json")

    def test_write_then_read(self, tmp_path, e2):
        """Test that a written tensor reads back unchanged."""
        path = tmp_path / "e2.json"
        write_torsion(path, e2)
        assert read_torsion(path).max_difference(e2) == 0.0
        assert torsion_to_dict(e2)["entries"][1] == {"upper": 1, "lower": [1, 4], "value": [0.0, -1.0]}

    def test_write_into_missing_directory(self, tmp_path, e2):
        """Test that an OS error while writing becomes a write_failed error."""
        path = tmp_path / "missing" / "e2.json"
        with pytest.raises(OutputWriteError) as exc_info:
            write_torsion(path, e2)
        assert exc_info.value.exit_code == 2
        assert exc_info.value.details == {"path": str(path)}


class TestDumps:
    """Test the JSON writer."""

    def test_seventeen_digits(self):
        """Test that floats keep 17 significant digits."""
        text = dumps({"x": 0.1})
        assert "0.10000000000000001" in text
        assert json.loads(text)["x"] == 0.1

    def test_integral_floats(self):
        """Test that integral floats keep a decimal point."""
        assert dumps([1.0, 2]) == "[1.0, 2]"

    def test_non_finite(self):
        """Test that NaN and infinity become null."""
        assert json.loads(dumps({"a": float("nan"), "b": float("inf")})) == {"a": None, "b": None}

    def test_numpy_and_complex(self):
        """Test numpy scalars, arrays and complex values."""
        data = {"flag": np.bool_(True), "k": np.int64(3), "z": 1 - 2j, "v": np.array([0.5, 1.5])}
        assert json.loads(dumps(data)) == {"flag": True, "k": 3, "z": [1.0, -2.0], "v": [0.5, 1.5]}

    def test_unknown_type(self):
        """Test that unsupported objects are rejected."""
        with pytest.raises(TypeError):
            dumps({"x": object()})

    def test_torsion_document(self):
        """Test the layout of a written torsion document."""
        document = json.loads(dumps(torsion_to_dict(build_torsion(2, [(1, 1, 2, 1.0)]))))
        assert document == {"n": 2, "entries": [{"upper": 1, "lower": [1, 2], "value": [1.0, 0.0]}]}
