import math

import numpy as np
import pytest

from spectab.errors import DataError, SchemaError
from spectab.schema import ColumnSpec, Table, TableSchema, read_csv, write_csv


def make_schema():
    return TableSchema(
        [
            ColumnSpec("x", "continuous"),
            ColumnSpec("c", "categorical", categories=["a", "b"], target_task="classification"),
            ColumnSpec("m", "mixed", specials=[-1.0], missing=True),
        ]
    )


class TestSchemaValidation:
    def test_duplicate_names_rejected(self):
        with pytest.raises(SchemaError):
            TableSchema([ColumnSpec("x", "continuous"), ColumnSpec("x", "minmax")])

    def test_two_targets_rejected(self):
        with pytest.raises(SchemaError):
            TableSchema(
                [
                    ColumnSpec("a", "categorical", categories=["u"], target_task="classification"),
                    ColumnSpec("b", "categorical", categories=["v"], target_task="classification"),
                ]
            )

    def test_categorical_needs_vocab(self):
        with pytest.raises(SchemaError):
            ColumnSpec("c", "categorical").validate()

    def test_mixed_needs_specials_or_missing(self):
        with pytest.raises(SchemaError):
            ColumnSpec("m", "mixed").validate()
        ColumnSpec("m", "mixed", missing=True).validate()

    def test_classification_target_must_be_categorical(self):
        with pytest.raises(SchemaError):
            ColumnSpec("x", "continuous", target_task="classification").validate()

    def test_regression_target_kinds(self):
        ColumnSpec("x", "continuous", target_task="regression").validate()
        ColumnSpec("x", "minmax", target_task="regression").validate()
        with pytest.raises(SchemaError):
            ColumnSpec("x", "categorical", categories=["a"], target_task="regression").validate()

    def test_hash_ignores_formatting_changes(self, tmp_path):
        s = make_schema()
        p1 = tmp_path / "a.yaml"
        s.save(p1)
        # re-serialize through yaml with different layout
        text = p1.read_text().replace("\n", "\n\n")
        p2 = tmp_path / "b.yaml"
        p2.write_text(text)
        assert TableSchema.load(p1).hash() == TableSchema.load(p2).hash()

    def test_hash_changes_with_content(self):
        s1 = make_schema()
        s2 = TableSchema(s1.columns[:2])
        assert s1.hash() != s2.hash()

    def test_permuted(self):
        s = make_schema()
        p = s.permuted([2, 0, 1])
        assert p.names == ["m", "x", "c"]
        assert p.target == (2, "classification")
        with pytest.raises(SchemaError):
            s.permuted([0, 0, 1])

    def test_yaml_roundtrip(self, tmp_path):
        s = make_schema()
        path = tmp_path / "schema.yaml"
        s.save(path)
        loaded = TableSchema.load(path)
        assert loaded.to_dict() == s.to_dict()


class TestCsv:
    def test_roundtrip(self, tmp_path):
        schema = make_schema()
        table = Table(
            schema,
            {
                "x": np.array([1.5, -2.25, 1e-9]),
                "c": ["a", "b", "a"],
                "m": np.array([-1.0, math.nan, 7.5]),
            },
        )
        path = tmp_path / "t.csv"
        write_csv(path, table)
        back = read_csv(path, schema)
        assert np.array_equal(back.columns["x"], table.columns["x"])
        assert back.columns["c"] == ["a", "b", "a"]
        assert np.isnan(back.columns["m"][1])
        assert back.columns["m"][0] == -1.0

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,wrong,m\n1,a,2\n")
        with pytest.raises(DataError, match="header"):
            read_csv(path, make_schema())

    def test_malformed_row_reports_index(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,c,m\n1.0,a,2.0\nnot-a-number,b,3.0\n")
        with pytest.raises(DataError, match="row 2"):
            read_csv(path, make_schema())

    def test_missing_only_allowed_on_mixed(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,c,m\n,a,2.0\n")
        with pytest.raises(DataError, match="row 1"):
            read_csv(path, make_schema())

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,c,m\n1.0,a\n")
        with pytest.raises(DataError, match="row 1"):
            read_csv(path, make_schema())

    def test_csv_header_order_free(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("c,m,x\na,-1.0,2.0\n")
        t = read_csv(path, make_schema())
        assert t.columns["x"][0] == 2.0

    def test_write_deterministic(self, tmp_path):
        schema = make_schema()
        table = Table(
            schema,
            {"x": np.array([0.1]), "c": ["a"], "m": np.array([5.0])},
        )
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(p1, table)
        write_csv(p2, table)
        assert p1.read_bytes() == p2.read_bytes()


class TestTable:
    def test_take_and_permute(self):
        schema = make_schema()
        table = Table(
            schema,
            {"x": np.arange(4.0), "c": ["a", "b", "a", "b"], "m": np.arange(4.0)},
        )
        sub = table.take([2, 0])
        assert sub.columns["c"] == ["a", "a"]
        perm = table.permuted([1, 0, 2])
        assert perm.schema.names == ["c", "x", "m"]
        assert np.array_equal(perm.columns["x"], table.columns["x"])

    def test_ragged_rejected(self):
        with pytest.raises(DataError):
            Table(make_schema(), {"x": np.arange(3.0), "c": ["a"], "m": np.arange(3.0)})
