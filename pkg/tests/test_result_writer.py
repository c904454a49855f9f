"""
Tests for result_writer: CSV/JSON/workbook output with metadata and the manifest.
"""
import json
import math

import numpy as np
import pandas as pd
import pytest

from config import ARTIFACT_VERSION
from result_writer import (
    MANIFEST_NAME,
    ResultWriter,
    file_sha256,
    load_manifest,
    read_csv,
    read_csv_metadata,
    to_jsonable,
)

METADATA = {'command': 'simulate', 'seed': 3, 'config': {'dt': 0.1, 'class_x': '1234'}}


@pytest.fixture
def writer(tmp_path):
    return ResultWriter(str(tmp_path / 'run'), METADATA)


class TestToJsonable:
    """Conversion of numpy values for JSON."""

    def test_rounds_floats(self):
        """Floats keep 12 significant digits."""
        assert to_jsonable(0.1 + 0.2) == 0.3
        assert to_jsonable(np.float64(1 / 3)) == 0.333333333333

    def test_nan_becomes_null(self):
        """NaN and infinity have no JSON form."""
        assert to_jsonable(float('nan')) is None
        assert to_jsonable(np.inf) is None

    def test_nested(self):
        """Arrays, numpy ints and bools inside containers are converted."""
        out = to_jsonable({'a': np.array([1.0, 2.5]), 'b': (np.int64(4), np.bool_(True))})
        assert out == {'a': [1.0, 2.5], 'b': [4, True]}
        json.dumps(out)


class TestResultWriter:
    """Files written into a run directory."""

    def test_csv_with_metadata(self, writer):
        """The first CSV line carries the metadata, the rest is the table."""
        df = pd.DataFrame({'time': [0.0, 0.5], 'u': [1 / 3, 2.0], 'label': ['a', 'b']})
        path = writer.write_csv(df, 'table.csv')
        meta = read_csv_metadata(path)
        assert meta['artifact_version'] == ARTIFACT_VERSION
        assert meta['command'] == 'simulate'
        back = read_csv(path)
        assert back['label'].tolist() == ['a', 'b']
        assert back['u'].iloc[0] == pytest.approx(1 / 3, rel=1e-11)

    def test_csv_is_byte_stable(self, tmp_path):
        """Writing the same table twice gives identical bytes."""
        df = pd.DataFrame({'x': np.linspace(0, 1, 7)})
        a = ResultWriter(str(tmp_path / 'a'), METADATA).write_csv(df, 't.csv')
        b = ResultWriter(str(tmp_path / 'b'), METADATA).write_csv(df, 't.csv')
        assert file_sha256(a) == file_sha256(b)

    def test_json(self, writer):
        """JSON documents embed the metadata block."""
        path = writer.write_json({'value': float('nan'), 'n': np.int32(2)}, 'out.json')
        with open(path) as f:
            doc = json.load(f)
        assert doc['metadata']['seed'] == 3
        assert doc['value'] is None
        assert doc['n'] == 2

    def test_workbook_sheets(self, writer):
        """Workbooks get one sheet per table plus a metadata sheet."""
        tables = {'mean_payoff': pd.DataFrame([[1.0, 2.0], [3.0, 4.0]], index=['a', 'b'], columns=['a', 'b'])}
        path = writer.write_workbook(tables, 'book.xlsx')
        assert pd.ExcelFile(path, engine='openpyxl').sheet_names == ['mean_payoff', 'metadata']

    def test_manifest(self, writer):
        """The manifest lists every file once with its checksum."""
        df = pd.DataFrame({'x': [1.0]})
        writer.write_csv(df, 'a.csv')
        writer.write_csv(df, 'a.csv')
        writer.write_json({'ok': True}, 'b.json')
        writer.write_manifest()
        manifest = load_manifest(writer.out_dir)
        names = [f['name'] for f in manifest['files']]
        assert names == ['a.csv', 'b.json']
        for entry in manifest['files']:
            assert entry['sha256'] == file_sha256(f"{writer.out_dir}/{entry['name']}")
        assert MANIFEST_NAME not in names

    def test_missing_manifest(self, tmp_path):
        """A directory without a manifest loads as None."""
        assert load_manifest(str(tmp_path)) is None

    def test_metadata_line_required(self, tmp_path):
        """CSV files not written here have no metadata."""
        path = tmp_path / 'plain.csv'
        path.write_text('a,b\n1,2\n')
        with pytest.raises(ValueError, match='metadata'):
            read_csv_metadata(str(path))
        assert math.isclose(read_csv(str(path))['b'].iloc[0], 2)
