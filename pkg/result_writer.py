import hashlib
import json
import math
import os
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from config import ARTIFACT_VERSION, NUMBER_FORMAT
from logger_config import setup_logger, get_default_log_file

# Setup logger
logger = setup_logger('result_writer', get_default_log_file('result_writer'))

MANIFEST_NAME = 'manifest.json'
METADATA_PREFIX = '# metadata: '


def to_jsonable(value):
    """Plain JSON types with floats rounded to 12 significant digits; NaN becomes null."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return None
        return float(f"{value:.12g}")
    return value


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def read_csv(path: str) -> pd.DataFrame:
    """Read a CSV written by ResultWriter, skipping the metadata line."""
    return pd.read_csv(path, comment='#')


def read_csv_metadata(path: str) -> Dict[str, object]:
    with open(path, 'r') as f:
        first = f.readline()
    if not first.startswith(METADATA_PREFIX):
        raise ValueError(f"{path} has no metadata line")
    return json.loads(first[len(METADATA_PREFIX):])


class ResultWriter:
    """
    Writes the files of one run into a directory and keeps the manifest.

    Every file carries the same metadata block: artifact version, command,
    master seed and the fully resolved config.
    """

    def __init__(self, out_dir: str, metadata: Dict[str, object]):
        self.out_dir = out_dir
        self.metadata = {'artifact_version': ARTIFACT_VERSION, **to_jsonable(metadata)}
        self.files: List[Dict[str, str]] = []
        os.makedirs(out_dir, exist_ok=True)

    def _path(self, filename: str) -> str:
        return os.path.join(self.out_dir, filename)

    def _register(self, filename: str, kind: str):
        self.files = [f for f in self.files if f['name'] != filename]
        self.files.append({'name': filename, 'kind': kind, 'sha256': file_sha256(self._path(filename))})

    def write_csv(self, df: pd.DataFrame, filename: str) -> str:
        """
        Write a table as CSV behind a one-line metadata comment

        Args:
            df (pd.DataFrame): Table to write
            filename (str): File name inside the run directory

        Returns:
            str: Path of the written file
        """
        path = self._path(filename)
        try:
            with open(path, 'w', newline='') as f:
                f.write(METADATA_PREFIX + json.dumps(self.metadata, sort_keys=True) + '\n')
                df.to_csv(f, index=False, float_format=NUMBER_FORMAT, lineterminator='\n')
            self._register(filename, 'csv')
            logger.info(f"Wrote {len(df)} rows to {path}")
            return path
        except Exception as e:
            logger.error(f"Error writing {path}: {str(e)}")
            raise

    def write_json(self, payload: Dict[str, object], filename: str) -> str:
        path = self._path(filename)
        try:
            document = {'metadata': self.metadata, **to_jsonable(payload)}
            with open(path, 'w') as f:
                json.dump(document, f, indent=2)
                f.write('\n')
            self._register(filename, 'json')
            logger.info(f"Wrote {path}")
            return path
        except Exception as e:
            logger.error(f"Error writing {path}: {str(e)}")
            raise

    def write_workbook(self, sheets: Dict[str, pd.DataFrame], filename: str, index: bool = True) -> str:
        """Write several tables as sheets of one Excel workbook (openpyxl)."""
        path = self._path(filename)
        try:
            with pd.ExcelWriter(path, engine='openpyxl') as writer:
                for name, df in sheets.items():
                    df.to_excel(writer, sheet_name=name[:31], index=index)
                meta = pd.DataFrame(
                    [(k, json.dumps(v) if isinstance(v, (dict, list)) else v) for k, v in self.metadata.items()],
                    columns=['key', 'value'],
                )
                meta.to_excel(writer, sheet_name='metadata', index=False)
            self._register(filename, 'xlsx')
            logger.info(f"Wrote workbook {path} with sheets {list(sheets)}")
            return path
        except Exception as e:
            logger.error(f"Error writing workbook {path}: {str(e)}")
            raise

    def write_manifest(self) -> str:
        path = self._path(MANIFEST_NAME)
        with open(path, 'w') as f:
            json.dump({'metadata': self.metadata, 'files': self.files}, f, indent=2)
            f.write('\n')
        logger.info(f"Manifest lists {len(self.files)} files in {self.out_dir}")
        return path


def load_manifest(run_dir: str) -> Optional[Dict[str, object]]:
    path = os.path.join(run_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        return None
    with open(path, 'r') as f:
        return json.load(f)
