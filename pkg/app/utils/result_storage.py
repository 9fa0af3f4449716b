import hashlib
import json
import platform
from datetime import datetime
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
import scipy
from pydantic import BaseModel


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def config_hash(payload: dict) -> str:
    encoded = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(encoded).hexdigest()


class ResultStorageService:
    """Writes CSV and JSON results with a `#` metadata header."""

    def __init__(self, base_output_path: str = "results"):
        self.base_output_path = Path(base_output_path)

    def ensure_output_directory(self) -> Path:
        self.base_output_path.mkdir(parents=True, exist_ok=True)
        return self.base_output_path

    def metadata_lines(self, command: str, seed: Optional[int], workers: int, config: dict) -> List[str]:
        return [
            f"# command: {command}",
            f"# seed: {seed}",
            f"# workers: {workers}",
            f"# config_sha256: {config_hash(config)}",
            f"# versions: python={platform.python_version()} numpy={np.__version__} scipy={scipy.__version__}",
            f"# created: {datetime.now().isoformat(timespec='seconds')}",
        ]

    def write_csv(
        self,
        name: str,
        columns: Sequence[str],
        rows: Iterable[Sequence],
        metadata: Optional[List[str]] = None,
    ) -> Path:
        path = self.ensure_output_directory() / name
        with open(path, "w") as handle:
            for line in metadata or []:
                handle.write(line + "\n")
            handle.write(",".join(columns) + "\n")
            for row in rows:
                handle.write(",".join(format_value(v) for v in row) + "\n")
        return path

    def write_json(self, name: str, payload) -> Path:
        path = self.ensure_output_directory() / name
        if isinstance(payload, BaseModel):
            payload = payload.model_dump(mode="json")
        with open(path, "w") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
        return path

    def read_data_rows(self, name: str) -> List[str]:
        """CSV lines without the metadata header."""
        with open(self.base_output_path / name) as handle:
            return [line.rstrip("\n") for line in handle if not line.startswith("#")]
