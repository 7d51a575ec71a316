# Reporting/writers.py

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


def _atomic_write_text(path: Path, text: str) -> Path:
    """Write to a sibling temporary file, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _to_builtin(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(payload: Any, path: Path) -> Path:
    """Sorted, indented JSON; non-finite floats become null."""
    text = json.dumps(_to_builtin(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
    _atomic_write_text(path, text)
    logger.info(f"JSON written | path={path}")
    return Path(path)


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    """CSV with header, no index, 17 significant digits."""
    text = df.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    _atomic_write_text(path, text)
    logger.info(f"CSV written | path={path} | n_rows={len(df)}")
    return Path(path)
