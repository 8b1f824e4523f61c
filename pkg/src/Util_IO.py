import os
import csv
import json
import numpy as np
from typing import Dict, Any, List, Sequence

import Util_Config as config


def _to_plain(data: Any) -> Any:
    """Convert numpy values nested in data into plain Python types for JSON."""
    if isinstance(data, dict):
        return {str(k): _to_plain(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_to_plain(v) for v in data]
    if isinstance(data, np.ndarray):
        return _to_plain(data.tolist())
    if isinstance(data, (np.bool_, bool)):
        return bool(data)
    if isinstance(data, (np.integer,)):
        return int(data)
    if isinstance(data, (np.floating, float)):
        return float(data)
    if isinstance(data, complex):
        return {"re": float(data.real), "im": float(data.imag)}
    if isinstance(data, np.complexfloating):
        return {"re": float(data.real), "im": float(data.imag)}
    return data


def _ensure_parent(filename: str):
    parent = os.path.dirname(filename)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _save_json(data: Any, filename: str):
    _ensure_parent(filename)
    with open(filename, "w", encoding="utf-8") as f:
        json.dump(_to_plain(data), f, indent=4, ensure_ascii=False)
        f.write("\n")
    print(f"💾 Saved {os.path.basename(filename)} to {os.path.dirname(filename) or '.'}")



def format_float(x: float) -> str:
    return format(float(x), config.CSV_FLOAT_FORMAT)


def _save_csv(header: Sequence[str], rows: Sequence[Sequence[float]], filename: str):
    _ensure_parent(filename)
    with open(filename, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_float(x) for x in row])
    print(f"💾 Saved {os.path.basename(filename)} to {os.path.dirname(filename) or '.'} ({len(rows)} rows)")


def load_json(filename: str) -> Dict[str, Any]:
    with open(filename, "r", encoding="utf-8") as f:
        data = json.load(f)
    print(f"📂 Loaded {os.path.basename(filename)}")
    return data


def load_csv_rows(filename: str) -> List[Dict[str, float]]:
    with open(filename, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        rows = [{k: float(v) for k, v in row.items()} for row in reader]
    print(f"📂 Loaded {len(rows)} rows from {os.path.basename(filename)}")
    return rows
