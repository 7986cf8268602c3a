import csv, json, os
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from app.domain.errors import ArtifactWriteError

"""
Artefactos en sistema de archivos.

- Todo se escribe bajo `out_dir/` (se crea si no existe).
- Los floats se serializan con repr, así la misma ejecución produce los mismos bytes.
"""

TRAINING_COLUMNS = (
    "step", "epoch", "seed", "estimator", "layer", "loss", "elbo", "accuracy",
    "grad_var_mu", "grad_var_tau", "cg_iters_mean", "wall_ms",
)


def ensure_dir(out_dir: str) -> str:
    """Crea/retorna el directorio de salida."""

    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise ArtifactWriteError(out_dir, e) from e
    return out_dir


def _cell(value) -> str:
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def to_jsonable(value):
    """Arrays y escalares numpy a tipos JSON; ±inf y nan como texto."""

    if isinstance(value, dict):
        return {(k.value if isinstance(k, Enum) else str(k)): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def write_csv(path: str, columns: Sequence[str], rows: Iterable[dict]) -> str:
    ensure_dir(os.path.dirname(path) or ".")
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row[c]) for c in columns])
    except OSError as e:
        raise ArtifactWriteError(path, e) from e
    return path


def write_json(path: str, payload: dict) -> str:
    ensure_dir(os.path.dirname(path) or ".")
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(to_jsonable(payload), f, indent=2, sort_keys=True, allow_nan=False)
            f.write("\n")
    except (OSError, ValueError) as e:
        raise ArtifactWriteError(path, e) from e
    return path


def write_text(path: str, text: str) -> str:
    ensure_dir(os.path.dirname(path) or ".")
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    except OSError as e:
        raise ArtifactWriteError(path, e) from e
    return path


def read_csv(path: str) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
