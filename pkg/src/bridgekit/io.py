"""File formats: float32 WAV, LF-terminated CSV, key-sorted JSON."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
from scipy.io import wavfile

__all__ = ["write_wav", "read_wav", "write_text", "dumps_json", "write_json"]


def write_wav(path: str | Path, x, sample_rate: int) -> None:
    wavfile.write(str(path), int(sample_rate), np.asarray(x, dtype="<f4"))


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    rate, data = wavfile.read(str(path))
    return np.asarray(data, dtype=float), int(rate)


def write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _default(obj: Any):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, default=_default) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    write_text(path, dumps_json(obj))
