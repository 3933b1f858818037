"""
Plain-text configuration dumps.

A configuration is one line of '0'/'1' characters in canonical edge order.
Sample dumps prefix each line with the sweep index.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, List, Tuple

import numpy as np

from src.errors import InvalidParams


def bits_to_string(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits, dtype=bool))


def string_to_bits(text: str) -> np.ndarray:
    text = text.strip()
    if any(ch not in "01" for ch in text):
        raise InvalidParams(f"configuration string must contain only 0/1, got {text[:20]!r}")
    return np.fromiter((ch == "1" for ch in text), dtype=bool, count=len(text))


def write_sample_dump(path: Path | str, samples: Iterable[Tuple[int, np.ndarray]]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for sweep, bits in samples:
            fh.write(f"{sweep} {bits_to_string(bits)}\n")
            count += 1
    return count


def read_sample_dump(path: Path | str) -> List[Tuple[int, np.ndarray]]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        sweep, bits = line.split()
        out.append((int(sweep), string_to_bits(bits)))
    return out
