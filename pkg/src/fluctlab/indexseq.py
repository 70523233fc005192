"""Strictly increasing sequences of positive integers with generator metadata."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass(frozen=True)
class IndexSequence:
    """Strictly increasing positive integers ``N_1 < N_2 < ...``.

    ``kind`` names the generator (``"Full"``, ``"Squares"``, ...) and ``params``
    echoes its parameters so a sequence can be regenerated from its metadata.
    """

    values: tuple[int, ...]
    kind: str = "Custom"
    params: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if vals and vals[0] < 1:
            raise ValueError(f"index sequence must start at >= 1, got {vals[0]}")
        for a, b in zip(vals, vals[1:]):
            if b <= a:
                raise ValueError(f"index sequence not strictly increasing at {a} -> {b}")

    @classmethod
    def full(cls, n_max: int) -> "IndexSequence":
        return cls(tuple(range(1, n_max + 1)), "Full", {"count": n_max})

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)

    def gaps(self) -> list[int]:
        return [b - a for a, b in zip(self.values, self.values[1:])]

    def to_text(self) -> str:
        """Newline-delimited integers, the on-disk sequence format."""
        return "".join(f"{v}\n" for v in self.values)

    @classmethod
    def from_text(cls, text: str, kind: str = "Custom") -> "IndexSequence":
        vals = [int(line) for line in text.split() if line.strip()]
        return cls(tuple(vals), kind)
