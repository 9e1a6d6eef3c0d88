"""Certificate container shared by the builder, the oracle and the checkers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class CycleCertificate:
    """floor(k/2) Hamilton cycles as vertex sequences plus, for odd k, a perfect matching.

    Vertices are 0-based point indices. r_index is the edge-process index the
    certificate claims to live in (first r_index edges), r_length its length.
    """
    k: int
    n: int
    cycles: list
    matching: list = field(default_factory=list)
    r_index: Optional[int] = None
    r_length: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def edge_classes(self) -> list:
        out = []
        for seq in self.cycles:
            m = len(seq)
            out.append([(seq[t], seq[(t + 1) % m]) for t in range(m)])
        if self.k % 2:
            out.append([tuple(e) for e in self.matching])
        return out

    def to_json(self) -> dict:
        d = {
            "k": self.k,
            "n": self.n,
            "r_index": self.r_index,
            "r_length": self.r_length,
            "cycles": [[int(v) for v in c] for c in self.cycles],
            "matching": [[int(a), int(b)] for a, b in self.matching],
        }
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "CycleCertificate":
        return cls(
            k=int(obj["k"]),
            n=int(obj["n"]),
            cycles=[list(map(int, c)) for c in obj.get("cycles", [])],
            matching=[(int(a), int(b)) for a, b in obj.get("matching", [])],
            r_index=obj.get("r_index"),
            r_length=obj.get("r_length"),
            meta=obj.get("meta", {}),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "CycleCertificate":
        with open(path) as fh:
            return cls.from_json(json.load(fh))
