"""Operation counters shared by backends, kernels and the roofline model."""
from __future__ import annotations

import json
import threading
from collections import Counter

COUNTER_NAMES = (
    "ct_add",
    "pt_add",
    "ct_mul",
    "pt_mul",
    "rotate",
    "rescale",
    "mod_down",
    "bootstrap",
)


class OpTrace:
    """Thread-safe, monotone counters of homomorphic operations.

    Every record also keeps the level the operation ran at, which is what the
    roofline cost model needs. ``cost_model`` is an optional callable
    ``(op, level) -> (int_ops, bytes)`` used to keep running modeled totals.
    """

    def __init__(self, cost_model=None):
        self._lock = threading.Lock()
        self.cost_model = cost_model
        self.counts = Counter({name: 0 for name in COUNTER_NAMES})
        self.by_level = Counter()
        self.modeled_int_ops = 0
        self.modeled_bytes = 0

    def record(self, op: str, level: int, times: int = 1) -> None:
        if op not in self.counts:
            raise KeyError(f"unknown counter {op!r}")
        cost = self.cost_model(op, level) if self.cost_model else (0, 0)
        with self._lock:
            self.counts[op] += times
            self.by_level[(op, level)] += times
            self.modeled_int_ops += cost[0] * times
            self.modeled_bytes += cost[1] * times

    def reset(self) -> None:
        with self._lock:
            for name in COUNTER_NAMES:
                self.counts[name] = 0
            self.by_level.clear()
            self.modeled_int_ops = 0
            self.modeled_bytes = 0

    def __getitem__(self, op: str) -> int:
        return self.counts[op]

    @property
    def total(self) -> int:
        return sum(self.counts[name] for name in COUNTER_NAMES)

    def snapshot(self) -> dict:
        with self._lock:
            return {name: self.counts[name] for name in COUNTER_NAMES}

    def to_dict(self) -> dict:
        with self._lock:
            levels = sorted(self.by_level.items())
            return {
                "counts": {name: self.counts[name] for name in COUNTER_NAMES},
                "modeled_int_ops": self.modeled_int_ops,
                "modeled_bytes": self.modeled_bytes,
                "by_level": [{"op": op, "level": lvl, "count": n} for (op, lvl), n in levels],
            }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "OpTrace":
        out = cls()
        for name, value in doc.get("counts", {}).items():
            if name not in out.counts:
                raise KeyError(f"unknown counter {name!r}")
            out.counts[name] = int(value)
        for row in doc.get("by_level", []):
            out.by_level[(row["op"], int(row["level"]))] = int(row["count"])
        out.modeled_int_ops = int(doc.get("modeled_int_ops", 0))
        out.modeled_bytes = int(doc.get("modeled_bytes", 0))
        return out

    def __repr__(self):
        nonzero = {k: v for k, v in self.snapshot().items() if v}
        return f"OpTrace({nonzero})"
