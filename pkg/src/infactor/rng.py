"""Counter-based seedable random streams.

All stochastic code in the package draws from an :class:`RngStream`.  A
stream is identified by a master seed and a stream path (tuple of
non-negative integers); the same (seed, path, call sequence) reproduces
identical draws bit-exactly, independent of scheduling.  Substreams are
derived deterministically, so replicates and chains can run in any order
or in parallel without affecting results.
"""

from __future__ import annotations

from typing import Any

import numpy as np

__all__ = ["RngStream"]


class RngStream:
    """A seedable counter-based generator (Philox) with derived substreams.

    Parameters
    ----------
    seed : int
        Master seed, non-negative.
    stream_id : int or tuple of int, optional
        Stream path.  An int ``k`` is shorthand for the path ``(k,)``;
        the default is the root path ``()``.
    """

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int | tuple[int, ...] = ()):
        if not isinstance(seed, (int, np.integer)) or seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if isinstance(stream_id, (int, np.integer)):
            stream_id = (int(stream_id),)
        stream_id = tuple(int(s) for s in stream_id)
        if any(s < 0 for s in stream_id):
            raise ValueError("stream_id components must be non-negative")
        self.seed = int(seed)
        self.stream_id = stream_id
        self._gen: np.random.Generator | None = None

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def substream(self, *path: int) -> "RngStream":
        """Return a fresh stream with `path` appended to this stream's id."""
        return RngStream(self.seed, self.stream_id + tuple(path))

    # -- checkpoint support -------------------------------------------------

    def state_dict(self) -> dict[str, Any]:
        """Serializable snapshot of the generator position."""
        st = self.generator.bit_generator.state
        return {
            "seed": self.seed,
            "stream_id": list(self.stream_id),
            "counter": [int(x) for x in st["state"]["counter"]],
            "key": [int(x) for x in st["state"]["key"]],
            "buffer": [int(x) for x in st["buffer"]],
            "buffer_pos": int(st["buffer_pos"]),
            "has_uint32": int(st["has_uint32"]),
            "uinteger": int(st["uinteger"]),
        }

    @classmethod
    def from_state_dict(cls, d: dict[str, Any]) -> "RngStream":
        rng = cls(int(d["seed"]), tuple(int(x) for x in d["stream_id"]))
        bg = rng.generator.bit_generator
        st = bg.state
        st["state"]["counter"] = np.array(d["counter"], dtype=np.uint64)
        st["state"]["key"] = np.array(d["key"], dtype=np.uint64)
        st["buffer"] = np.array(d["buffer"], dtype=np.uint64)
        st["buffer_pos"] = int(d["buffer_pos"])
        st["has_uint32"] = int(d["has_uint32"])
        st["uinteger"] = int(d["uinteger"])
        bg.state = st
        return rng

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
