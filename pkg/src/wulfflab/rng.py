"""Counter-based random streams.

Every stochastic routine in the package draws from an RngStream, a thin
wrapper around numpy's Philox bit generator.  Philox is counter-based, so a
stream is fully identified by (seed, stream_id, counter): the same triple
reproduces the same draws on every platform, and independent streams never
share state.  Stream ids are strings hashed into the Philox key, which lets
experiment presets name their stages ("burnin", "eta=0.25", ...) without
bookkeeping integer offsets.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox


def _stream_key(stream_id: str) -> int:
    digest = hashlib.sha256(stream_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class RngStream:
    """Named, restartable random stream: (seed, stream, counter) -> draws."""

    seed: int
    stream: str = "main"
    counter: int = 0

    def generator(self) -> Generator:
        bitgen = Philox(key=(self.seed & (2**64 - 1), _stream_key(self.stream)))
        if self.counter:
            bitgen = bitgen.advance(self.counter)
        return Generator(bitgen)

    def child(self, name: str) -> "RngStream":
        """Derive an independent stream, e.g. per chain or per stage."""
        return RngStream(self.seed, f"{self.stream}/{name}", 0)

    def advanced(self, counter: int) -> "RngStream":
        return RngStream(self.seed, self.stream, self.counter + counter)


@dataclass
class StreamCursor:
    """Mutable cursor over an RngStream that tracks how much was consumed.

    Samplers pull random arrays chunk by chunk; the cursor advances the
    Philox counter by a fixed stride per chunk so that interrupted and
    resumed runs see identical randomness.
    """

    stream: RngStream
    stride: int = 1 << 20
    _chunks: int = field(default=0, init=False)

    def next_generator(self) -> Generator:
        g = self.stream.advanced(self._chunks * self.stride).generator()
        self._chunks += 1
        return g
