"""Counter-based random streams keyed by value.

Every random draw in the package is addressed by ``(master_seed, context,
theta_index, replicate_index)``.  The first three select a Philox key; the
replicate index selects a disjoint block of the Philox counter.  Any worker
can therefore regenerate replicate ``r`` of any stream without touching the
others, and results never depend on how work is split between processes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import InputError, LengthMismatch

_MASK64 = (1 << 64) - 1
_WORDS_PER_BLOCK = 4  # Philox4x64 emits four uint64 per counter step


def context_id(context) -> int:
    """Stable 63-bit id for a context label (ints pass through)."""
    if isinstance(context, (int, np.integer)):
        return int(context) & (_MASK64 >> 1)
    digest = hashlib.blake2b(str(context).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def philox_key(master_seed: int, context, theta_index: int = 0) -> np.ndarray:
    ss = np.random.SeedSequence(
        entropy=int(master_seed) & _MASK64,
        spawn_key=(context_id(context), int(theta_index)),
    )
    return ss.generate_state(2, dtype=np.uint64)


@dataclass(frozen=True)
class RngKey:
    master_seed: int
    context: str | int = "default"
    theta_index: int = 0
    replicate_index: int = 0

    def stream(self, theta_index=None, replicate_index=None) -> RngKey:
        return RngKey(
            self.master_seed,
            self.context,
            self.theta_index if theta_index is None else int(theta_index),
            self.replicate_index if replicate_index is None else int(replicate_index),
        )

    def child(self, context) -> RngKey:
        """Derive an independent context nested under this one."""
        return RngKey(self.master_seed, f"{self.context}/{context}", self.theta_index, self.replicate_index)

    def generator(self) -> np.random.Generator:
        """A fresh Generator owning this key's replicate block."""
        bitgen = np.random.Philox(
            key=philox_key(self.master_seed, self.context, self.theta_index),
            counter=np.array([0, 0, 0, self.replicate_index], dtype=np.uint64),
        )
        return np.random.Generator(bitgen)


def raw_words(key: RngKey, start: int, count: int, words: int) -> np.ndarray:
    """``count`` rows of ``words`` uint64 values for replicates ``start .. start+count-1``.

    Row ``r`` always comes from the same counter range, so slicing the
    replicate axis differently yields identical rows.
    """
    blocks = -(-words // _WORDS_PER_BLOCK)
    bitgen = np.random.Philox(key=philox_key(key.master_seed, key.context, key.theta_index))
    if start:
        bitgen.advance(start * blocks)
    out = bitgen.random_raw(count * blocks * _WORDS_PER_BLOCK)
    return out.reshape(count, blocks * _WORDS_PER_BLOCK)[:, :words]


def sign_matrix(n: int, key: RngKey, start: int, count: int) -> np.ndarray:
    """Rows of independent fair ±1 signs as a ``(count, n)`` float array."""
    words = raw_words(key, start, count, -(-n // 64))
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")[:, :n]
    return 1.0 - 2.0 * bits


def uniform_matrix(width: int, key: RngKey, start: int, count: int) -> np.ndarray:
    """Rows of U[0, 1) doubles (53-bit) as a ``(count, width)`` array."""
    words = raw_words(key, start, count, width)
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True, eq=False)
class SignPattern:
    """An element of the sign-flip group: a vector of ±1."""

    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signs)
        if s.ndim != 1 or len(s) == 0 or not np.all((s == 1) | (s == -1)):
            raise InputError("sign pattern entries must be exactly +1 or -1")
        s = s.astype(np.int8)
        s.setflags(write=False)
        object.__setattr__(self, "signs", s)

    @classmethod
    def identity(cls, n: int) -> SignPattern:
        return cls(np.ones(n, dtype=np.int8))

    def __len__(self):
        return len(self.signs)

    def compose(self, other: SignPattern) -> SignPattern:
        if len(other) != len(self):
            raise LengthMismatch("sign patterns differ in length")
        return SignPattern(self.signs * other.signs)

    __mul__ = compose

    def __eq__(self, other):
        if not isinstance(other, SignPattern):
            return NotImplemented
        return np.array_equal(self.signs, other.signs)

    __hash__ = None


def sample_sign_pattern(n: int, key: RngKey) -> SignPattern:
    if n < 1:
        raise InputError("n must be >= 1")
    row = sign_matrix(n, key, key.replicate_index, 1)[0]
    return SignPattern(row.astype(np.int8))
