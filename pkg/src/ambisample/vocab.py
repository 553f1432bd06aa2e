"""Vocabulary and next-token distribution types shared by all LM backends."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

WORD_LEVEL = "WordLevel"
SUBWORD = "Subword"

# Tolerance for "exp(logprobs) sums to 1"; every backend must meet it.
NORMALIZATION_TOL = 1e-6


class VocabularyError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    """An indexed token inventory plus the subword-continuation convention.

    ``continuation_marker`` encodes how to recognize pieces that extend the
    previous word: a plain string (e.g. ``"##"``) marks continuation pieces
    by prefix; a string starting with ``"~"`` (e.g. ``"~Ġ"``) names a
    word-START marker, so continuations are the pieces *lacking* it. Empty
    string means no continuation pieces (required for word-level vocabs).
    """

    tokens: tuple[str, ...]
    eos_id: int
    unk_id: int | None = None
    tokenizer_kind: str = WORD_LEVEL
    continuation_marker: str = ""
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.tokens:
            raise VocabularyError("empty vocabulary")
        if not 0 <= self.eos_id < len(self.tokens):
            raise VocabularyError(f"eos_id {self.eos_id} out of range")
        if self.unk_id is not None and not 0 <= self.unk_id < len(self.tokens):
            raise VocabularyError(f"unk_id {self.unk_id} out of range")
        if self.tokenizer_kind not in (WORD_LEVEL, SUBWORD):
            raise VocabularyError(f"unknown tokenizer kind {self.tokenizer_kind!r}")
        if self.tokenizer_kind == WORD_LEVEL and self.continuation_marker:
            raise VocabularyError("word-level vocabularies cannot have continuation pieces")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})
        if len(self._index) != len(self.tokens):
            raise VocabularyError("duplicate token strings")

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            if self.unk_id is not None:
                return self.unk_id
            raise VocabularyError(f"token {token!r} not in vocabulary and no unk token") from None

    def is_continuation(self, token_id: int) -> bool:
        if not self.continuation_marker:
            return False
        piece = self.tokens[token_id]
        if self.continuation_marker.startswith("~"):
            start_marker = self.continuation_marker[1:]
            return not piece.startswith(start_marker)
        return piece.startswith(self.continuation_marker)

    def piece_text(self, token_id: int) -> str:
        """Surface text of a piece with any continuation/word-start marker stripped."""
        piece = self.tokens[token_id]
        if not self.continuation_marker:
            return piece
        if self.continuation_marker.startswith("~"):
            start_marker = self.continuation_marker[1:]
            return piece[len(start_marker):] if piece.startswith(start_marker) else piece
        if piece.startswith(self.continuation_marker):
            return piece[len(self.continuation_marker):]
        return piece

    def decode_extension(self, token_ids: Sequence[int]) -> str:
        """Render generated ids as text to append directly after a prompt.

        Word-level pieces and word-starting subword pieces are preceded by a
        space; continuation pieces attach to the previous word. The eos token
        renders as nothing.
        """
        out: list[str] = []
        for tid in token_ids:
            if tid == self.eos_id:
                continue
            if self.is_continuation(tid):
                out.append(self.piece_text(tid))
            else:
                out.append(" " + self.piece_text(tid))
        return "".join(out)


@dataclass(frozen=True)
class TokenDistribution:
    """Log-probabilities (natural log) over the whole vocabulary."""

    logprobs: np.ndarray

    def __post_init__(self):
        lp = np.asarray(self.logprobs, dtype=np.float64)
        object.__setattr__(self, "logprobs", lp)
        if lp.ndim != 1:
            raise ValueError("logprobs must be a 1-d vector")
        if np.any(np.isnan(lp)) or np.any(lp == np.inf):
            raise ValueError("logprobs must be finite or -inf")
        total = np.exp(logsumexp(lp))
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"distribution sums to {total!r}, not 1")

    def __len__(self) -> int:
        return len(self.logprobs)

    def probs(self) -> np.ndarray:
        return np.exp(self.logprobs)

    def entropy_bits(self) -> float:
        p = self.probs()
        nz = p > 0
        return float(-(p[nz] * (self.logprobs[nz] / np.log(2.0))).sum())

    @staticmethod
    def from_probs(probs: Sequence[float]) -> "TokenDistribution":
        p = np.asarray(probs, dtype=np.float64)
        if np.any(p < 0):
            raise ValueError("negative probability")
        p = p / p.sum()
        with np.errstate(divide="ignore"):
            return TokenDistribution(np.log(p))

    @staticmethod
    def from_unnormalized_logprobs(logprobs: Sequence[float]) -> "TokenDistribution":
        lp = np.asarray(logprobs, dtype=np.float64)
        return TokenDistribution(lp - logsumexp(lp))
