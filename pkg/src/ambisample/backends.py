"""LM backend contract and the built-in n-gram backend.

A backend supplies next-token distributions conditioned on a token-id
context, scores sequences (surprisal in bits), and tokenizes text. The
built-in backend is an interpolated absolute-discounting n-gram model,
small enough to cross-check against direct counting.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .vocab import WORD_LEVEL, TokenDistribution, Vocabulary

LN2 = math.log(2.0)


class BackendError(RuntimeError):
    pass


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    vocabulary: Vocabulary
    max_context: int


@dataclass(frozen=True)
class TokenizedText:
    """Token ids plus, for each whitespace word, its [start, end) id span."""

    token_ids: tuple[int, ...]
    word_spans: tuple[tuple[int, int], ...]


class Backend(ABC):
    """Next-token distribution provider; see BackendDescriptor for metadata."""

    descriptor: BackendDescriptor

    @property
    def vocabulary(self) -> Vocabulary:
        return self.descriptor.vocabulary

    @abstractmethod
    def next_distribution(self, context: Sequence[int]) -> TokenDistribution:
        """Distribution over the next token given the full context (non-empty)."""

    @abstractmethod
    def tokenize(self, text: str) -> TokenizedText:
        ...

    def score_sequence(self, tokens: Sequence[int]) -> np.ndarray:
        """Per-token surprisal in bits; entry i-1 scores tokens[i] given tokens[:i]."""
        if len(tokens) < 2:
            raise BackendError("score_sequence needs at least 2 tokens")
        out = np.empty(len(tokens) - 1, dtype=np.float64)
        for i in range(1, len(tokens)):
            dist = self.next_distribution(tokens[:i])
            out[i - 1] = -dist.logprobs[tokens[i]] / LN2
        return out

    def word_surprisal(self, sentence: str, word_index: int) -> float:
        """Total surprisal (bits) of the tokens spanning one whitespace word."""
        tokenized = self.tokenize(sentence)
        if not 0 <= word_index < len(tokenized.word_spans):
            raise BackendError(f"word index {word_index} out of range for {sentence!r}")
        start, end = tokenized.word_spans[word_index]
        if start == 0:
            raise BackendError("cannot score the sentence-initial token: no context")
        scores = self.score_sequence(tokenized.token_ids)
        return float(scores[start - 1:end - 1].sum())


def penalize_token(dist: TokenDistribution, token: int, factor: float) -> TokenDistribution:
    """Divide one token's probability by ``factor`` and renormalize."""
    if factor < 1:
        raise ValueError("penalty factor must be >= 1")
    if factor == 1 or dist.logprobs[token] == -np.inf:
        return dist
    lp = dist.logprobs.copy()
    lp[token] -= math.log(factor)
    return TokenDistribution.from_unnormalized_logprobs(lp)


UNK_TOKEN = "<unk>"
EOS_TOKEN = "</s>"


class NgramBackend(Backend):
    """Interpolated absolute-discounting n-gram LM over whitespace tokens.

    With discount 0 this reduces to maximum-likelihood conditional
    frequencies on seen contexts (unseen contexts back off to the longest
    seen suffix). With discount > 0 every token keeps nonzero probability
    in every context through interpolation down to the uniform distribution.
    Immutable after training; safe for concurrent reads.
    """

    def __init__(self, vocabulary: Vocabulary, order: int, discount: float,
                 counts: list[dict[tuple[int, ...], Counter]], name: str = "ngram"):
        self.order = order
        self.discount = discount
        # counts[k] maps a length-k context to a Counter of continuations.
        self._counts = counts
        self._context_totals = [
            {ctx: sum(c.values()) for ctx, c in level.items()} for level in counts
        ]
        self._cache: dict[tuple[int, ...], TokenDistribution] = {}
        self.descriptor = BackendDescriptor(
            name=f"{name}(order={order},d={discount})",
            vocabulary=vocabulary,
            max_context=1_000_000,
        )

    def tokenize(self, text: str) -> TokenizedText:
        words = text.split()
        if not words:
            raise BackendError("cannot tokenize empty text")
        ids = tuple(self.vocabulary.id_of(w) for w in words)
        spans = tuple((i, i + 1) for i in range(len(words)))
        return TokenizedText(ids, spans)

    def _prob_vector(self, context_key: tuple[int, ...]) -> np.ndarray:
        vsize = len(self.vocabulary)
        probs = np.full(vsize, 1.0 / vsize)  # interpolation floor: uniform
        # Build up from the unigram level to the longest usable context.
        for k in range(0, self.order):
            if k > len(context_key):
                break
            ctx = context_key[len(context_key) - k:] if k else ()
            level = self._counts[k]
            if ctx not in level:
                continue
            total = self._context_totals[k][ctx]
            counter = level[ctx]
            d = self.discount
            if d == 0.0:
                higher = np.zeros(vsize)
                for tok, c in counter.items():
                    higher[tok] = c / total
            else:
                reserved = d * len(counter) / total
                higher = probs * reserved
                for tok, c in counter.items():
                    higher[tok] += (c - d) / total
            probs = higher
        return probs

    def next_distribution(self, context: Sequence[int]) -> TokenDistribution:
        if len(context) == 0:
            raise BackendError("context must be non-empty")
        key = tuple(context[-(self.order - 1):]) if self.order > 1 else ()
        cached = self._cache.get(key)
        if cached is None:
            probs = self._prob_vector(key)
            with np.errstate(divide="ignore"):
                cached = TokenDistribution(np.log(probs) - math.log(probs.sum()))
            self._cache[key] = cached
        return cached


def train_ngram(corpus: Iterable[str], order: int = 3, discount: float = 0.75,
                name: str = "ngram") -> NgramBackend:
    """Train the built-in backend on an iterable of lines (one sequence each).

    N-gram counts never cross line boundaries. The vocabulary is the sorted
    set of corpus tokens plus reserved ``<unk>`` and ``</s>`` entries.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not 0 <= discount < 1:
        raise ValueError("discount must be in [0, 1)")
    lines = [line.split() for line in corpus]
    lines = [words for words in lines if words]
    if not lines:
        raise ValueError("empty training corpus")

    types = sorted({w for words in lines for w in words} | {UNK_TOKEN, EOS_TOKEN})
    vocabulary = Vocabulary(
        tokens=tuple(types),
        eos_id=types.index(EOS_TOKEN),
        unk_id=types.index(UNK_TOKEN),
        tokenizer_kind=WORD_LEVEL,
    )
    counts: list[dict[tuple[int, ...], Counter]] = [{} for _ in range(order)]
    for words in lines:
        ids = [vocabulary.id_of(w) for w in words]
        for i, tok in enumerate(ids):
            for k in range(0, order):
                if k > i:
                    break
                ctx = tuple(ids[i - k:i])
                counts[k].setdefault(ctx, Counter())[tok] += 1
    return NgramBackend(vocabulary, order, discount, counts, name=name)


class TableBackend(Backend):
    """Hand-built word-level backend: explicit context-suffix -> distribution.

    Lookup takes the longest matching context suffix, falling back to a
    default distribution. Intended for analytically tractable toy grammars.
    """

    def __init__(self, vocabulary: Vocabulary,
                 table: dict[tuple[str, ...], dict[str, float]],
                 default: dict[str, float] | None = None,
                 name: str = "table"):
        self._rules: dict[tuple[int, ...], TokenDistribution] = {}
        self.descriptor = BackendDescriptor(name, vocabulary, max_context=1_000_000)
        for ctx_words, nexts in table.items():
            key = tuple(vocabulary.id_of(w) for w in ctx_words)
            self._rules[key] = self._to_dist(nexts)
        self._max_key = max((len(k) for k in self._rules), default=0)
        if default is not None:
            self._default = self._to_dist(default)
        else:
            self._default = TokenDistribution.from_probs(np.ones(len(vocabulary)))

    def _to_dist(self, nexts: dict[str, float]) -> TokenDistribution:
        probs = np.zeros(len(self.vocabulary))
        for w, p in nexts.items():
            probs[self.vocabulary.id_of(w)] = p
        return TokenDistribution.from_probs(probs)

    def tokenize(self, text: str) -> TokenizedText:
        words = text.split()
        if not words:
            raise BackendError("cannot tokenize empty text")
        ids = tuple(self.vocabulary.id_of(w) for w in words)
        return TokenizedText(ids, tuple((i, i + 1) for i in range(len(words))))

    def next_distribution(self, context: Sequence[int]) -> TokenDistribution:
        if len(context) == 0:
            raise BackendError("context must be non-empty")
        for k in range(min(self._max_key, len(context)), 0, -1):
            rule = self._rules.get(tuple(context[-k:]))
            if rule is not None:
                return rule
        return self._rules.get((), self._default)
