"""Validated dependency-parse ingestion (CoNLL-U) and locus alignment.

Parses arrive from an external parser as CoNLL-U (10 tab-separated columns,
blank-line sentence separation, ``# sent_id`` comments carrying completion
ids). Reading validates the tree invariants per sentence; bad sentences are
reported and skipped, good ones returned.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

from .materials import Prompt

_PUNCT = set(string.punctuation)


class TreebankError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class ParsedToken:
    index: int                      # 1-based position
    form: str
    pos: str                        # XPOS when present, else UPOS
    head: int                       # 0 = attached to root
    deprel: str
    columns: tuple[str, ...] = ()   # raw CoNLL-U columns, kept for round-trip

    def is_punct(self) -> bool:
        return all(ch in _PUNCT for ch in self.form)


@dataclass(frozen=True)
class DependencyParse:
    sentence_id: str
    tokens: tuple[ParsedToken, ...]
    locus_index: int | None = None       # 1-based, set by align_locus
    post_locus_index: int | None = None
    comments: tuple[str, ...] = field(default=(), compare=False)

    def token(self, index: int) -> ParsedToken:
        return self.tokens[index - 1]

    @property
    def root_index(self) -> int:
        return next(t.index for t in self.tokens if t.head == 0)

    def dependents(self, index: int) -> list[ParsedToken]:
        return [t for t in self.tokens if t.head == index]

    def text(self) -> str:
        return " ".join(t.form for t in self.tokens)

    def to_json_tree(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "locus_index": self.locus_index,
            "post_locus_index": self.post_locus_index,
            "tokens": [
                {"index": t.index, "form": t.form, "pos": t.pos,
                 "head": t.head, "deprel": t.deprel}
                for t in self.tokens
            ],
        }


def _validate_tree(tokens: Sequence[ParsedToken], sid: str) -> None:
    n = len(tokens)
    roots = [t.index for t in tokens if t.head == 0]
    if len(roots) != 1:
        raise TreebankError(f"{sid}: {len(roots)} roots (need exactly 1)")
    for t in tokens:
        if not 0 <= t.head <= n:
            raise TreebankError(f"{sid}: token {t.index} head {t.head} out of range")
        if t.head == t.index:
            raise TreebankError(f"{sid}: token {t.index} is its own head")
    # Cycle check: every token must reach the root following head pointers.
    heads = {t.index: t.head for t in tokens}
    for start in heads:
        seen = set()
        node = start
        while node != 0:
            if node in seen:
                raise TreebankError(f"{sid}: cycle through token {start}")
            seen.add(node)
            node = heads[node]


def _parse_sentence(comments: list[str], lines: list[tuple[int, str]],
                    fallback_id: str) -> DependencyParse:
    sid = fallback_id
    for c in comments:
        body = c[1:].strip()
        if body.startswith("sent_id"):
            _, _, value = body.partition("=")
            sid = value.strip()
    tokens: list[ParsedToken] = []
    for lineno, line in lines:
        cols = line.split("\t")
        if len(cols) != 10:
            raise TreebankError(f"{sid}: line {lineno}: expected 10 columns, got {len(cols)}")
        tid = cols[0]
        if "-" in tid or "." in tid:
            raise TreebankError(f"{sid}: line {lineno}: multiword/empty-node ids not supported")
        try:
            index = int(tid)
            head = int(cols[6])
        except ValueError as exc:
            raise TreebankError(f"{sid}: line {lineno}: {exc}") from None
        if index != len(tokens) + 1:
            raise TreebankError(f"{sid}: line {lineno}: token ids not dense from 1")
        pos = cols[4] if cols[4] != "_" else cols[3]
        tokens.append(ParsedToken(index=index, form=cols[1], pos=pos, head=head,
                                  deprel=cols[7], columns=tuple(cols)))
    if not tokens:
        raise TreebankError(f"{sid}: empty sentence")
    _validate_tree(tokens, sid)
    return DependencyParse(sentence_id=sid, tokens=tuple(tokens), comments=tuple(comments))


def read_conllu(stream: IO[str] | str) -> tuple[list[DependencyParse], list[TreebankError]]:
    """Parse CoNLL-U text or a text stream.

    Returns (parses, errors); a sentence failing validation lands in errors
    (carrying its sent_id) without blocking the rest.
    """
    if isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = stream.read().splitlines()
    parses: list[DependencyParse] = []
    errors: list[TreebankError] = []
    comments: list[str] = []
    body: list[tuple[int, str]] = []
    ordinal = 0

    def flush():
        nonlocal comments, body, ordinal
        if not comments and not body:
            return
        ordinal += 1
        try:
            parses.append(_parse_sentence(comments, body, f"sentence-{ordinal}"))
        except TreebankError as exc:
            errors.append(exc)
        comments, body = [], []

    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            flush()
        elif raw.startswith("#"):
            comments.append(raw)
        else:
            body.append((lineno, raw))
    flush()
    return parses, errors


def write_conllu(parses: Iterable[DependencyParse]) -> str:
    chunks: list[str] = []
    for parse in parses:
        lines = list(parse.comments)
        for t in parse.tokens:
            cols = t.columns or (str(t.index), t.form, "_", "_", t.pos, "_",
                                 str(t.head), t.deprel, "_", "_")
            lines.append("\t".join(cols))
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n" if chunks else ""


def dump_json_trees(parses: Iterable[DependencyParse], fh: IO[str]) -> None:
    for parse in parses:
        fh.write(json.dumps(parse.to_json_tree(), ensure_ascii=False) + "\n")


def _span_words_to_tokens(tokens: Sequence[ParsedToken], words: Sequence[str],
                          sid: str) -> list[tuple[int, int]]:
    """Greedy char-level alignment of whitespace words to parser tokens.

    The parser may split a word ("left," -> "left" + ","), never merge
    across whitespace; matching is case-insensitive.
    """
    spans: list[tuple[int, int]] = []
    ti = 0
    for word in words:
        target = word.lower()
        start = ti
        acc = ""
        while ti < len(tokens) and len(acc) < len(target):
            form = tokens[ti].form.lower()
            if target[len(acc):len(acc) + len(form)] != form:
                break
            acc += form
            ti += 1
        if acc != target:
            raise AlignmentError(
                f"{sid}: cannot align word {word!r} to parse tokens near position {start + 1}")
        spans.append((start, ti))
    return spans


def align_locus(parse: DependencyParse, prompt: Prompt) -> DependencyParse:
    """Locate the locus (and, for cue-final prompts, the post-locus cue)
    among the parse tokens and return the parse with those indices set."""
    from .materials import CUE_FINAL_TYPES  # local to avoid import noise at top

    words = prompt.text.split()
    need = prompt.locus_index + (2 if prompt.prompt_type in CUE_FINAL_TYPES else 1)
    if len(words) < need:
        raise AlignmentError(f"{parse.sentence_id}: prompt shorter than its locus index")
    spans = _span_words_to_tokens(parse.tokens, words[:need], parse.sentence_id)

    def word_token(word_pos: int, word: str) -> int:
        start, end = spans[word_pos]
        stripped = word.strip(string.punctuation).lower()
        for k in range(start, end):
            if parse.tokens[k].form.strip(string.punctuation).lower() == stripped:
                return parse.tokens[k].index
        return parse.tokens[start].index

    locus_tok = word_token(prompt.locus_index, words[prompt.locus_index])
    post_tok = None
    if prompt.prompt_type in CUE_FINAL_TYPES:
        post_tok = word_token(prompt.locus_index + 1, words[prompt.locus_index + 1])
    return replace(parse, locus_index=locus_tok, post_locus_index=post_tok)
