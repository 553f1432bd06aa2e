"""Experiment materials: ambiguous/unambiguous sentence pairs and the four
prompt types derived from each pair.

Materials live in a UTF-8 TSV with header
``id ambiguity reading ambiguous_sentence unambiguous_sentence locus
pre_locus_cue post_locus_cue``. Loading validates every row; loading then
re-serializing is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

MATERIALS_COLUMNS = (
    "id", "ambiguity", "reading", "ambiguous_sentence", "unambiguous_sentence",
    "locus", "pre_locus_cue", "post_locus_cue",
)


class AmbiguityType(str, Enum):
    NPS = "NPS"
    NPZ = "NPZ"
    NOUN_VERB = "NounVerb"


class Reading(str, Enum):
    NONE = ""
    NOUN = "Noun"
    VERB = "Verb"


class PromptType(str, Enum):
    NO_CUE = "NoCue"
    POST_LOCUS_CUE = "PostLocusCue"
    PRE_LOCUS_CUE = "PreLocusCue"
    PRE_POST_LOCUS_CUES = "PrePostLocusCues"


# Prompt types whose text ends at the post-locus cue rather than the locus.
CUE_FINAL_TYPES = frozenset({PromptType.POST_LOCUS_CUE, PromptType.PRE_POST_LOCUS_CUES})


class MaterialsError(ValueError):
    pass


def _single_occurrence(words: Sequence[str], target: str, what: str, sentence: str) -> int:
    hits = [i for i, w in enumerate(words) if w == target]
    if len(hits) != 1:
        raise MaterialsError(
            f"{what} {target!r} occurs {len(hits)} times in {sentence!r} (need exactly 1)")
    return hits[0]


@dataclass(frozen=True)
class AmbiguityItem:
    id: str
    ambiguity: AmbiguityType
    reading: Reading
    base_sentence_ambiguous: str
    base_sentence_unambiguous: str
    locus: str
    pre_locus_cue: str | None
    post_locus_cue: str

    def validate(self) -> None:
        if self.ambiguity is AmbiguityType.NOUN_VERB:
            if self.reading is Reading.NONE:
                raise MaterialsError(f"{self.id}: Noun/Verb item needs a reading")
        elif self.reading is not Reading.NONE:
            raise MaterialsError(f"{self.id}: reading only applies to Noun/Verb items")

        words_a = self.base_sentence_ambiguous.split()
        words_u = self.base_sentence_unambiguous.split()
        i_a = _single_occurrence(words_a, self.locus, "locus", self.base_sentence_ambiguous)
        i_u = _single_occurrence(words_u, self.locus, "locus", self.base_sentence_unambiguous)
        if i_a + 1 >= len(words_a) or words_a[i_a + 1] != self.post_locus_cue:
            raise MaterialsError(
                f"{self.id}: post-locus cue {self.post_locus_cue!r} does not "
                f"immediately follow locus in {self.base_sentence_ambiguous!r}")
        self._validate_cue_edit(words_a, words_u, i_a)
        if i_u + 1 >= len(words_u) or words_u[i_u + 1] != self.post_locus_cue:
            raise MaterialsError(
                f"{self.id}: post-locus cue missing after locus in unambiguous sentence")

    def _validate_cue_edit(self, words_a: list[str], words_u: list[str], locus_a: int) -> None:
        """The unambiguous sentence must differ from the ambiguous one by a
        single pre-locus edit: an inserted cue word, a cue glued onto the
        preceding word (the NP/Z comma), or a substituted determiner."""
        cue = self.pre_locus_cue
        if cue is None:
            if words_a != words_u:
                raise MaterialsError(f"{self.id}: sentences differ but no pre-locus cue given")
            return
        if len(words_u) == len(words_a) + 1:
            j = next((k for k, (a, u) in enumerate(zip(words_a, words_u)) if a != u),
                     len(words_a))
            ok = words_u[j] == cue and list(words_u[j + 1:]) == list(words_a[j:])
        elif len(words_u) == len(words_a):
            diffs = [k for k, (a, u) in enumerate(zip(words_a, words_u)) if a != u]
            ok = (len(diffs) == 1 and
                  (words_u[diffs[0]] == cue or words_u[diffs[0]] == words_a[diffs[0]] + cue))
            j = diffs[0] if len(diffs) == 1 else len(words_a)
        else:
            ok, j = False, len(words_a)
        if not ok:
            raise MaterialsError(
                f"{self.id}: unambiguous sentence is not the ambiguous one plus "
                f"pre-locus cue {cue!r}")
        if j > locus_a:
            raise MaterialsError(f"{self.id}: cue edit at word {j} is not pre-locus")


@dataclass(frozen=True)
class Prompt:
    item_id: str
    prompt_type: PromptType
    text: str
    locus_index: int
    expected_interpretation: str | None

    @property
    def prompt_id(self) -> str:
        return f"{self.item_id}:{self.prompt_type.value}"

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "prompt_type": self.prompt_type.value,
            "text": self.text,
            "locus_index": self.locus_index,
            "expected_interpretation": self.expected_interpretation,
        }

    @staticmethod
    def from_json(obj: Mapping) -> "Prompt":
        return Prompt(
            item_id=obj["item_id"],
            prompt_type=PromptType(obj["prompt_type"]),
            text=obj["text"],
            locus_index=int(obj["locus_index"]),
            expected_interpretation=obj.get("expected_interpretation"),
        )


def _expected_label(item: AmbiguityItem) -> str:
    if item.ambiguity is AmbiguityType.NPS:
        return "S"
    if item.ambiguity is AmbiguityType.NPZ:
        return "Z"
    return item.reading.value


def derive_prompts(item: AmbiguityItem) -> list[Prompt]:
    """The four prompt variants of one item, in PromptType declaration order."""
    item.validate()
    words_a = item.base_sentence_ambiguous.split()
    words_u = item.base_sentence_unambiguous.split()
    i_a = words_a.index(item.locus)
    i_u = words_u.index(item.locus)
    expected = _expected_label(item)

    def mk(prompt_type, words, locus_idx, end, cued):
        return Prompt(
            item_id=item.id,
            prompt_type=prompt_type,
            text=" ".join(words[:end]),
            locus_index=locus_idx,
            expected_interpretation=expected if cued else None,
        )

    return [
        mk(PromptType.NO_CUE, words_a, i_a, i_a + 1, False),
        mk(PromptType.POST_LOCUS_CUE, words_a, i_a, i_a + 2, True),
        mk(PromptType.PRE_LOCUS_CUE, words_u, i_u, i_u + 1, True),
        mk(PromptType.PRE_POST_LOCUS_CUES, words_u, i_u, i_u + 2, True),
    ]


def derive_prompt_set(items: Sequence[AmbiguityItem]) -> list[Prompt]:
    """All prompts for a list of items.

    Noun/Verb NoCue prompts are shared between the Noun- and Verb-reading
    items of one locus whenever their ambiguous prefixes coincide, so those
    duplicates are emitted once (first item wins).
    """
    out: list[Prompt] = []
    seen_nocue: set[str] = set()
    for item in items:
        for prompt in derive_prompts(item):
            if (item.ambiguity is AmbiguityType.NOUN_VERB
                    and prompt.prompt_type is PromptType.NO_CUE):
                if prompt.text in seen_nocue:
                    continue
                seen_nocue.add(prompt.text)
            out.append(prompt)
    return out


def load_materials(path: str | Path, ambiguity: AmbiguityType | None = None) -> list[AmbiguityItem]:
    """Load and validate a materials TSV, optionally filtering to one type.

    All offending rows are reported together, with their 1-based line numbers.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or tuple(lines[0].split("\t")) != MATERIALS_COLUMNS:
        raise MaterialsError(f"{path}: missing or wrong header; expected {MATERIALS_COLUMNS}")
    items: list[AmbiguityItem] = []
    problems: list[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != len(MATERIALS_COLUMNS):
            problems.append(f"row {lineno}: expected {len(MATERIALS_COLUMNS)} columns, "
                            f"got {len(cols)}")
            continue
        row = dict(zip(MATERIALS_COLUMNS, cols))
        try:
            item = AmbiguityItem(
                id=row["id"],
                ambiguity=AmbiguityType(row["ambiguity"]),
                reading=Reading(row["reading"]),
                base_sentence_ambiguous=row["ambiguous_sentence"],
                base_sentence_unambiguous=row["unambiguous_sentence"],
                locus=row["locus"],
                pre_locus_cue=row["pre_locus_cue"] or None,
                post_locus_cue=row["post_locus_cue"],
            )
            item.validate()
        except (MaterialsError, ValueError) as exc:
            problems.append(f"row {lineno}: {exc}")
            continue
        if ambiguity is None or item.ambiguity is ambiguity:
            items.append(item)
    if problems:
        raise MaterialsError(f"{path}: " + "; ".join(problems))
    return items


def serialize_materials(items: Iterable[AmbiguityItem]) -> str:
    lines = ["\t".join(MATERIALS_COLUMNS)]
    for it in items:
        lines.append("\t".join([
            it.id, it.ambiguity.value, it.reading.value,
            it.base_sentence_ambiguous, it.base_sentence_unambiguous,
            it.locus, it.pre_locus_cue or "", it.post_locus_cue,
        ]))
    return "\n".join(lines) + "\n"


def bundled_materials_path(ambiguity: AmbiguityType) -> Path:
    name = {AmbiguityType.NPS: "nps.tsv", AmbiguityType.NPZ: "npz.tsv",
            AmbiguityType.NOUN_VERB: "nounverb.tsv"}[ambiguity]
    return Path(resources.files("ambisample").joinpath("data", "materials", name))


def apply_item_filter(items: Sequence[AmbiguityItem], gold_parses: Mapping[str, tuple],
                      config=None) -> list[AmbiguityItem]:
    """Drop Noun/Verb items whose base sentences the tagger misreads.

    ``gold_parses`` maps item id to a (ambiguous, unambiguous) pair of
    DependencyParse objects from the parser under test. An item survives only
    if the locus PoS classifies to the item's reading in both parses.
    NPS/NPZ items pass through untouched.
    """
    from .classify import ClassifierConfig, classify_noun_verb

    config = config or ClassifierConfig()
    kept: list[AmbiguityItem] = []
    for item in items:
        if item.ambiguity is not AmbiguityType.NOUN_VERB:
            kept.append(item)
            continue
        if item.id not in gold_parses:
            raise MaterialsError(f"no base-sentence parses for item {item.id}")
        pair = gold_parses[item.id]
        ok = True
        for parse in pair:
            located = _locate_locus(parse, item.locus)
            if located is None:
                ok = False
                break
            if classify_noun_verb(parse, config, locus_index=located).value != item.reading.value:
                ok = False
                break
        if ok:
            kept.append(item)
    return kept


def _locate_locus(parse, locus: str) -> int | None:
    hits = [tok.index for tok in parse.tokens if tok.form.lower() == locus.lower()]
    return hits[0] if len(hits) == 1 else None


def write_prompts_jsonl(prompts: Iterable[Prompt], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in prompts:
            fh.write(json.dumps(p.to_json(), ensure_ascii=False) + "\n")


def read_prompts_jsonl(path: str | Path) -> list[Prompt]:
    prompts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                prompts.append(Prompt.from_json(json.loads(line)))
    return prompts
