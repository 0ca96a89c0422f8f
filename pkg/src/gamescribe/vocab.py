"""Index vocabularies for entities, attributes, values, words, and writers."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .records import Dataset, UNKNOWN_WRITER

UNK = "<unk>"
SOD = "<SoD>"
EOD = "<EoD>"


@dataclass
class Vocab:
    """Token -> index map with an optional unknown fallback at index 0."""

    tokens: tuple[str, ...]
    has_unk: bool

    def __post_init__(self) -> None:
        self._index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise ValueError("vocabulary has duplicate tokens")
        if self.has_unk and self.tokens[0] != UNK:
            raise ValueError("unk-backed vocabulary must place <unk> at index 0")

    @classmethod
    def build(cls, items: Iterable[str], with_unk: bool, specials: Sequence[str] = ()) -> "Vocab":
        ordered: list[str] = [UNK] if with_unk else []
        for s in specials:
            if s not in ordered:
                ordered.append(s)
        for tok in sorted(set(items)):
            if tok not in ordered:
                ordered.append(tok)
        return cls(tuple(ordered), with_unk)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def index(self, token: str) -> int:
        idx = self._index.get(token)
        if idx is None:
            if self.has_unk:
                return 0
            raise KeyError(f"token {token!r} not in vocabulary")
        return idx

    def token(self, index: int) -> str:
        return self.tokens[index]


@dataclass
class Vocabularies:
    entities: Vocab
    attributes: Vocab
    values: Vocab
    words: Vocab
    writers: Vocab
    sides: Vocab

    def as_dict(self) -> dict:
        return {
            "entities": list(self.entities.tokens),
            "attributes": list(self.attributes.tokens),
            "values": list(self.values.tokens),
            "words": list(self.words.tokens),
            "writers": list(self.writers.tokens),
            "sides": list(self.sides.tokens),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Vocabularies":
        return cls(
            entities=Vocab(tuple(obj["entities"]), True),
            attributes=Vocab(tuple(obj["attributes"]), False),
            values=Vocab(tuple(obj["values"]), True),
            words=Vocab(tuple(obj["words"]), True),
            writers=Vocab(tuple(obj["writers"]), True),
            sides=Vocab(tuple(obj["sides"]), False),
        )


def build_vocabularies(dataset: Dataset, word_min_freq: int = 2) -> Vocabularies:
    """Vocabularies from the training split.

    Words come from training summaries with a minimum-frequency cutoff
    (rarer tokens map to <unk>); <SoD>, <EoD> and "." are always kept.
    Values cover every record value seen in training games.
    """
    entity_ids: set[str] = set()
    attr_ids: set[str] = set()
    values: set[str] = set()
    writers: set[str] = set()
    word_counts: Counter[str] = Counter()
    for game, labels in dataset.train:
        writers.add(game.writer)
        entity_ids.update(game.entities)
        for rec in game.records:
            attr_ids.add(rec.attribute_id)
            values.add(rec.value)
        tokens: Optional[Sequence[str]] = labels.tokens if labels is not None else game.summary
        if tokens:
            word_counts.update(tokens)
    words = [tok for tok, cnt in word_counts.items() if cnt >= word_min_freq]
    return Vocabularies(
        entities=Vocab.build(entity_ids, with_unk=True),
        attributes=Vocab.build(attr_ids, with_unk=False),
        values=Vocab.build(values, with_unk=True),
        words=Vocab.build(words, with_unk=True, specials=[SOD, EOD, "."]),
        writers=Vocab.build(writers - {UNKNOWN_WRITER}, with_unk=True),
        sides=Vocab.build(["home", "visitor"], with_unk=False),
    )
