"""Triple files, vocabularies, entity texts, and the true-triple index.

Triple files are TSV: one `head<TAB>relation<TAB>tail` per line, no header.
Vocabulary ids are assigned in first-seen order over train, then valid,
then test, which makes reloading the same files reproduce the same ids.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, VocabError

log = logging.getLogger(__name__)

SPLIT_FILES = {"train": "train.txt", "valid": "valid.txt", "test": "test.txt"}


class Vocab:
    """Bijective label <-> contiguous-id mapping, append-only."""

    def __init__(self, labels=()):
        self.id_to_label: list[str] = []
        self.label_to_id: dict[str, int] = {}
        for label in labels:
            self.add(label)

    def add(self, label: str) -> int:
        """Intern `label`, returning its id (existing or freshly assigned)."""
        idx = self.label_to_id.get(label)
        if idx is None:
            idx = len(self.id_to_label)
            self.id_to_label.append(label)
            self.label_to_id[label] = idx
        return idx

    def __getitem__(self, label: str) -> int:
        try:
            return self.label_to_id[label]
        except KeyError:
            raise VocabError(f"unknown label {label!r}") from None

    def __contains__(self, label: str) -> bool:
        return label in self.label_to_id

    def __len__(self) -> int:
        return len(self.id_to_label)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.id_to_label == other.id_to_label


def load_triple_file(path, entity_vocab: Vocab | None = None,
                     relation_vocab: Vocab | None = None, strict: bool | None = None):
    """Parse one TSV triple file into a list of (h, r, t) id triples.

    When vocabs are supplied, unknown labels raise VocabError (strict mode,
    overridable via `strict`); otherwise labels are interned in first-seen
    order into fresh vocabs. Returns (triples, entity_vocab, relation_vocab).
    """
    if strict is None:
        strict = entity_vocab is not None or relation_vocab is not None
    if entity_vocab is None:
        entity_vocab = Vocab()
    if relation_vocab is None:
        relation_vocab = Vocab()
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line == "":
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(path, lineno,
                                 f"expected 3 tab-separated fields, got {len(fields)}")
            h, r, t = fields
            if strict:
                try:
                    triples.append((entity_vocab[h], relation_vocab[r], entity_vocab[t]))
                except VocabError as exc:
                    raise VocabError(f"{path}:{lineno}: {exc}") from None
            else:
                triples.append((entity_vocab.add(h), relation_vocab.add(r),
                                entity_vocab.add(t)))
    return triples, entity_vocab, relation_vocab


def save_triple_file(path, triples, entity_vocab: Vocab, relation_vocab: Vocab) -> None:
    """Write id triples back to TSV in file order."""
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in triples:
            fh.write(f"{entity_vocab.id_to_label[h]}\t"
                     f"{relation_vocab.id_to_label[r]}\t"
                     f"{entity_vocab.id_to_label[t]}\n")


@dataclass
class TripleStore:
    """Integer-encoded train/valid/test splits plus their vocabularies."""

    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    entity_vocab: Vocab
    relation_vocab: Vocab

    @property
    def num_entities(self) -> int:
        return len(self.entity_vocab)

    @property
    def num_relations(self) -> int:
        return len(self.relation_vocab)

    def splits(self):
        return {"train": self.train, "valid": self.valid, "test": self.test}


def _as_triple_array(triples) -> np.ndarray:
    arr = np.asarray(triples, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 3)
    return arr


def load_dataset(directory) -> TripleStore:
    """Load train/valid/test TSVs from `directory` into one TripleStore.

    Vocab ids are assigned in first-seen order over train, then valid, then
    test, so entities that only occur in valid/test still get ids.
    """
    directory = Path(directory)
    ev, rv = Vocab(), Vocab()
    parts = {}
    # first-seen interning continues across splits through the shared vocabs
    for split, fname in SPLIT_FILES.items():
        parts[split] = _load_split(directory / fname, ev, rv)
    return TripleStore(parts["train"], parts["valid"], parts["test"], ev, rv)


def _load_split(path, entity_vocab: Vocab, relation_vocab: Vocab) -> np.ndarray:
    if not Path(path).exists():
        return np.zeros((0, 3), dtype=np.int64)
    triples, _, _ = load_triple_file(path, entity_vocab, relation_vocab, strict=False)
    return _as_triple_array(triples)


def load_entity_texts(path, vocab: Vocab) -> list[str]:
    """Load `entity_label<TAB>free text` lines into an id-indexed table.

    Every vocab entity gets an entry; entities absent from the file fall
    back to their own label, so downstream embedding never drops entities.
    Duplicate entity lines are an error; unknown labels are skipped with a
    warning.
    """
    texts: list[str | None] = [None] * len(vocab)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line == "":
                continue
            fields = line.split("\t", 1)
            if len(fields) != 2:
                raise ParseError(path, lineno, "expected `entity<TAB>text`")
            label, text = fields
            if label not in vocab:
                log.warning("%s:%d: unknown entity %r, line skipped", path, lineno, label)
                continue
            eid = vocab[label]
            if texts[eid] is not None:
                raise VocabError(f"{path}:{lineno}: duplicate text for entity {label!r}")
            texts[eid] = text
    return [t if t is not None else vocab.id_to_label[i] for i, t in enumerate(texts)]


def default_entity_texts(vocab: Vocab) -> list[str]:
    """Text table that just echoes each entity's label."""
    return list(vocab.id_to_label)


@dataclass
class TrueTripleIndex:
    """Exact membership index over train+valid+test, for filtered ranking."""

    tails_by_hr: dict = field(default_factory=dict)
    heads_by_rt: dict = field(default_factory=dict)
    size: int = 0

    def add(self, h: int, r: int, t: int) -> None:
        tails = self.tails_by_hr.setdefault((h, r), set())
        if t not in tails:
            tails.add(t)
            self.heads_by_rt.setdefault((r, t), set()).add(h)
            self.size += 1

    def contains(self, h: int, r: int, t: int) -> bool:
        return t in self.tails_by_hr.get((h, r), ())

    def tails(self, h: int, r: int) -> set:
        return self.tails_by_hr.get((h, r), set())

    def heads(self, r: int, t: int) -> set:
        return self.heads_by_rt.get((r, t), set())


def build_true_index(store: TripleStore) -> TrueTripleIndex:
    """Index every triple of all three splits for exact membership queries."""
    index = TrueTripleIndex()
    for split in (store.train, store.valid, store.test):
        for h, r, t in split:
            index.add(int(h), int(r), int(t))
    return index
