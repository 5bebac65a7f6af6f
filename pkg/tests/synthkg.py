"""Synthetic knowledge graphs with learnable structure and clusterable texts.

Entities belong to themed groups; each relation links one source group to
one destination group and every source entity connects to a small fixed
set of destination entities. That makes link prediction genuinely
learnable, and gives entity texts a group vocabulary so the trigram
fallback embedder produces well-separated clusters.

Run as a script to materialize the demo dataset:  python3 tests/synthkg.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

GROUP_WORDS = {
    0: ["river", "delta", "basin", "stream", "water", "flow"],
    1: ["engine", "piston", "torque", "gear", "motor", "axle"],
    2: ["violin", "sonata", "chord", "melody", "tempo", "opus"],
    3: ["enzyme", "protein", "ligand", "peptide", "amino", "cell"],
    4: ["glacier", "summit", "ridge", "slope", "peak", "cliff"],
    5: ["market", "ledger", "asset", "bond", "equity", "trade"],
}


def make_synthetic_kg(num_entities=60, num_base_relations=4, num_groups=4,
                      fanout=3, seed=0, frac_valid=0.1, frac_test=0.1):
    """Returns (splits, labels, texts) with splits = dict of (n, 3) arrays.

    Each base relation r gets an inverse twin r+B, and for every valid/test
    fact the twin fact sits in train. Test triples are therefore entailed
    by the training graph (the same leakage that makes classic benchmarks
    highly rankable), so a sound trainer must reach high filtered metrics.
    Every entity and relation appears in train.
    """
    rng = np.random.default_rng(seed)
    num_groups = min(num_groups, len(GROUP_WORDS))
    group_of = np.arange(num_entities) % num_groups
    members = [np.flatnonzero(group_of == g) for g in range(num_groups)]

    labels = [f"{GROUP_WORDS[g][0]}_{i:03d}" for i, g in enumerate(group_of)]
    texts = []
    for i, g in enumerate(group_of):
        words = rng.choice(GROUP_WORDS[g], size=4, replace=True)
        texts.append(" ".join(words) + f" {GROUP_WORDS[g][i % 6]}")

    base = []
    for r in range(num_base_relations):
        src = members[r % num_groups]
        dst = members[(r + 1) % num_groups]
        for h in src:
            tails = rng.choice(dst, size=min(fanout, dst.size), replace=False)
            for t in tails:
                if t != h:
                    base.append((int(h), r, int(t)))
    base = sorted(set(base))
    order = rng.permutation(len(base))

    n = len(base)
    n_valid = max(1, int(n * frac_valid))
    n_test = max(1, int(n * frac_test))
    valid_idx = set(order[:n_valid].tolist())
    test_idx = set(order[n_valid:n_valid + n_test].tolist())

    train, valid, test = [], [], []
    for i, (h, r, t) in enumerate(base):
        inverse = (t, r + num_base_relations, h)
        if i in valid_idx:
            valid.append((h, r, t))
            train.append(inverse)
        elif i in test_idx:
            test.append((h, r, t))
            train.append(inverse)
        else:
            train.append((h, r, t))
            train.append(inverse)
    train = np.array(train, dtype=np.int64)
    train = train[rng.permutation(train.shape[0])]

    splits = {"train": train,
              "valid": np.array(valid, dtype=np.int64),
              "test": np.array(test, dtype=np.int64)}
    return splits, labels, texts


def write_kg(directory, splits, labels, texts) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for split, triples in splits.items():
        with open(directory / f"{split}.txt", "w", encoding="utf-8") as fh:
            for h, r, t in triples:
                fh.write(f"{labels[h]}\trel_{r}\t{labels[t]}\n")
    with open(directory / "texts.tsv", "w", encoding="utf-8") as fh:
        for label, text in zip(labels, texts):
            fh.write(f"{label}\t{text}\n")


if __name__ == "__main__":
    out = Path(__file__).resolve().parent.parent / "data" / "demo"
    splits, labels, texts = make_synthetic_kg(num_entities=60,
                                              num_base_relations=4,
                                              num_groups=4, fanout=3, seed=11)
    write_kg(out, splits, labels, texts)
    sizes = {k: len(v) for k, v in splits.items()}
    print(f"wrote demo dataset to {out}: {sizes}")
