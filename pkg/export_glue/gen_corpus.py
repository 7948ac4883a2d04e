#!/usr/bin/env python3
"""Regenerate the committed synthetic corpora (train + held-out eval).

Sentences come from a tiny seeded grammar over the model's character
vocabulary, so the corpus is reproducible, copyright-free, and structured
enough for the pinned model to learn real regularities.
"""

from pathlib import Path

import numpy as np

NOUNS = [
    "cat", "dog", "bird", "fish", "mouse", "horse", "sheep", "goat", "frog",
    "crow", "whale", "otter", "lynx", "viper", "heron", "badger", "weasel",
    "falcon", "marmot", "gecko", "urchin", "jackal", "ibex", "quokka",
]
VERBS = [
    "sees", "likes", "chases", "feeds", "finds", "calls", "follows", "greets",
    "avoids", "watches", "guards", "mimics", "queries", "dodges", "joins", "vexes",
]
ADJECTIVES = [
    "red", "big", "old", "shy", "wet", "tame", "sly", "calm",
    "pale", "zany", "quick", "dozy", "vivid", "jumpy",
]

ASSETS = Path(__file__).parent / "assets"


def zipf_weights(n):
    """Skewed frequencies: common words dominate, rare ones stay rare."""
    raw = 1.0 / (np.arange(n) + 2.0)
    return raw / raw.sum()


def pick(rng, words, weights):
    return str(rng.choice(words, p=weights))


def sentence(rng, weights):
    noun_w, verb_w, adj_w = weights
    parts = ["the"]
    if rng.random() < 0.5:
        parts.append(pick(rng, ADJECTIVES, adj_w))
    parts.append(pick(rng, NOUNS, noun_w))
    parts.append(pick(rng, VERBS, verb_w))
    parts.append("the")
    if rng.random() < 0.5:
        parts.append(pick(rng, ADJECTIVES, adj_w))
    parts.append(pick(rng, NOUNS, noun_w))
    if rng.random() < 0.3:
        parts.extend(["near", "the", pick(rng, NOUNS, noun_w)])
    return " ".join(parts) + "."


def corpus(seed, n_sentences):
    rng = np.random.default_rng(seed)
    weights = (zipf_weights(len(NOUNS)), zipf_weights(len(VERBS)), zipf_weights(len(ADJECTIVES)))
    return " ".join(sentence(rng, weights) for _ in range(n_sentences))


def main():
    ASSETS.mkdir(exist_ok=True)
    (ASSETS / "corpus.txt").write_text(corpus(seed=1, n_sentences=2000), "utf-8")
    (ASSETS / "eval.txt").write_text(corpus(seed=2, n_sentences=300), "utf-8")
    print(f"wrote {ASSETS / 'corpus.txt'} ({(ASSETS / 'corpus.txt').stat().st_size} bytes)")
    print(f"wrote {ASSETS / 'eval.txt'} ({(ASSETS / 'eval.txt').stat().st_size} bytes)")


if __name__ == "__main__":
    main()
