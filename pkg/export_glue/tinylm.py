"""A pinned character-level language model small enough to prune on a laptop.

Classic fixed-window MLP: the last CONTEXT characters are embedded,
concatenated, and pushed through two hidden linear layers into a softmax over
the character vocabulary.  The three weight matrices (fc1, fc2, head) are the
pruning targets; everything runs in float32 on CPU.
"""

import numpy as np
import torch
import torch.nn as nn

VOCAB = " .abcdefghijklmnopqrstuvwxyz"
CONTEXT = 8
EMBED_DIM = 16
HIDDEN_DIM = 32

TARGET_LAYERS = ("fc1", "fc2", "head")


class TinyCharLM(nn.Module):
    def __init__(self):
        super().__init__()
        self.embed = nn.Embedding(len(VOCAB), EMBED_DIM)
        self.fc1 = nn.Linear(CONTEXT * EMBED_DIM, HIDDEN_DIM)
        self.fc2 = nn.Linear(HIDDEN_DIM, HIDDEN_DIM)
        self.head = nn.Linear(HIDDEN_DIM, len(VOCAB))
        self.act = nn.ReLU()

    def forward(self, tokens):
        # tokens: (batch, CONTEXT) int64
        x = self.embed(tokens).flatten(1)
        x = self.act(self.fc1(x))
        x = self.act(self.fc2(x))
        return self.head(x)


def encode(text):
    table = {ch: i for i, ch in enumerate(VOCAB)}
    try:
        return np.array([table[ch] for ch in text], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"corpus contains a character outside the vocabulary: {exc}") from exc


def windows(tokens, limit=None):
    """All (context, next-char) training windows, in corpus order."""
    n = len(tokens) - CONTEXT
    if limit is not None:
        n = min(n, limit)
    if n <= 0:
        raise ValueError("corpus is shorter than one context window")
    idx = np.arange(n)[:, None] + np.arange(CONTEXT)[None, :]
    return tokens[idx], tokens[CONTEXT : CONTEXT + n]


def load_model(checkpoint_path):
    model = TinyCharLM()
    state = torch.load(checkpoint_path, map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    model.eval()
    return model


@torch.no_grad()
def eval_perplexity(model, text, batch_size=1024):
    """exp(mean NLL) over every next-character prediction in the text."""
    if len(text.strip()) == 0:
        raise ValueError("corpus is empty")
    tokens = encode(text)
    contexts, targets = windows(tokens)
    loss_fn = nn.CrossEntropyLoss(reduction="sum")
    model.eval()
    total = 0.0
    for start in range(0, len(targets), batch_size):
        batch = torch.from_numpy(contexts[start : start + batch_size])
        logits = model(batch)
        total += float(loss_fn(logits, torch.from_numpy(targets[start : start + batch_size])))
    return float(np.exp(total / len(targets)))


@torch.no_grad()
def logits_on(model, text, limit=256):
    """Logits for the first ``limit`` windows; used for bit-identity checks."""
    contexts, _ = windows(encode(text), limit=limit)
    return model(torch.from_numpy(contexts)).numpy()
