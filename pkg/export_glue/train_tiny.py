#!/usr/bin/env python3
"""Train the pinned checkpoint from the committed corpus, reproducibly.

All randomness is seeded and training runs single-threaded on CPU, so
re-running this script reproduces assets/tiny_lm.pt.  Takes under a minute.
"""

from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from tinylm import CONTEXT, TinyCharLM, encode, eval_perplexity, windows

ASSETS = Path(__file__).parent / "assets"
EPOCHS = 6
BATCH = 256
LR = 3e-3
SEED = 1234


def main():
    torch.manual_seed(SEED)
    torch.set_num_threads(1)
    text = (ASSETS / "corpus.txt").read_text("utf-8")
    tokens = encode(text)
    contexts, targets = windows(tokens)
    print(f"{len(targets)} training windows over {len(set(text))} distinct characters")

    model = TinyCharLM()
    optimizer = torch.optim.Adam(model.parameters(), lr=LR)
    loss_fn = nn.CrossEntropyLoss()
    order_rng = np.random.default_rng(SEED)

    for epoch in range(EPOCHS):
        order = order_rng.permutation(len(targets))
        running = 0.0
        for start in range(0, len(order), BATCH):
            sel = order[start : start + BATCH]
            optimizer.zero_grad()
            loss = loss_fn(
                model(torch.from_numpy(contexts[sel])), torch.from_numpy(targets[sel])
            )
            loss.backward()
            optimizer.step()
            running += loss.item() * len(sel)
        print(f"epoch {epoch}: train loss {running / len(order):.4f}")

    model.eval()
    eval_text = (ASSETS / "eval.txt").read_text("utf-8")
    print(f"held-out perplexity: {eval_perplexity(model, eval_text):.4f}")
    torch.save(model.state_dict(), ASSETS / "tiny_lm.pt")
    print(f"saved {ASSETS / 'tiny_lm.pt'}")


if __name__ == "__main__":
    main()
