#!/usr/bin/env python3
"""Writes the bundled synthetic dataset: 4 emotions x 50 tweets split 30/10/10,
a small lexicon, and a pipeline config tuned for a quick run."""

import argparse
import random
from pathlib import Path

CUES = {
    "joy": (["happy", "glad", "smile", "fun"], ["thrilled", "ecstatic", "delighted", "overjoyed"]),
    "anger": (["annoyed", "irritated", "grumpy", "bothered"], ["furious", "outraged", "livid", "enraged"]),
    "fear": (["nervous", "uneasy", "worried", "jumpy"], ["terrified", "panicking", "horrified", "petrified"]),
    "sadness": (["down", "blue", "gloomy", "low"], ["heartbroken", "devastated", "miserable", "crushed"]),
}
FILLERS = ["today", "at work", "after the game", "this morning", "with my friends", "on the bus",
           "again", "right now", "tonight", "about the news"]
OPENERS = ["feeling", "so", "honestly", "just", "really", "kinda"]
TAGS = ["#monday", "#life", "#mood", "#weekend", "#news"]
NOISE = ["@friend", "http://t.co/x1", "www.example.com", ""]


def tweet(rng, emotion, intensity):
    mild, strong = CUES[emotion]
    words = [rng.choice(OPENERS)]
    n_strong = round(intensity * 3)
    cues = [rng.choice(strong) for _ in range(n_strong)] + [rng.choice(mild)]
    rng.shuffle(cues)
    words += cues
    words.append(rng.choice(FILLERS))
    text = " ".join(words)
    if intensity > 0.7:
        text = text.upper() if rng.random() < 0.5 else text + "!!!"
    if rng.random() < 0.3:
        text += " " + rng.choice(TAGS)
    noise = rng.choice(NOISE)
    if noise:
        text = noise + " " + text if rng.random() < 0.5 else text + " " + noise
    return text


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "synthetic"))
    ap.add_argument("--seed", type=int, default=2017)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    splits = {"train": [], "dev": [], "test": []}
    next_id = 10000
    for emotion in ["joy", "anger", "fear", "sadness"]:
        for k in range(50):
            intensity = round(rng.uniform(0.05, 0.95), 3)
            split = "train" if k < 30 else "dev" if k < 40 else "test"
            splits[split].append(f"{next_id}\t{tweet(rng, emotion, intensity)}\t{emotion}\t{intensity:.3f}")
            next_id += 1
    for name, lines in splits.items():
        (out / f"{name}.tsv").write_text("\n".join(lines) + "\n")

    lex = []
    for emotion, (mild, strong) in CUES.items():
        lex += [f"{w}\t{emotion}\t0.4" for w in mild]
        lex += [f"{w}\t{emotion}\t0.9" for w in strong]
    (out / "lexicon.tsv").write_text("\n".join(lex) + "\n")

    (out / "config.txt").write_text("""# Small, fast settings for the bundled synthetic data.
train = train.tsv
dev = dev.tsv
test = test.tsv
model_dir = models
lexicons = lexicon.tsv
seed = 7

charlm.cell = lstm
charlm.hidden_dim = 24
charlm.embed_dim = 8
charlm.lr = 0.01
charlm.batch = 4
charlm.bptt_len = 32
charlm.steps = 400

word.cell = gru
word.hidden_dim = 16
word.embed_dim = 16
word.lr = 0.01
word.epochs = 20
word.batch = 8
word.patience = 5

svr.C = 1
svr.epsilon = 0.05
svr.max_iter = 1000

ngram.hash_dim = 256
ensemble.step = 0.1
""")


if __name__ == "__main__":
    main()
