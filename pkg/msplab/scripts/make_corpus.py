"""Generate a deterministic toy English corpus for the lab."""
import argparse
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from msplab.core.storage import atomic_write_text

SUBJECTS = ["the cat", "a dog", "the old man", "my sister", "the small bird", "a farmer", "our neighbour"]
VERBS = ["sees", "follows", "likes", "finds", "carries", "watches", "calls", "helps"]
OBJECTS = ["the ball", "a red box", "the river", "some bread", "the long road", "a letter", "the garden", "an apple"]
PLACES = ["in the morning", "near the house", "after the rain", "at the market", "under the tree", "by the sea"]
JOINERS = [", and then ", " while ", " because ", ". Later "]


def sentence(rng: np.random.Generator) -> str:
    clause = f"{rng.choice(SUBJECTS)} {rng.choice(VERBS)} {rng.choice(OBJECTS)}"
    if rng.random() < 0.5:
        clause += f" {rng.choice(PLACES)}"
    if rng.random() < 0.3:
        clause += f"{rng.choice(JOINERS)}{rng.choice(SUBJECTS)} {rng.choice(VERBS)} {rng.choice(OBJECTS)}"
    return clause[0].upper() + clause[1:] + "."


def make_corpus(num_bytes: int, seed: int) -> str:
    """Sentences joined into short paragraphs until num_bytes is reached, then truncated."""
    rng = np.random.default_rng(seed)
    parts = []
    size = 0
    while size < num_bytes:
        paragraph = " ".join(sentence(rng) for _ in range(int(rng.integers(3, 7)))) + "\n"
        parts.append(paragraph)
        size += len(paragraph)
    return "".join(parts)[:num_bytes]


def main() -> None:
    parser = argparse.ArgumentParser(description="Write a deterministic toy corpus")
    parser.add_argument("--out", required=True)
    parser.add_argument("--bytes", type=int, default=200_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    target = atomic_write_text(args.out, make_corpus(args.bytes, args.seed))
    print(f"✓ Wrote {args.bytes} bytes to {target}")


if __name__ == "__main__":
    main()
