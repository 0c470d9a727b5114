"""Regenerate src/explanno/data/toy_vectors.txt.

Hand-built clusters, not trained vectors.  Words in one cluster share a
base direction (dims 0-15) plus a small per-word jitter in the function
dims, giving within-cluster cosine ~0.873 and cross-cluster cosine
<= ~0.26.  Function words get a distinct pair of dims from 16-25 each, so
no two of them exceed cosine 0.5.  Everything is deterministic; rerunning
this script reproduces the file byte for byte.
"""

from itertools import combinations
from pathlib import Path

DIM = 26
BASE_W = 0.92
JITTER_W = 0.35

CLUSTERS = [
    ["caused", "triggered", "produced", "induced", "sparked"],
    ["happy", "glad", "joyful", "cheerful", "delighted", "pleased"],
    ["sad", "unhappy", "miserable", "gloomy", "upset", "angry"],
    ["lunch", "dinner", "breakfast", "meal", "food", "snack"],
    ["restaurant", "cafe", "diner", "bistro", "venue"],
    ["great", "excellent", "wonderful", "fantastic", "amazing", "good"],
    ["tasty", "delicious", "flavorful", "fresh"],
    ["bad", "terrible", "awful", "horrible", "poor"],
    ["price", "cost", "cheap", "expensive", "affordable", "overpriced"],
    ["waiter", "waitress", "server", "staff", "chef", "manager"],
    ["born", "raised", "grew", "lives", "resides"],
    ["water", "hammer", "pressure", "pump", "valve", "leak"],
    ["failure", "fault", "burst", "rupture", "breakdown", "crack"],
    ["movie", "film", "plot", "actor", "scene", "director"],
    ["service", "experience", "visit", "order", "atmosphere"],
    ["city", "town", "village", "area", "neighborhood", "region"],
]

FUNCTION_WORDS = [
    "the", "a", "an", "is", "was", "were", "we", "i", "he", "she",
    "had", "has", "have", "at", "in", "on", "of", "by", "from", "to",
    "and", "or", "not", "that", "which", "where", "who", "this", "it",
]


def main() -> None:
    rows: dict[str, list[float]] = {}
    for base_dim, words in enumerate(CLUSTERS):
        for j, word in enumerate(words):
            vec = [0.0] * DIM
            vec[base_dim] = BASE_W
            vec[16 + j % 10] = JITTER_W
            rows[word] = vec
    pairs = list(combinations(range(16, 26), 2))
    for i, word in enumerate(FUNCTION_WORDS):
        a, b = pairs[i]
        vec = [0.0] * DIM
        vec[a] = 1.0
        vec[b] = 1.0
        rows[word] = vec

    out = Path(__file__).resolve().parents[1] / "src" / "explanno" / "data" / "toy_vectors.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for word in sorted(rows):
            comps = " ".join(f"{x:.6f}" for x in rows[word])
            fh.write(f"{word} {comps}\n")
    print(f"wrote {len(rows)} vectors (dim {DIM}) to {out}")


if __name__ == "__main__":
    main()
