#!/usr/bin/env python3
"""Regenerates data/toy: a 60-tweet, 3-topic corpus whose stance is decided
by a single marker word, plus unlabeled tweets and topic keywords."""

import pathlib
import random

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data" / "toy"

TOPICS = {
    "solar power": ["panels", "rooftop", "grid", "sunlight", "energy", "#SolarPower"],
    "school uniforms": ["blazer", "students", "dress", "code", "classroom", "#SchoolUniforms"],
    "space travel": ["rockets", "orbit", "mars", "astronauts", "launch", "#SpaceTravel"],
}
MARKERS = {
    "pro": ["support", "love", "brilliant"],
    "con": ["oppose", "hate", "terrible"],
    "neutral": ["wondering", "reading", "meeting"],
}
FILLER = ["today", "honestly", "people", "think", "really", "news", "week", "friends", "city"]
DECOR = ["", " https://t.co/x1y2", " @someone", " !!", " :)"]
KEYWORDS = {
    "solar power": ["solar", "Solar"],
    "school uniforms": ["uniform", "Uniform"],
    "space travel": ["space", "Space"],
}


def tweet(rng, topic, stance):
    words = rng.sample(TOPICS[topic], 2) + rng.sample(FILLER, 2) + [rng.choice(MARKERS[stance])]
    rng.shuffle(words)
    return " ".join(words) + rng.choice(DECOR)


def main():
    rng = random.Random(20201)
    ROOT.mkdir(parents=True, exist_ok=True)
    rows = []
    for topic in TOPICS:
        stances = ["pro"] * 7 + ["con"] * 7 + ["neutral"] * 6
        for stance in stances:
            rows.append((tweet(rng, topic, stance), topic, stance))
    with open(ROOT / "dataset.tsv", "w", encoding="utf-8") as f:
        f.write("tweet\ttopic\tstance\n")
        for row in rows:
            f.write("\t".join(row) + "\n")

    with open(ROOT / "unlabeled.txt", "w", encoding="utf-8") as f:
        for topic, kws in KEYWORDS.items():
            for _ in range(10):
                f.write(f"{rng.choice(kws)} {tweet(rng, topic, rng.choice(list(MARKERS)))}\n")
        for _ in range(5):
            f.write(" ".join(rng.sample(FILLER, 4)) + "\n")

    with open(ROOT / "keywords.tsv", "w", encoding="utf-8") as f:
        for topic, kws in KEYWORDS.items():
            f.write(f"{topic}\t{','.join(kws)}\n")


if __name__ == "__main__":
    main()
