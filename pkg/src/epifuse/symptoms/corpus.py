"""Synthetic labelled tweets with class-specific cue words.

Each tweet mixes a symptom keyword, a few cue words drawn from its class's own
vocabulary and some shared filler, so the five classes are separable once the
cue words are embedded.
"""
from __future__ import annotations

import numpy as np

SYMPTOM_WORDS = ("fever", "cough", "sore throat", "headache", "fatigue", "chills",
                 "loss of smell", "shortness of breath")

CUES = {
    1: ("news", "article", "report", "study", "headline", "podcast", "thread", "election",
        "stocks", "football", "recipe", "weather", "traffic", "festival", "album"),
    2: ("i", "currently", "today", "tonight", "right", "awful", "woke", "feeling",
        "bed", "terrible", "ugh", "can't", "sleep", "worse", "myself"),
    3: ("had", "ago", "recovered", "last", "month", "back", "march", "finally", "gone",
        "remember", "lingered", "was", "over", "previous", "weeks"),
    4: ("mum", "dad", "wife", "husband", "son", "daughter", "she", "he", "her", "his",
        "flatmate", "colleague", "partner", "boyfriend", "girlfriend"),
    5: ("grandma", "grandad", "uncle", "aunt", "cousin", "neighbour", "nephew", "niece",
        "brother-in-law", "sister-in-law", "stepdad", "stepmum", "godson", "goddaughter",
        "landlord"),
}
FILLER = ("the", "a", "and", "so", "really", "just", "with", "this", "that", "very",
          "still", "bit", "all", "day", "lol")


def make_corpus(n_per_class: int = 500, seed: int = 0, cues_per_tweet: int = 4,
                fillers_per_tweet: int = 3) -> tuple[list[str], list[int]]:
    """``n_per_class`` tweets for each of the five classes, shuffled."""
    rng = np.random.default_rng(seed)
    texts, labels = [], []
    for label, cues in CUES.items():
        for _ in range(n_per_class):
            words = [SYMPTOM_WORDS[rng.integers(len(SYMPTOM_WORDS))]]
            words += [cues[i] for i in rng.integers(len(cues), size=cues_per_tweet)]
            words += [FILLER[i] for i in rng.integers(len(FILLER), size=fillers_per_tweet)]
            rng.shuffle(words)
            texts.append(" ".join(words))
            labels.append(label)
    order = rng.permutation(len(texts))
    return [texts[i] for i in order], [labels[i] for i in order]
