"""Synthetic multi-domain QA corpora for desk-scale experiments.

Every domain shares one latent task: a passage states several key/value
facts, the question names one key, and the answer is that key's value
token. Domains differ in filler vocabulary (pairwise disjoint under the
default profile), phrasing templates, and passage-length distribution, so a
domain classifier has abundant surface signal while the QA task itself
transfers. Held-out datasets use unseen filler pools, templates, and
lengths.
"""

from __future__ import annotations

import numpy as np

from .records import DataError, DatasetRegistry, RawRecord

# Domain definitions derive from this constant, never from the caller's
# seed, so corpora drawn with different seeds share the same domains.
_POOL_SEED = 20240711

_NUM_KEYS = 40
_NUM_VALUES = 120
_FILLER_POOL_SIZE = 150
_NUM_OOD = 2

_CONSONANTS = list("bcdfghjklmnprstvz")
_VOWELS = list("aeiou")

_STATEMENT_TEMPLATES = [
    "{k} is {v} .",
    "the {k} was {v} .",
    "we measured {k} at {v} .",
    "records show {k} equals {v} .",
    "the {k} reading came to {v} .",
    "{k} stands at {v} .",
    "analysts put {k} near {v} .",
    "the log lists {k} as {v} .",
]

_QUESTION_TEMPLATES = [
    "what is {k} ?",
    "what was the {k} ?",
    "what did we measure {k} at ?",
    "what do records show {k} equals ?",
    "what did the {k} reading come to ?",
    "what does {k} stand at ?",
    "where do analysts put {k} ?",
    "what does the log list {k} as ?",
]

_LENGTH_RANGES = [(20, 40), (35, 60), (50, 85), (30, 70)]
_OOD_LENGTH_RANGES = [(25, 55), (55, 105)]

SHIFT_PROFILES = ("disjoint", "overlap")


def _make_words(rng: np.random.Generator, count: int, taken: set[str]) -> list[str]:
    """Pronounceable 2-3 syllable words, globally unique."""
    words = []
    while len(words) < count:
        n_syll = int(rng.integers(2, 4))
        word = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS)
                       for _ in range(n_syll))
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


def _domain_pools(k: int, shift_profile: str) -> dict:
    """Fixed lexical pools: keys, values, per-domain fillers, held-out fillers."""
    rng = np.random.default_rng(_POOL_SEED)
    taken: set[str] = set()
    keys = _make_words(rng, _NUM_KEYS, taken)
    values = _make_words(rng, _NUM_VALUES, taken)
    fillers = [_make_words(rng, _FILLER_POOL_SIZE, taken) for _ in range(k)]
    ood_fillers = [_make_words(rng, _FILLER_POOL_SIZE, taken) for _ in range(_NUM_OOD)]
    if shift_profile == "overlap":
        # Milder shift: half of every domain's filler pool is shared.
        shared = _make_words(rng, _FILLER_POOL_SIZE // 2, taken)
        fillers = [pool[:_FILLER_POOL_SIZE // 2] + shared for pool in fillers]
    return {"keys": keys, "values": values, "fillers": fillers,
            "ood_fillers": ood_fillers}


def _generate_dataset(name: str, n_records: int, rng: np.random.Generator,
                      keys: list[str], values: list[str], filler: list[str],
                      stmt_template: str, q_template: str,
                      length_range: tuple[int, int]) -> list[RawRecord]:
    records = []
    lo, hi = length_range
    for i in range(n_records):
        n_pairs = int(rng.integers(2, 5))
        pair_keys = rng.choice(keys, size=n_pairs, replace=False)
        pair_values = rng.choice(values, size=n_pairs, replace=False)
        sentences = [stmt_template.format(k=k, v=v)
                     for k, v in zip(pair_keys, pair_values)]
        target_len = int(rng.integers(lo, hi + 1))
        n_words = sum(len(s.split()) for s in sentences)
        while n_words < target_len:
            n_fill = int(rng.integers(4, 10))
            sentences.append(" ".join(rng.choice(filler, size=n_fill)) + " .")
            n_words += n_fill + 1
        order = rng.permutation(len(sentences))
        passage = " ".join(sentences[j] for j in order)
        asked = int(rng.integers(n_pairs))
        records.append(RawRecord(
            context=passage,
            question=q_template.format(k=pair_keys[asked]),
            answers=(str(pair_values[asked]),),
            qid=f"{name}-{i:05d}",
            dataset_name=name,
        ))
    return records


def synth_generate(k: int, n_per_domain: int, seed: int,
                   shift_profile: str = "disjoint") -> DatasetRegistry:
    """Deterministic registry of K in-domain and 2 held-out datasets.

    Domain identity (filler pool, templates, lengths) is a pure function of
    (k, shift_profile); only the sampled records depend on `seed`, so two
    calls with different seeds yield disjoint draws from identical domains.
    """
    if k < 2:
        raise DataError("adversarial training needs K >= 2 domains")
    if n_per_domain < 1:
        raise DataError("n_per_domain must be >= 1")
    if shift_profile not in SHIFT_PROFILES:
        raise DataError(f"unknown shift_profile {shift_profile!r}; "
                        f"choose from {SHIFT_PROFILES}")
    capacity = _NUM_KEYS * _NUM_VALUES
    if n_per_domain > capacity:
        raise DataError(f"n_per_domain {n_per_domain} exceeds template capacity {capacity}")

    pools = _domain_pools(k, shift_profile)
    registry = DatasetRegistry()
    for d in range(k):
        name = f"synth-d{d}"
        rng = np.random.default_rng([seed, 1000 + d])
        registry.in_domain[name] = _generate_dataset(
            name, n_per_domain, rng,
            pools["keys"], pools["values"], pools["fillers"][d],
            _STATEMENT_TEMPLATES[d % len(_STATEMENT_TEMPLATES)],
            _QUESTION_TEMPLATES[d % len(_QUESTION_TEMPLATES)],
            _LENGTH_RANGES[d % len(_LENGTH_RANGES)])
    n_ood = max(1, n_per_domain // 4)
    for j in range(_NUM_OOD):
        name = f"synth-ood{j}"
        rng = np.random.default_rng([seed, 5000 + j])
        registry.out_of_domain[name] = _generate_dataset(
            name, n_ood, rng,
            pools["keys"], pools["values"], pools["ood_fillers"][j],
            _STATEMENT_TEMPLATES[(k + j) % len(_STATEMENT_TEMPLATES)],
            _QUESTION_TEMPLATES[(k + j) % len(_QUESTION_TEMPLATES)],
            _OOD_LENGTH_RANGES[j % len(_OOD_LENGTH_RANGES)])
    return registry
