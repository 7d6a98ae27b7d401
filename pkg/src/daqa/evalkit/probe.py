"""Post-hoc linear probe for residual domain information in pooled h.

Deliberately independent of the training-time discriminator: a fresh
multinomial logistic classifier fit on frozen features. Lower held-out
accuracy means less linearly recoverable domain signal; chance is 1/K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import LogisticRegression


class ProbeError(Exception):
    pass


@dataclass(frozen=True)
class ProbeResult:
    accuracy: float
    confusion: np.ndarray   # (K, K), rows = true domain, cols = predicted
    n_train: int
    n_test: int
    num_domains: int

    @property
    def chance(self) -> float:
        return 1.0 / self.num_domains


def domain_probe(features: np.ndarray, labels: np.ndarray, seed: int,
                 test_fraction: float = 0.5) -> ProbeResult:
    """Train on a stratified split of frozen features, score the held-out half."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    k = len(classes)
    if k < 2:
        raise ProbeError("probe needs at least 2 domains")
    for c in classes:
        if int((labels == c).sum()) < 20:
            raise ProbeError(f"domain {c} has fewer than 20 examples")

    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for c in classes:
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        n_test = int(round(len(members) * test_fraction))
        if n_test < 2 or len(members) - n_test < 2:
            raise ProbeError(f"domain {c} has fewer than 2 examples in a split")
        test_idx.extend(members[:n_test])
        train_idx.extend(members[n_test:])
    train_idx = np.array(sorted(train_idx))
    test_idx = np.array(sorted(test_idx))

    mu = features[train_idx].mean(axis=0)
    sd = features[train_idx].std(axis=0) + 1e-12
    x_train = (features[train_idx] - mu) / sd
    x_test = (features[test_idx] - mu) / sd

    clf = LogisticRegression(max_iter=2000, random_state=0)
    clf.fit(x_train, labels[train_idx])
    predicted = clf.predict(x_test)
    truth = labels[test_idx]

    confusion = np.zeros((k, k), dtype=np.int64)
    index = {c: i for i, c in enumerate(classes)}
    for t, p in zip(truth, predicted):
        confusion[index[t], index[p]] += 1
    return ProbeResult(
        accuracy=float((predicted == truth).mean()),
        confusion=confusion,
        n_train=len(train_idx),
        n_test=len(test_idx),
        num_domains=k,
    )
