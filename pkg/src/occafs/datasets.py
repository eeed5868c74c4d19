"""
Labeled datasets: container, CSV/libsvm loaders, synthetic generators.

Data are stored features x samples (one column per sample). Labels are
canonicalized to ``1..k`` in order of first occurrence.
"""
import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import DatasetFormatError, InvalidInputError, InvalidLabelsError

__all__ = [
    "Dataset",
    "canonicalize_labels",
    "load_dataset",
    "load_csv",
    "load_libsvm",
    "save_csv",
    "inject_noise_features",
    "make_planted_dataset",
]


@dataclass(eq=False)
class Dataset:
    """
    Attributes
    ----------
    X : (n, p) ndarray
        Feature-by-sample data.
    labels : (p,) ndarray of int
        Class ids in ``1..k``, every class present.
    feature_names : sequence of str, optional
    provenance : dict
        Source path, format, and label mapping.
    """

    X: np.ndarray
    labels: np.ndarray
    feature_names: Optional[Sequence[str]] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        labels = np.asarray(self.labels)
        if X.ndim != 2:
            raise InvalidInputError("X must be 2-D (features x samples)")
        if np.isnan(X).any():
            raise InvalidInputError("X contains NaN entries")
        if labels.shape != (X.shape[1],):
            raise InvalidLabelsError(
                f"need {X.shape[1]} labels, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise InvalidLabelsError("labels must be integers; "
                                     "use canonicalize_labels first")
        if labels.size and (labels.min() < 1 or
                            np.any(np.bincount(labels)[1:] == 0)):
            raise InvalidLabelsError("labels must cover 1..k contiguously")
        if self.feature_names is not None and \
                len(self.feature_names) != X.shape[0]:
            raise InvalidInputError("feature_names length mismatch")
        X.setflags(write=False)
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        self.X, self.labels = X, labels

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def k(self):
        return int(self.labels.max())

    def samples(self, idx):
        """Dataset restricted to the given sample columns.

        Labels are kept as-is, so a subset may have absent classes; it is
        only a valid Dataset when every class still occurs.
        """
        idx = np.asarray(idx, dtype=np.int64)
        return _unchecked(self.X[:, idx], self.labels[idx],
                          self.feature_names, self.provenance)


def _unchecked(X, labels, names, prov):
    ds = object.__new__(Dataset)
    ds.X, ds.labels, ds.feature_names, ds.provenance = X, labels, names, prov
    return ds


def canonicalize_labels(raw):
    """Map arbitrary label values to ``1..k`` by first occurrence.

    Returns the integer labels and the ``{original: id}`` mapping.
    """
    mapping = {}
    out = np.empty(len(raw), dtype=np.int64)
    for i, v in enumerate(raw):
        if v not in mapping:
            mapping[v] = len(mapping) + 1
        out[i] = mapping[v]
    return out, mapping


def _finish(X, raw_labels, names, prov):
    labels, mapping = canonicalize_labels(raw_labels)
    if len(mapping) < 2:
        raise InvalidLabelsError("dataset has a single class")
    prov = dict(prov, label_map={str(k): v for k, v in mapping.items()})
    return Dataset(X, labels, names, prov)


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, label_column=-1, header=None, delimiter=","):
    """
    Read a CSV file with one sample per row.

    Parameters
    ----------
    label_column : int
        Column holding the class label (negative counts from the end).
    header : bool or None
        ``None`` detects a header: the first row is one if any of its
        feature fields is not numeric.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh, delimiter=delimiter))
                if r and any(c.strip() for c in r)]
    if not rows:
        raise DatasetFormatError(f"{path} is empty")
    width = len(rows[0][1])
    if width < 2:
        raise DatasetFormatError("need at least one feature and a label", 1)
    lc = label_column % width
    names = None
    if header is None:
        first = [c for j, c in enumerate(rows[0][1]) if j != lc]
        header = not all(_is_number(c) for c in first)
    if header:
        names = [c.strip() for j, c in enumerate(rows[0][1]) if j != lc]
        rows = rows[1:]
    feats, raw = [], []
    for lineno, r in rows:
        if len(r) != width:
            raise DatasetFormatError(
                f"expected {width} fields, found {len(r)}", lineno)
        try:
            feats.append([float(c) for j, c in enumerate(r) if j != lc])
        except ValueError as exc:
            raise DatasetFormatError(str(exc), lineno) from None
        raw.append(r[lc].strip())
    if not feats:
        raise DatasetFormatError(f"{path} has no data rows")
    X = np.array(feats).T
    if np.isnan(X).any():
        raise DatasetFormatError("NaN values are not allowed")
    prov = {"path": str(path), "format": "csv", "label_column": label_column}
    return _finish(X, raw, names, prov)


def load_libsvm(path, n_features=None):
    """Read ``label idx:val ...`` lines with 1-based feature indices."""
    entries, raw = [], []
    n_max = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            row = {}
            for tok in parts[1:]:
                idx, sep, val = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError(f"malformed token {tok!r}")
                    j = int(idx)
                    if j < 1:
                        raise ValueError(f"feature index {j} is not 1-based")
                    row[j - 1] = float(val)
                except ValueError as exc:
                    raise DatasetFormatError(str(exc), lineno) from None
                n_max = max(n_max, j)
            entries.append(row)
            raw.append(parts[0])
    if not entries:
        raise DatasetFormatError(f"{path} has no data rows")
    n = n_features or n_max
    if n < n_max:
        raise DatasetFormatError(f"feature index {n_max} exceeds n_features={n}")
    X = np.zeros((n, len(entries)))
    for col, row in enumerate(entries):
        for j, v in row.items():
            X[j, col] = v
    prov = {"path": str(path), "format": "libsvm"}
    return _finish(X, raw, None, prov)


def load_dataset(path, format="csv", **kwargs):
    """Load a dataset file; ``format`` is ``"csv"`` or ``"libsvm"``."""
    if format == "csv":
        return load_csv(path, **kwargs)
    if format == "libsvm":
        return load_libsvm(path, **kwargs)
    raise InvalidInputError(f"unknown dataset format {format!r}")


def save_csv(ds, path):
    """Write one sample per row with the label in the last column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        names = ds.feature_names or [f"f{i}" for i in range(ds.n)]
        w.writerow(list(names) + ["label"])
        for j in range(ds.p):
            w.writerow([repr(float(v)) for v in ds.X[:, j]] + [int(ds.labels[j])])


def inject_noise_features(ds, t, seed=0, block=1000, high=0.01):
    """
    Append ``t * block`` features drawn i.i.d. uniform on (0, high).

    Original features and labels are untouched; the new rows come last.
    """
    if t < 1:
        raise InvalidInputError("t must be >= 1")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(np.nextafter(0.0, 1.0), high, size=(t * block, ds.p))
    names = None
    if ds.feature_names is not None:
        names = list(ds.feature_names) + [f"noise{i}" for i in range(t * block)]
    prov = dict(ds.provenance, noise_features=t * block, noise_seed=seed)
    return Dataset(np.vstack([ds.X, noise]), ds.labels.copy(), names, prov)


def make_planted_dataset(n_features=200, n_informative=10, n_samples=400,
                         n_classes=2, separation=1.0, seed=0):
    """
    Gaussian classes that differ only on a random set of planted features.

    Every feature is standard normal within a class. For two classes the
    class means are ``+-separation/2`` on each informative feature; for
    more classes they are i.i.d. ``N(0, separation^2)`` on the informative
    features. Uninformative features have mean zero in all classes.

    The planted feature indices are stored in ``provenance["informative"]``.
    """
    if n_informative > n_features:
        raise InvalidInputError("more informative features than features")
    if n_samples < n_classes:
        raise InvalidInputError("need at least one sample per class")
    rng = np.random.default_rng(seed)
    informative = np.sort(rng.choice(n_features, n_informative, replace=False))
    labels = np.concatenate([np.arange(1, n_classes + 1),
                             rng.integers(1, n_classes + 1,
                                          n_samples - n_classes)])
    labels = rng.permutation(labels)
    if n_classes == 2:
        means = np.outer(np.array([-0.5, 0.5]) * separation,
                         np.ones(n_informative))
    else:
        means = separation * rng.standard_normal((n_classes, n_informative))
    X = rng.standard_normal((n_features, n_samples))
    X[informative] += means[labels - 1].T
    prov = {"format": "synthetic", "seed": seed,
            "informative": informative.tolist()}
    return Dataset(X, labels, None, prov)
