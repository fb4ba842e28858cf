"""Embedding sets, dataset statistics, and the toolkit's text file formats.

File formats (all UTF-8, space separated, floats written with 17
significant digits so values round-trip bit-exactly):

* embeddings: header ``#dim <d>`` then one record per line,
  ``<utterance_id> <speaker_id|-> v1 ... vd`` (``-`` means unlabeled);
* trial list: ``<enroll_id> <test_id> [target|nontarget|-]``;
* score file: ``<enroll_id> <test_id> <score>`` with 9 significant digits.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import DataError
from .linalg import symmetrize

FLOAT_FMT = "%.17g"
SCORE_FMT = "%.9g"


class Trial(NamedTuple):
    enroll_id: str
    test_id: str
    label: str | None  # "target", "nontarget", or None when unscored


@dataclass(frozen=True)
class EmbeddingSet:
    """Fixed-dimension embedding vectors with utterance ids and optional labels."""

    ids: tuple
    speakers: tuple
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2:
            raise DataError(f"embedding matrix must be 2-D, got shape {x.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "speakers", tuple(self.speakers))
        if not (len(self.ids) == len(self.speakers) == x.shape[0]):
            raise DataError(
                f"inconsistent record counts: {len(self.ids)} ids, "
                f"{len(self.speakers)} speakers, {x.shape[0]} vectors"
            )
        if len(set(self.ids)) != len(self.ids):
            seen = set()
            dup = next(i for i in self.ids if i in seen or seen.add(i))
            raise DataError(f"duplicate utterance id {dup!r}")

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def labeled(self) -> bool:
        return len(self) > 0 and all(s is not None for s in self.speakers)

    def with_vectors(self, x: np.ndarray) -> "EmbeddingSet":
        """Same ids and labels over a new vector matrix (e.g. after projection)."""
        return EmbeddingSet(self.ids, self.speakers, x)

    def sorted_by_id(self) -> "EmbeddingSet":
        order = sorted(range(len(self)), key=lambda i: self.ids[i])
        return EmbeddingSet(
            tuple(self.ids[i] for i in order),
            tuple(self.speakers[i] for i in order),
            self.x[order],
        )


@dataclass(frozen=True)
class GaussianStats:
    """Sample count, mean, and biased (1/N) total covariance of a set."""

    count: int
    mean: np.ndarray
    total_cov: np.ndarray


@dataclass(frozen=True)
class ScatterPair:
    """Between/within-class scatter; ``between + within`` equals the total covariance."""

    between: np.ndarray
    within: np.ndarray
    n_speakers: int


@dataclass
class ScoreSet:
    """Per-trial scores, optionally labeled for evaluation."""

    trials: list = field(default_factory=list)  # list[Trial]
    scores: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(self.trials) != self.scores.shape[0]:
            raise DataError(
                f"{len(self.trials)} trials but {self.scores.shape[0]} scores"
            )

    def labels_as_bool(self) -> np.ndarray:
        """Target/nontarget labels as a boolean array; error if any are missing."""
        labels = np.zeros(len(self.trials), dtype=bool)
        for i, t in enumerate(self.trials):
            if t.label not in ("target", "nontarget"):
                raise DataError(f"trial {i + 1} ({t.enroll_id} {t.test_id}) is unlabeled")
            labels[i] = t.label == "target"
        return labels


def mean_and_cov(x: np.ndarray) -> tuple:
    """Sample mean and biased (1/N) covariance of the rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise DataError(f"need at least 2 vectors to estimate a covariance, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    return mean, symmetrize(centered.T @ centered / n)


def compute_stats(embeddings: EmbeddingSet) -> GaussianStats:
    """Mean and total covariance, accumulated in sorted-utterance-id order.

    Sorting fixes the floating-point summation order, so the result is
    bit-identical under any permutation of the records.
    """
    ordered = embeddings.sorted_by_id()
    mean, cov = mean_and_cov(ordered.x)
    return GaussianStats(len(ordered), mean, cov)


def compute_scatter(embeddings: EmbeddingSet) -> ScatterPair:
    """Between- and within-class scatter of a labeled set.

    Both are normalized by the total utterance count N, and the between
    term weights each speaker mean by its utterance count, so that
    ``between + within`` reproduces the biased total covariance exactly.
    """
    if not embeddings.labeled:
        raise DataError("scatter matrices require a fully labeled embedding set")
    ordered = embeddings.sorted_by_id()
    speakers = sorted(set(ordered.speakers))
    if len(speakers) < 2:
        raise DataError(f"need at least 2 speakers, got {len(speakers)}")
    n, d = ordered.x.shape
    mean = ordered.x.mean(axis=0)
    within = np.zeros((d, d))
    between = np.zeros((d, d))
    for speaker in speakers:
        rows = ordered.x[[s == speaker for s in ordered.speakers]]
        s_mean = rows.mean(axis=0)
        centered = rows - s_mean
        within += centered.T @ centered
        offset = s_mean - mean
        between += rows.shape[0] * np.outer(offset, offset)
    return ScatterPair(symmetrize(between / n), symmetrize(within / n), len(speakers))


# ---------------------------------------------------------------------------
# embedding files


def save_embeddings(embeddings: EmbeddingSet, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#dim {embeddings.dim}\n")
        for utt, speaker, vec in zip(embeddings.ids, embeddings.speakers, embeddings.x):
            _check_token(utt, "utterance id")
            if speaker is not None:
                _check_token(speaker, "speaker id")
            values = " ".join(FLOAT_FMT % v for v in vec)
            f.write(f"{utt} {speaker if speaker is not None else '-'} {values}\n")


def load_embeddings(path) -> EmbeddingSet:
    """Parse an embedding file; malformed rows raise with their line number."""
    ids, speakers, rows = [], [], []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline()
        parts = header.split()
        if len(parts) != 2 or parts[0] != "#dim":
            raise DataError(f"{path}:1: expected '#dim <d>' header, got {header.strip()!r}")
        dim = _parse_int(parts[1], path, 1, "dimension")
        if dim < 1:
            raise DataError(f"{path}:1: dimension must be positive, got {dim}")
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 2 + dim:
                raise DataError(
                    f"{path}:{lineno}: expected {2 + dim} fields "
                    f"(id, speaker, {dim} values), got {len(fields)}"
                )
            ids.append(fields[0])
            speakers.append(None if fields[1] == "-" else fields[1])
            try:
                rows.append([float(v) for v in fields[2:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad float: {exc}") from exc
    x = np.array(rows, dtype=np.float64) if rows else np.zeros((0, dim))
    try:
        return EmbeddingSet(tuple(ids), tuple(speakers), x)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# trial lists and score files


def save_trials(trials, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in trials:
            f.write(f"{t.enroll_id} {t.test_id} {t.label if t.label else '-'}\n")


def load_trials(path) -> list:
    trials = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) not in (2, 3):
                raise DataError(
                    f"{path}:{lineno}: expected '<enroll> <test> [label]', got {len(fields)} fields"
                )
            label = fields[2] if len(fields) == 3 else "-"
            if label not in ("target", "nontarget", "-"):
                raise DataError(f"{path}:{lineno}: bad trial label {label!r}")
            trials.append(Trial(fields[0], fields[1], None if label == "-" else label))
    return trials


def save_scores(score_set: ScoreSet, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for trial, score in zip(score_set.trials, score_set.scores):
            f.write(f"{trial.enroll_id} {trial.test_id} {SCORE_FMT % score}\n")


def load_scores(path) -> ScoreSet:
    trials, scores = [], []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 3:
                raise DataError(
                    f"{path}:{lineno}: expected '<enroll> <test> <score>', got {len(fields)} fields"
                )
            try:
                scores.append(float(fields[2]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad score: {exc}") from exc
            trials.append(Trial(fields[0], fields[1], None))
    return ScoreSet(trials, np.array(scores))


def join_scores_with_trials(score_set: ScoreSet, trials) -> ScoreSet:
    """Attach target/nontarget labels from a trial list to matching scores."""
    labels = {(t.enroll_id, t.test_id): t.label for t in trials}
    joined = []
    for i, t in enumerate(score_set.trials):
        key = (t.enroll_id, t.test_id)
        if key not in labels:
            raise DataError(f"score line {i + 1}: no trial for pair {key[0]} {key[1]}")
        joined.append(Trial(t.enroll_id, t.test_id, labels[key]))
    return ScoreSet(joined, score_set.scores)


# ---------------------------------------------------------------------------
# shared helpers for the line-oriented model formats (see plda.py, lda.py)


def _check_token(value: str, what: str) -> None:
    if not value or any(c.isspace() for c in value):
        raise DataError(f"{what} {value!r} is empty or contains whitespace")


def _parse_int(text: str, path, lineno: int, what: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise DataError(f"{path}:{lineno}: bad {what}: {text!r}") from exc


def write_matrix(f, values: np.ndarray) -> None:
    for row in np.atleast_2d(values):
        f.write(" ".join(FLOAT_FMT % v for v in row) + "\n")


class LineReader:
    """Line cursor with format-aware error messages, for the model files."""

    def __init__(self, path):
        self.path = path
        with open(path, "r", encoding="utf-8") as f:
            self.lines = f.read().splitlines()
        self.pos = 0

    def next_line(self, expect: str | None = None) -> str:
        if self.pos >= len(self.lines):
            raise DataError(f"{self.path}: truncated file (expected {expect or 'more data'})")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect_keyword(self, keyword: str) -> list:
        line = self.next_line(expect=keyword)
        fields = line.split()
        if not fields or fields[0] != keyword:
            raise DataError(
                f"{self.path}:{self.pos}: expected {keyword!r}, got {line.strip()!r}"
            )
        return fields[1:]

    def read_floats(self, count: int, what: str) -> np.ndarray:
        line = self.next_line(expect=what)
        fields = line.split()
        if len(fields) != count:
            raise DataError(
                f"{self.path}:{self.pos}: expected {count} values for {what}, got {len(fields)}"
            )
        try:
            return np.array([float(v) for v in fields])
        except ValueError as exc:
            raise DataError(f"{self.path}:{self.pos}: bad float in {what}: {exc}") from exc

    def read_matrix(self, rows: int, cols: int, what: str) -> np.ndarray:
        return np.vstack([self.read_floats(cols, what) for _ in range(rows)])

    def check_version(self, magic: str, version: str) -> None:
        line = self.next_line(expect=f"{magic} header")
        fields = line.split()
        if len(fields) != 2 or fields[0] != magic:
            raise DataError(f"{self.path}:1: not a {magic} file: {line.strip()!r}")
        if fields[1] != version:
            raise DataError(
                f"{self.path}:1: unsupported {magic} version {fields[1]!r} (expected {version})"
            )
