"""Two-covariance PLDA: training, verification scoring, serialization.

The model is a Gaussian over embeddings whose covariance splits into a
between-speaker part and a within-speaker part.  A verification trial is
scored as the natural-log likelihood ratio between "same speaker" (the two
embeddings share the between-speaker draw) and "different speakers" (they
are independent).

The joint same-speaker covariance has the block form ``[[C, B], [B, C]]``
with ``C = B + W``.  Rotating a pair ``(u, v)`` into sum/difference
coordinates block-diagonalizes it into ``C + B`` and ``C - B = W``, which
is what the scoring kernel precomputes; each trial then costs O(d) after a
one-off O(d^3) setup.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import data as dataio
from .data import EmbeddingSet, ScoreSet, Trial, compute_scatter
from .exceptions import DataError, DegenerateMatrixError
from .linalg import eigh, symmetrize

MODEL_MAGIC = "plda-model"
MODEL_VERSION = "v1"

# Relative floor applied to the within covariance after training/adaptation.
WITHIN_FLOOR = 1e-8


def floor_spd(m: np.ndarray, floor: float, name: str = "matrix") -> np.ndarray:
    """Raise eigenvalues below ``floor * lambda_max`` so the matrix is SPD."""
    values, vectors = eigh(m, name=name)
    if values[0] <= 0.0:
        raise DegenerateMatrixError(f"{name} has no positive eigenvalue")
    floored = np.maximum(values, floor * values[0])
    return symmetrize((vectors * floored) @ vectors.T)


class Plda(BaseEstimator):
    """Two-covariance PLDA backend.

    Parameters
    ----------
    within_floor : float
        Relative eigenvalue floor applied to the within-speaker covariance
        after moment estimation, keeping scoring well posed when some
        speakers contribute few utterances.

    Attributes (after fit)
    ----------------------
    mean_ : ndarray, shape (d,)
    between_ : ndarray, shape (d, d)
    within_ : ndarray, shape (d, d)
    """

    def __init__(self, within_floor: float = WITHIN_FLOOR):
        self.within_floor = within_floor

    # -- estimation ---------------------------------------------------

    def fit(self, X, y):
        """Moment-based estimation from labeled embeddings.

        ``y`` holds one speaker label per row of ``X``.  Requires at least
        two speakers and at least one speaker with two or more utterances
        (otherwise the within covariance is degenerate).
        """
        X = np.asarray(X, dtype=np.float64)
        labels = [str(v) for v in y]
        if X.ndim != 2 or X.shape[0] != len(labels):
            raise DataError("X must be (n, d) with one label per row")
        ids = [f"r{i:09d}" for i in range(X.shape[0])]
        embeddings = EmbeddingSet(tuple(ids), tuple(labels), X)
        return self.fit_embeddings(embeddings)

    def fit_embeddings(self, embeddings: EmbeddingSet):
        """Like :meth:`fit` but with deterministic utterance-id ordering."""
        if not embeddings.labeled:
            raise DataError("PLDA training requires speaker labels on every record")
        counts = {}
        for s in embeddings.speakers:
            counts[s] = counts.get(s, 0) + 1
        if len(counts) < 2:
            raise DataError(f"need at least 2 speakers, got {len(counts)}")
        if max(counts.values()) < 2:
            raise DataError(
                "every speaker has a single utterance; "
                "within-speaker covariance cannot be estimated"
            )
        scatter = compute_scatter(embeddings)
        self.mean_ = embeddings.sorted_by_id().x.mean(axis=0)
        self.between_ = scatter.between
        self.within_ = floor_spd(scatter.within, self.within_floor, name="within covariance")
        self.n_features_in_ = embeddings.dim
        return self

    @classmethod
    def from_params(cls, mean, between, within, within_floor: float = WITHIN_FLOOR) -> "Plda":
        """Assemble a model directly from its parameters (no flooring applied)."""
        model = cls(within_floor=within_floor)
        model.mean_ = np.asarray(mean, dtype=np.float64)
        model.between_ = symmetrize(between)
        model.within_ = symmetrize(within)
        if model.between_.shape[0] != model.dim or model.within_.shape[0] != model.dim:
            raise DataError("mean and covariance dimensions disagree")
        model.n_features_in_ = model.dim
        return model

    # -- accessors ----------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "mean_"):
            raise NotFittedError("this Plda instance is not fitted yet")

    @property
    def dim(self) -> int:
        self._check_fitted()
        return int(self.mean_.shape[0])

    def total(self) -> np.ndarray:
        """Total covariance: between + within."""
        self._check_fitted()
        return symmetrize(self.between_ + self.within_)

    # -- scoring ------------------------------------------------------

    def scorer(self) -> "_ScoringKernel":
        """Precompute the factorizations shared by every trial."""
        self._check_fitted()
        return _ScoringKernel(self.mean_, self.between_, self.within_)

    def llr(self, x1, x2) -> float:
        """Log-likelihood-ratio score for a single pair of embeddings."""
        return self.scorer().llr(x1, x2)

    def score_trials(self, enroll: EmbeddingSet, test: EmbeddingSet, trials) -> ScoreSet:
        """Score a trial list against enrollment and test sets.

        Every trial id must resolve; per-embedding projections are
        precomputed so each trial costs O(d).
        """
        kernel = self.scorer()
        if enroll.dim != self.dim or test.dim != self.dim:
            raise DataError(
                f"embedding dim {enroll.dim}/{test.dim} does not match model dim {self.dim}"
            )
        e_proj = kernel.project(enroll.x)
        t_proj = kernel.project(test.x)
        e_index = {utt: i for i, utt in enumerate(enroll.ids)}
        t_index = {utt: i for i, utt in enumerate(test.ids)}
        scores = np.zeros(len(trials))
        out_trials = []
        for k, trial in enumerate(trials):
            if trial.enroll_id not in e_index:
                raise DataError(f"trial {k + 1}: unknown enroll id {trial.enroll_id!r}")
            if trial.test_id not in t_index:
                raise DataError(f"trial {k + 1}: unknown test id {trial.test_id!r}")
            scores[k] = kernel.llr_projected(
                e_proj, e_index[trial.enroll_id], t_proj, t_index[trial.test_id]
            )
            out_trials.append(Trial(trial.enroll_id, trial.test_id, trial.label))
        return ScoreSet(out_trials, scores)

    # -- persistence ----------------------------------------------------

    def save(self, path) -> None:
        self._check_fitted()
        d = self.dim
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{MODEL_MAGIC} {MODEL_VERSION}\n")
            f.write(f"dim {d}\n")
            f.write("mu " + " ".join(dataio.FLOAT_FMT % v for v in self.mean_) + "\n")
            f.write("phi_b\n")
            dataio.write_matrix(f, self.between_)
            f.write("phi_w\n")
            dataio.write_matrix(f, self.within_)

    @classmethod
    def load(cls, path) -> "Plda":
        reader = dataio.LineReader(path)
        reader.check_version(MODEL_MAGIC, MODEL_VERSION)
        dim_fields = reader.expect_keyword("dim")
        if len(dim_fields) != 1:
            raise DataError(f"{path}: malformed dim line")
        dim = dataio._parse_int(dim_fields[0], path, reader.pos, "dimension")
        mu_fields = reader.expect_keyword("mu")
        if len(mu_fields) != dim:
            raise DataError(f"{path}: expected {dim} mean values, got {len(mu_fields)}")
        mean = np.array([float(v) for v in mu_fields])
        reader.expect_keyword("phi_b")
        between = reader.read_matrix(dim, dim, "phi_b")
        reader.expect_keyword("phi_w")
        within = reader.read_matrix(dim, dim, "phi_w")
        return cls.from_params(mean, between, within)


@dataclass
class _Factor:
    """Whitening factor ``K`` with ``K @ K.T == M^-1`` plus ``log det M``."""

    matrix: np.ndarray
    log_det: float


class _ScoringKernel:
    """Factorized quadratic forms for the two-covariance LLR."""

    def __init__(self, mean, between, within):
        self.mean = np.asarray(mean, dtype=np.float64)
        c = symmetrize(np.asarray(between) + np.asarray(within))
        self.k_sum = self._inv_factor(symmetrize(c + between), "total + between covariance")
        self.k_diff = self._inv_factor(within, "within covariance")
        self.k_marg = self._inv_factor(c, "total covariance")
        # the (2 pi)^d terms of the joint and the two marginals cancel exactly
        self.offset = (
            -0.5 * self.k_sum.log_det - 0.5 * self.k_diff.log_det + self.k_marg.log_det
        )

    @staticmethod
    def _inv_factor(m, name):
        values, vectors = eigh(m, name=name)
        if values[-1] <= 0.0:
            raise DegenerateMatrixError(
                f"model invalid: {name} is not positive definite "
                f"(min eigenvalue {values[-1]:.3e})"
            )
        return _Factor(vectors / np.sqrt(values), float(np.sum(np.log(values))))

    def project(self, x: np.ndarray) -> dict:
        """Per-embedding projections and squared norms reused across trials."""
        centered = np.atleast_2d(np.asarray(x, dtype=np.float64)) - self.mean
        proj = {}
        for key, factor in (("sum", self.k_sum), ("diff", self.k_diff), ("marg", self.k_marg)):
            p = centered @ factor.matrix
            proj[key] = p
            proj[key + "_sq"] = np.einsum("ij,ij->i", p, p)
        return proj

    def llr_projected(self, e_proj: dict, i: int, t_proj: dict, j: int) -> float:
        sum_term = (
            e_proj["sum_sq"][i]
            + 2.0 * float(np.dot(e_proj["sum"][i], t_proj["sum"][j]))
            + t_proj["sum_sq"][j]
        )
        diff_term = (
            e_proj["diff_sq"][i]
            - 2.0 * float(np.dot(e_proj["diff"][i], t_proj["diff"][j]))
            + t_proj["diff_sq"][j]
        )
        marg_term = e_proj["marg_sq"][i] + t_proj["marg_sq"][j]
        return float(-0.25 * sum_term - 0.25 * diff_term + 0.5 * marg_term + self.offset)

    def llr(self, x1, x2) -> float:
        x1 = np.asarray(x1, dtype=np.float64).reshape(-1)
        x2 = np.asarray(x2, dtype=np.float64).reshape(-1)
        if x1.shape[0] != self.mean.shape[0] or x2.shape[0] != self.mean.shape[0]:
            raise DataError(
                f"embedding dims {x1.shape[0]}/{x2.shape[0]} do not match "
                f"model dim {self.mean.shape[0]}"
            )
        p1 = self.project(x1)
        p2 = self.project(x2)
        return self.llr_projected(p1, 0, p2, 0)
