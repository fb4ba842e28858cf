"""Supervised linear dimensionality reduction applied before PLDA."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import data as dataio
from .data import EmbeddingSet, compute_scatter
from .exceptions import DataError
from .linalg import simdiag

LDA_MAGIC = "lda-transform"
LDA_VERSION = "v1"


class LdaReducer(BaseEstimator, TransformerMixin):
    """Class-separating linear projection from scatter matrices.

    The projection rows are the leading generalized eigenvectors of the
    between-class scatter against the (shrunk) within-class scatter, so in
    the projected space the within-class scatter is the identity and the
    between-class scatter is diagonal with decreasing entries.

    Parameters
    ----------
    n_components : int
        Output dimension; at most ``min(dim, n_speakers - 1)``.
    shrinkage : float
        Diagonal loading of the within scatter, ``shrinkage * tr(Sw)/d``,
        guarding against singular scatter from small speaker sets.
    """

    def __init__(self, n_components: int, shrinkage: float = 1e-6):
        self.n_components = n_components
        self.shrinkage = shrinkage

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        labels = [str(v) for v in y]
        if X.ndim != 2 or X.shape[0] != len(labels):
            raise DataError("X must be (n, d) with one label per row")
        ids = [f"r{i:09d}" for i in range(X.shape[0])]
        return self.fit_embeddings(EmbeddingSet(tuple(ids), tuple(labels), X))

    def fit_embeddings(self, embeddings: EmbeddingSet):
        if not embeddings.labeled:
            raise DataError("LDA requires speaker labels on every record")
        scatter = compute_scatter(embeddings)
        d = embeddings.dim
        max_out = min(d, scatter.n_speakers - 1)
        if not 1 <= self.n_components <= max_out:
            raise DataError(
                f"n_components={self.n_components} out of range: must be in "
                f"[1, {max_out}] for dim {d} and {scatter.n_speakers} speakers"
            )
        shrunk = scatter.within + (
            self.shrinkage * np.trace(scatter.within) / d
        ) * np.eye(d)
        basis = simdiag(shrunk, scatter.between, name="within scatter")
        self.mean_ = embeddings.sorted_by_id().x.mean(axis=0)
        self.projection_ = basis.b[:, : self.n_components].T
        self.eigenvalues_ = basis.e[: self.n_components]
        self.n_features_in_ = d
        return self

    def _check_fitted(self):
        if not hasattr(self, "projection_"):
            raise NotFittedError("this LdaReducer instance is not fitted yet")

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"input dim {X.shape[1]} does not match fitted dim {self.n_features_in_}"
            )
        return (X - self.mean_) @ self.projection_.T

    def transform_embeddings(self, embeddings: EmbeddingSet) -> EmbeddingSet:
        """Project a whole set, keeping ids and labels."""
        return embeddings.with_vectors(self.transform(embeddings.x))

    def save(self, path) -> None:
        self._check_fitted()
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{LDA_MAGIC} {LDA_VERSION}\n")
            f.write(f"in_dim {self.n_features_in_}\n")
            f.write(f"out_dim {self.projection_.shape[0]}\n")
            f.write("mean " + " ".join(dataio.FLOAT_FMT % v for v in self.mean_) + "\n")
            f.write("projection\n")
            dataio.write_matrix(f, self.projection_)

    @classmethod
    def load(cls, path) -> "LdaReducer":
        reader = dataio.LineReader(path)
        reader.check_version(LDA_MAGIC, LDA_VERSION)
        dims = {}
        for key in ("in_dim", "out_dim"):
            fields = reader.expect_keyword(key)
            if len(fields) != 1:
                raise DataError(f"{path}: malformed {key} line")
            dims[key] = dataio._parse_int(fields[0], path, reader.pos, key)
        mean_fields = reader.expect_keyword("mean")
        if len(mean_fields) != dims["in_dim"]:
            raise DataError(
                f"{path}: expected {dims['in_dim']} mean values, got {len(mean_fields)}"
            )
        reader.expect_keyword("projection")
        projection = reader.read_matrix(dims["out_dim"], dims["in_dim"], "projection")
        model = cls(n_components=dims["out_dim"])
        model.mean_ = np.array([float(v) for v in mean_fields])
        model.projection_ = projection
        model.eigenvalues_ = None
        model.n_features_in_ = dims["in_dim"]
        return model
