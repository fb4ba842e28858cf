"""Domain adaptation: feature-space CORAL and model-space CORAL+.

CORAL aligns second-order statistics by whitening with the out-of-domain
covariance root and re-coloring with the in-domain one, both taken as
symmetric (ZCA) roots.  With ``A = Ci^1/2 Co^-1/2`` the toolkit applies
vectors as ``x' = A x`` and covariances as ``A S A.T``, the orientation
under which ``A Co A.T == Ci`` holds exactly.

CORAL+ adapts a fitted PLDA model directly: each covariance is compared
with its pseudo-in-domain transport in the basis that simultaneously
diagonalizes the two, and the per-direction variance surplus of the
in-domain view is added back, scaled by an adaptation weight.  With
regularization the surplus is clipped at zero so adapted variances never
shrink; without it the update is plain interpolation toward the
transported covariance.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .data import EmbeddingSet, mean_and_cov
from .exceptions import DataError
from .linalg import DEFAULT_EIG_FLOOR, inv_sqrt_psd, simdiag, sqrt_psd, symmetrize
from .plda import WITHIN_FLOOR, Plda, floor_spd


@dataclass(frozen=True)
class CoralTransform:
    """Alignment map built from an out-of-domain / in-domain covariance pair."""

    a: np.ndarray
    in_sqrt: np.ndarray
    out_inv_sqrt: np.ndarray

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Map vectors (rows) into the in-domain feature space."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DataError(f"vector dim {x.shape[-1]} does not match transform dim {self.dim}")
        return x @ self.a.T

    def apply_embeddings(self, embeddings: EmbeddingSet) -> EmbeddingSet:
        return embeddings.with_vectors(self.apply(embeddings.x))

    def transport(self, cov: np.ndarray) -> np.ndarray:
        """Pseudo-in-domain image ``A @ cov @ A.T`` of a covariance."""
        cov = symmetrize(cov)
        if cov.shape[0] != self.dim:
            raise DataError(f"matrix dim {cov.shape[0]} does not match transform dim {self.dim}")
        return symmetrize(self.a @ cov @ self.a.T)


def fit_coral(out_cov, in_cov, floor: float = DEFAULT_EIG_FLOOR) -> CoralTransform:
    """Whiten-then-recolor alignment between two covariance matrices.

    Both roots are symmetric (ZCA), so the transformed features stay as
    close as a second-order match allows to the originals.
    """
    out_cov = symmetrize(out_cov)
    in_cov = symmetrize(in_cov)
    if out_cov.shape != in_cov.shape:
        raise DataError(
            f"covariance shapes disagree: {out_cov.shape} vs {in_cov.shape}"
        )
    out_inv_sqrt = inv_sqrt_psd(out_cov, floor=floor, name="out-of-domain covariance")
    in_sqrt = sqrt_psd(in_cov, floor=floor, name="in-domain covariance")
    return CoralTransform(in_sqrt @ out_inv_sqrt, in_sqrt, out_inv_sqrt)


class CoralAligner(BaseEstimator, TransformerMixin):
    """Feature-space CORAL fitted from two sample matrices.

    ``fit(X_out, X_in)`` estimates both covariances; ``transform`` maps
    out-of-domain vectors so their population covariance matches the
    in-domain one.
    """

    def __init__(self, floor: float = DEFAULT_EIG_FLOOR):
        self.floor = floor

    def fit(self, X_out, X_in):
        _, out_cov = mean_and_cov(X_out)
        _, in_cov = mean_and_cov(X_in)
        self.alignment_ = fit_coral(out_cov, in_cov, floor=self.floor)
        self.n_features_in_ = self.alignment_.dim
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "alignment_"):
            raise NotFittedError("this CoralAligner instance is not fitted yet")
        return self.alignment_.apply(X)


@dataclass(frozen=True)
class AdaptationReport:
    """Per-direction variance surplus seen by CORAL+, before clipping.

    ``between``/``within`` hold ``e - 1`` sorted descending, where ``e``
    are the in-domain-to-model variance ratios in the simultaneously
    diagonalized basis; negative entries are the ones regularization
    removes.
    """

    between: np.ndarray
    within: np.ndarray
    clipped_between: int
    clipped_within: int

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for name, values in (("phi_b", self.between), ("phi_w", self.within)):
                for i, v in enumerate(values):
                    f.write(f"{name} {i} {v:.9g} {1 if v < 0 else 0}\n")


def _adapted_covariance(cov, transform, weight, regularize, floor):
    transported = transform.transport(cov)
    basis = simdiag(cov, transported, floor=floor, name="model covariance")
    surplus = basis.e - 1.0
    if regularize:
        surplus = np.maximum(surplus, 0.0)
    update = basis.b_inv.T @ (surplus[:, None] * basis.b_inv)
    return symmetrize(cov + weight * update), basis.e


def coral_plus(
    model: Plda,
    in_cov,
    in_mean=None,
    *,
    beta: float = 0.8,
    gamma: float = 0.8,
    regularize: bool = True,
    eig_floor: float = DEFAULT_EIG_FLOOR,
    recenter: bool = True,
) -> Plda:
    """Unsupervised model-space adaptation of a PLDA backend.

    Parameters
    ----------
    model : Plda
        Out-of-domain model to adapt.
    in_cov : ndarray
        Total covariance of the (unlabeled) in-domain data, in model space.
    in_mean : ndarray, optional
        In-domain mean; required when ``recenter`` is true.
    beta, gamma : float
        Adaptation weights in [0, 1] for the between and within covariance.
    regularize : bool
        Clip negative variance surpluses so uncertainty never decreases.
    recenter : bool
        Move the model mean to ``in_mean`` (mean mismatch is not handled
        by the covariance update).
    """
    for name, value in (("beta", beta), ("gamma", gamma)):
        if not 0.0 <= value <= 1.0:
            raise DataError(f"{name} must be in [0, 1], got {value}")
    in_cov = symmetrize(in_cov)
    if in_cov.shape[0] != model.dim:
        raise DataError(f"in-domain covariance dim {in_cov.shape[0]} != model dim {model.dim}")
    if recenter:
        if in_mean is None:
            raise DataError("recentering requested but no in-domain mean given")
        in_mean = np.asarray(in_mean, dtype=np.float64)
        if in_mean.shape != (model.dim,):
            raise DataError(f"in-domain mean shape {in_mean.shape} != ({model.dim},)")
    transform = fit_coral(model.total(), in_cov, floor=eig_floor)
    between, _ = _adapted_covariance(model.between_, transform, beta, regularize, eig_floor)
    within, _ = _adapted_covariance(model.within_, transform, gamma, regularize, eig_floor)
    within = floor_spd(within, WITHIN_FLOOR, name="adapted within covariance")
    mean = in_mean if recenter else model.mean_
    return Plda.from_params(mean, between, within, within_floor=model.within_floor)


def adaptation_report(model: Plda, in_cov, *, eig_floor: float = DEFAULT_EIG_FLOOR) -> AdaptationReport:
    """Variance-ratio diagnostics of a prospective CORAL+ adaptation."""
    in_cov = symmetrize(in_cov)
    if in_cov.shape[0] != model.dim:
        raise DataError(f"in-domain covariance dim {in_cov.shape[0]} != model dim {model.dim}")
    transform = fit_coral(model.total(), in_cov, floor=eig_floor)
    values = {}
    for key, cov in (("between", model.between_), ("within", model.within_)):
        transported = transform.transport(cov)
        basis = simdiag(cov, transported, floor=eig_floor, name="model covariance")
        values[key] = np.sort(basis.e - 1.0)[::-1]
    return AdaptationReport(
        between=values["between"],
        within=values["within"],
        clipped_between=int(np.sum(values["between"] < 0.0)),
        clipped_within=int(np.sum(values["within"] < 0.0)),
    )


class CoralPlus(BaseEstimator):
    """Estimator-style wrapper: fit in-domain statistics, then adapt models.

    ``fit(X)`` consumes unlabeled in-domain embeddings (already projected
    into model space); ``adapt(model)`` returns the adapted PLDA.
    """

    def __init__(
        self,
        beta: float = 0.8,
        gamma: float = 0.8,
        regularize: bool = True,
        eig_floor: float = DEFAULT_EIG_FLOOR,
        recenter: bool = True,
    ):
        self.beta = beta
        self.gamma = gamma
        self.regularize = regularize
        self.eig_floor = eig_floor
        self.recenter = recenter

    def fit(self, X, y=None):
        self.mean_, self.covariance_ = mean_and_cov(X)
        self.n_features_in_ = self.mean_.shape[0]
        return self

    def _check_fitted(self):
        if not hasattr(self, "covariance_"):
            raise NotFittedError("this CoralPlus instance is not fitted yet")

    def adapt(self, model: Plda) -> Plda:
        self._check_fitted()
        return coral_plus(
            model,
            self.covariance_,
            self.mean_,
            beta=self.beta,
            gamma=self.gamma,
            regularize=self.regularize,
            eig_floor=self.eig_floor,
            recenter=self.recenter,
        )

    def report(self, model: Plda) -> AdaptationReport:
        self._check_fitted()
        return adaptation_report(model, self.covariance_, eig_floor=self.eig_floor)
