"""Synthetic domain-mismatch datasets with known generator parameters.

Embeddings are drawn from a linear Gaussian model: a per-speaker offset
with covariance ``phi_b`` plus per-utterance noise with covariance
``phi_w`` around a zero global mean.  In-domain data is additionally
pushed through a random invertible matrix ``M = I + scale * R`` (``R``
scaled to unit spectral norm) and shifted along a random unit vector, so
the second-order mismatch seen by the backend is known exactly.

All randomness comes from :class:`PortableRng`: a counter-based SplitMix64
stream feeding Box-Muller Gaussian pairs in a fixed call order, so a seed
reproduces every dataset bit-exactly regardless of how counts are split
across draws.
"""

from dataclasses import dataclass

import numpy as np

from .data import EmbeddingSet, Trial
from .exceptions import DataError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 2.0**-53


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class PortableRng:
    """Deterministic, seedable random stream with a documented algorithm.

    Output ``i`` (0-based) is ``splitmix64(seed + (i + 1) * golden)``, i.e.
    the SplitMix64 generator evaluated as a pure function of the counter.
    Gaussian variates come from the Box-Muller transform applied to
    consecutive uniform pairs: raw words ``2k`` and ``2k + 1`` form
    ``(u1, u2)`` and yield ``(r cos, r sin)`` in that order.
    """

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self._counter = 0

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return _splitmix(self._seed + idx * _GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` uniforms in [0, 1) with 53-bit resolution."""
        return (self._raw(n) >> np.uint64(11)) * _INV_2_53

    def normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        raw = self._raw(2 * pairs)
        u1 = ((raw[0::2] >> np.uint64(11)) + np.uint64(1)) * _INV_2_53  # (0, 1]
        u2 = (raw[1::2] >> np.uint64(11)) * _INV_2_53  # [0, 1)
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(theta)
        z[1::2] = radius * np.sin(theta)
        return z[:n]

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normal(rows * cols).reshape(rows, cols)

    def choice_without_replacement(self, total: int, count: int) -> np.ndarray:
        """``count`` distinct indices in [0, total), in draw order."""
        if count > total:
            raise DataError(f"cannot draw {count} distinct values from {total}")
        seen = set()
        out = []
        while len(out) < count:
            value = int(self.uniform(1)[0] * total)
            if value not in seen:
                seen.add(value)
                out.append(value)
        return np.array(out, dtype=np.int64)


@dataclass(frozen=True)
class SynthConfig:
    dim: int = 50
    n_speakers_ood: int = 300
    utts_per_speaker_ood: int = 10
    n_unlabeled_in: int = 2000
    n_trial_speakers: int = 100
    utts_per_trial_speaker: int = 8
    domain_shift_scale: float = 0.5
    mean_shift_scale: float = 1.0
    seed: int = 42

    def __post_init__(self):
        if self.dim < 2:
            raise DataError(f"dim must be >= 2, got {self.dim}")
        for name in (
            "n_speakers_ood",
            "utts_per_speaker_ood",
            "n_unlabeled_in",
            "n_trial_speakers",
        ):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be positive")
        if self.n_trial_speakers < 2:
            raise DataError("need at least 2 trial speakers for nontarget trials")
        if self.utts_per_trial_speaker < 2:
            raise DataError("need at least 2 utterances per trial speaker "
                            "(one enrollment, one test)")
        if self.domain_shift_scale < 0 or self.mean_shift_scale < 0:
            raise DataError("shift scales must be non-negative")


@dataclass(frozen=True)
class SynthTruth:
    """Generator ground truth for oracle checks."""

    mu: np.ndarray
    phi_b: np.ndarray
    phi_w: np.ndarray
    shift_matrix: np.ndarray
    mean_shift: np.ndarray


@dataclass(frozen=True)
class SynthData:
    ood: EmbeddingSet
    unlabeled: EmbeddingSet
    enroll: EmbeddingSet
    test: EmbeddingSet
    trials: list
    truth: SynthTruth


def _random_covariance(rng: PortableRng, dim: int, scale: float) -> np.ndarray:
    w = rng.normal_matrix(dim, dim)
    return scale * (w @ w.T / dim + 0.1 * np.eye(dim))


def generate(cfg: SynthConfig) -> SynthData:
    """Draw the four datasets and the trial list for one seed.

    The draw order is fixed (truth matrices, domain shift, speakers, then
    utterances, then trial sampling) and every block is drawn even when
    its scale is zero, so configs differing only in the shift scales see
    identical underlying Gaussian draws.
    """
    rng = PortableRng(cfg.seed)
    d = cfg.dim

    phi_b = _random_covariance(rng, d, 1.0)
    phi_w = _random_covariance(rng, d, 1.0)
    chol_b = np.linalg.cholesky(phi_b)
    chol_w = np.linalg.cholesky(phi_w)

    perturbation = rng.normal_matrix(d, d)
    perturbation /= np.linalg.norm(perturbation, 2)
    shift_matrix = np.eye(d) + cfg.domain_shift_scale * perturbation
    direction = rng.normal(d)
    mean_shift = cfg.mean_shift_scale * direction / np.linalg.norm(direction)

    truth = SynthTruth(np.zeros(d), phi_b, phi_w, shift_matrix, mean_shift)

    def draw_utterances(n_speakers: int, utts_each: int) -> np.ndarray:
        latents = rng.normal_matrix(n_speakers, d) @ chol_b.T
        noise = rng.normal_matrix(n_speakers * utts_each, d) @ chol_w.T
        return np.repeat(latents, utts_each, axis=0) + noise

    def to_in_domain(x: np.ndarray) -> np.ndarray:
        return x @ shift_matrix.T + mean_shift

    ood_x = draw_utterances(cfg.n_speakers_ood, cfg.utts_per_speaker_ood)
    ood = EmbeddingSet(
        tuple(
            f"ood-s{s:04d}-u{u:03d}"
            for s in range(cfg.n_speakers_ood)
            for u in range(cfg.utts_per_speaker_ood)
        ),
        tuple(
            f"oodspk{s:04d}"
            for s in range(cfg.n_speakers_ood)
            for _ in range(cfg.utts_per_speaker_ood)
        ),
        ood_x,
    )

    # fresh speaker per unlabeled cut: the marginal covariance is exactly
    # M (phi_b + phi_w) M^T
    unlabeled_x = to_in_domain(draw_utterances(cfg.n_unlabeled_in, 1))
    unlabeled = EmbeddingSet(
        tuple(f"unl-{i:06d}" for i in range(cfg.n_unlabeled_in)),
        (None,) * cfg.n_unlabeled_in,
        unlabeled_x,
    )

    trial_x = to_in_domain(
        draw_utterances(cfg.n_trial_speakers, cfg.utts_per_trial_speaker)
    )
    utts = cfg.utts_per_trial_speaker
    enroll_rows = [s * utts for s in range(cfg.n_trial_speakers)]
    test_rows = [
        s * utts + u for s in range(cfg.n_trial_speakers) for u in range(1, utts)
    ]
    speaker_names = [f"trialspk{s:04d}" for s in range(cfg.n_trial_speakers)]
    enroll = EmbeddingSet(
        tuple(f"enr-s{s:04d}" for s in range(cfg.n_trial_speakers)),
        tuple(speaker_names),
        trial_x[enroll_rows],
    )
    test = EmbeddingSet(
        tuple(
            f"tst-s{s:04d}-u{u:03d}"
            for s in range(cfg.n_trial_speakers)
            for u in range(1, utts)
        ),
        tuple(
            speaker_names[s]
            for s in range(cfg.n_trial_speakers)
            for _ in range(1, utts)
        ),
        trial_x[test_rows],
    )

    trials = [
        Trial(enroll.ids[s], test.ids[s * (utts - 1) + u], "target")
        for s in range(cfg.n_trial_speakers)
        for u in range(utts - 1)
    ]
    n_targets = len(trials)
    # nontarget candidates: enroll speaker s versus any test cut of another
    # speaker, enumerated as s * (n_test) + test_row
    n_test = len(test)
    candidates = []
    for s in range(cfg.n_trial_speakers):
        for j in range(n_test):
            if test.speakers[j] != speaker_names[s]:
                candidates.append((s, j))
    picks = rng.choice_without_replacement(len(candidates), n_targets)
    trials.extend(
        Trial(enroll.ids[candidates[p][0]], test.ids[candidates[p][1]], "nontarget")
        for p in picks
    )
    return SynthData(ood, unlabeled, enroll, test, trials, truth)
