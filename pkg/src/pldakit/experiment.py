"""End-to-end comparison of adaptation strategies on one dataset.

Reproduces the standard protocol: LDA and the CORAL alignment are both
derived from the raw out-of-domain embeddings, PLDA is trained on the
projected vectors, and the in-domain trials are scored by four backends:
the unadapted model, a model retrained on CORAL-transformed features, and
the CORAL+ adaptation with and without regularization.
"""

from dataclasses import dataclass

import numpy as np

from .adapt import CoralAligner, CoralPlus
from .data import EmbeddingSet, compute_stats
from .lda import LdaReducer
from .metrics import DcfParams, eer, min_dcf
from .plda import Plda
from .synth import SynthConfig, generate


@dataclass(frozen=True)
class ArmResult:
    system: str
    eer: float
    min_dcf: float


@dataclass(frozen=True)
class ExperimentResult:
    arms: tuple

    def arm(self, system: str) -> ArmResult:
        for a in self.arms:
            if a.system == system:
                return a
        raise KeyError(system)

    def table(self) -> str:
        width = max(len(a.system) for a in self.arms)
        lines = [f"{'system':<{width}}  EER(%)  minDCF"]
        for a in self.arms:
            lines.append(f"{a.system:<{width}}  {100 * a.eer:6.2f}  {a.min_dcf:.3f}")
        return "\n".join(lines)


def _evaluate(model: Plda, enroll: EmbeddingSet, test: EmbeddingSet, trials, dcf: DcfParams):
    scored = model.score_trials(enroll, test, trials)
    labels = scored.labels_as_bool()
    return eer(scored.scores, labels), min_dcf(scored.scores, labels, dcf)


def run_experiment(
    cfg: SynthConfig = SynthConfig(),
    lda_dim: int = 20,
    beta: float = 0.8,
    gamma: float = 0.8,
    dcf: DcfParams = DcfParams(),
) -> ExperimentResult:
    data = generate(cfg)

    lda = LdaReducer(n_components=lda_dim).fit_embeddings(data.ood)
    ood_projected = lda.transform_embeddings(data.ood)
    ood_model = Plda().fit_embeddings(ood_projected)

    enroll = lda.transform_embeddings(data.enroll)
    test = lda.transform_embeddings(data.test)

    # feature-space baseline: align raw vectors, reuse the raw-fit LDA
    aligner = CoralAligner().fit(data.ood.x, data.unlabeled.x)
    coral_set = lda.transform_embeddings(
        data.ood.with_vectors(aligner.transform(data.ood.x))
    )
    coral_model = Plda().fit_embeddings(coral_set)

    # model-space adaptation: in-domain statistics in PLDA (post-LDA) space
    stats = compute_stats(lda.transform_embeddings(data.unlabeled))

    def adapted(regularize: bool) -> Plda:
        return coral_plus(
            ood_model, stats.total_cov, stats.mean,
            beta=beta, gamma=gamma, regularize=regularize,
        )

    arms = []
    for system, model in (
        ("OOD PLDA", ood_model),
        ("CORAL PLDA", coral_model),
        ("CORAL+ PLDA", adapted(True)),
        ("CORAL+ w/o reg", adapted(False)),
    ):
        arm_eer, arm_dcf = _evaluate(model, enroll, test, data.trials, dcf)
        arms.append(ArmResult(system, arm_eer, arm_dcf))
    return ExperimentResult(tuple(arms))
