"""Monte-Carlo annotator and campaign simulation.

Annotations are sampled from per-image ground-truth distributions under the
proposal-acceptance model: with a proposal visible, an annotator accepts it
outright with probability delta, otherwise answers from the ground truth
(optionally distorted by a per-annotator confusion matrix). Early consensus
stops an image at ``a_cons`` annotations; disagreement escalates it to
``a_full``.

Randomness is fully deterministic: every image gets its own stream derived
from (dataset seed, image id, campaign arm), so per-image parallelism or
reordering cannot change results, and reruns are byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import io
import math
from dataclasses import dataclass

import numpy as np

from .config import CampaignConfig
from .kernels import sample_many
from .labels import (
    AnnotationRecord,
    ClassDistribution,
    ConfusionMatrix,
    ImageLabelSet,
    aggregate,
    kl_divergence,
)
from .postprocessing import DeltaPair, Method, apply_method

# Share of agreeing annotations for an image to count as "near consensus"
# in reports; distinct from the (configurable) early-stopping threshold.
NEAR_CONSENSUS_SHARE = 0.95

ARM_PROPOSAL = "proposal"
ARM_PLAIN = "plain"


@dataclass(frozen=True)
class SyntheticImage:
    image_id: str
    gt: ClassDistribution
    proposal: int

    def __post_init__(self) -> None:
        if not 0 <= self.proposal < self.gt.k:
            raise ValueError(
                f"proposal {self.proposal} out of range for K={self.gt.k}"
            )


@dataclass(frozen=True)
class SyntheticDataset:
    """Images with known ground truth; ``seed`` drives annotation sampling."""

    images: tuple[SyntheticImage, ...]
    k: int
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        if not self.images:
            raise ValueError("dataset must contain at least one image")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        seen = set()
        for img in self.images:
            if img.gt.k != self.k:
                raise ValueError(f"image {img.image_id!r} has K={img.gt.k}, dataset K={self.k}")
            if img.image_id in seen:
                raise ValueError(f"duplicate image_id {img.image_id!r}")
            seen.add(img.image_id)

    def with_seed(self, seed: int) -> "SyntheticDataset":
        """Same images, different annotation-sampling streams."""
        return dataclasses.replace(self, seed=seed)


@dataclass(frozen=True)
class AnnotatorProfile:
    """Simulated annotator: acceptance offset, response noise, and timing.

    Timing defaults approximate 2,000 annotations/hour without proposals
    and 3,000 with.
    """

    annotator_id: str
    delta: float = 0.0
    noise: ConfusionMatrix | None = None
    seconds_per_annotation_no_proposal: float = 1.8
    seconds_per_annotation_proposal: float = 1.2

    def __post_init__(self) -> None:
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if (
            self.seconds_per_annotation_no_proposal <= 0
            or self.seconds_per_annotation_proposal <= 0
        ):
            raise ValueError("per-annotation timings must be positive")


@dataclass(frozen=True)
class CampaignReport:
    per_method_kl: dict[str, float]
    total_annotations: int
    measured_consensus_fraction: float
    measured_speedup: float
    per_image_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "per_method_kl": dict(sorted(self.per_method_kl.items())),
            "total_annotations": self.total_annotations,
            "measured_consensus_fraction": self.measured_consensus_fraction,
            "measured_speedup": self.measured_speedup,
            "per_image_counts": dict(sorted(self.per_image_counts.items())),
        }


def _image_rng(seed: int, image_id: str, arm: str) -> np.random.Generator:
    """Independent stream per (seed, image, arm); stable across platforms."""
    digest = hashlib.blake2b(
        f"{image_id}|{arm}".encode("utf-8"), digest_size=16
    ).digest()
    entropy = np.random.SeedSequence([seed, int.from_bytes(digest, "big")])
    return np.random.default_rng(entropy)


def _cumulative(probs) -> np.ndarray:
    cum = np.cumsum(np.asarray(probs, dtype=float))
    cum[-1] = 1.0  # guards the categorical scan against round-off
    return cum


def _identity_cum(k: int) -> np.ndarray:
    rows = np.zeros((k, k))
    for j in range(k):
        rows[j, j:] = 1.0
    return rows


def _noise_cum(profiles: tuple[AnnotatorProfile, ...], k: int) -> np.ndarray:
    out = np.empty((len(profiles), k, k))
    ident = _identity_cum(k)
    for idx, prof in enumerate(profiles):
        if prof.noise is None:
            out[idx] = ident
        else:
            if prof.noise.k != k:
                raise ValueError(
                    f"annotator {prof.annotator_id!r} noise is K={prof.noise.k}, need {k}"
                )
            out[idx] = np.cumsum(prof.noise.as_array(), axis=1)
            out[idx, :, -1] = 1.0
    return out


def sample_annotation(
    gt: ClassDistribution,
    proposal: int | None,
    profile: AnnotatorProfile,
    rng: np.random.Generator,
) -> int:
    """Draw a single annotation for one image from one annotator."""
    chosen = sample_many(
        _cumulative(gt.probs),
        -1 if proposal is None else proposal,
        np.asarray([profile.delta]),
        _noise_cum((profile,), gt.k),
        1,
        1,
        1.0,
        rng.random((1, 3)),
    )
    return int(chosen[0])


def annotate_image(
    gt: ClassDistribution,
    proposal: int | None,
    profiles,
    a_cons: int,
    a_full: int,
    rng: np.random.Generator,
    *,
    image_id: str = "image",
    batch_id: str = "sim",
    agreement: float = 1.0,
) -> ImageLabelSet:
    """Simulate one image's annotations with early-consensus stopping.

    Annotators take turns round-robin. If the first ``a_cons`` annotations
    reach the agreement threshold the image stops there, otherwise it runs
    to ``a_full``. Record timestamps advance each annotator's private clock
    by their per-annotation seconds.
    """
    profiles = tuple(profiles)
    if not profiles:
        raise ValueError("no annotator profiles")
    if not 1 <= a_cons <= a_full:
        raise ValueError("need 1 <= a_cons <= a_full")
    if proposal is not None and not 0 <= proposal < gt.k:
        raise ValueError(f"proposal {proposal} out of range for K={gt.k}")
    chosen = sample_many(
        _cumulative(gt.probs),
        -1 if proposal is None else proposal,
        np.asarray([p.delta for p in profiles]),
        _noise_cum(profiles, gt.k),
        a_cons,
        a_full,
        agreement,
        rng.random((a_full, 3)),
    )
    clocks = [0.0] * len(profiles)
    records = []
    for i, cls in enumerate(chosen):
        prof = profiles[i % len(profiles)]
        seconds = (
            prof.seconds_per_annotation_proposal
            if proposal is not None
            else prof.seconds_per_annotation_no_proposal
        )
        clocks[i % len(profiles)] += seconds
        records.append(
            AnnotationRecord(
                image_id=image_id,
                annotator_id=prof.annotator_id,
                chosen_class=int(cls),
                proposal_shown=proposal,
                timestamp_ms=int(round(clocks[i % len(profiles)] * 1000.0)),
                batch_id=batch_id,
            )
        )
    return ImageLabelSet(image_id, tuple(records))


def run_campaign(
    data: SyntheticDataset,
    profiles,
    config: CampaignConfig,
    methods,
) -> CampaignReport:
    """Simulate one campaign arm and score the requested methods by KL.

    The arm follows config.use_proposals; methods needing proposals raise
    on a no-proposal arm. Mean KL is taken against each image's ground
    truth, so lower is better.
    """
    profiles = tuple(profiles)
    methods = tuple(Method(m) if isinstance(m, str) else m for m in methods)
    if data.k != config.k:
        raise ValueError(f"dataset K={data.k} but campaign K={config.k}")
    for method in methods:
        if method.needs_proposals and not config.use_proposals:
            raise ValueError(f"{method.value} requires the proposal arm")
    arm = ARM_PROPOSAL if config.use_proposals else ARM_PLAIN

    kl_sums = {method: 0.0 for method in methods}
    per_image_counts: dict[str, int] = {}
    near_consensus = 0
    seconds_plain = 0.0
    seconds_proposal = 0.0
    for img in sorted(data.images, key=lambda im: im.image_id):
        rng = _image_rng(data.seed, img.image_id, arm)
        labels = annotate_image(
            img.gt,
            img.proposal if config.use_proposals else None,
            profiles,
            config.a_cons,
            config.a_full,
            rng,
            image_id=img.image_id,
            agreement=config.agreement_threshold,
        )
        n = len(labels.records)
        per_image_counts[img.image_id] = n
        agg = aggregate(labels, data.k)
        if max(agg.probs) >= NEAR_CONSENSUS_SHARE - 1e-12:
            near_consensus += 1
        for method in methods:
            dist = apply_method(labels, method, config.postprocess)
            kl_sums[method] += kl_divergence(img.gt, dist)
        for i in range(n):
            prof = profiles[i % len(profiles)]
            seconds_plain += prof.seconds_per_annotation_no_proposal
            seconds_proposal += prof.seconds_per_annotation_proposal

    n_images = len(data.images)
    return CampaignReport(
        per_method_kl={m.value: kl_sums[m] / n_images for m in methods},
        total_annotations=sum(per_image_counts.values()),
        measured_consensus_fraction=near_consensus / n_images,
        measured_speedup=seconds_plain / seconds_proposal,
        per_image_counts=per_image_counts,
    )


def simulate_delta_pairs(
    data: SyntheticDataset, profiles, n_annotations: int
) -> list[DeltaPair]:
    """Annotate every image in both arms and pair the empirical
    distributions, the input layout expected by estimate_delta."""
    profiles = tuple(profiles)
    pairs = []
    for img in sorted(data.images, key=lambda im: im.image_id):
        with_proposal = annotate_image(
            img.gt,
            img.proposal,
            profiles,
            n_annotations,
            n_annotations,
            _image_rng(data.seed, img.image_id, ARM_PROPOSAL),
            image_id=img.image_id,
        )
        without_proposal = annotate_image(
            img.gt,
            None,
            profiles,
            n_annotations,
            n_annotations,
            _image_rng(data.seed, img.image_id, ARM_PLAIN),
            image_id=img.image_id,
        )
        pairs.append(
            DeltaPair(
                proposal=img.proposal,
                p_with=aggregate(with_proposal, data.k),
                p_without=aggregate(without_proposal, data.k),
            )
        )
    return pairs


def annotation_cost(n_annotations: int, use_proposals: bool, speedup: float) -> float:
    """Cost in no-proposal annotation units; proposals cost 1/speedup each."""
    if speedup <= 0:
        raise ValueError("speedup must be positive")
    return n_annotations / speedup if use_proposals else float(n_annotations)


def affordable_annotations(budget: float, use_proposals: bool, speedup: float) -> int:
    """Annotations per image affordable for a budget in no-proposal units."""
    if speedup <= 0:
        raise ValueError("speedup must be positive")
    raw = budget * speedup if use_proposals else budget
    n = int(math.floor(raw + 1e-9))
    if n < 1:
        raise ValueError(f"budget {budget} affords no annotations")
    return n


@dataclass(frozen=True)
class SweepPoint:
    use_proposals: bool
    budget: float  # in no-proposal annotation units per image


@dataclass(frozen=True)
class SweepRow:
    use_proposals: bool
    budget: float
    n_annotations: int
    cost: float
    method: str
    mean_kl: float
    consensus_fraction: float
    total_annotations: int


def strategy_sweep(
    data: SyntheticDataset,
    profiles,
    points,
    speedup: float,
    base_config: CampaignConfig,
) -> list[SweepRow]:
    """Equal-cost comparison across proposal strategies.

    Each grid point fixes a per-image budget; the proposal arm converts it
    into more (cheaper) annotations via the speedup. Rows carry mean KL per
    method, ready for CSV plotting.
    """
    points = tuple(points)
    if not points:
        raise ValueError("empty sweep grid")
    rows: list[SweepRow] = []
    for point in points:
        n = affordable_annotations(point.budget, point.use_proposals, speedup)
        config = dataclasses.replace(
            base_config, a_cons=n, a_full=n, use_proposals=point.use_proposals
        )
        methods = (
            (Method.RAW, Method.CLEVERLABEL)
            if point.use_proposals
            else (Method.RAW, Method.BLEND_ONLY)
        )
        report = run_campaign(data, profiles, config, methods)
        for method in methods:
            rows.append(
                SweepRow(
                    use_proposals=point.use_proposals,
                    budget=point.budget,
                    n_annotations=n,
                    cost=annotation_cost(n, point.use_proposals, speedup),
                    method=method.value,
                    mean_kl=report.per_method_kl[method.value],
                    consensus_fraction=report.measured_consensus_fraction,
                    total_annotations=report.total_annotations,
                )
            )
    return rows


SWEEP_CSV_HEADER = (
    "use_proposals,budget,n_annotations,cost,method,mean_kl,"
    "consensus_fraction,total_annotations"
)


def sweep_rows_to_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(SWEEP_CSV_HEADER + "\n")
    for row in rows:
        buf.write(
            f"{str(row.use_proposals).lower()},{row.budget:.6g},"
            f"{row.n_annotations},{row.cost:.6g},{row.method},"
            f"{row.mean_kl:.10g},{row.consensus_fraction:.6g},"
            f"{row.total_annotations}\n"
        )
    return buf.getvalue()


def confusion_from_ground_truth(data: SyntheticDataset) -> ConfusionMatrix:
    """Idealized class-confusion matrix: mean ground truth per majority class.

    The empirical estimate from no-proposal annotations converges to this;
    classes never appearing as a majority keep identity rows.
    """
    sums = np.zeros((data.k, data.k))
    counts = np.zeros(data.k)
    for img in data.images:
        j = int(np.argmax(img.gt.probs))
        sums[j] += img.gt.as_array()
        counts[j] += 1
    rows = []
    for j in range(data.k):
        if counts[j] > 0:
            rows.append(tuple(sums[j] / sums[j].sum()))
        else:
            rows.append(tuple(1.0 if i == j else 0.0 for i in range(data.k)))
    return ConfusionMatrix(tuple(rows))


def generate_graded_dataset(
    k: int,
    n_images: int,
    seed: int,
    *,
    hard_fraction: float = 0.85,
    ambiguity_low: float = 0.5,
    ambiguity_high: float = 0.75,
    proposal_accuracy: float = 0.9,
    id_prefix: str = "img",
) -> SyntheticDataset:
    """Generate a graded-scale dataset: clear images plus boundary cases.

    Models ordinal severity grading: a ``hard_fraction`` of images are
    unambiguous one-hots, the rest sit on the boundary between two adjacent
    grades, with the dominant grade's probability drawn uniformly from
    [ambiguity_low, ambiguity_high]. Wrong proposals (probability
    1 - proposal_accuracy) land on a neighboring grade, the typical failure
    of a proposal network on ordinal data.
    """
    if k < 2 or n_images < 1:
        raise ValueError("need K >= 2 and at least one image")
    if not 0.0 <= hard_fraction <= 1.0:
        raise ValueError("hard_fraction must lie in [0, 1]")
    if not 0.5 <= ambiguity_low <= ambiguity_high < 1.0:
        raise ValueError("need 0.5 <= ambiguity_low <= ambiguity_high < 1")
    rng = _image_rng(seed, "graded-generator", "gen")
    images = []
    for i in range(n_images):
        if rng.random() < hard_fraction:
            best = int(rng.integers(k))
            gt = ClassDistribution.one_hot(best, k)
        else:
            lower = int(rng.integers(k - 1))
            p = ambiguity_low + (ambiguity_high - ambiguity_low) * rng.random()
            probs = [0.0] * k
            probs[lower] = p
            probs[lower + 1] = 1.0 - p
            gt = ClassDistribution(tuple(probs))
            best = lower
        if rng.random() < proposal_accuracy:
            proposal = best
        else:
            proposal = best + 1 if best + 1 < k else best - 1
        images.append(SyntheticImage(f"{id_prefix}-{i:05d}", gt, proposal))
    return SyntheticDataset(tuple(images), k, seed)


def generate_dataset(
    k: int,
    n_images: int,
    seed: int,
    *,
    concentration: float = 1.0,
    proposal_accuracy: float = 0.9,
    max_class_prob: float | None = None,
    id_prefix: str = "img",
) -> SyntheticDataset:
    """Generate a synthetic dataset with Dirichlet ground truths.

    ``concentration`` controls sharpness (small values give near-one-hot
    images, large values ambiguous ones). Proposals point at the most
    likely class with probability ``proposal_accuracy`` and at some other
    class drawn from the remaining mass otherwise. ``max_class_prob``
    rejection-samples images until no class exceeds it, which produces the
    hard, consensus-free images used to study proposal bias.
    """
    if k < 2 or n_images < 1:
        raise ValueError("need K >= 2 and at least one image")
    if max_class_prob is not None and max_class_prob * k <= 1.0:
        raise ValueError("max_class_prob too small for K")
    rng = _image_rng(seed, "dataset-generator", "gen")
    images = []
    for i in range(n_images):
        while True:
            gt = rng.dirichlet(np.full(k, concentration))
            if max_class_prob is None or float(gt.max()) <= max_class_prob:
                break
        dist = ClassDistribution(tuple(gt))
        best = int(np.argmax(gt))
        if rng.random() < proposal_accuracy:
            proposal = best
        else:
            rest = np.delete(np.arange(k), best)
            weights = np.delete(gt, best)
            proposal = int(rng.choice(rest, p=weights / weights.sum()))
        images.append(SyntheticImage(f"{id_prefix}-{i:05d}", dist, proposal))
    return SyntheticDataset(tuple(images), k, seed)
