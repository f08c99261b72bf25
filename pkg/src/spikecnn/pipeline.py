"""Layer-wise training orchestration, evaluation, and the control matrix.

Stages (filters -> discovery -> classifier) run strictly in order; each
stage's output is frozen to float32 before the next stage consumes it, and
the archive checkpoint written after each stage lets a run resume from any
completed stage with bit-identical results.

Seeding: one master seed; every stage derives its own generator from
(seed, stage tag), and every per-image encoding from (seed, stage tag,
image index), so stages and images are independently reproducible.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import classifier as clf
from .archive import (
    STAGE_CLASSIFIER,
    STAGE_DISCOVERY,
    STAGE_FILTERS,
    STAGE_ORDER,
    ModelArchive,
    load_model,
    save_model,
)
from .config import RunConfig, parse_noise_spec, serialize_config
from .convnet import convolve_spiking, max_pool
from .dataio import (
    LabeledDataset,
    add_gaussian_noise,
    add_salt_pepper,
    extract_patches,
    load_idx,
    normalize_zero_mean_unit_std,
)
from .discovery import CorrelationReport, DiscoveryLayer, extract_features, train_discovery
from .errors import ConfigError, DegenerateInputError
from .sailnet import FilterBank, IterationDiagnostics, SailnetConfig, train_filters
from .spike import encode_poisson

# stage tags for seed derivation
SEED_FILTERS = 1
SEED_DISCOVERY_ENCODE = 2
SEED_DISCOVERY_TRAIN = 3
SEED_FEATURES_ENCODE = 4
SEED_SVM = 5
SEED_EVAL_ENCODE = 6
SEED_EVAL_NOISE = 7

# cache pooled spike trains in RAM only below this footprint
SPIKE_CACHE_BUDGET_BYTES = 1_200_000_000


def stage_rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag])


def image_rng(seed: int, tag: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag, index])


@dataclass
class EvalReport:
    noise: str
    accuracy: float
    n_images: int
    confusion: np.ndarray  # (10, 10) rows = true, cols = predicted


@dataclass
class RunReport:
    filter_diagnostics: list[IterationDiagnostics] = field(default_factory=list)
    correlation_reports: list[CorrelationReport] = field(default_factory=list)


def load_dataset(config: RunConfig, which: str) -> LabeledDataset:
    if which == "train":
        paths = (config.train_images, config.train_labels)
    else:
        paths = (config.test_images, config.test_labels)
    if not paths[0] or not paths[1]:
        raise ConfigError(f"no {which} dataset paths configured")
    return load_idx(*paths)


def sailnet_config(config: RunConfig) -> SailnetConfig:
    return SailnetConfig(
        n_filters=config.D, patch_size=config.p, alpha=config.alpha,
        beta=config.beta, gamma=config.gamma, rho=config.rho,
        steps=config.T, tau=config.tau,
    )


def collect_patches(images: np.ndarray, config: RunConfig) -> np.ndarray:
    """Normalize each image and enumerate its overlapped patches, stacked."""
    per_image = []
    for img in images:
        values, _ = extract_patches(normalize_zero_mean_unit_std(img), config.p)
        per_image.append(values.reshape(-1, config.p * config.p))
    return np.concatenate(per_image)


def encode_pooled(image: np.ndarray, bank: FilterBank, config: RunConfig,
                  rng: np.random.Generator) -> np.ndarray:
    """Intensity image -> Poisson spikes -> convolution -> pooled (N, T) trains."""
    spikes = encode_poisson(image, config.T, rng)
    maps = convolve_spiking(spikes, bank, stride=config.l_c,
                            theta_conv=config.theta_conv, tau=config.tau)
    return max_pool(maps, config.l_p).flatten()


def apply_noise(image: np.ndarray, noise_spec: str, rng: np.random.Generator) -> np.ndarray:
    parsed = parse_noise_spec(noise_spec)
    if parsed is None:
        return image
    kind, level = parsed
    if kind == "gauss":
        return add_gaussian_noise(image, level, rng)
    return add_salt_pepper(image, level, rng)


def discovery_layer_from(config: RunConfig, weights: np.ndarray) -> DiscoveryLayer:
    return DiscoveryLayer(
        weights=np.asarray(weights, dtype=np.float64),
        neuron_model=config.neuron_model,
        stdp_rule=config.stdp_rule,
        theta_h=config.theta_h,
        theta_p=config.theta_p,
        a_plus=config.a_plus,
        a_minus=config.a_minus,
        ltp_window=config.epsilon,
        tau=config.tau,
        stochastic_gate=config.stochastic_gate,
        balance_rate=config.balance_rate,
    )


def freeze_svm(model: clf.SvmModel) -> clf.SvmModel:
    """Round the trained head to its persisted float32 values."""
    as_stored = lambda a: a.astype(np.float32).astype(np.float64)
    return clf.SvmModel(
        weights=as_stored(model.weights), mean=as_stored(model.mean),
        std=as_stored(model.std), lam=model.lam, feature_mode=model.feature_mode,
    )


# ---------------------------------------------------------------------------
# stages

def stage_train_filters(config: RunConfig, dataset: LabeledDataset,
                        report: RunReport | None = None) -> FilterBank:
    n = min(config.filter_images, len(dataset))
    if n == 0:
        raise DegenerateInputError("no images available for filter training")
    patches = collect_patches(dataset.images[:n], config)
    bank, diagnostics = train_filters(
        patches, sailnet_config(config), config.filter_iterations,
        stage_rng(config.seed, SEED_FILTERS),
    )
    if report is not None:
        report.filter_diagnostics = diagnostics
    return bank


def pooled_spike_provider(config: RunConfig, bank: FilterBank,
                          images: np.ndarray, seed_tag: int):
    """Per-index pooled spike trains, cached in RAM when they fit.

    Each image's Poisson draw comes from its own (seed, tag, index) stream,
    so a cached array and on-the-fly regeneration are interchangeable.
    """
    n = len(images)
    pr, pc = config.pooled_shape
    footprint = n * config.D * pr * pc * config.T
    make = lambda i: encode_pooled(
        images[i], bank, config, image_rng(config.seed, seed_tag, i))
    if footprint <= SPIKE_CACHE_BUDGET_BYTES:
        cache = np.stack([make(i) for i in range(n)])
        return cache.__getitem__
    return make


def stage_train_discovery(config: RunConfig, bank: FilterBank,
                          dataset: LabeledDataset,
                          report: RunReport | None = None) -> np.ndarray:
    n = min(config.discovery_images, len(dataset))
    provider = pooled_spike_provider(config, bank, dataset.images[:n],
                                     SEED_DISCOVERY_ENCODE)
    rng = stage_rng(config.seed, SEED_DISCOVERY_TRAIN)
    layer = DiscoveryLayer.initial(
        config.H, config.n_discovery_inputs, rng,
        neuron_model=config.neuron_model, stdp_rule=config.stdp_rule,
        theta_h=config.theta_h, theta_p=config.theta_p, a_plus=config.a_plus,
        a_minus=config.a_minus, ltp_window=config.epsilon, tau=config.tau,
        stochastic_gate=config.stochastic_gate, balance_rate=config.balance_rate,
    )
    reports = train_discovery(layer, provider, config.discovery_iterations,
                              rng, n_images=n)
    if report is not None:
        report.correlation_reports = reports
    return layer.weights.astype(np.float32)


def compute_features(config: RunConfig, bank: FilterBank,
                     discovery_weights: np.ndarray, images: np.ndarray,
                     seed_tag: int, noise_spec: str = "none",
                     noise_tag: int = SEED_EVAL_NOISE,
                     workers: int = 1) -> np.ndarray:
    """Per-image feature vectors: encode -> convolve -> pool -> accumulate."""
    w = np.asarray(discovery_weights, dtype=np.float64)
    n = len(images)
    if workers > 1 and n > 1:
        ctx = _WorkerContext(config, bank, w, seed_tag, noise_spec, noise_tag)
        chunks = np.array_split(np.arange(n), min(workers * 4, n))
        with ProcessPoolExecutor(max_workers=workers, initializer=_worker_init,
                                 initargs=(ctx,)) as pool:
            parts = list(pool.map(_worker_features,
                                  [(idx, images[idx]) for idx in chunks]))
        return np.concatenate(parts)
    out = np.empty((n, w.shape[0]))
    for i in range(n):
        out[i] = _one_feature(config, bank, w, images[i], i, seed_tag,
                              noise_spec, noise_tag)
    return out


def _one_feature(config, bank, weights, image, index, seed_tag, noise_spec,
                 noise_tag) -> np.ndarray:
    if noise_spec != "none":
        image = apply_noise(image, noise_spec,
                            image_rng(config.seed, noise_tag, index))
    pooled = encode_pooled(image, bank, config,
                           image_rng(config.seed, seed_tag, index))
    return extract_features(weights, pooled)


@dataclass
class _WorkerContext:
    config: RunConfig
    bank: FilterBank
    weights: np.ndarray
    seed_tag: int
    noise_spec: str
    noise_tag: int


_WORKER_CTX: _WorkerContext | None = None


def _worker_init(ctx: _WorkerContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker_features(job) -> np.ndarray:
    indices, images = job
    ctx = _WORKER_CTX
    out = np.empty((len(indices), ctx.weights.shape[0]))
    for k, (i, img) in enumerate(zip(indices, images)):
        out[k] = _one_feature(ctx.config, ctx.bank, ctx.weights, img, int(i),
                              ctx.seed_tag, ctx.noise_spec, ctx.noise_tag)
    return out


def stage_train_classifier(config: RunConfig, bank: FilterBank,
                           discovery_weights: np.ndarray,
                           dataset: LabeledDataset) -> clf.SvmModel:
    n = min(config.classifier_images, len(dataset))
    features = compute_features(config, bank, discovery_weights,
                                dataset.images[:n], SEED_FEATURES_ENCODE,
                                workers=config.workers)
    model = clf.train_svm(
        features, dataset.labels[:n],
        clf.SvmConfig(lam=config.svm_lambda, epochs=config.svm_epochs,
                      feature_mode=config.feature_mode),
        stage_rng(config.seed, SEED_SVM),
    )
    return freeze_svm(model)


# ---------------------------------------------------------------------------
# orchestration

def run_layerwise(config: RunConfig, dataset: LabeledDataset | None = None,
                  out_path: str | None = None, resume: bool = True,
                  report: RunReport | None = None) -> ModelArchive:
    """Run all training stages, checkpointing after each one.

    If `out_path` exists and `resume` is true, completed stages load from it
    (their weights come back bit-identical) and only the remainder trains.
    A checkpoint with a different config is refused.
    """
    if dataset is None:
        dataset = load_dataset(config, "train")
    archive = ModelArchive(config=config)
    if resume and out_path and os.path.exists(out_path):
        archive = load_model(out_path)
        if serialize_config(archive.config) != serialize_config(config):
            raise ConfigError(
                f"checkpoint {out_path} was trained with a different config; "
                "pass resume=False to overwrite"
            )

    def checkpoint():
        if out_path:
            save_model(archive, out_path)

    if not archive.has_stage(STAGE_FILTERS):
        archive.filters = stage_train_filters(config, dataset, report)
        archive.mark_complete(STAGE_FILTERS)
        checkpoint()
    if not archive.has_stage(STAGE_DISCOVERY):
        archive.require_stage(STAGE_FILTERS)
        archive.discovery_weights = stage_train_discovery(
            config, archive.filters, dataset, report)
        archive.mark_complete(STAGE_DISCOVERY)
        checkpoint()
    if not archive.has_stage(STAGE_CLASSIFIER):
        archive.require_stage(STAGE_DISCOVERY)
        archive.svm = stage_train_classifier(
            config, archive.filters, archive.discovery_weights, dataset)
        archive.mark_complete(STAGE_CLASSIFIER)
        checkpoint()
    return archive


def evaluate(archive: ModelArchive, dataset: LabeledDataset,
             noise_spec: str = "none", workers: int | None = None) -> EvalReport:
    """Accuracy and confusion over a labeled dataset, with optional noise."""
    archive.require_stage(STAGE_CLASSIFIER)
    config = archive.config
    if len(dataset) == 0:
        raise DegenerateInputError("empty evaluation dataset")
    n = len(dataset) if config.eval_images == 0 else min(config.eval_images,
                                                         len(dataset))
    features = compute_features(
        config, archive.filters, archive.discovery_weights,
        dataset.images[:n], SEED_EVAL_ENCODE, noise_spec=noise_spec,
        noise_tag=SEED_EVAL_NOISE,
        workers=config.workers if workers is None else workers,
    )
    predicted, _ = clf.predict(archive.svm, features)
    labels = dataset.labels[:n]
    confusion = np.zeros((10, 10), dtype=np.int64)
    np.add.at(confusion, (labels, predicted), 1)
    return EvalReport(
        noise=noise_spec, accuracy=float(np.mean(predicted == labels)),
        n_images=n, confusion=confusion,
    )


def evaluate_noise_suite(archive: ModelArchive, dataset: LabeledDataset,
                         specs: list[str]) -> list[EvalReport]:
    return [evaluate(archive, dataset, spec) for spec in specs]


CONTROL_VARIANTS = (
    ("probabilistic", "probabilistic"),
    ("probabilistic", "sigmoidal"),
    ("plain_lif", "probabilistic"),
    ("plain_lif", "sigmoidal"),
)


@dataclass
class ControlRow:
    neuron_model: str
    stdp_rule: str
    accuracy: float
    noisy: dict[str, float] = field(default_factory=dict)


def control_matrix(config: RunConfig, train_set: LabeledDataset,
                   test_set: LabeledDataset,
                   bank: FilterBank | None = None,
                   noise_specs: tuple[str, ...] = (),
                   report: RunReport | None = None) -> list[ControlRow]:
    """Train the four discovery variants on shared filters and seed; compare."""
    if bank is None:
        bank = stage_train_filters(config, train_set, report)
    rows = []
    for neuron_model, stdp_rule in CONTROL_VARIANTS:
        variant = config.replace(neuron_model=neuron_model, stdp_rule=stdp_rule)
        weights = stage_train_discovery(variant, bank, train_set)
        svm = stage_train_classifier(variant, bank, weights, train_set)
        archive = ModelArchive(
            config=variant, filters=bank, discovery_weights=weights, svm=svm,
            completed=list(STAGE_ORDER),
        )
        row = ControlRow(
            neuron_model=neuron_model, stdp_rule=stdp_rule,
            accuracy=evaluate(archive, test_set).accuracy,
        )
        for spec in noise_specs:
            row.noisy[spec] = evaluate(archive, test_set, spec).accuracy
        rows.append(row)
    return rows
