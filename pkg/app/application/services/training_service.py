import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from app.domain.errors import ConfigError
from app.infrastructure.estimators.site import EstimatorId
from app.infrastructure.gaussian.rng import RngStream, StreamKey
from app.infrastructure.harness.artifacts import TRAINING_COLUMNS, ensure_dir, write_csv, write_json
from app.infrastructure.harness.config import ExperimentConfig
from app.infrastructure.harness.datasets import SyntheticDataset, make_synthetic_dataset
from app.infrastructure.harness.stats import EstimatorStats
from app.infrastructure.nets.losses import Batch, LossSpec, accuracy, elbo_loss, nll_and_grad
from app.infrastructure.nets.network import (
    BayesianMLP,
    backward,
    build_network,
    forward,
    kl_gradient,
    kl_total,
    predict_mean,
)
from app.infrastructure.nets.optim import init_optimizer, optimizer_step
from app.infrastructure.settings import Settings, get_settings
from app.application.services.parallel import run_jobs

_logger = logging.getLogger(__name__)


def experiment_setup(cfg: ExperimentConfig, seed: int, estimator: EstimatorId) -> tuple[BayesianMLP, SyntheticDataset, LossSpec, int]:
    """Red, datos y pérdida de un run. La inicialización no depende del estimador."""

    data = make_synthetic_dataset(cfg.dataset_kind, cfg.dataset_n, seed, cfg.dataset_separation, cfg.dataset_noise)
    net = build_network(
        cfg.model_widths,
        RngStream(seed).child(StreamKey.INIT),
        estimator_mode=estimator,
        activation=cfg.model_activation,
        noise_sharing=cfg.model_noise_sharing,
        gaussian_bias=cfg.model_gaussian_bias,
        lrt_noise=cfg.model_lrt_noise,
        cg=cfg.cg_config(),
    )
    batch_size = min(cfg.batch_size, data.size)
    spec = LossSpec.for_minibatch(cfg.loss_kind, data.size, batch_size, cfg.loss_obs_noise)
    return net, data, spec, batch_size


def minibatch(data: SyntheticDataset, seed: int, step: int, batch_size: int) -> Batch:
    """Índices sin reemplazo del stream (seed, BATCH, step); idénticos para todos los estimadores."""

    idx = RngStream(seed).child(StreamKey.BATCH, step).generator().choice(data.size, batch_size, replace=False)
    return data.batch(np.sort(idx))


def layer_gradient_stats(
    net: BayesianMLP, batch: Batch, spec: LossSpec, stream: RngStream, replicates: int
) -> list[tuple[EstimatorStats, EstimatorStats, float]]:
    """
    Por capa: (stats de d_μ, stats de d_τ, iteraciones CG medias) sobre `replicates`
    draws del término NLL. La KL es determinista y no aporta varianza.
    """

    mu_samples = [[] for _ in net.layers]
    tau_samples = [[] for _ in net.layers]
    cg_iters = np.zeros(len(net.layers))
    for r in range(replicates):
        _, tape = forward(net, batch.inputs, stream.child(r))
        _, loss_grad = elbo_loss(net, batch, tape, spec)
        grad = backward(net, tape, loss_grad)
        for i, (g, rec) in enumerate(zip(grad.layers, tape.records)):
            mu_samples[i].append(g.d_mu.reshape(-1))
            tau_samples[i].append(g.d_tau.reshape(-1))
            cg_iters[i] += rec.cg_iters_mean
    mode = net.layers[0].estimator_mode.value
    return [
        (
            EstimatorStats.from_samples(np.stack(mu_samples[i]), mode, f"layer{i}"),
            EstimatorStats.from_samples(np.stack(tau_samples[i]), mode, f"layer{i}"),
            float(cg_iters[i] / replicates),
        )
        for i in range(len(net.layers))
    ]


def evaluate(net: BayesianMLP, data: SyntheticDataset, spec: LossSpec, stream: RngStream) -> tuple[float, float]:
    """(ELBO con un draw sobre todos los datos, accuracy de la red en μ)."""

    outputs, _ = forward(net.with_estimator(EstimatorId.RT), data.inputs, stream)
    nll, _ = nll_and_grad(outputs, data.targets, spec)
    elbo = -(float(np.sum(nll)) + kl_total(net))
    return elbo, accuracy(predict_mean(net, data.inputs), data.targets, spec.kind)


@dataclass(frozen=True)
class TrainingJob:
    cfg: ExperimentConfig
    estimator: EstimatorId
    seed: int
    wall_time: bool = False


@dataclass(frozen=True)
class TrainingRun:
    estimator: EstimatorId
    seed: int
    rows: list[dict] = field(repr=False)
    final_elbo: float
    final_accuracy: float


def train_single(job: TrainingJob) -> TrainingRun:
    """Un run completo (estimador, seed); determinista salvo wall_ms."""

    cfg, seed = job.cfg, job.seed
    net, data, spec, batch_size = experiment_setup(cfg, seed, job.estimator)
    state = init_optimizer(cfg.optimizer, cfg.lr)
    root = RngStream(seed)
    steps_per_epoch = int(np.ceil(data.size / batch_size))
    rows = []
    elbo = acc = float("nan")
    t0 = time.perf_counter()

    for step in range(cfg.steps):
        batch = minibatch(data, seed, step, batch_size)
        _, tape = forward(net, batch.inputs, root.child(StreamKey.TRAIN, step))
        loss, loss_grad = elbo_loss(net, batch, tape, spec)
        grad = backward(net, tape, loss_grad) + kl_gradient(net)

        if step % cfg.log_every == 0 or step == cfg.steps - 1:
            elbo, acc = evaluate(net, data, spec, root.child(StreamKey.EVAL, step))
            stats = layer_gradient_stats(net, batch, spec, root.child(StreamKey.VARIANCE, step), cfg.mc_replicates)
            wall_ms = (time.perf_counter() - t0) * 1e3 if job.wall_time else 0
            for i, (mu_stats, tau_stats, iters) in enumerate(stats):
                rows.append({
                    "step": step,
                    "epoch": step // steps_per_epoch,
                    "seed": seed,
                    "estimator": job.estimator.value,
                    "layer": f"layer{i}",
                    "loss": loss,
                    "elbo": elbo,
                    "accuracy": acc,
                    "grad_var_mu": mu_stats.mean_variance(),
                    "grad_var_tau": tau_stats.mean_variance(),
                    "cg_iters_mean": iters,
                    "wall_ms": wall_ms,
                })
            _logger.debug("%s seed=%d step=%d loss=%.4f elbo=%.4f acc=%.3f", job.estimator.value, seed, step, loss, elbo, acc)

        params, state = optimizer_step(net.flat_params(), grad.flat(), state)
        net = net.with_flat_params(params)

    elbo, acc = evaluate(net, data, spec, root.child(StreamKey.EVAL, cfg.steps))
    return TrainingRun(estimator=job.estimator, seed=seed, rows=rows, final_elbo=elbo, final_accuracy=acc)


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), se


def summarize_runs(runs: list[TrainingRun]) -> dict:
    """ELBO/accuracy finales por estimador y el orden R2G2 vs RT con 1 SE combinado."""

    by_estimator: dict[str, dict] = {}
    for est in sorted({r.estimator.value for r in runs}):
        mine = [r for r in runs if r.estimator.value == est]
        mean, se = _mean_se([r.final_elbo for r in mine])
        by_estimator[est] = {
            "seeds": [r.seed for r in mine],
            "final_elbo_mean": mean,
            "final_elbo_se": se,
            "final_accuracy_mean": float(np.mean([r.final_accuracy for r in mine])),
            "final_accuracy": [r.final_accuracy for r in mine],
        }
    summary = {"estimators": by_estimator}
    rt, r2 = by_estimator.get(EstimatorId.RT.value), by_estimator.get(EstimatorId.R2G2.value)
    if rt and r2:
        pooled = float(np.hypot(rt["final_elbo_se"], r2["final_elbo_se"]))
        summary["r2g2_vs_rt"] = {
            "pooled_se": pooled,
            "passed": r2["final_elbo_mean"] >= rt["final_elbo_mean"] - pooled,
        }
    return summary


@dataclass
class TrainingService:
    """
    Entrena la red bayesiana con cada estimador y seed de la config.

    Salidas en out_dir:
      - train_<ESTIMADOR>_seed<k>.csv  (una fila por capa y paso registrado)
      - training_summary.json          (ELBO/accuracy finales y orden R2G2 vs RT)
    """

    settings: Settings

    def run(self, cfg: ExperimentConfig) -> dict:
        estimators = cfg.network_estimators
        if not estimators:
            raise ConfigError("train necesita al menos un estimador de red (RT, LRT o R2G2)")
        if EstimatorId.SCORE in cfg.estimators:
            _logger.warning("SCORE no es un modo de capa; se omite en el entrenamiento")

        wall_time = cfg.out_wall_time or self.settings.RECORD_WALL_TIME
        jobs = [TrainingJob(cfg, e, s, wall_time) for e in estimators for s in cfg.seeds]
        _logger.info("entrenando %d runs (%d pasos)", len(jobs), cfg.steps)
        runs = run_jobs(train_single, jobs, self.settings.WORKERS)
        runs.sort(key=lambda r: (r.estimator.value, r.seed))

        out_dir = ensure_dir(cfg.out_dir)
        paths = [
            write_csv(os.path.join(out_dir, f"train_{r.estimator.value}_seed{r.seed}.csv"), TRAINING_COLUMNS, r.rows)
            for r in runs
        ]
        summary = summarize_runs(runs)
        write_json(os.path.join(out_dir, "training_summary.json"), summary)
        _logger.info("CSV de entrenamiento en %s", out_dir)
        return {"csv": paths, "summary": summary}


def run_training_experiment(cfg: ExperimentConfig, settings: Settings | None = None) -> dict:
    return TrainingService(settings or get_settings()).run(cfg)
