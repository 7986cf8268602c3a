import logging
import os
import time
from dataclasses import dataclass

import numpy as np

from app.domain.constants import VARIANCE_SLACK_SE
from app.infrastructure.estimators.site import EstimatorId, LinearMapContext
from app.infrastructure.gaussian.rng import RngStream, StreamKey, sample_standard_normal
from app.infrastructure.harness.artifacts import TRAINING_COLUMNS, ensure_dir, write_csv, write_json
from app.infrastructure.harness.config import ExperimentConfig
from app.infrastructure.harness.sites import layer_site, paired_site_gradients, quadratic_oracle, random_theta
from app.infrastructure.harness.stats import EstimatorStats, variance_dominated
from app.infrastructure.nets.network import backward, forward, kl_gradient
from app.infrastructure.nets.losses import elbo_loss
from app.infrastructure.nets.optim import init_optimizer, optimizer_step
from app.infrastructure.settings import Settings, get_settings
from app.application.services.parallel import run_jobs
from app.application.services.training_service import (
    evaluate,
    experiment_setup,
    layer_gradient_stats,
    minibatch,
)

"""
Estudio de varianza de gradientes con draws pareados.

Un estimador "driver" (variance.driver) mueve los parámetros; en cada paso
registrado todos los estimadores se evalúan sobre los mismos parámetros, el
mismo minibatch y el mismo ruido, así las diferencias de varianza son sólo
del estimador.
"""

_logger = logging.getLogger(__name__)

AVERAGING_NOTE = (
    "grad_var_mu / grad_var_tau: varianza muestral (ddof=1) por coordenada sobre "
    "mc.replicates draws pareados del término NLL, promediada sobre las coordenadas de la capa"
)


@dataclass(frozen=True)
class VarianceJob:
    cfg: ExperimentConfig
    seed: int
    wall_time: bool = False


def variance_single_seed(job: VarianceJob) -> list[dict]:
    cfg, seed = job.cfg, job.seed
    driver = cfg.variance_driver
    net, data, spec, batch_size = experiment_setup(cfg, seed, driver)
    state = init_optimizer(cfg.optimizer, cfg.lr)
    root = RngStream(seed)
    steps_per_epoch = int(np.ceil(data.size / batch_size))
    rows = []
    t0 = time.perf_counter()

    for step in range(cfg.steps):
        batch = minibatch(data, seed, step, batch_size)
        _, tape = forward(net, batch.inputs, root.child(StreamKey.TRAIN, step))
        loss, loss_grad = elbo_loss(net, batch, tape, spec)

        if step % cfg.log_every == 0 or step == cfg.steps - 1:
            elbo, acc = evaluate(net, data, spec, root.child(StreamKey.EVAL, step))
            wall_ms = (time.perf_counter() - t0) * 1e3 if job.wall_time else 0
            for estimator in cfg.network_estimators:
                # mismo stream VARIANCE para todos: ε pareado entre estimadores
                stats = layer_gradient_stats(
                    net.with_estimator(estimator), batch, spec,
                    root.child(StreamKey.VARIANCE, step), cfg.mc_replicates,
                )
                for i, (mu_stats, tau_stats, iters) in enumerate(stats):
                    rows.append({
                        "step": step,
                        "epoch": step // steps_per_epoch,
                        "seed": seed,
                        "estimator": estimator.value,
                        "layer": f"layer{i}",
                        "loss": loss,
                        "elbo": elbo,
                        "accuracy": acc,
                        "grad_var_mu": mu_stats.mean_variance(),
                        "grad_var_tau": tau_stats.mean_variance(),
                        "cg_iters_mean": iters,
                        "wall_ms": wall_ms,
                    })

        grad = backward(net, tape, loss_grad) + kl_gradient(net)
        params, state = optimizer_step(net.flat_params(), grad.flat(), state)
        net = net.with_flat_params(params)

    return rows


def site_statistics(cfg: ExperimentConfig) -> dict:
    """
    EstimatorStats sobre tres sitios fijos con mc.paired_draws draws pareados:

      rank_deficient  W denso site.m × site.n, RT vs R2G2 (R2G2 domina en d_τ)
      full_rank       W cuadrado invertible, RT y R2G2 coinciden
      single_unit     sitio de capa con m = 1, LRT y R2G2 idénticos
    """

    stream = RngStream(cfg.seeds[0]).child(StreamKey.SITE)
    gen = stream.generator()
    cg = cfg.cg_config()
    out = {}

    sites = {
        "rank_deficient": LinearMapContext(
            W=gen.standard_normal((cfg.site_m, cfg.site_n)), theta=random_theta(gen, cfg.site_n)
        ),
        "full_rank": LinearMapContext(
            W=gen.standard_normal((cfg.site_m, cfg.site_m)) + 2.0 * np.eye(cfg.site_m),
            theta=random_theta(gen, cfg.site_m),
        ),
    }
    for k, (name, ctx) in enumerate(sites.items()):
        oracle = quadratic_oracle(gen, ctx)
        noise = stream.child(StreamKey.NOISE, k)
        eps = sample_standard_normal((cfg.mc_paired_draws, ctx.n), noise)
        grads = paired_site_gradients(oracle, eps, [EstimatorId.RT, EstimatorId.R2G2], cg, noise_tag=noise)
        rt = EstimatorStats.from_samples(grads[EstimatorId.RT], "RT", name)
        r2 = EstimatorStats.from_samples(grads[EstimatorId.R2G2], "R2G2", name)
        n = ctx.n
        out[name] = {
            "m": ctx.m,
            "n": n,
            "stats": [rt.as_dict(), r2.as_dict()],
            "tau_variance_ratio": r2.mean_variance(slice(n, None)) / rt.mean_variance(slice(n, None)),
            "tau_dominated": bool(variance_dominated(r2, rt, VARIANCE_SLACK_SE)[n:].all()),
            "mu_blocks_identical": bool(np.array_equal(grads[EstimatorId.RT][:, :n], grads[EstimatorId.R2G2][:, :n])),
        }

    ctx, lrt = layer_site(gen, 1, cfg.site_n)
    oracle = quadratic_oracle(gen, ctx)
    noise = stream.child(StreamKey.NOISE, len(sites))
    eps = sample_standard_normal((cfg.mc_paired_draws, ctx.n), noise)
    grads = paired_site_gradients(
        oracle, eps, [EstimatorId.LRT, EstimatorId.R2G2], cg, lrt_site=lrt, noise_tag=noise
    )
    lrt_stats = EstimatorStats.from_samples(grads[EstimatorId.LRT], "LRT", "single_unit")
    r2_stats = EstimatorStats.from_samples(grads[EstimatorId.R2G2], "R2G2", "single_unit")
    out["single_unit"] = {
        "m": 1,
        "n": ctx.n,
        "stats": [lrt_stats.as_dict(), r2_stats.as_dict()],
        "max_abs_sample_diff": float(np.max(np.abs(grads[EstimatorId.LRT] - grads[EstimatorId.R2G2]))),
        "max_abs_variance_diff": float(np.max(np.abs(lrt_stats.variance - r2_stats.variance))),
    }
    return out


def tau_variance_ordering(rows: list[dict]) -> dict:
    """
    Veredicto pareado por (seed, step, capa): grad_var_tau de R2G2 ≤ la de RT.

    Ambos estimadores ven los mismos parámetros, minibatch y ruido. Sin RT y
    R2G2 en la corrida no hay veredictos y `passed` queda en None.
    """

    by_key: dict[tuple, dict[str, float]] = {}
    for row in rows:
        key = (row["seed"], row["step"], row["layer"])
        by_key.setdefault(key, {})[row["estimator"]] = row["grad_var_tau"]

    verdicts = []
    for (seed, step, layer), values in by_key.items():
        rt, r2 = values.get(EstimatorId.RT.value), values.get(EstimatorId.R2G2.value)
        if rt is None or r2 is None:
            continue
        verdicts.append({
            "seed": seed,
            "step": step,
            "layer": layer,
            "ratio": r2 / rt if rt > 0 else float("nan"),
            "passed": bool(r2 <= rt),
        })
    passed = all(v["passed"] for v in verdicts) if verdicts else None
    return {"passed": passed, "failed": sum(not v["passed"] for v in verdicts), "verdicts": verdicts}


@dataclass
class VarianceService:
    """
    Salidas en out_dir:
      - variance.csv     (mismo esquema que los CSV de entrenamiento)
      - site_stats.json  (EstimatorStats de los sitios fijos)
      - metadata.json    (convención de promediado, veredicto R2G2 ≤ RT por paso y capa, config usada)
    """

    settings: Settings

    def run(self, cfg: ExperimentConfig) -> dict:
        if EstimatorId.SCORE in cfg.estimators:
            _logger.warning("SCORE no es un modo de capa; se omite en el estudio de varianza")
        wall_time = cfg.out_wall_time or self.settings.RECORD_WALL_TIME
        jobs = [VarianceJob(cfg, s, wall_time) for s in cfg.seeds]
        _logger.info("estudio de varianza: driver %s, %d seeds", cfg.variance_driver.value, len(jobs))
        rows = [row for seed_rows in run_jobs(variance_single_seed, jobs, self.settings.WORKERS) for row in seed_rows]

        out_dir = ensure_dir(cfg.out_dir)
        csv_path = write_csv(os.path.join(out_dir, "variance.csv"), TRAINING_COLUMNS, rows)
        sites = site_statistics(cfg)
        write_json(os.path.join(out_dir, "site_stats.json"), sites)
        ordering = tau_variance_ordering(rows)
        if ordering["passed"] is False:
            _logger.warning("var d_τ R2G2 > RT en %d de %d pasos registrados", ordering["failed"], len(ordering["verdicts"]))
        write_json(
            os.path.join(out_dir, "metadata.json"),
            {
                "averaging": AVERAGING_NOTE,
                "driver": cfg.variance_driver.value,
                "estimators": [e.value for e in cfg.network_estimators],
                "tau_variance_ordering": ordering,
                "config": cfg.model_dump(mode="json", by_alias=True),
            },
        )
        _logger.info("variance.csv en %s", csv_path)
        return {"csv": csv_path, "rows": rows, "sites": sites, "tau_variance_ordering": ordering}


def run_variance_study(cfg: ExperimentConfig, settings: Settings | None = None) -> dict:
    return VarianceService(settings or get_settings()).run(cfg)
