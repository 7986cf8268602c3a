import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from app.domain.constants import (
    CONSISTENCY_Z_MAX,
    COVARIANCE_FROBENIUS_TOL,
    EQUIVALENCE_TOL,
    FD_REL_TOL,
    FD_STEP,
    ORACLE_TOL,
    PROJECTION_TOL,
    VARIANCE_SLACK_SE,
    Z_SCORE_MAX,
)
from app.domain.errors import ConfigError, DegenerateVarianceError
from app.infrastructure.estimators.local import LrtSite, derive_xi_from_z, lrt_gradient
from app.infrastructure.estimators.reparam import (
    condition_on_preactivation,
    forward_r2g2,
    r2g2_gradient,
    rt_gradient,
)
from app.infrastructure.estimators.site import EstimatorId, LinearMapContext, UpstreamGradient
from app.infrastructure.gaussian.conditional import ConditionalGaussian, conditional_mean
from app.infrastructure.gaussian.diag import DiagGaussianParams, kl_diag_standard, kl_diag_standard_grad
from app.infrastructure.gaussian.rng import RngStream, StreamKey, sample_standard_normal
from app.infrastructure.harness.artifacts import ensure_dir, write_json, write_text
from app.infrastructure.harness.config import ExperimentConfig
from app.infrastructure.harness.oracles import PinvOracle, pinv_project, solve_gaussian_elimination
from app.infrastructure.harness.sites import (
    layer_site,
    paired_site_gradients,
    quadratic_oracle,
    random_matrix_with_rank,
    random_theta,
)
from app.infrastructure.harness.stats import EstimatorStats, variance_dominated
from app.infrastructure.linalg.cg import conjugate_gradient
from app.infrastructure.nets.layers import Activation, NoiseSharing
from app.infrastructure.nets.losses import Batch, LossKind, LossSpec, elbo_loss
from app.infrastructure.nets.network import (
    BayesianMLP,
    LayerNoise,
    LrtNoise,
    backward,
    build_network,
    draw_noise,
    forward,
    kl_gradient,
    predict_mean,
)
from app.infrastructure.settings import Settings

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "metrics": self.metrics, "detail": self.detail}


@dataclass(frozen=True)
class VerificationReport:
    seed: int
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {"seed": self.seed, "passed": self.passed, "checks": [c.as_dict() for c in self.checks]}

    def as_text(self) -> str:
        ok = sum(c.passed for c in self.checks)
        lines = [f"verificación (seed {self.seed}): {ok}/{len(self.checks)} checks OK"]
        for c in self.checks:
            metrics = " ".join(f"{k}={_fmt(v)}" for k, v in c.metrics.items())
            lines.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name} {metrics}".rstrip())
            if c.detail:
                lines.append(f"    {c.detail}")
        return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.3e}"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {_fmt(v)}" for k, v in value.items()) + "}"
    return str(value)


def _stream(cfg: ExperimentConfig, check: int) -> RngStream:
    return RngStream(cfg.seeds[0]).child(StreamKey.CHECK, check)


def _max_abs(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.size(a) else 0.0


def _random_rank_site(gen: np.random.Generator) -> tuple[np.ndarray, int]:
    m = int(gen.integers(1, 7))
    n = int(gen.integers(1, 13))
    rank = int(gen.integers(1, min(m, n) + 1))
    return random_matrix_with_rank(gen, m, n, rank), rank


# --- álgebra lineal -------------------------------------------------------------


def run_oracle_sweep(cfg: ExperimentConfig) -> CheckResult:
    """ε* por CG contra Aᵀ(AAᵀ)†Aε por Jacobi en sitios aleatorios (incluye rango deficiente)."""

    gen = _stream(cfg, 0).generator()
    cg = cfg.cg_config()
    worst = worst_penrose = 0.0
    deficient = 0
    for _ in range(cfg.oracle_sites):
        A, rank = _random_rank_site(gen)
        eps = gen.standard_normal(A.shape[1])
        oracle = PinvOracle(A)
        worst = max(worst, _max_abs(conditional_mean(A, A @ eps, cg), pinv_project(oracle, eps)))
        worst_penrose = max(worst_penrose, oracle.penrose_residual())
        deficient += rank < A.shape[0]
    return CheckResult(
        name="oracle_sweep",
        passed=worst <= ORACLE_TOL and worst_penrose <= ORACLE_TOL,
        metrics={
            "sites": cfg.oracle_sites,
            "rank_deficient_sites": deficient,
            "max_abs_diff": worst,
            "max_penrose_residual": worst_penrose,
        },
    )


def run_projection_invariants(cfg: ExperimentConfig) -> CheckResult:
    """Aε* = Aε, ‖ε*‖ ≤ ‖ε‖ e idempotencia del proyector."""

    gen = _stream(cfg, 1).generator()
    cg = cfg.cg_config()
    worst_consistency = worst_norm = worst_idem = 0.0
    for _ in range(cfg.equivalence_trials):
        A, _ = _random_rank_site(gen)
        eps = gen.standard_normal(A.shape[1])
        z = A @ eps
        eps_star = conditional_mean(A, z, cg)
        worst_consistency = max(worst_consistency, float(np.linalg.norm(A @ eps_star - z)) / max(1.0, np.linalg.norm(z)))
        worst_norm = max(worst_norm, float(np.linalg.norm(eps_star) - np.linalg.norm(eps)))
        worst_idem = max(worst_idem, _max_abs(conditional_mean(A, A @ eps_star, cg), eps_star))
    return CheckResult(
        name="projection_invariants",
        passed=worst_consistency <= PROJECTION_TOL and worst_norm <= PROJECTION_TOL and worst_idem <= PROJECTION_TOL,
        metrics={
            "trials": cfg.equivalence_trials,
            "max_relative_consistency": worst_consistency,
            "max_norm_excess": worst_norm,
            "max_idempotence_diff": worst_idem,
        },
    )


def run_gaussian_elimination_check(cfg: ExperimentConfig) -> CheckResult:
    """β* por CG contra el solve directo de AAᵀβ = z en sitios de rango fila completo."""

    gen = _stream(cfg, 2).generator()
    cg = cfg.cg_config()
    sites = max(1, cfg.oracle_sites // 5)
    worst = 0.0
    for _ in range(sites):
        m = int(gen.integers(1, 7))
        n = int(gen.integers(m, 13))
        A = random_matrix_with_rank(gen, m, n, m)
        z = A @ gen.standard_normal(n)
        worst = max(worst, _max_abs(conjugate_gradient(A, z, cg).beta_star, solve_gaussian_elimination(A @ A.T, z)))
    return CheckResult(
        name="gaussian_elimination",
        passed=worst <= ORACLE_TOL,
        metrics={"sites": sites, "max_abs_diff": worst},
    )


# --- estimadores sobre el oráculo cuadrático -----------------------------------


def _quadratic_setup(cfg: ExperimentConfig):
    stream = _stream(cfg, 3)
    gen = stream.generator()
    in_dim = max(1, cfg.site_n // cfg.site_m)
    ctx, lrt = layer_site(gen, cfg.site_m, in_dim)
    oracle = quadratic_oracle(gen, ctx)
    noise = stream.child(StreamKey.NOISE)
    eps = sample_standard_normal((cfg.mc_samples, ctx.n), noise)
    return oracle, lrt, eps, noise


def run_unbiasedness_test(cfg: ExperimentConfig) -> CheckResult:
    """
    Media MC de cada estimador contra el gradiente analítico del oráculo cuadrático.

    Pasa si max |z| ≤ Z_SCORE_MAX en todas las coordenadas de los cuatro estimadores.
    """

    oracle, lrt, eps, noise = _quadratic_setup(cfg)
    truth = oracle.true_gradient()
    samples = paired_site_gradients(
        oracle, eps, list(EstimatorId), cfg.cg_config(), lrt_site=lrt, noise_tag=noise
    )
    max_z = {}
    for estimator, grads in samples.items():
        stats = EstimatorStats.from_samples(grads, estimator.value, "quadratic")
        max_z[estimator.value] = float(np.max(np.abs(stats.z_scores(truth))))
    _logger.info("unbiasedness: max |z| %s", max_z)
    return CheckResult(
        name="unbiasedness",
        passed=all(z <= Z_SCORE_MAX for z in max_z.values()),
        metrics={"samples": int(eps.shape[0]), "max_abs_z": max_z},
    )


def run_unbiasedness_power(cfg: ExperimentConfig) -> CheckResult:
    """El mismo test debe rechazar R2-G2 con ε* sustituido por 0.9·ε*."""

    oracle, lrt, eps, noise = _quadratic_setup(cfg)
    truth = oracle.true_gradient()
    grads = paired_site_gradients(
        oracle, eps, [EstimatorId.R2G2], cfg.cg_config(), r2g2_noise_scale=0.9, noise_tag=noise
    )
    stats = EstimatorStats.from_samples(grads[EstimatorId.R2G2], "R2G2*0.9", "quadratic")
    z = float(np.max(np.abs(stats.z_scores(truth))))
    return CheckResult(
        name="unbiasedness_power",
        passed=z > Z_SCORE_MAX,
        metrics={"mutant_max_abs_z": z},
        detail="" if z > Z_SCORE_MAX else "el estimador sesgado no fue detectado",
    )


def run_variance_dominance(cfg: ExperimentConfig) -> CheckResult:
    """
    RT vs R2-G2 con draws pareados sobre un sitio denso site.m × site.n.

    Exige var(d_τ R2G2) ≤ var(d_τ RT) + slack por coordenada, bloques μ idénticos
    bit a bit y coincidencia de ambos estimadores en un sitio de rango columna completo.
    """

    stream = _stream(cfg, 4)
    gen = stream.generator()
    cg = cfg.cg_config()
    pair = [EstimatorId.RT, EstimatorId.R2G2]

    ctx = LinearMapContext(W=gen.standard_normal((cfg.site_m, cfg.site_n)), theta=random_theta(gen, cfg.site_n))
    oracle = quadratic_oracle(gen, ctx)
    noise = stream.child(StreamKey.NOISE)
    eps = sample_standard_normal((cfg.mc_paired_draws, ctx.n), noise)
    grads = paired_site_gradients(oracle, eps, pair, cg, noise_tag=noise)
    n = ctx.n
    rt = EstimatorStats.from_samples(grads[EstimatorId.RT], "RT", "rank_deficient")
    r2 = EstimatorStats.from_samples(grads[EstimatorId.R2G2], "R2G2", "rank_deficient")
    dominated = variance_dominated(r2, rt, VARIANCE_SLACK_SE)[n:]
    mu_identical = bool(np.array_equal(grads[EstimatorId.RT][:, :n], grads[EstimatorId.R2G2][:, :n]))

    k = cfg.site_m
    full = LinearMapContext(W=gen.standard_normal((k, k)) + 2.0 * np.eye(k), theta=random_theta(gen, k))
    full_noise = stream.child(StreamKey.NOISE, 1)
    full_eps = sample_standard_normal((cfg.mc_paired_draws, k), full_noise)
    full_grads = paired_site_gradients(quadratic_oracle(gen, full), full_eps, pair, cg, noise_tag=full_noise)
    scale = max(1.0, float(np.max(np.abs(full_grads[EstimatorId.RT]))))
    full_rank_diff = _max_abs(full_grads[EstimatorId.RT], full_grads[EstimatorId.R2G2]) / scale

    ratio = r2.mean_variance(slice(n, None)) / max(rt.mean_variance(slice(n, None)), np.finfo(float).tiny)
    return CheckResult(
        name="variance_dominance",
        passed=bool(dominated.all()) and mu_identical and full_rank_diff <= PROJECTION_TOL,
        metrics={
            "draws": cfg.mc_paired_draws,
            "tau_variance_ratio": ratio,
            "dominated_coordinates": f"{int(dominated.sum())}/{n}",
            "mu_blocks_identical": mu_identical,
            "full_rank_relative_diff": full_rank_diff,
        },
    )


# --- equivalencia LRT / R2-G2 ---------------------------------------------------


def run_equivalence_test(cfg: ExperimentConfig) -> CheckResult:
    """LRT con ξ derivado de z contra R2-G2 condicionado en el mismo z, sitios m = 1."""

    gen = _stream(cfg, 5).generator()
    cg = cfg.cg_config()
    worst = 0.0
    for _ in range(cfg.equivalence_trials):
        n = int(gen.integers(1, 17))
        site = LrtSite(x=gen.standard_normal(n), theta_rows=(random_theta(gen, n, tau_range=(0.1, 2.0)),))
        z = site.mean_preactivation() + site.preactivation_std() * gen.standard_normal(1)
        up = UpstreamGradient(gen.standard_normal(1))

        lrt = lrt_gradient(site.with_xi(derive_xi_from_z(site, z)), up)[0]
        ctx = site.unit_context(0)
        r2 = r2g2_gradient(ctx, up, condition_on_preactivation(ctx, z, cg))
        worst = max(worst, _max_abs(lrt.flat(), r2.flat()))

    degenerate = LrtSite(x=np.zeros(3), theta_rows=(random_theta(gen, 3),))
    try:
        derive_xi_from_z(degenerate, np.zeros(1))
        rejected = False
    except DegenerateVarianceError:
        rejected = True

    return CheckResult(
        name="equivalence",
        passed=worst <= EQUIVALENCE_TOL and rejected,
        metrics={"trials": cfg.equivalence_trials, "max_abs_diff": worst, "zero_input_rejected": rejected},
    )


# --- distribución condicional ---------------------------------------------------


def _conditional_setup(cfg: ExperimentConfig, count: int):
    stream = _stream(cfg, 6)
    gen = stream.generator()
    ctx = LinearMapContext(W=gen.standard_normal((2, 4)), theta=random_theta(gen, 4))
    oracle = quadratic_oracle(gen, ctx)
    eps0 = gen.standard_normal(4)
    trace = forward_r2g2(ctx, eps0, cfg.cg_config())
    cond = ConditionalGaussian(ctx.A, trace.z, cfg.cg_config())
    draws = cond.sample(stream.child(StreamKey.NOISE), count)
    return ctx, oracle, eps0, trace, cond, draws


def run_conditional_consistency_test(cfg: ExperimentConfig) -> CheckResult:
    """Promedio de gradientes RT con ε ~ ε | Aε = z contra la forma cerrada R2-G2."""

    ctx, oracle, eps0, trace, cond, draws = _conditional_setup(cfg, cfg.mc_conditional_draws)
    up = oracle.upstream(ctx.preactivation(eps0))
    closed = r2g2_gradient(ctx, UpstreamGradient(up), trace).flat()

    batch_up = UpstreamGradient(np.broadcast_to(up, (draws.shape[0], ctx.m)))
    stats = EstimatorStats.from_samples(rt_gradient(ctx, batch_up, draws).flat(), "RT|z", "2x4")
    max_z = float(np.max(np.abs(stats.z_scores(closed, atol=1e-10))))
    residual = float(np.max(np.abs(draws @ ctx.A.T - trace.z)))
    return CheckResult(
        name="conditional_consistency",
        passed=max_z <= CONSISTENCY_Z_MAX and residual <= PROJECTION_TOL,
        metrics={"draws": int(draws.shape[0]), "max_abs_z": max_z, "max_constraint_residual": residual},
    )


def run_conditional_distribution_check(cfg: ExperimentConfig) -> CheckResult:
    """
    Media y covarianza empíricas de ε | Aε = z con mc.distribution_draws draws.

    La covarianza de referencia es I − Aᵀ(AAᵀ)†A armada con la pseudo-inversa
    por Jacobi, independiente del CG del muestreador; pasa si ‖Ĉ − C‖_F ≤ 0.02.
    """

    ctx, _, _, trace, _, draws = _conditional_setup(cfg, cfg.mc_distribution_draws)
    N = draws.shape[0]
    A = ctx.A
    C = np.eye(A.shape[1]) - A.T @ PinvOracle(A).pinv @ A

    mean_stats = EstimatorStats.from_samples(draws, "conditional", "2x4")
    mean_z = float(np.max(np.abs(mean_stats.z_scores(trace.eps_star, atol=1e-10))))

    centred = draws - draws.mean(axis=0)
    C_hat = centred.T @ centred / (N - 1)
    frobenius = float(np.linalg.norm(C_hat - C, ord="fro"))
    idempotence = _max_abs(C @ C, C)
    return CheckResult(
        name="conditional_distribution",
        passed=mean_z <= CONSISTENCY_Z_MAX and frobenius <= COVARIANCE_FROBENIUS_TOL and idempotence <= PROJECTION_TOL,
        metrics={"draws": N, "mean_max_abs_z": mean_z, "cov_frobenius_error": frobenius, "projector_idempotence": idempotence},
    )


# --- red: diferencias finitas y preservación de valores -------------------------


def _with_variances(net: BayesianMLP, gen: np.random.Generator, low: float, high: float) -> BayesianMLP:
    layers = tuple(
        replace(
            layer,
            theta=DiagGaussianParams(
                mu=layer.theta.mu, log_tau=gen.uniform(math.log(low), math.log(high), layer.theta.dim)
            ),
        )
        for layer in net.layers
    )
    return replace(net, layers=layers)


def _objective(net: BayesianMLP, batch: Batch, noise, spec: LossSpec) -> float:
    _, tape = forward(net, batch.inputs, noise=noise)
    return elbo_loss(net, batch, tape, spec)[0]


def _central_differences(net: BayesianMLP, batch: Batch, noise, spec: LossSpec, h: float) -> np.ndarray:
    base = net.flat_params()
    fd = np.empty_like(base)
    for k in range(base.shape[0]):
        plus, minus = base.copy(), base.copy()
        plus[k] += h
        minus[k] -= h
        fd[k] = (
            _objective(net.with_flat_params(plus), batch, noise, spec)
            - _objective(net.with_flat_params(minus), batch, noise, spec)
        ) / (2.0 * h)
    return fd


def run_finite_difference_check(cfg: ExperimentConfig) -> CheckResult:
    """
    Backward de RT, LRT y R2-G2 en una red tanh 3-8-2 contra diferencias centrales.

    RT con ε fijo, LRT con ξ directo fijo y R2-G2 contra el objetivo con ε* congelado.
    Incluye el gradiente cerrado de la KL.
    """

    stream = _stream(cfg, 7)
    gen = stream.generator()
    B = 4
    batch = Batch(inputs=gen.standard_normal((B, 3)), targets=gen.integers(0, 2, B))
    spec = LossSpec(kind=LossKind.SOFTMAX_NLL)
    net = build_network(
        [3, 8, 2], stream.child(StreamKey.INIT), activation=Activation.TANH,
        gaussian_bias=cfg.model_gaussian_bias, cg=cfg.cg_config(),
    )
    net = _with_variances(net, gen, 0.05, 0.5)
    noise = draw_noise(net, B, stream.child(StreamKey.NOISE))

    errors = {}
    for mode in (EstimatorId.RT, EstimatorId.LRT, EstimatorId.R2G2):
        model = net.with_estimator(mode)
        if mode is EstimatorId.LRT:
            model = replace(model, lrt_noise=LrtNoise.DIRECT)
        _, tape = forward(model, batch.inputs, noise=noise)
        _, loss_grad = elbo_loss(model, batch, tape, spec)
        grad = (backward(model, tape, loss_grad) + kl_gradient(model)).flat()

        fd_net, fd_noise = model, noise
        if mode is EstimatorId.R2G2:
            fd_net = net.with_estimator(EstimatorId.RT)
            fd_noise = tuple(
                LayerNoise(eps=rec.trace.eps_star, xi=n.xi) for rec, n in zip(tape.records, noise)
            )
        fd = _central_differences(fd_net, batch, fd_noise, spec, FD_STEP)
        errors[mode.value] = _max_abs(grad, fd) / max(float(np.max(np.abs(fd))), 1e-8)

    _logger.info("finite differences: %s", errors)
    return CheckResult(
        name="finite_differences",
        passed=all(e <= FD_REL_TOL for e in errors.values()),
        metrics={"parameters": net.parameter_count, "max_relative_error": errors},
    )


def run_kl_gradient_check(cfg: ExperimentConfig) -> CheckResult:
    gen = _stream(cfg, 8).generator()
    theta = random_theta(gen, 10, mu_scale=1.0, tau_range=(0.1, 3.0))
    d_mu, d_log_tau = kl_diag_standard_grad(theta)
    exact = np.concatenate([d_mu, d_log_tau])
    base = np.concatenate([theta.mu, theta.log_tau])
    fd = np.empty_like(base)
    for k in range(base.shape[0]):
        plus, minus = base.copy(), base.copy()
        plus[k] += FD_STEP
        minus[k] -= FD_STEP
        kl_plus = kl_diag_standard(DiagGaussianParams(mu=plus[:10], log_tau=plus[10:]))
        kl_minus = kl_diag_standard(DiagGaussianParams(mu=minus[:10], log_tau=minus[10:]))
        fd[k] = (kl_plus - kl_minus) / (2.0 * FD_STEP)
    rel = _max_abs(exact, fd) / max(float(np.max(np.abs(exact))), 1e-8)
    return CheckResult(name="kl_gradient", passed=rel <= 1e-7, metrics={"max_relative_error": rel})


def run_value_preservation_check(cfg: ExperimentConfig) -> CheckResult:
    """Mismas predicciones con ε compartido en todos los modos y límite τ → 0."""

    stream = _stream(cfg, 9)
    gen = stream.generator()
    widths = cfg.model_widths
    X = gen.standard_normal((8, widths[0]))
    net = build_network(
        widths, stream.child(StreamKey.INIT), activation=cfg.model_activation,
        noise_sharing=cfg.model_noise_sharing, gaussian_bias=cfg.model_gaussian_bias, cg=cfg.cg_config(),
    )
    net = _with_variances(net, gen, 0.05, 0.5)
    noise = draw_noise(net, X.shape[0], stream.child(StreamKey.NOISE))
    modes = [EstimatorId.RT, EstimatorId.R2G2]
    if cfg.model_noise_sharing is NoiseSharing.PER_EXAMPLE:
        modes.append(EstimatorId.LRT)

    reference, _ = forward(net.with_estimator(EstimatorId.RT), X, noise=noise)
    worst = max(_max_abs(forward(net.with_estimator(m), X, noise=noise)[0], reference) for m in modes)

    tiny = _with_variances(net, gen, 1e-12, 1e-12)
    limit = _max_abs(forward(tiny, X, noise=noise)[0], predict_mean(tiny, X))
    return CheckResult(
        name="value_preservation",
        passed=worst <= EQUIVALENCE_TOL and limit <= 1e-4,
        metrics={"modes": [m.value for m in modes], "max_abs_diff": worst, "vanishing_noise_diff": limit},
    )


CHECKS: dict[str, Callable[[ExperimentConfig], CheckResult]] = {
    "oracle_sweep": run_oracle_sweep,
    "projection_invariants": run_projection_invariants,
    "gaussian_elimination": run_gaussian_elimination_check,
    "unbiasedness": run_unbiasedness_test,
    "unbiasedness_power": run_unbiasedness_power,
    "variance_dominance": run_variance_dominance,
    "equivalence": run_equivalence_test,
    "conditional_consistency": run_conditional_consistency_test,
    "conditional_distribution": run_conditional_distribution_check,
    "finite_differences": run_finite_difference_check,
    "kl_gradient": run_kl_gradient_check,
    "value_preservation": run_value_preservation_check,
}


@dataclass
class VerifyService:
    """
    Ejecuta las verificaciones de invariantes y escribe el reporte.

    Cada check usa su propio sub-stream (seed, CHECK, índice): correr un
    subconjunto da exactamente los mismos números que la suite completa.
    """

    settings: Settings

    def run(self, cfg: ExperimentConfig, checks: list[str] | None = None) -> VerificationReport:
        names = list(CHECKS) if not checks else checks
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise ConfigError(f"checks desconocidos: {', '.join(unknown)} (disponibles: {', '.join(CHECKS)})")

        results = []
        for name in names:
            t0 = time.perf_counter()
            result = CHECKS[name](cfg)
            _logger.info(
                "%s: %s (%.2fs)", name, "PASS" if result.passed else "FAIL", time.perf_counter() - t0
            )
            results.append(result)
        return VerificationReport(seed=cfg.seeds[0], checks=tuple(results))

    def write(self, report: VerificationReport, out_dir: str) -> dict[str, str]:
        ensure_dir(out_dir)
        paths = {
            "json": write_json(os.path.join(out_dir, "report.json"), report.as_dict()),
            "text": write_text(os.path.join(out_dir, "report.txt"), report.as_text()),
        }
        _logger.info("reporte escrito en %s", out_dir)
        return paths
