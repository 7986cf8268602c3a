"""
CLI del laboratorio de gradientes.

  python -m app.scripts.cli verify      --config default
  python -m app.scripts.cli equivalence --config default
  python -m app.scripts.cli variance    --config smoke --out results/var
  python -m app.scripts.cli train       --config default --seed 3 --estimator R2G2

Códigos de salida: 0 OK, 1 algún check falló, 2 uso incorrecto,
3 error de config, 4 fallo numérico u otro error controlado.
"""

import argparse
import logging
import os
import sys
from collections import defaultdict

from rich.console import Console
from rich.table import Table

from app.application.services.training_service import TrainingService
from app.application.services.variance_service import VarianceService
from app.application.services.verify_service import CHECKS, VerificationReport, VerifyService
from app.domain.errors import ConfigError, GradientLabError
from app.infrastructure.harness.artifacts import write_json
from app.infrastructure.harness.config import ExperimentConfig, load_config, resolve_config_path
from app.infrastructure.settings import configure_logging, get_settings

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4

_logger = logging.getLogger("app.scripts.cli")


def _config_keys_help() -> str:
    lines = ["claves del archivo de config (clave = valor, listas separadas por comas):"]
    for name, info in ExperimentConfig.model_fields.items():
        default = info.default_factory() if info.default_factory else info.default
        if isinstance(default, list):
            default = ",".join(str(getattr(d, "value", d)) for d in default)
        default = getattr(default, "value", default)
        lines.append(f"  {info.alias or name:<24} (default {default})")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradient-lab",
        description="Estimadores de gradiente para latentes gaussianas (score, RT, LRT, R2-G2).",
        epilog=_config_keys_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("verify", "corre las verificaciones de invariantes y escribe report.json/report.txt"),
        ("variance", "estudio de varianza pareado; escribe variance.csv"),
        ("train", "entrena la red bayesiana; un CSV por (estimador, seed)"),
        ("equivalence", "equivalencia exacta LRT / R2-G2 en sitios m = 1"),
    ):
        p = sub.add_parser(name, help=help_text, epilog=_config_keys_help(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", default="default", help="ruta o nombre de config empaquetada (default: default)")
        p.add_argument("--seed", type=int, default=None, help="reemplaza la lista de seeds por una sola")
        p.add_argument("--estimator", default=None, help="lista separada por comas (SCORE,RT,LRT,R2G2)")
        p.add_argument("--out", default=None, help="directorio de salida (reemplaza out.dir)")
        p.add_argument("--log-level", default=None, help="nivel de logging (reemplaza LOG_LEVEL)")
        if name == "verify":
            p.add_argument("--check", action="append", choices=list(CHECKS), help="corre sólo este check (repetible)")
    return parser


def _load(args, settings) -> ExperimentConfig:
    path = resolve_config_path(args.config, settings.CONFIG_DIR)
    cfg = load_config(path)
    out_dir = args.out or (cfg.out_dir if "out_dir" in cfg.model_fields_set else settings.DEFAULT_OUT_DIR)
    return cfg.with_overrides(seed=args.seed, estimator=args.estimator, out_dir=out_dir)


def _print_report(console: Console, report: VerificationReport):
    table = Table(title=f"verificación (seed {report.seed})")
    table.add_column("check")
    table.add_column("resultado")
    table.add_column("métricas", overflow="fold")
    for c in report.checks:
        metrics = ", ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}" for k, v in c.metrics.items())
        table.add_row(c.name, "PASS" if c.passed else "FAIL", metrics)
    console.print(table)


def _cmd_verify(cfg, settings, console, checks=None) -> int:
    service = VerifyService(settings=settings)
    report = service.run(cfg, checks)
    service.write(report, cfg.out_dir)
    _print_report(console, report)
    console.print(f"report: {os.path.join(cfg.out_dir, 'report.json')}", markup=False)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_equivalence(cfg, settings, console) -> int:
    report = VerifyService(settings=settings).run(cfg, ["equivalence"])
    result = report.checks[0]
    write_json(os.path.join(cfg.out_dir, "equivalence.json"), report.as_dict())
    _print_report(console, report)
    console.print(f"max |LRT - R2G2| = {result.metrics['max_abs_diff']:.3e}", markup=False)
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def _cmd_variance(cfg, settings, console) -> int:
    out = VarianceService(settings=settings).run(cfg)
    acc = defaultdict(list)
    for row in out["rows"]:
        acc[(row["estimator"], row["layer"])].append(row["grad_var_tau"])
    table = Table(title="varianza media de d_τ por capa")
    table.add_column("estimador")
    table.add_column("capa")
    table.add_column("grad_var_tau", justify="right")
    for (est, layer), values in sorted(acc.items()):
        table.add_row(est, layer, f"{sum(values) / len(values):.4e}")
    console.print(table)
    ratio = out["sites"]["rank_deficient"]["tau_variance_ratio"]
    console.print(f"sitio rango deficiente: var R2G2/RT = {ratio:.4f}", markup=False)
    ordering = out["tau_variance_ordering"]
    if ordering["passed"] is not None:
        total = len(ordering["verdicts"])
        verdict = "PASS" if ordering["passed"] else "FAIL"
        console.print(
            f"[{verdict}] var d_τ R2G2 ≤ RT en {total - ordering['failed']}/{total} (paso, capa)", markup=False
        )
    console.print(f"csv: {out['csv']}", markup=False)
    return EXIT_OK


def _cmd_train(cfg, settings, console) -> int:
    out = TrainingService(settings=settings).run(cfg)
    table = Table(title="entrenamiento")
    table.add_column("estimador")
    table.add_column("ELBO final", justify="right")
    table.add_column("SE", justify="right")
    table.add_column("accuracy", justify="right")
    for est, s in out["summary"]["estimators"].items():
        table.add_row(est, f"{s['final_elbo_mean']:.3f}", f"{s['final_elbo_se']:.3f}", f"{s['final_accuracy_mean']:.3f}")
    console.print(table)
    console.print(f"{len(out['csv'])} CSV en {cfg.out_dir}", markup=False)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    settings = get_settings()
    configure_logging(args.log_level or settings.LOG_LEVEL)
    console = Console()
    try:
        cfg = _load(args, settings)
        if args.command == "verify":
            return _cmd_verify(cfg, settings, console, args.check)
        if args.command == "equivalence":
            return _cmd_equivalence(cfg, settings, console)
        if args.command == "variance":
            return _cmd_variance(cfg, settings, console)
        return _cmd_train(cfg, settings, console)
    except ConfigError as e:
        console.print(f"error de config: {e}", markup=False)
        return EXIT_CONFIG
    except GradientLabError as e:
        _logger.error("%s: %s", type(e).__name__, e)
        console.print(f"error: {e}", markup=False)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
