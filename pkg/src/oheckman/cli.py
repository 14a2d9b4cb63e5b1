"""Command-line entry point: fit, simulate and ivtest."""

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import EstimatorType, configure, get_settings
from .data import FitConfig, IvTestConfig, build_iv_input, load_config, load_csv, read_table
from .data.loader import BuiltDesign
from .errors import ConfigError, OHeckmanError
from .estimators import FimlOptions, create_estimator
from .inference import (
    CovarianceMethod,
    CovarianceRequest,
    equality_matrix,
    two_sided_p_value,
    wald,
)
from .ivtest import IvTestResult, huber_mellace
from .model.likelihood import stage_probabilities
from .results import FitResult, QuantileFit
from .simulation import STUDY_GRIDS, Study, emit_table, imputation_key, run_study

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass
class RunManifest:
    """What is needed to reproduce a run."""

    subcommand: str
    config_path: str | None
    seed: int
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    version: str = __version__
    started: str = ""
    wall_seconds: float = 0.0
    exit_code: int | None = None
    arguments: dict[str, object] = field(default_factory=dict)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, default=str) + "\n", encoding="utf-8")


def stars(p_value: float) -> str:
    """*** below 1%, ** below 5%, * below 10%."""
    if not np.isfinite(p_value):
        return ""
    if p_value < 0.01:
        return "***"
    if p_value < 0.05:
        return "**"
    if p_value < 0.10:
        return "*"
    return ""


def _num(value: float, digits: int | None = None) -> str:
    digits = get_settings().significant_digits if digits is None else digits
    if value is None or not np.isfinite(value):
        return ""
    return f"{value:.{digits}g}"


def _equality_rows(fit: FitResult, pairs: list[tuple[str, str]]) -> list[tuple[str, float]]:
    rows = []
    for first, second in pairs:
        prefixes = sorted(
            {n[: -len(f"[{first}]")] for n in fit.names if n.endswith(f"[{first}]")}
        )
        for prefix in prefixes:
            a, b = f"{prefix}[{first}]", f"{prefix}[{second}]"
            if b not in fit.names:
                raise ConfigError(f"no parameter {b!r} to compare with {a!r}")
            test = wald(fit, equality_matrix(fit.names, a, b))
            rows.append((f"p-value: {a} = {b}", test.p_value))
    return rows


def _profile_rows(fit: FitResult, design: BuiltDesign, indicator: str | None) -> list[str]:
    """Predicted stage shares at the weighted covariate mean."""
    if fit.estimates is None or fit.estimates.alpha.size != design.dataset.z_selection.shape[1]:
        return []
    data = design.dataset
    mean = data.weight @ data.z_selection / data.weight.sum()
    profiles = [("mean profile", mean)]
    if indicator is not None:
        if indicator not in data.z_names:
            raise ConfigError(f"profile indicator {indicator!r} is not a selection column")
        k = data.z_names.index(indicator)
        for value in (0.0, 1.0):
            row = mean.copy()
            row[k] = value
            profiles.append((f"{indicator}={value:g}", row))
    lines = []
    for label, row in profiles:
        probs = stage_probabilities(fit.estimates, row)
        shares = " | ".join(_num(p) for p in probs)
        lines.append(f"| P(stage) at {label} | {shares} |")
    return lines


def format_fit_report(
    fit: FitResult, design: BuiltDesign | None = None, config: FitConfig | None = None
) -> str:
    """Markdown coefficient table with stars and the table furniture rows."""
    lines = [
        f"## {fit.estimator}",
        "",
        "| parameter | estimate | SE | |",
        "|---|---|---|---|",
    ]
    se = fit.std_errors
    for name, value, err in zip(fit.names, fit.params, se):
        p = two_sided_p_value(value, err)
        lines.append(f"| {name} | {_num(value)} | {_num(err)} | {stars(p)} |")
    lines += ["", "| statistic | value |", "|---|---|"]
    for key in sorted(fit.derived):
        if key.startswith(("p_value_rho", "exclusion", "exp_beta", "r_squared", "theta")):
            lines.append(f"| {key} | {_num(fit.derived[key])} |")
    if config is not None and config.equal_coefficients:
        for label, p in _equality_rows(fit, list(config.equal_coefficients)):
            lines.append(f"| {label} | {_num(p)} |")
    if design is not None:
        lines += _profile_rows(fit, design, config.profile_indicator if config else None)
    lines.append("")
    if fit.loglik is not None:
        lines.append(f"log-likelihood: {_num(fit.loglik, 10)}")
    lines.append(f"observations: {fit.n_obs} (with outcome: {fit.n_outcome})")
    lines.append(f"covariance: {fit.covariance_label}")
    lines.append(f"converged: {fit.converged} (iterations {fit.n_iter})")
    if fit.flags:
        lines.append(f"flags: {', '.join(fit.flags)}")
    lines.append("")
    lines.append("*** p<0.01, ** p<0.05, * p<0.10")
    return "\n".join(lines) + "\n"


def format_quantile_report(fit: QuantileFit) -> str:
    lines = [f"## imputation (tau={fit.tau:g})", "", "| parameter | estimate |", "|---|---|"]
    lines += [f"| {n} | {_num(v)} |" for n, v in zip(fit.names, fit.coefficients)]
    lines += [
        "",
        f"check loss: {_num(fit.objective, 10)}",
        f"observations: {fit.n_obs} (imputed: {fit.n_imputed}, value {fit.imputed_value})",
        f"imputed rows not below the fitted hyperplane: {fit.n_crossing}",
    ]
    return "\n".join(lines) + "\n"


def _estimates_csv(names: list[str], values: np.ndarray, se: np.ndarray | None) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["parameter", "estimate", "std_error"])
    for k, name in enumerate(names):
        err = "" if se is None or not np.isfinite(se[k]) else repr(float(se[k]))
        writer.writerow([name, repr(float(values[k])), err])
    return buffer.getvalue()


def _apply_overrides(args: argparse.Namespace) -> None:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        updates["threads"] = args.threads
    if updates:
        configure(get_settings().model_copy(update=updates))


def _covariance_request(config: FitConfig) -> CovarianceRequest:
    # Clusters come from each estimator's fit context, aligned to its estimation rows.
    return CovarianceRequest(
        method=CovarianceMethod(config.covariance.method),
        small_sample_correction=config.covariance.small_sample_correction,
    )


def cmd_fit(args: argparse.Namespace, manifest: RunManifest) -> int:
    config = load_config(args.config, FitConfig)
    if args.estimator:
        config = config.model_copy(update={"estimator": EstimatorType(args.estimator)})
    design = load_csv(args.data, config.columns)
    request = _covariance_request(config)

    kind = EstimatorType(config.estimator)
    options: dict[str, object] = {}
    if kind in (EstimatorType.OLS, EstimatorType.OPROBIT):
        options["request"] = request
    elif kind in (EstimatorType.OHECKMAN, EstimatorType.HECKMAN2):
        options["options"] = FimlOptions(covariance=request, exp_beta=tuple(config.exp_beta))
    elif kind == EstimatorType.IMPUTATION:
        options["tau"] = config.tau
    estimator = create_estimator(kind, **options)
    logger.info("fit_started estimator=%s rows=%d", kind.value, design.dataset.n)
    result = estimator.fit(design.dataset, design.spec)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(result, QuantileFit):
        report = format_quantile_report(result)
        table = _estimates_csv(result.names, result.coefficients, None)
    else:
        report = format_fit_report(result, design, config)
        table = _estimates_csv(result.names, result.params, result.std_errors)
    (out / "report.md").write_text(report, encoding="utf-8")
    (out / "estimates.csv").write_text(table, encoding="utf-8")
    (out / "design.json").write_text(design.registry_json() + "\n", encoding="utf-8")
    manifest.inputs += [str(args.data)]
    manifest.outputs += [str(out / n) for n in ("report.md", "estimates.csv", "design.json")]
    sys.stdout.write(report)
    return 0


def _parse_grid(text: str | None, study: Study) -> tuple[tuple[float, float], ...]:
    if not text:
        return STUDY_GRIDS[study]
    cells = []
    for item in text.split(","):
        try:
            rho, alpha1 = (float(v) for v in item.split(":"))
        except ValueError:
            raise ConfigError(f"grid cells are rho:alpha1 pairs, got {item!r}") from None
        cells.append((rho, alpha1))
    return tuple(cells)


def cmd_simulate(args: argparse.Namespace, manifest: RunManifest) -> int:
    study = Study(args.study)
    grid = _parse_grid(args.grid, study)
    result = run_study(study, grid=grid, replications=args.reps, seed=get_settings().seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"study_{study.value}"
    written = {
        f"{stem}.csv": emit_table(result, "csv"),
        f"{stem}.md": emit_table(result, "markdown"),
    }
    if study is Study.II:
        slim = ["ols", imputation_key(0.5), "oheckman"]
        written[f"{stem}_slim.md"] = emit_table(result, "markdown", columns=slim)
    for name, text in written.items():
        (out / name).write_text(text, encoding="utf-8")
        manifest.outputs.append(str(out / name))
    manifest.arguments["replications"] = result.replications
    sys.stdout.write(written[f"{stem}.csv" if args.format == "csv" else f"{stem}.md"])
    if result.flagged:
        logger.error("simulate_flagged cells=%d", sum(c.flagged for c in result.cells))
        return 4
    return 0


def format_ivtest_report(result: IvTestResult) -> str:
    rows = [
        ("Standardized Difference", result.standardized_difference),
        ("p-Value Mean-Based Constraints", result.p_mean),
        ("p-Value Probability-Based Constraints", result.p_prob),
    ]
    lines = ["| | |", "|---|---|"]
    lines += [f"| {label} | {_num(value, 3)} |" for label, value in rows]
    lines += [
        "",
        f"observations: {result.n}",
        f"P(s=1|z=1)={_num(result.p1)} P(s=1|z=0)={_num(result.p0)} q={_num(result.q)}",
        f"instrument direction: {result.direction:+d}",
        f"bootstrap draws: {result.draws}",
    ]
    return "\n".join(lines) + "\n"


def cmd_ivtest(args: argparse.Namespace, manifest: RunManifest) -> int:
    config = load_config(args.config, IvTestConfig)
    frame = read_table(args.data)
    data = build_iv_input(frame, config, seed=get_settings().seed)
    result = huber_mellace(data)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = format_ivtest_report(result)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["standardized_difference", "p_mean", "p_prob", "direction", "q", "n"])
    writer.writerow(
        [
            repr(result.standardized_difference),
            repr(result.p_mean),
            repr(result.p_prob),
            result.direction,
            repr(result.q),
            result.n,
        ]
    )
    (out / "ivtest.md").write_text(report, encoding="utf-8")
    (out / "ivtest.csv").write_text(buffer.getvalue(), encoding="utf-8")
    manifest.inputs.append(str(args.data))
    manifest.outputs += [str(out / "ivtest.md"), str(out / "ivtest.csv")]
    sys.stdout.write(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oheckman",
        description="Ordered sample-selection estimation, instrument tests and simulations",
    )
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", default=".", help="Output directory (default: .)")
        p.add_argument("--seed", type=int, help="Master seed (default: settings)")
        p.add_argument("--threads", type=int, help="Worker processes (default: settings)")

    fit = sub.add_parser("fit", help="Fit an estimator to a CSV file")
    fit.add_argument("--config", required=True, help="FitConfig JSON file")
    fit.add_argument("--data", required=True, help="Input CSV file")
    fit.add_argument(
        "--estimator",
        choices=[e.value for e in EstimatorType],
        help="Override the estimator named in the config",
    )
    common(fit)

    simulate = sub.add_parser("simulate", help="Run a Monte Carlo study")
    simulate.add_argument("study", choices=[s.value for s in Study])
    simulate.add_argument("--grid", help="Cells as rho:alpha1 pairs, comma separated")
    simulate.add_argument("--reps", type=int, help="Replications per cell")
    simulate.add_argument(
        "--format", choices=["csv", "markdown"], default="markdown", help="Table on stdout"
    )
    common(simulate)

    ivtest = sub.add_parser("ivtest", help="Test an exclusion restriction")
    ivtest.add_argument("--config", required=True, help="IvTestConfig JSON file")
    ivtest.add_argument("--data", required=True, help="Input CSV file")
    common(ivtest)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Main entry point for the CLI."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO,
        format=LOG_FORMAT,
        stream=sys.stderr,
    )
    _apply_overrides(args)
    manifest = RunManifest(
        subcommand=args.command,
        config_path=getattr(args, "config", None),
        seed=get_settings().seed,
        started=datetime.now(timezone.utc).isoformat(),
        arguments={k: v for k, v in vars(args).items() if k != "command"},
    )
    handlers = {"fit": cmd_fit, "simulate": cmd_simulate, "ivtest": cmd_ivtest}
    start = time.perf_counter()
    code = 1
    try:
        code = handlers[args.command](args, manifest)
    except OHeckmanError as exc:
        logger.error("%s_failed error=%s message=%s", args.command, type(exc).__name__, exc)
        code = exc.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted")
        code = 130
    finally:
        manifest.exit_code = code
        manifest.wall_seconds = time.perf_counter() - start
        _write_manifest(manifest, Path(args.out))
    return code


def _write_manifest(manifest: RunManifest, out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        manifest.outputs.append(str(out / "manifest.json"))
        manifest.write(out / "manifest.json")
    except OSError as exc:
        logger.error("manifest_failed path=%s message=%s", out, exc)


if __name__ == "__main__":
    sys.exit(main())
