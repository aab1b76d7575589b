"""Command-line surface: fit, select, moderate, simulate, coverage, reproduce-paper.

Every command is deterministic given its arguments and seed.  Machine
outputs carry a header block (version, seed, config hash over the semantic
parameters only); human tables round to four significant digits.  Exit
codes: 0 success, 1 validation failure, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .coverage import INTERVAL_METHODS, bowing_profile, fit_shrinkage_state, run_coverage_study
from .errors import (
    DegeneratePointError,
    EmpiricalNullError,
    InsufficientDataError,
    InsufficientGroupsError,
    InvalidInputError,
)
from .estimation import fit_empirical_null, fit_npmle_grid, fit_parametric
from .model import MixingDistribution, NullComponent, TwoGroupsModel
from .moderation import moderated_pipeline
from .posterior import (
    exceedance_probability,
    expected_exceedance_in_tail,
    select_and_rank,
)

__all__ = ["main", "reference_model", "reference_checks"]

_REFERENCE_BANDS = {2.8: (0.55, 0.65), 2.0: (0.93, 0.97), 0.0: (0.96, 0.995)}


def reference_model() -> TwoGroupsModel:
    """The worked-example model: p0 = 0.9, theoretical null, g = Normal(2.5, 0.5)."""
    return TwoGroupsModel(p0=0.9, g=MixingDistribution.normal(2.5, 0.5))


def reference_checks(ks=None):
    """Deterministic golden-value rows: (quantity, value, band-or-None).

    With ``ks`` given, only the averaged-exceedance rows for those
    thresholds are produced.
    """
    model = reference_model()
    threshold = 3.5
    rows = []
    if ks is None:
        tail_mass = float(model.marginal_upper_tail(threshold))
        rows.append(("P(Z >= 3.5)", tail_mass, (0.0205, 0.0215)))
        rows.append(("expected count at N=3000", 3000.0 * tail_mass, (62.0, 64.0)))
        rows.append(
            ("P(mu > 2.8 | z = 3.5)", float(exceedance_probability(model, 3.5, k=2.8)), (0.504, 0.508))
        )
        rows.append(
            ("P(mu > 2.0 | z = 3.5)", float(exceedance_probability(model, 3.5, k=2.0)), (0.89, 0.91))
        )
        klist = [2.8, 2.0, 0.0]
    else:
        klist = [float(k) for k in ks]
    for k in klist:
        val = expected_exceedance_in_tail(model, threshold, k)
        rows.append((f"avg P(mu > {k:g} | z) over z >= 3.5", val, _REFERENCE_BANDS.get(k)))
    return rows


# -- shared helpers ----------------------------------------------------------------


def _ensure_outputs(paths, force: bool) -> None:
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise InvalidInputError(
            "refusing to overwrite existing files (use --force): " + ", ".join(existing)
        )


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_ks(text: str):
    try:
        ks = [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise InvalidInputError(f"could not parse threshold list {text!r}") from None
    if not ks:
        raise InvalidInputError("at least one exceedance threshold k is required")
    return ks


def _parse_variances(text: str):
    if text is None or text == "":
        return None
    vals = [float(x) for x in text.split(",") if x.strip() != ""]
    return vals[0] if len(vals) == 1 else vals


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise InvalidInputError(f"grid must be lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise InvalidInputError(f"grid must be lo:hi:step with step > 0, got {text!r}")
    return np.round(np.arange(lo, hi + step / 2, step), 12)


def _fmt4(x) -> str:
    if x is None:
        return "-"
    return f"{x:.4g}"


# -- commands ----------------------------------------------------------------------


def cmd_fit(args) -> int:
    panel = io.read_panel_csv(args.input, sigma2=args.sigma2)
    if args.empirical_null:
        null = fit_empirical_null(panel, center_fraction=args.center_fraction)
    else:
        null = NullComponent.theoretical()
    if args.method == "parametric":
        fit = fit_parametric(panel, null=null)
    else:
        fit = fit_npmle_grid(panel, null=null, grid=_parse_grid(args.grid), fixed_p0=args.fixed_p0)
    out = _outdir(args)
    model_path, report_path = out / "model.cfg", out / "fit.json"
    _ensure_outputs([model_path, report_path], args.force)
    params = {
        "command": "fit",
        "method": args.method,
        "empirical_null": args.empirical_null,
        "center_fraction": args.center_fraction,
        "grid": args.grid,
        "fixed_p0": args.fixed_p0,
        "sigma2": args.sigma2,
    }
    chash = io.config_hash(params)
    io.write_model_config(fit.model, model_path, seed=None, extra={"config-hash": chash})
    payload = {
        "generator": f"twogroups {__version__}",
        "config_hash": chash,
        "method": fit.method,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "log_likelihood": fit.log_likelihood,
        "trace": [float(x) for x in fit.trace],
        "null": {"delta0": fit.model.null.delta0, "sigma0": fit.model.null.sigma0,
                 "kind": fit.model.null.kind},
    }
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"fitted model written to {model_path} (converged={fit.converged}, "
          f"loglik={_fmt4(fit.log_likelihood)})")
    return 0


def cmd_select(args) -> int:
    panel = io.read_panel_csv(args.input, sigma2=args.sigma2)
    model = io.read_model_config(args.model)
    ks = _parse_ks(args.k)
    report = select_and_rank(
        model, panel, threshold_z=args.threshold, k=ks[0], tail=args.tail, extra_ks=tuple(ks[1:])
    )
    out = _outdir(args)
    csv_path, json_path, svg_path = out / "selection.csv", out / "selection.json", out / "selection.svg"
    _ensure_outputs([csv_path, json_path, svg_path], args.force)
    params = {
        "command": "select",
        "threshold": args.threshold,
        "k": args.k,
        "tail": args.tail,
        "sigma2": args.sigma2,
    }
    chash = io.config_hash(params)
    io.write_selection_csv(report, csv_path, extra={"config-hash": chash})
    io.write_selection_json(report, json_path, extra={"config_hash": chash})
    from .plots import selection_figure

    selection_figure(model, panel, report, svg_path)
    if report.n_selected == 0:
        print("empty selection: no unit passes the threshold")
    else:
        print(f"{report.n_selected} units selected; averaged exceedance at "
              f"k={report.k:g}: {_fmt4(report.averaged_exceedance)}")
    return 0


def cmd_moderate(args) -> int:
    matrix = io.read_matrix_tsv(args.input)
    panel, scores = moderated_pipeline(matrix)
    out = _outdir(args)
    panel_path, report_path = out / "panel.csv", out / "moderation.csv"
    _ensure_outputs([panel_path, report_path], args.force)
    chash = io.config_hash({"command": "moderate"})
    io.write_panel_csv(panel, panel_path, extra={"config-hash": chash})
    io.write_moderation_csv(scores, report_path, extra={"config-hash": chash})
    print(f"moderated {len(scores.ids)} rows (d0={_fmt4(scores.d0)}, s0={_fmt4(scores.s0)}); "
          f"{len(scores.flagged_ids)} flagged")
    return 0


def cmd_simulate(args) -> int:
    model = io.read_model_config(args.model)
    variances = _parse_variances(args.variances)
    panel, effects = model.sample_panel(args.n, sampling_variances=variances, seed=args.seed)
    out = _outdir(args)
    panel_path, truth_path = out / "panel.csv", out / "truth.csv"
    _ensure_outputs([panel_path, truth_path], args.force)
    params = {"command": "simulate", "n": args.n, "seed": args.seed,
              "variances": args.variances or "default", **io.model_to_keys(model)}
    chash = io.config_hash(params)
    io.write_panel_csv(panel, panel_path, seed=args.seed, extra={"config-hash": chash})
    lines = io.header_lines(seed=args.seed, extra={"config-hash": chash})
    lines.append("id,mu")
    lines += [f"{uid},{repr(float(m))}" for uid, m in zip(panel.ids, effects)]
    truth_path.write_text("\n".join(lines) + "\n")
    print(f"simulated panel of {args.n} units written to {panel_path}")
    return 0


def cmd_coverage(args) -> int:
    cfg = io.read_keyvalue(args.config)
    model = io.model_from_keys(cfg, prefix="generator.")
    n_units = int(cfg.get("n", 15))
    variances = _parse_variances(cfg.get("variances", "1.0"))
    methods = tuple(m.strip() for m in cfg.get("methods", ",".join(INTERVAL_METHODS)).split(","))
    nominal = float(cfg.get("nominal", 0.95))
    replications = int(cfg.get("replications", 1000))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    results = run_coverage_study(
        model,
        n_units,
        variances if variances is not None else model.default_sampling_variance,
        methods=methods,
        nominal=nominal,
        replications=replications,
        seed=seed,
        workers=args.threads,
    )
    out = _outdir(args)
    csv_path, svg_path = out / "coverage.csv", out / "coverage.svg"
    _ensure_outputs([csv_path, svg_path], args.force)
    params = {"command": "coverage", "n": n_units, "nominal": nominal,
              "replications": replications, "seed": seed,
              "methods": ",".join(methods), "variances": cfg.get("variances", "1.0"),
              **{f"generator.{k}": v for k, v in io.model_to_keys(model).items()}}
    chash = io.config_hash(params)
    io.write_coverage_csv(results, csv_path, seed=seed, extra={"config-hash": chash})
    profile = None
    if "eb_adjusted" in methods:
        panel, _ = model.sample_panel(
            n_units,
            sampling_variances=variances if variances is not None else None,
            seed=np.random.SeedSequence(seed).spawn(replications + 1)[-1],
        )
        V = panel.resolve_variances(model.default_sampling_variance)
        profile = bowing_profile("eb_adjusted", panel, fit_shrinkage_state(panel.z, V), nominal)
    from .plots import coverage_figure

    coverage_figure(results, profile, svg_path)
    for r in results:
        print(f"{r.method:16s} coverage {r.empirical_coverage:.4f} "
              f"(+-{r.mc_stderr:.4f}) width {_fmt4(r.mean_width)}")
    return 0


def cmd_reproduce(args) -> int:
    ks = _parse_ks(args.k) if args.k is not None else None
    rows = reference_checks(ks)
    name_w = max(len(r[0]) for r in rows) + 2
    lines = [f"{'quantity':<{name_w}}{'value':>10}  {'band':<18}status"]
    payload = []
    for name, value, band in rows:
        if band is None:
            status, band_s = "-", "-"
            ok = None
        else:
            ok = band[0] <= value <= band[1]
            status = "pass" if ok else "FAIL"
            band_s = f"[{band[0]:g}, {band[1]:g}]"
        lines.append(f"{name:<{name_w}}{value:>10.4g}  {band_s:<18}{status}")
        payload.append({"quantity": name, "value": value,
                        "band": list(band) if band else None, "pass": ok})
    table = "\n".join(lines)
    print(table)
    if args.out is not None:
        out = _outdir(args)
        txt_path, json_path = out / "report.txt", out / "report.json"
        _ensure_outputs([txt_path, json_path], args.force)
        chash = io.config_hash({"command": "reproduce-paper", "k": args.k})
        header = "\n".join(io.header_lines(seed=None, extra={"config-hash": chash}))
        txt_path.write_text(header + "\n" + table + "\n")
        json_path.write_text(json.dumps(
            {"generator": f"twogroups {__version__}", "config_hash": chash, "checks": payload},
            indent=2, sort_keys=True) + "\n")
    return 0


# -- parser ------------------------------------------------------------------------


def _add_common(p, out_required=True):
    p.add_argument("--out", required=out_required, default=None, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing output files")
    p.add_argument("--threads", type=int, default=1, help="worker cap; never changes results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twogroups",
        description="Two-groups empirical-Bayes inference: fdr, exceedance selection, "
                    "model fitting, variance moderation, and coverage studies.",
    )
    parser.add_argument("--version", action="version", version=f"twogroups {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a two-groups model to a panel")
    p.add_argument("--input", required=True, help="panel CSV (id,z[,variance|n])")
    p.add_argument("--method", choices=("parametric", "npmle"), default="parametric")
    p.add_argument("--grid", default="0.0:5.0:0.1", help="npmle support as lo:hi:step")
    p.add_argument("--fixed-p0", type=float, default=None, help="hold p0 fixed (npmle)")
    p.add_argument("--empirical-null", action="store_true",
                   help="fit the null from the centre of the data first")
    p.add_argument("--center-fraction", type=float, default=0.5)
    p.add_argument("--sigma2", type=float, default=1.0,
                   help="per-observation variance for sample-size panels")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="rank units by exceedance probability")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True, help="model config file")
    p.add_argument("--threshold", type=float, required=True, help="selection threshold on z")
    p.add_argument("--k", required=True, help="effect threshold(s), comma separated")
    p.add_argument("--tail", choices=("upper", "lower"), default="upper")
    p.add_argument("--sigma2", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("moderate", help="moderated z-scores from an expression matrix")
    p.add_argument("--input", required=True, help="TSV: label row, id column")
    _add_common(p)
    p.set_defaults(func=cmd_moderate)

    p = sub.add_parser("simulate", help="draw a panel from a model config")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variances", default=None, help="scalar or comma list")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coverage", help="repeated-sampling interval coverage study")
    p.add_argument("--config", required=True, help="key=value study config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    _add_common(p)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("reproduce-paper",
                       help="recompute the reference worked-example values and check bands")
    p.add_argument("--k", default=None,
                   help="restrict to averaged-exceedance rows at these thresholds")
    _add_common(p, out_required=False)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, InsufficientDataError, InsufficientGroupsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DegeneratePointError, EmpiricalNullError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
