"""File formats: panel CSV, model config, matrix TSV, and report writers.

Machine-readable outputs carry full float precision and a small header block
(tool version, seed, config hash) in ``#`` comment lines, and never a
timestamp, so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidInputError
from .model import MixingDistribution, NullComponent, TwoGroupsModel, ZPanel

__all__ = [
    "read_panel_csv",
    "write_panel_csv",
    "read_model_config",
    "write_model_config",
    "model_to_keys",
    "model_from_keys",
    "read_keyvalue",
    "read_matrix_tsv",
    "config_hash",
    "header_lines",
    "write_selection_csv",
    "write_selection_json",
    "write_coverage_csv",
    "write_moderation_csv",
]


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def config_hash(params: dict) -> str:
    """Short stable hash of the semantic parameters of a run."""
    canon = "\n".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def header_lines(seed=None, extra: dict | None = None) -> list:
    lines = [f"# generator: twogroups {__version__}"]
    lines.append(f"# seed: {'none' if seed is None else seed}")
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {_fmt(v)}")
    return lines


# -- panels ----------------------------------------------------------------------


def read_panel_csv(path, sigma2: float = 1.0) -> ZPanel:
    """Read a panel from ``id,z[,variance|n]`` with a header row.

    Comma and tab delimiters are both accepted.  ``sigma2`` is the
    panel-level per-observation variance used to convert sample sizes.
    """
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise InvalidInputError(f"{path}: empty panel file")
    delim = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(lines, delimiter=delim)
    header = [h.strip() for h in next(reader)]
    if header[:2] != ["id", "z"] or len(header) > 3:
        raise InvalidInputError(f"{path}: header must be id,z[,variance|n], got {header}")
    third = header[2] if len(header) == 3 else None
    if third not in (None, "variance", "n"):
        raise InvalidInputError(f"{path}: third column must be 'variance' or 'n', got {third!r}")
    ids, zs, extras = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise InvalidInputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0].strip())
        try:
            zs.append(float(row[1]))
            extras.append(float(row[2]) if third and row[2].strip() != "" else np.nan)
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    kwargs = {}
    if third == "variance":
        kwargs["sampling_variance"] = np.asarray(extras)
    elif third == "n":
        kwargs["sample_size"] = np.asarray(extras)
    return ZPanel(ids=ids, z=np.asarray(zs), sigma2=sigma2, **kwargs)


def write_panel_csv(panel: ZPanel, path, seed=None, extra: dict | None = None) -> None:
    path = Path(path)
    buf = _io.StringIO()
    for line in header_lines(seed=seed, extra=extra):
        buf.write(line + "\n")
    third = None
    if panel.sampling_variance is not None:
        third = "variance"
    elif panel.sample_size is not None:
        third = "n"
    buf.write("id,z" + (f",{third}" if third else "") + "\n")
    for i, uid in enumerate(panel.ids):
        row = f"{uid},{_fmt(panel.z[i])}"
        if third == "variance":
            x = panel.sampling_variance[i]
            row += "," + ("" if np.isnan(x) else _fmt(x))
        elif third == "n":
            x = panel.sample_size[i]
            row += "," + ("" if np.isnan(x) else str(int(x)))
        buf.write(row + "\n")
    path.write_text(buf.getvalue())


# -- model configs ---------------------------------------------------------------


def read_keyvalue(path) -> dict:
    """Flat ``key = value`` file with ``#`` comments."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def model_to_keys(model: TwoGroupsModel) -> dict:
    keys = {
        "p0": model.p0,
        "null.delta0": model.null.delta0,
        "null.sigma0": model.null.sigma0,
        "g.kind": model.g.kind,
        "sampling_variance": model.default_sampling_variance,
    }
    if model.g.kind == "normal":
        keys["g.mean"] = model.g.mean
        keys["g.variance"] = model.g.variance
    else:
        keys["g.support"] = ",".join(_fmt(u) for u in model.g.support)
        keys["g.weights"] = ",".join(_fmt(w) for w in model.g.weights)
    return keys


def model_from_keys(keys: dict, prefix: str = "") -> TwoGroupsModel:
    def get(name, default=None, required=False):
        full = prefix + name
        if full in keys:
            return keys[full]
        if required:
            raise InvalidInputError(f"missing model config key {full!r}")
        return default

    delta0 = float(get("null.delta0", 0.0))
    sigma0 = float(get("null.sigma0", 1.0))
    if delta0 == 0.0 and sigma0 == 1.0:
        null = NullComponent.theoretical()
    else:
        null = NullComponent.empirical(delta0, sigma0)
    kind = get("g.kind", required=True)
    if kind == "normal":
        g = MixingDistribution.normal(float(get("g.mean", required=True)),
                                      float(get("g.variance", required=True)))
    elif kind == "grid":
        support = [float(x) for x in str(get("g.support", required=True)).split(",")]
        weights = [float(x) for x in str(get("g.weights", required=True)).split(",")]
        g = MixingDistribution.grid(support, weights)
    else:
        raise InvalidInputError(f"unknown g.kind {kind!r}")
    return TwoGroupsModel(
        p0=float(get("p0", required=True)),
        null=null,
        g=g,
        default_sampling_variance=float(get("sampling_variance", 1.0)),
    )


def read_model_config(path) -> TwoGroupsModel:
    return model_from_keys(read_keyvalue(path))


def write_model_config(model: TwoGroupsModel, path, seed=None, extra: dict | None = None) -> None:
    lines = header_lines(seed=seed, extra=extra)
    lines += [f"{k} = {_fmt(v)}" for k, v in model_to_keys(model).items()]
    Path(path).write_text("\n".join(lines) + "\n")


# -- expression matrices -----------------------------------------------------------


def read_matrix_tsv(path):
    """Read an expression matrix: first row group labels, first column row ids."""
    from .moderation import ExpressionMatrix

    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if len(lines) < 2:
        raise InvalidInputError(f"{path}: matrix needs a label row and at least one data row")
    header = lines[0].split("\t")
    labels = [h.strip() for h in header[1:]]
    row_ids, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != len(labels) + 1:
            raise InvalidInputError(
                f"{path}:{lineno}: expected {len(labels) + 1} fields, got {len(parts)}"
            )
        row_ids.append(parts[0].strip())
        try:
            rows.append([float(x) for x in parts[1:]])
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
    return ExpressionMatrix(row_ids=row_ids, column_labels=labels, values=np.asarray(rows))


# -- reports -----------------------------------------------------------------------


def write_selection_csv(report, path, seed=None, extra: dict | None = None) -> None:
    ks = sorted(report.averaged_by_k)
    buf = _io.StringIO()
    for line in header_lines(seed=seed, extra=extra):
        buf.write(line + "\n")
    cols = ["id", "z", "variance", "fdr"] + [f"exceedance@{_fmt(k)}" for k in ks] + ["rank"]
    buf.write(",".join(cols) + "\n")
    for rank, s in enumerate(report.selected, start=1):
        row = [s.id, _fmt(s.z), _fmt(s.sampling_variance), _fmt(s.fdr)]
        row += [_fmt(s.exceedance[k]) for k in ks]
        row.append(str(rank))
        buf.write(",".join(row) + "\n")
    Path(path).write_text(buf.getvalue())


def write_selection_json(report, path, seed=None, extra: dict | None = None) -> None:
    payload = {
        "generator": f"twogroups {__version__}",
        "seed": "none" if seed is None else seed,
        **(extra or {}),
        "threshold_z": report.threshold_z,
        "k": report.k,
        "tail": report.tail,
        "n_selected": report.n_selected,
        "averaged_exceedance": report.averaged_exceedance,
        "expected_true_exceedances": report.expected_true_exceedances,
        "averaged_by_k": {_fmt(k): v for k, v in sorted(report.averaged_by_k.items())},
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_coverage_csv(results, path, seed=None, extra: dict | None = None) -> None:
    buf = _io.StringIO()
    for line in header_lines(seed=seed, extra=extra):
        buf.write(line + "\n")
    buf.write(
        "method,nominal,replications,n_units,empirical_coverage,mc_stderr,mean_width,boundary_rate\n"
    )
    for r in results:
        buf.write(
            ",".join(
                [
                    r.method,
                    _fmt(r.nominal),
                    str(r.replications),
                    str(r.n_units),
                    _fmt(r.empirical_coverage),
                    _fmt(r.mc_stderr),
                    _fmt(r.mean_width),
                    _fmt(r.boundary_rate),
                ]
            )
            + "\n"
        )
    Path(path).write_text(buf.getvalue())


def write_moderation_csv(scores, path, seed=None, extra: dict | None = None) -> None:
    buf = _io.StringIO()
    info = {"d0": scores.d0, "s0": scores.s0, "df": scores.df}
    if scores.flagged_ids:
        info["flagged"] = ";".join(scores.flagged_ids)
    for line in header_lines(seed=seed, extra={**(extra or {}), **info}):
        buf.write(line + "\n")
    buf.write("id,s_raw,s_shrunk,raw_t,moderated_t,z\n")
    for i, uid in enumerate(scores.ids):
        buf.write(
            ",".join(
                [
                    uid,
                    _fmt(scores.s_raw[i]),
                    _fmt(scores.s_shrunk[i]),
                    _fmt(scores.raw_t[i]),
                    _fmt(scores.moderated_t[i]),
                    _fmt(scores.z[i]),
                ]
            )
            + "\n"
        )
    Path(path).write_text(buf.getvalue())
