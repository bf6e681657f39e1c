"""Command-line surface: data ingestion, configuration, and commands.

Input data is a CSV of per-study 3x2 tables; configuration is a flat
key=value file with section prefixes (margin1.*, edge_a.*, vine.*,
fit.*, sim.*, truth.*, scan.*).  Commands emit machine-readable JSON or
CSV and use exit code 0 on success, 2 for parse/validation failures and
3 for non-convergence (the best point found is still emitted).
"""

from __future__ import annotations

import csv
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from .copulas import (
    BivariateCopula,
    CopulaFamily,
    tau_to_theta,
    theta_to_tau,
)
from .estimation import (
    PARAM_NAMES,
    FitConfig,
    FitResult,
    fit as run_fit,
    model_scan,
)
from .margins import MarginSpec
from .model import ModelSpec, StudyData, pooled_nonevaluable_probs
from .simulation import (
    Scenario,
    SimStudyConfig,
    SizeLaw,
    run_sim_study,
    simulate_dataset,
)
from .sroc import (
    density_contours,
    quantile_curve,
    render_svg,
    study_points,
    summary_point,
)
from .vine import VineSpec

DATA_HEADER = ["study_id", "y00", "y01", "y10", "y11", "y20", "y21"]
FIT_SCHEMA = "vinedta.fit/1"
SCAN_SCHEMA = "vinedta.scan/1"
EXIT_PARSE = 2
EXIT_NO_CONVERGE = 3

EDGE_ROLES = ("edge_a", "edge_b", "edge_cond")


class InputError(Exception):
    """Parse/validation failure in a data or config file."""


# ---------------------------------------------------------------------------
# dataset ingestion


def read_dataset(path):
    """Read the study CSV, validating header, types and uniqueness."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read data file {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: empty file, expected header "
                         f"{','.join(DATA_HEADER)}")
    if [c.strip() for c in rows[0]] != DATA_HEADER:
        raise InputError(
            f"{path}, line 1: header must be exactly "
            f"{','.join(DATA_HEADER)}, got {','.join(rows[0])}"
        )
    if len(rows) == 1:
        raise InputError(f"{path}: no data rows after the header")
    studies = []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 7:
            raise InputError(
                f"{path}, line {lineno}: expected 7 fields, got {len(row)}"
            )
        sid = row[0].strip()
        if not sid:
            raise InputError(f"{path}, line {lineno}: empty study_id")
        if sid in seen:
            raise InputError(f"{path}, line {lineno}: duplicate study_id "
                             f"{sid!r}")
        seen.add(sid)
        counts = []
        for col, (name, raw) in enumerate(zip(DATA_HEADER[1:], row[1:]),
                                          start=2):
            try:
                value = int(raw)
            except ValueError:
                raise InputError(
                    f"{path}, line {lineno}, column {col} ({name}): "
                    f"expected a nonnegative integer, got {raw!r}"
                ) from None
            if value < 0:
                raise InputError(
                    f"{path}, line {lineno}, column {col} ({name}): "
                    f"negative count {value}"
                )
            counts.append(value)
        studies.append((sid, StudyData(*counts)))
    return studies


def write_dataset(studies, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(DATA_HEADER)
    for sid, s in studies:
        writer.writerow([sid, s.y00, s.y01, s.y10, s.y11, s.y20, s.y21])


# ---------------------------------------------------------------------------
# configuration


def parse_config(path):
    """Flat key=value file; '#' comments; returns {key: (value, lineno)}."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}, line {lineno}: expected key=value, "
                             f"got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise InputError(f"{path}, line {lineno}: empty key")
        if key in out:
            raise InputError(f"{path}, line {lineno}: duplicate key {key!r}")
        out[key] = (value, lineno)
    return out


class Config:
    def __init__(self, entries, path):
        self.entries = entries
        self.path = path

    def get(self, key, default=None):
        if key in self.entries:
            return self.entries[key][0]
        return default

    def _fail(self, key, msg):
        lineno = self.entries[key][1] if key in self.entries else "?"
        raise InputError(f"{self.path}, line {lineno}: {key}: {msg}")

    def get_float(self, key, default=None):
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            self._fail(key, f"expected a number, got {raw!r}")

    def get_int(self, key, default=None):
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            self._fail(key, f"expected an integer, got {raw!r}")

    def get_bool(self, key, default=False):
        raw = self.get(key)
        if raw is None:
            return default
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        self._fail(key, f"expected true/false, got {raw!r}")

    def get_list(self, key, default=()):
        raw = self.get(key)
        if raw is None:
            return list(default)
        return [item.strip() for item in raw.split(",") if item.strip()]


def load_config(path):
    return Config(parse_config(path), path)


def _margin_from_config(cfg: Config, section: str, pi: float,
                        delta: float | None) -> MarginSpec:
    family = cfg.get(f"{section}.family", "normal")
    if family not in ("normal", "beta"):
        cfg._fail(f"{section}.family",
                  f"unknown margin family {family!r} (normal or beta)")
    if family == "beta":
        link = cfg.get(f"{section}.link", "identity")
        default_delta = 0.05
    else:
        link = cfg.get(f"{section}.link", "logit")
        default_delta = 0.5
    pi = cfg.get_float(f"{section}.pi", pi)
    delta = cfg.get_float(f"{section}.delta",
                          delta if delta is not None else default_delta)
    try:
        return MarginSpec(family, pi, delta, link)
    except ValueError as exc:
        raise InputError(f"{cfg.path}: {section}: {exc}") from exc


def _edge_from_config(cfg: Config, role: str) -> BivariateCopula:
    kind = cfg.get(f"{role}.family", "bvn")
    rotation = cfg.get_int(f"{role}.rotation", 0)
    try:
        family = CopulaFamily(kind, rotation)
    except ValueError as exc:
        raise InputError(f"{cfg.path}: {role}: {exc}") from exc
    tau_key = f"{role}.tau"
    tau = cfg.get_float(tau_key)
    if tau is None:
        if kind == "clayton":
            tau = 0.5 if rotation in (0, 180) else -0.5
        else:
            tau = 0.0
    try:
        theta = tau_to_theta(family, tau)
    except ValueError as exc:
        raise InputError(f"{cfg.path}: {role}.tau: {exc}") from exc
    return BivariateCopula(family, theta)


def model_from_config(cfg: Config) -> ModelSpec:
    """Template/start model from the margin*, edge_*, vine.* sections."""
    permutation = cfg.get_int("vine.permutation", 1)
    if permutation not in (1, 2, 3):
        cfg._fail("vine.permutation", f"must be 1, 2 or 3, got {permutation}")
    margins = [
        _margin_from_config(cfg, f"margin{i}", pi=0.5, delta=None)
        for i in (1, 2, 3)
    ]
    edges = [_edge_from_config(cfg, role) for role in EDGE_ROLES]
    if cfg.get_bool("fit.truncated", False):
        edges[2] = BivariateCopula(CopulaFamily("independence"), 0.0)
    return ModelSpec(margins[0], margins[1], margins[2],
                     VineSpec(permutation, *edges))


def truth_from_config(cfg: Config) -> ModelSpec:
    """Simulation truth from the truth.* section.

    truth.tau12/tau13/tau23_1 set the Kendall taus of edge_a/edge_b/
    edge_cond; families come from edge_*.family as for fitting.
    """
    permutation = cfg.get_int("vine.permutation", 1)
    margins = []
    for i in (1, 2, 3):
        family = cfg.get(f"margin{i}.family", "normal")
        link = cfg.get(f"margin{i}.link",
                       "identity" if family == "beta" else "logit")
        pi = cfg.get_float(f"truth.pi{i}")
        delta = cfg.get_float(f"truth.delta{i}")
        if pi is None:
            raise InputError(f"{cfg.path}: missing truth.pi{i}")
        if delta is None:
            delta = 0.1 if family == "beta" else 1.0
        try:
            margins.append(MarginSpec(family, pi, delta, link))
        except ValueError as exc:
            raise InputError(f"{cfg.path}: margin{i}: {exc}") from exc
    edges = []
    for role, tau_key in zip(EDGE_ROLES, ("truth.tau12", "truth.tau13",
                                          "truth.tau23_1")):
        kind = cfg.get(f"{role}.family", "bvn")
        rotation = cfg.get_int(f"{role}.rotation", 0)
        tau = cfg.get_float(tau_key, 0.0)
        try:
            family = CopulaFamily(kind, rotation)
            edges.append(BivariateCopula(family, tau_to_theta(family, tau)))
        except ValueError as exc:
            raise InputError(f"{cfg.path}: {role}/{tau_key}: {exc}") from exc
    return ModelSpec(margins[0], margins[1], margins[2],
                     VineSpec(permutation, *edges))


def _cell_edges(token: str, path: str):
    """Copula-cell token -> three (kind, rotation) pairs.

    Tokens: 'bvn', 'frank', 'independence', or 'claytonW1-W2[-W3]' where
    W1 rotates the first edge and W2 the remaining edge(s).
    """
    if token in ("bvn", "frank"):
        return [(token, 0)] * 3
    if token == "independence":
        return [("independence", 0)] * 3
    if token.startswith("clayton"):
        parts = token[len("clayton"):].split("-")
        if len(parts) in (2, 3):
            try:
                rots = [int(p) for p in parts]
            except ValueError:
                rots = None
            if rots is not None and all(r in (0, 90, 180, 270) for r in rots):
                if len(rots) == 2:
                    rots = [rots[0], rots[1], rots[1]]
                return [("clayton", r) for r in rots]
    raise InputError(
        f"{path}: unknown copula cell {token!r} (use bvn, frank, "
        f"independence, or claytonW1-W2[-W3] with rotations 0/90/180/270)"
    )


def _start_tau(kind, rotation):
    if kind == "clayton":
        return 0.5 if rotation in (0, 180) else -0.5
    return 0.0


def templates_from_cells(cfg: Config, margins_key: str, copulas_key: str):
    """Cross product of margin families and copula cells as templates."""
    margin_families = cfg.get_list(margins_key, ["normal"])
    cells = cfg.get_list(copulas_key, ["bvn"])
    permutation = cfg.get_int("vine.permutation", 1)
    links = {
        i: cfg.get(f"margin{i}.link") for i in (1, 2, 3)
    }
    templates = []
    for mf in margin_families:
        if mf not in ("normal", "beta"):
            raise InputError(f"{cfg.path}: {margins_key}: unknown margin "
                             f"family {mf!r}")
        margins = []
        for i, pi in zip((1, 2, 3), (0.8, 0.8, 0.3)):
            link = links[i] or ("identity" if mf == "beta" else "logit")
            delta = 0.05 if mf == "beta" else 0.5
            margins.append(MarginSpec(mf, pi, delta, link))
        for token in cells:
            edges = []
            for kind, rotation in _cell_edges(token, cfg.path):
                family = CopulaFamily(kind, rotation)
                tau = _start_tau(kind, rotation)
                edges.append(
                    BivariateCopula(family, tau_to_theta(family, tau)))
            templates.append(
                ModelSpec(margins[0], margins[1], margins[2],
                          VineSpec(permutation, *edges))
            )
    return templates


# ---------------------------------------------------------------------------
# JSON serialization


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _model_json(m: ModelSpec) -> dict:
    return {
        "permutation": m.vine.permutation,
        "margins": [
            {"family": mg.family, "link": mg.link, "pi": mg.pi,
             "delta": mg.delta}
            for mg in m.margins
        ],
        "edges": [
            {
                "role": role,
                "family": e.family.kind,
                "rotation": e.family.rotation,
                "theta": e.theta,
                "tau": theta_to_tau(e),
            }
            for role, e in zip(
                EDGE_ROLES, (m.vine.edge_a, m.vine.edge_b, m.vine.edge_cond))
        ],
    }


def model_from_json(obj: dict) -> ModelSpec:
    margins = [
        MarginSpec(m["family"], m["pi"], m["delta"], m["link"])
        for m in obj["margins"]
    ]
    edges = [
        BivariateCopula(CopulaFamily(e["family"], e["rotation"]), e["theta"])
        for e in obj["edges"]
    ]
    return ModelSpec(margins[0], margins[1], margins[2],
                     VineSpec(obj["permutation"], *edges))


def fit_result_json(res: FitResult, data=None) -> dict:
    out = {
        "schema": FIT_SCHEMA,
        "converged": bool(res.converged),
        "log_lik": _jsonable(float(res.log_lik)),
        "n_studies": res.n_studies,
        "n_params": res.n_params,
        "estimates": {
            name: _jsonable(float(v))
            for name, v in zip(PARAM_NAMES, res.estimates)
        },
        "standard_errors": {
            name: _jsonable(float(v))
            for name, v in zip(PARAM_NAMES, res.standard_errors)
        },
        "se_available": bool(res.se_available),
        "model": _model_json(res.model),
        "diagnostics": {
            "n_starts": res.n_starts,
            "message": res.message,
        },
    }
    if data is not None:
        p4, p5 = pooled_nonevaluable_probs(data)
        out["pooled_nonevaluable"] = {"p4": _jsonable(p4),
                                      "p5": _jsonable(p5)}
    return out


def _dump_json(obj, out_path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _write_text(text, out_path):
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


# ---------------------------------------------------------------------------
# commands


def _fail_parse(exc):
    click.echo(f"error: {exc}", err=True)
    raise SystemExit(EXIT_PARSE)


def cmd_fit(data_path, config_path, out_path=None, n_q=None):
    try:
        named = read_dataset(data_path)
        cfg = load_config(config_path)
        template = model_from_config(cfg)
        fit_cfg = FitConfig(
            n_q=n_q or cfg.get_int("fit.n_q", 15),
            max_iters=cfg.get_int("fit.max_iters", 500),
            truncated=cfg.get_bool("fit.truncated", False),
            start=template,
        )
    except (InputError, ValueError) as exc:
        _fail_parse(exc)
    data = [s for _, s in named]
    res = run_fit(data, template, fit_cfg)
    _dump_json(fit_result_json(res, data), out_path)
    if not res.converged:
        raise SystemExit(EXIT_NO_CONVERGE)
    return res


def cmd_scan(data_path, config_path, out_path=None, n_q=None):
    try:
        named = read_dataset(data_path)
        cfg = load_config(config_path)
        templates = templates_from_cells(cfg, "scan.margins", "scan.copulas")
        fit_cfg = FitConfig(n_q=n_q or cfg.get_int("fit.n_q", 15),
                            max_iters=cfg.get_int("fit.max_iters", 500))
    except (InputError, ValueError) as exc:
        _fail_parse(exc)
    data = [s for _, s in named]
    ranked = model_scan(data, templates, fit_cfg)
    rows = []
    for rank, res in enumerate(ranked, start=1):
        entry = fit_result_json(res, data)
        entry["rank"] = rank
        entry["status"] = "ok" if np.isfinite(res.log_lik) else "failed"
        entry["best"] = rank == 1
        rows.append(entry)
    _dump_json({"schema": SCAN_SCHEMA, "results": rows}, out_path)
    if out_path:
        csv_path = str(out_path) + ".csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["rank", "status", "best", "log_lik", "margins",
                             "copulas"] + list(PARAM_NAMES))
            for entry in rows:
                model = entry["model"]
                margins = "/".join(m["family"] for m in model["margins"])
                copulas = "+".join(
                    e["family"] + (str(e["rotation"])
                                   if e["family"] == "clayton" else "")
                    for e in model["edges"]
                )
                writer.writerow(
                    [entry["rank"], entry["status"], entry["best"],
                     entry["log_lik"], margins, copulas]
                    + [entry["estimates"][p] for p in PARAM_NAMES]
                )
    return ranked


def cmd_simulate(config_path, out_path=None, seed=None):
    try:
        cfg = load_config(config_path)
        truth = truth_from_config(cfg)
        scenario = Scenario(cfg.get_float("sim.v4", 0.0),
                            cfg.get_float("sim.v5", 0.0))
        n_studies = cfg.get_int("sim.n_studies", 30)
        size_law = SizeLaw(cfg.get_float("sim.size_alpha", 1.2),
                           cfg.get_float("sim.size_beta", 0.01),
                           cfg.get_int("sim.size_lag", 30))
        if seed is None:
            seed = cfg.get_int("sim.seed")
        if seed is None:
            raise InputError(f"{config_path}: a seed is required "
                             f"(--seed or sim.seed)")
    except (InputError, ValueError) as exc:
        _fail_parse(exc)
    rng = np.random.default_rng(seed)
    data = simulate_dataset(truth, scenario, n_studies, rng, size_law)
    named = [(f"study_{i + 1}", s) for i, s in enumerate(data)]
    if out_path:
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            write_dataset(named, fh)
    else:
        write_dataset(named, sys.stdout)
    return named


def cmd_simstudy(config_path, out_path=None, seed=None, replicates=None,
                 n_q=None, threads=1):
    try:
        cfg = load_config(config_path)
        truth = truth_from_config(cfg)
        scenario = Scenario(cfg.get_float("sim.v4", 0.0),
                            cfg.get_float("sim.v5", 0.0))
        if seed is None:
            seed = cfg.get_int("sim.seed")
        if seed is None:
            raise InputError(f"{config_path}: a seed is required "
                             f"(--seed or sim.seed)")
        tokens = cfg.get_list("simstudy.copulas", [])
        if tokens or cfg.get("simstudy.margins"):
            templates = templates_from_cells(
                cfg, "simstudy.margins", "simstudy.copulas")
        else:
            templates = [truth]
        study_cfg = SimStudyConfig(
            truth=truth,
            scenario=scenario,
            n_studies=cfg.get_int("sim.n_studies", 30),
            replicates=replicates or cfg.get_int("sim.replicates", 200),
            n_q=n_q or cfg.get_int("fit.n_q", 15),
            size_law=SizeLaw(cfg.get_float("sim.size_alpha", 1.2),
                             cfg.get_float("sim.size_beta", 0.01),
                             cfg.get_int("sim.size_lag", 30)),
            fitted_templates=tuple(templates),
            seed=seed,
        )
    except (InputError, ValueError) as exc:
        _fail_parse(exc)
    report = run_sim_study(study_cfg, threads=threads)
    _write_text(report.to_csv(), out_path)
    return report


def cmd_sroc(data_path, fit_json_or_config, out_path=None, n_q=None):
    """SROC outputs from a fit JSON (preferred) or a config to fit first."""
    try:
        named = read_dataset(data_path)
    except InputError as exc:
        _fail_parse(exc)
    data = [s for _, s in named]
    model = None
    try:
        text = Path(fit_json_or_config).read_text(encoding="utf-8")
    except OSError as exc:
        _fail_parse(InputError(f"cannot read {fit_json_or_config}: {exc}"))
    try:
        obj = json.loads(text)
        if obj.get("schema") != FIT_SCHEMA:
            _fail_parse(InputError(
                f"{fit_json_or_config}: expected schema {FIT_SCHEMA}"))
        model = model_from_json(obj["model"])
    except json.JSONDecodeError:
        try:
            cfg = load_config(fit_json_or_config)
            template = model_from_config(cfg)
            fit_cfg = FitConfig(n_q=n_q or cfg.get_int("fit.n_q", 15),
                                start=template)
        except (InputError, ValueError) as exc:
            _fail_parse(exc)
        res = run_fit(data, template, fit_cfg)
        model = res.model
    curves = [
        quantile_curve(model, q, "x1_on_x2") for q in (0.01, 0.5, 0.99)
    ] + [quantile_curve(model, 0.5, "x2_on_x1")]
    grid = density_contours(model)
    points = study_points(data)
    svg = render_svg(curves, summary_point(model), points)
    curves_csv = "".join(
        c.to_csv() if i == 0 else
        "\n".join(c.to_csv().split("\n")[1:-1]) + "\n"
        for i, c in enumerate(curves)
    )
    if out_path:
        base = str(out_path)
        Path(base + ".curves.csv").write_text(curves_csv, encoding="utf-8")
        Path(base + ".grid.csv").write_text(grid.to_csv(), encoding="utf-8")
        Path(base + ".svg").write_text(svg, encoding="utf-8")
    else:
        click.echo(curves_csv, nl=False)
    return curves, grid, svg


# ---------------------------------------------------------------------------
# click wiring


@click.group()
def main():
    """Vine copula mixed models for diagnostic test accuracy meta-analysis."""


@main.command("fit")
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=False))
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=False))
@click.option("--out", "out_path", default=None)
@click.option("--nq", "n_q", type=int, default=None)
def _fit_cmd(data_path, config_path, out_path, n_q):
    """Maximum-likelihood fit; JSON result to stdout or --out."""
    cmd_fit(data_path, config_path, out_path, n_q)


@main.command("scan")
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=False))
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=False))
@click.option("--out", "out_path", default=None)
@click.option("--nq", "n_q", type=int, default=None)
def _scan_cmd(data_path, config_path, out_path, n_q):
    """Fit every candidate model; ranked JSON (+ CSV beside --out)."""
    cmd_scan(data_path, config_path, out_path, n_q)


@main.command("simulate")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=False))
@click.option("--out", "out_path", default=None)
@click.option("--seed", type=int, default=None)
def _simulate_cmd(config_path, out_path, seed):
    """Simulate one dataset CSV from the configured truth."""
    cmd_simulate(config_path, out_path, seed)


@main.command("simstudy")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=False))
@click.option("--out", "out_path", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--replicates", type=int, default=None)
@click.option("--nq", "n_q", type=int, default=None)
@click.option("--threads", type=int, default=1)
def _simstudy_cmd(config_path, out_path, seed, replicates, n_q, threads):
    """Replicated simulate-and-fit study; report CSV."""
    cmd_simstudy(config_path, out_path, seed, replicates, n_q, threads)


@main.command("sroc")
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=False))
@click.option("--config", "fit_json_or_config", required=True,
              type=click.Path(exists=False),
              help="fit JSON from the fit command, or a config to fit first")
@click.option("--out", "out_path", default=None)
@click.option("--nq", "n_q", type=int, default=None)
def _sroc_cmd(data_path, fit_json_or_config, out_path, n_q):
    """SROC curves, density grid and SVG from a fit."""
    cmd_sroc(data_path, fit_json_or_config, out_path, n_q)


if __name__ == "__main__":
    main()
