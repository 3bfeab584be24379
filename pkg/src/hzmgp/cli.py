"""Command-line interface: fit, simulate, classify, and study subcommands.

Datasets are CSVs with `time` and `status` columns plus numeric covariate
columns; configs are JSON. Every command writes its artifacts (CSV/JSON
only) into an output directory together with a run manifest recording the
resolved configuration, seed, input digests, and package version.

Exit codes: 0 success, 2 input/config validation failure, 3 sampler
failure, 4 convergence-diagnostics failure (R-hat above threshold; can be
downgraded to a warning via config). Log verbosity is controlled by the
HZMGP_LOG environment variable (e.g. DEBUG, INFO, WARNING).
"""

import argparse
import hashlib
import json
import logging
import os
import sys

import numpy as np
import pandas as pd

from . import __version__
from .classify import (ClassificationConfig, classify_population)
from .inference import ModelData, PriorSpec, natural_names
from .sampler import PosteriorDraws, SamplerConfig, SamplerError, run_sampler
from .simulate import (SCENARIO_I, SCENARIO_II, ScenarioSpec,
                       generate_arrays, natural_draws, run_study)

__all__ = ["main", "ValidationError", "EXIT_VALIDATION", "EXIT_SAMPLER",
           "EXIT_DIAGNOSTICS"]

EXIT_VALIDATION = 2
EXIT_SAMPLER = 3
EXIT_DIAGNOSTICS = 4

log = logging.getLogger("hzmgp")


class ValidationError(Exception):
    """Bad input data or configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Config and dataset loading


def _read_config(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError("config root must be a JSON object")
    return cfg


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def load_dataset(path):
    """Read and validate a dataset CSV; returns a numeric DataFrame.

    Requires `time` and `status` columns, no missing values, numeric
    entries, status in {0, 1}, positive times for every event row, and at
    least one event.
    """
    try:
        df = pd.read_csv(path)
    except OSError as exc:
        raise ValidationError(f"cannot read dataset: {exc}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ValidationError(f"malformed dataset CSV: {exc}") from exc

    for col in ("time", "status"):
        if col not in df.columns:
            raise ValidationError(f"missing required column '{col}'")
    na_cols = [c for c in df.columns if df[c].isna().any()]
    if na_cols:
        raise ValidationError(f"missing values in column '{na_cols[0]}'")
    for col in df.columns:
        try:
            df[col] = pd.to_numeric(df[col])
        except (ValueError, TypeError) as exc:
            raise ValidationError(
                f"non-numeric values in column '{col}'") from exc

    status = df["status"].to_numpy(dtype=float)
    if not np.all(np.isin(status, (0.0, 1.0))):
        raise ValidationError("column 'status' must contain only 0 and 1")
    t = df["time"].to_numpy(dtype=float)
    if np.any(t < 0):
        raise ValidationError("column 'time' must be non-negative")
    if np.any(t[status == 1.0] <= 0):
        raise ValidationError("event rows must have time > 0")
    if not np.any(status == 1.0):
        raise ValidationError("at least one event required")
    return df


def _is_binary(values):
    return np.all(np.isin(values, (0.0, 1.0)))


def build_design(df, omega_cols, mu_cols, standardize):
    """Design matrices with intercepts plus the standardization record.

    Continuous covariates (anything not coded 0/1) are centered and scaled
    when `standardize` is on; the per-column (mean, sd) transform is
    returned so reports can flag the coefficient scale.
    """
    covariates = [c for c in df.columns if c not in ("time", "status")]
    omega_cols = list(omega_cols) if omega_cols is not None else covariates
    mu_cols = list(mu_cols) if mu_cols is not None else covariates
    for col in omega_cols + mu_cols:
        if col not in covariates:
            raise ValidationError(f"covariate column '{col}' not in dataset")

    transforms = {}
    columns = {}
    for col in dict.fromkeys(omega_cols + mu_cols):
        v = df[col].to_numpy(dtype=float)
        if standardize and not _is_binary(v):
            m, s = float(v.mean()), float(v.std(ddof=0))
            if s == 0.0:
                raise ValidationError(f"covariate column '{col}' is constant")
            v = (v - m) / s
            transforms[col] = {"mean": m, "sd": s}
        columns[col] = v

    n = len(df)
    x_omega = np.column_stack([np.ones(n)] + [columns[c] for c in omega_cols])
    x_mu = np.column_stack([np.ones(n)] + [columns[c] for c in mu_cols])
    return x_omega, x_mu, omega_cols, mu_cols, transforms


def _sampler_config(cfg, seed):
    try:
        return SamplerConfig(
            chains=int(cfg.get("chains", 3)),
            iterations=int(cfg.get("iterations", 1000)),
            burn_in=int(cfg.get("burn_in", 300)),
            seed=seed,
            target_acceptance=float(cfg.get("target_acceptance", 0.8)),
            max_tree_depth=int(cfg.get("max_tree_depth", 10)),
            dense_mass=bool(cfg.get("dense_mass", False)))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid sampler settings: {exc}") from exc


def _resolve_seed(args, cfg):
    if args.seed is not None:
        return int(args.seed)
    return int(cfg.get("seed", 0))


def _outdir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(out, command, seed, cfg, inputs, extra=None):
    man = {
        "command": command,
        "package_version": __version__,
        "seed": seed,
        "config": cfg,
        "inputs": {p: _sha256(p) for p in inputs},
    }
    if extra:
        man.update(extra)
    _write_json(os.path.join(out, "manifest.json"), man)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_fit(args):
    cfg = _read_config(args.config)
    seed = _resolve_seed(args, cfg)
    out = _outdir(args)

    df = load_dataset(args.dataset)
    x_omega, x_mu, omega_cols, mu_cols, transforms = build_design(
        df, cfg.get("omega_covariates"), cfg.get("mu_covariates"),
        bool(cfg.get("standardize", True)))
    data = ModelData(df["time"].to_numpy(dtype=float),
                     df["status"].to_numpy(dtype=float), x_omega, x_mu)

    prior = PriorSpec(sd=float(cfg.get("prior_sd", 10.0)))
    sampler_cfg = _sampler_config(cfg, seed)
    log.info("fitting %d subjects, %d parameters", len(df), data.dim)
    try:
        draws = run_sampler(data, sampler_cfg, prior, omega_cols, mu_cols)
    except SamplerError as exc:
        print(f"sampler failure: {exc}", file=sys.stderr)
        return EXIT_SAMPLER

    draws.to_csv(os.path.join(out, "draws.csv"))

    nat = natural_draws(draws)
    rows = []
    for j, name in enumerate(natural_names(omega_cols, mu_cols)):
        col = nat[:, j]
        lo, hi = np.percentile(col, [2.5, 97.5])
        rows.append((name, col.mean(), col.std(ddof=1), lo, hi))
    summary = pd.DataFrame(rows,
                           columns=["parameter", "mean", "sd", "q2.5",
                                    "q97.5"])
    summary.to_csv(os.path.join(out, "summary.csv"), index=False)

    diagnostics = {
        "rhat": {n: float(r) for n, r in zip(draws.names, draws.rhat)},
        "ess": {n: float(e) for n, e in zip(draws.names, draws.ess)},
        "divergences": int(draws.divergences),
        "accept_stat": float(draws.accept_stat),
        "step_sizes": [float(e) for e in draws.step_sizes],
        "wall_seconds": float(draws.wall_seconds),
    }
    _write_json(os.path.join(out, "diagnostics.json"), diagnostics)
    _manifest(out, "fit", seed, cfg, [args.dataset],
              extra={"standardization": transforms,
                     "omega_covariates": omega_cols,
                     "mu_covariates": mu_cols})

    threshold = float(cfg.get("rhat_threshold", 1.05))
    bad = [n for n, r in zip(draws.names, draws.rhat)
           if np.isfinite(r) and r > threshold]
    if bad:
        msg = (f"convergence warning: R-hat > {threshold} for "
               f"{', '.join(bad)}")
        print(msg, file=sys.stderr)
        if cfg.get("diagnostics", "error") != "warn":
            return EXIT_DIAGNOSTICS
    return 0


def _resolve_scenario(cfg, seed):
    named = {"I": SCENARIO_I, "II": SCENARIO_II,
             "scenario_I": SCENARIO_I, "scenario_II": SCENARIO_II}
    base = cfg.get("scenario")
    try:
        if base is not None:
            if base not in named:
                raise ValidationError(f"unknown scenario '{base}'; "
                                      f"expected one of {sorted(named)}")
            ref = named[base]
            return ScenarioSpec(
                name=ref.name, phi=ref.phi, beta_omega=ref.beta_omega,
                beta_mu=ref.beta_mu, lam=ref.lam, gamma=ref.gamma,
                n=int(cfg.get("n", ref.n)),
                replicates=int(cfg.get("replicates", ref.replicates)),
                tau=float(cfg.get("tau", ref.tau)))
        required = ("phi", "beta_omega", "beta_mu", "lambda", "gamma")
        missing = [k for k in required if k not in cfg]
        if missing:
            raise ValidationError(
                f"scenario config missing keys: {', '.join(missing)}")
        return ScenarioSpec(
            name=str(cfg.get("name", "custom")), phi=float(cfg["phi"]),
            beta_omega=tuple(cfg["beta_omega"]),
            beta_mu=tuple(cfg["beta_mu"]), lam=float(cfg["lambda"]),
            gamma=float(cfg["gamma"]), n=int(cfg.get("n", 1000)),
            replicates=int(cfg.get("replicates", 10)),
            tau=float(cfg.get("tau", 10.0)))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid scenario config: {exc}") from exc


def cmd_simulate(args):
    cfg = _read_config(args.config)
    seed = _resolve_seed(args, cfg)
    out = _outdir(args)
    spec = _resolve_scenario(cfg, seed)

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    t, delta, x, v = generate_arrays(spec, rng)
    dataset = pd.DataFrame({"time": t, "status": delta.astype(int),
                            "x1": x[:, 0], "x2": x[:, 1].astype(int)})
    dataset.to_csv(os.path.join(out, "dataset.csv"), index=False)

    truth_subjects = pd.DataFrame({"v": v, "cured": (v == 0).astype(int)})
    truth_subjects.to_csv(os.path.join(out, "truth.csv"), index=False)
    _write_json(os.path.join(out, "truth.json"), {
        "scenario": spec.name,
        "phi": spec.phi,
        "beta_omega": list(spec.beta_omega),
        "beta_mu": list(spec.beta_mu),
        "lambda": spec.lam,
        "gamma": spec.gamma,
        "n": spec.n,
        "tau": spec.tau,
        "seed": seed,
        "cured_fraction": float((v == 0).mean()),
        "censored_fraction": float(1.0 - delta.mean()),
    })
    _manifest(out, "simulate", seed, cfg, [])
    return 0


def _load_draws(path, names_expected):
    try:
        df = pd.read_csv(path)
    except OSError as exc:
        raise ValidationError(f"cannot read draws: {exc}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ValidationError(f"malformed draws CSV: {exc}") from exc
    if df.shape[1] != names_expected:
        raise ValidationError(
            f"draws have {df.shape[1]} columns but the dataset implies "
            f"{names_expected} parameters (dimension mismatch)")
    mat = df.to_numpy(dtype=float)
    if mat.shape[0] < 1 or not np.all(np.isfinite(mat)):
        raise ValidationError("draws must be a non-empty finite matrix")
    d = mat.shape[1]
    return PosteriorDraws(draws=mat, names=list(df.columns), chains=1,
                          rhat=np.full(d, np.nan), ess=np.zeros(d),
                          divergences=0, accept_stat=float("nan"),
                          step_sizes=np.array([]))


def cmd_classify(args):
    cfg = _read_config(args.config)
    seed = _resolve_seed(args, cfg)
    out = _outdir(args)
    alpha = float(args.alpha if args.alpha is not None
                  else cfg.get("alpha", 0.1))
    try:
        ccfg = ClassificationConfig(alpha=alpha)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc

    df = load_dataset(args.dataset)
    x_omega, x_mu, omega_cols, mu_cols, transforms = build_design(
        df, cfg.get("omega_covariates"), cfg.get("mu_covariates"),
        bool(cfg.get("standardize", True)))
    draws = _load_draws(args.draws, x_omega.shape[1] + x_mu.shape[1] + 3)

    subjects, summary = classify_population(draws, x_omega, x_mu, ccfg)
    table = pd.DataFrame(
        {"index": [s.index for s in subjects],
         "label": [s.label.value if hasattr(s.label, "value") else s.label
                   for s in subjects],
         "prob_below_threshold": [s.prob_below_threshold for s in subjects],
         "prob_omega_lt_1": [s.prob_omega_lt_1 for s in subjects]})
    table.to_csv(os.path.join(out, "classification.csv"), index=False)
    _write_json(os.path.join(out, "population.json"), {
        "proportions": summary.proportions,
        "unclassifiable": summary.unclassifiable,
        "n_subjects": summary.n_subjects,
        "alpha": alpha,
    })
    _manifest(out, "classify", seed, cfg, [args.draws, args.dataset],
              extra={"standardization": transforms})
    return 0


def cmd_study(args):
    cfg = _read_config(args.config)
    seed = _resolve_seed(args, cfg)
    out = _outdir(args)
    spec = _resolve_scenario(cfg, seed)
    fit_cfg = _sampler_config(cfg.get("fit", {}), seed)
    alpha = float(cfg.get("alpha", 0.1))
    prior = PriorSpec(sd=float(cfg.get("prior_sd", 10.0)))
    escalations = int(cfg.get("escalations", 0))

    log.info("study: %s, n=%d, replicates=%d", spec.name, spec.n,
             spec.replicates)
    try:
        report = run_study(spec, fit_cfg, prior, alpha=alpha, seed=seed,
                           escalations=escalations)
    except SamplerError as exc:
        print(f"sampler failure: {exc}", file=sys.stderr)
        return EXIT_SAMPLER

    rows = [(name, truth, mean, sd, cp)
            for name, truth, mean, sd, cp in report.rows()]
    table = pd.DataFrame(rows, columns=["parameter", "truth", "mean", "sd",
                                        "cp"])
    table.to_csv(os.path.join(out, "report.csv"), index=False)
    _write_json(os.path.join(out, "classification.json"), {
        "proportions": report.classification,
        "unclassifiable": report.unclassifiable,
        "replicates_run": report.replicates_run,
        "replicates_failed": report.replicates_failed,
    })
    _write_json(os.path.join(out, "timing.json"), {
        "seconds_per_fit": report.seconds_per_fit,
    })
    _manifest(out, "study", seed, cfg, [])
    return 0


# ---------------------------------------------------------------------------
# Entry point


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hzmgp",
        description="Cure-rate survival modeling with HZMGP frailty")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        p.add_argument("--out", help="output directory (default: cwd)")

    p_fit = sub.add_parser("fit", help="fit the model to a dataset CSV")
    p_fit.add_argument("dataset", help="dataset CSV (time, status, covariates)")
    common(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_cls = sub.add_parser("classify",
                           help="classify subjects from posterior draws")
    p_cls.add_argument("draws", help="posterior draws CSV from `fit`")
    p_cls.add_argument("dataset", help="dataset CSV the draws were fit to")
    p_cls.add_argument("--alpha", type=float,
                       help="decision level in (0, 0.5)")
    common(p_cls)
    p_cls.set_defaults(func=cmd_classify)

    p_study = sub.add_parser("study",
                             help="replicate simulation-recovery study")
    common(p_study)
    p_study.set_defaults(func=cmd_study)
    return parser


def main(argv=None):
    logging.basicConfig(level=os.environ.get("HZMGP_LOG", "WARNING"))
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
