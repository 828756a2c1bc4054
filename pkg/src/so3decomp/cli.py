"""Command line driver: seeded simulate / decompound / scatter / figures runs.

Configuration is flat INI text: `[section]` headers over `key = value` lines,
no nesting. Every run writes a manifest echoing the fully resolved
configuration, so any output directory can be reproduced byte for byte by
pointing the same subcommand at its manifest (worker count does not affect
results). Floating point values are written with 17 significant digits.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 numerical
failure (for instance every gate failed).
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .decompound import (
    EstimatorConfig,
    ParametricEstimate,
    decompound,
    decompound_with_prior,
    error_decomposition,
    invert_compounding,
    read_estimates_csv,
    reconstruct_density,
    write_density_csv,
)
from .processes import (
    CompoundModel,
    ObservationSet,
    simulate_observations,
    theoretical_spectrum,
)
from .scattering import HenyeyGreenstein, estimate_g, hg_density, transmitted_intensity

__all__ = ["main", "ConfigError", "NumericalError", "ExperimentConfig"]


class ConfigError(Exception):
    """Invalid configuration: bad key, bad value, missing required field."""


class NumericalError(Exception):
    """The run produced no usable numerical result."""


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


@dataclass
class ExperimentConfig:
    """Resolved experiment parameters; one flat INI section per group."""

    # [model]
    rate: float = 0.3
    horizon: float = 10.0
    noise_variance: float = 0.0
    g: float = 0.9
    # [estimator]
    cutoff: int = 31
    smoothing: float = 0.0
    mode: str = "zonal"
    prior_bounds: float | None = None
    # [simulate]
    n: int = 50000
    method: str = "noisy"
    step: float | None = None
    # [decompound]
    observations: str | None = None
    oracle: bool = False
    # [scatter]
    depth: float = 3.0
    mfp: float = 1.0
    grid: int = 512
    estimates: str | None = None
    # [figures]
    g_values: tuple = (0.85, 0.9, 0.95, 0.99)
    n_values: tuple = (500, 5000, 50000)
    replications: int = 1
    # [run]
    seed: int = 0
    # resolved from --out, not a config key
    output_dir: str = "."

    def validate(self) -> None:
        checks = [
            (self.rate > 0, "model.rate must be positive"),
            (self.horizon > 0, "model.horizon must be positive"),
            (self.noise_variance >= 0, "model.noise_variance must be nonnegative"),
            (abs(self.g) < 1, "model.g must satisfy |g| < 1"),
            (self.cutoff >= 1, "estimator.cutoff must be at least 1"),
            (self.smoothing >= 0, "estimator.smoothing must be nonnegative"),
            (self.mode in ("zonal", "general"),
             "estimator.mode must be 'zonal' or 'general'"),
            (self.prior_bounds is None or 0 < self.prior_bounds <= 1,
             "estimator.prior_bounds must lie in (0, 1]"),
            (self.n >= 0, "simulate.n must be nonnegative"),
            (self.method in ("noisy", "compound", "interlaced"),
             "simulate.method must be noisy, compound or interlaced"),
            (self.step is None or self.step > 0, "simulate.step must be positive"),
            (self.depth > 0, "scatter.depth must be positive"),
            (self.mfp > 0, "scatter.mfp must be positive"),
            (self.grid >= 2, "scatter.grid must be at least 2"),
            (all(abs(g) < 1 for g in self.g_values),
             "figures.g_values must satisfy |g| < 1"),
            (all(n >= 0 for n in self.n_values),
             "figures.n_values must be nonnegative"),
            (len(self.g_values) > 0, "figures.g_values must be nonempty"),
            (len(self.n_values) > 0, "figures.n_values must be nonempty"),
            (self.replications >= 1, "figures.replications must be at least 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)


# section -> key -> (attribute, parser); parsers raise ValueError on bad text
def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip() != "")


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip() != "")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_SCHEMA = {
    "model": {
        "rate": float,
        "horizon": float,
        "noise_variance": float,
        "g": float,
    },
    "estimator": {
        "cutoff": int,
        "smoothing": float,
        "mode": str,
        "prior_bounds": float,
    },
    "simulate": {"n": int, "method": str, "step": float},
    "decompound": {"observations": str, "oracle": _bool},
    "scatter": {"depth": float, "mfp": float, "grid": int, "estimates": str},
    "figures": {"g_values": _floats, "n_values": _ints, "replications": int},
    "run": {"seed": int},
}


def _find_line(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
            if key is None and current == section:
                return lineno
        elif key is not None and current == section:
            name = stripped.split("=", 1)[0].split(":", 1)[0].strip()
            if name == key:
                return lineno
    return None


def load_config(path: str | None) -> ExperimentConfig:
    """Build an ExperimentConfig from an INI file, or defaults when path is None."""
    cfg = ExperimentConfig()
    if path is None:
        return cfg
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    def where(section, key=None):
        lineno = _find_line(text, section, key)
        return f"{path}:{lineno}" if lineno else path

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{where(section)}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"{where(section, key)}: unknown key '{key}' in [{section}]"
                )
            parse = _SCHEMA[section][key]
            try:
                value = parse(raw)
            except ValueError:
                raise ConfigError(
                    f"{where(section, key)}: cannot parse {section}.{key} value {raw!r}"
                ) from None
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def write_manifest(cfg: ExperimentConfig, path: str) -> None:
    """Write the resolved configuration as canonical INI text."""
    lines = []
    for section, keys in _SCHEMA.items():
        body = []
        for key in keys:
            value = getattr(cfg, key)
            if value is None:
                continue
            body.append(f"{key} = {_fmt(value)}")
        if body:
            lines.append(f"[{section}]")
            lines.extend(body)
            lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _model(cfg: ExperimentConfig, g: float | None = None) -> CompoundModel:
    return CompoundModel(
        rate=cfg.rate,
        horizon=cfg.horizon,
        jump_law=HenyeyGreenstein(cfg.g if g is None else g),
        noise_variance=cfg.noise_variance,
    )


def _estimator_config(cfg: ExperimentConfig) -> EstimatorConfig:
    return EstimatorConfig(
        rate=cfg.rate,
        horizon=cfg.horizon,
        noise_variance=cfg.noise_variance,
        cutoff=cfg.cutoff,
        smoothing=cfg.smoothing,
        mode=cfg.mode,
        prior_bounds=cfg.prior_bounds,
    )


def _fit(obs, cfg: ExperimentConfig) -> ParametricEstimate:
    est_cfg = _estimator_config(cfg)
    if cfg.prior_bounds is not None:
        est = decompound_with_prior(obs, est_cfg)
    else:
        est = decompound(obs, est_cfg)
    if not np.all(np.isfinite(est.coefficients)):
        raise NumericalError("estimate contains non-finite coefficients")
    if est.cutoff > 1 and not est.gate_passed[1:].any():
        raise NumericalError("every degree above zero failed the gate")
    return est


def _estimate_report(est: ParametricEstimate, g: float, n: int) -> dict:
    truth = HenyeyGreenstein(g)
    a_true = truth.legendre_spectrum(est.cutoff - 1)
    err = error_decomposition(est, a_true, tail_norm_sq=truth.tail_norm_sq(est.cutoff))
    low = min(6, est.cutoff)
    return {
        "n": n,
        "g": g,
        "gates_passed": int(est.gate_passed.sum()),
        "max_abs_error_low_degrees": float(
            np.max(np.abs(est.coefficients[:low] - a_true[:low]))
        ),
        "parametric_error": err.parametric,
        "truncation_error": err.truncation,
        "total_error": err.total,
    }


def run_simulate(cfg: ExperimentConfig, workers: int = 1) -> None:
    out = cfg.output_dir
    model = _model(cfg)
    obs = simulate_observations(
        model, cfg.n, cfg.seed, method=cfg.method, step=cfg.step, workers=workers
    )
    obs.write_csv(os.path.join(out, "observations.csv"))
    write_manifest(cfg, os.path.join(out, "manifest.ini"))
    print(f"wrote {os.path.join(out, 'observations.csv')} (n={cfg.n})")


def _load_observations(cfg: ExperimentConfig, config_path: str | None) -> ObservationSet:
    if cfg.observations is None:
        raise ConfigError(
            "decompound needs [decompound] observations = <csv path>, "
            "or oracle = true"
        )
    path = cfg.observations
    if not os.path.isabs(path) and config_path is not None:
        path = os.path.join(os.path.dirname(os.path.abspath(config_path)), path)
    try:
        return ObservationSet.read_csv(path)
    except ValueError as exc:
        # malformed data is an I/O failure for exit-code purposes
        raise OSError(f"{path}: {exc}") from None


def _oracle_estimate(cfg: ExperimentConfig) -> ParametricEstimate:
    est_cfg = _estimator_config(cfg)
    model = _model(cfg)
    b = theoretical_spectrum(model, cfg.cutoff - 1)
    coeffs = np.array(
        [invert_compounding(np.asarray(b[d]), est_cfg, d) for d in range(cfg.cutoff)]
    )
    gate = np.ones(cfg.cutoff, dtype=bool)
    return ParametricEstimate(coeffs, gate, b, est_cfg, 0)


def run_decompound(cfg: ExperimentConfig, config_path: str | None = None) -> None:
    out = cfg.output_dir
    if cfg.oracle:
        est = _oracle_estimate(cfg)
        n = 0
    else:
        obs = _load_observations(cfg, config_path)
        est = _fit(obs, cfg)
        n = obs.n
    truth = HenyeyGreenstein(cfg.g)
    a_true = truth.legendre_spectrum(cfg.cutoff - 1)
    est.write_csv(os.path.join(out, "estimates.csv"), true_spectrum=a_true)
    write_density_csv(
        os.path.join(out, "density.csv"), reconstruct_density(est), truth
    )
    _write_json(os.path.join(out, "report.json"), _estimate_report(est, cfg.g, n))
    write_manifest(cfg, os.path.join(out, "manifest.ini"))
    print(f"wrote {os.path.join(out, 'estimates.csv')} "
          f"({int(est.gate_passed.sum())}/{cfg.cutoff} gates passed)")


def run_scatter(cfg: ExperimentConfig, config_path: str | None = None) -> None:
    out = cfg.output_dir
    theta = np.linspace(0.0, np.pi, cfg.grid)
    curve = transmitted_intensity(cfg.g, cfg.depth, cfg.mfp, theta)
    lines = ["theta,c_h"]
    lines.extend(f"{t:.17g},{c:.17g}" for t, c in zip(theta, curve))
    with open(os.path.join(out, "ch_curve.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    tau = cfg.depth / cfg.mfp
    report = {"tau": tau, "atom": math.exp(-tau), "g": cfg.g}
    if cfg.estimates is not None:
        path = cfg.estimates
        if not os.path.isabs(path) and config_path is not None:
            path = os.path.join(os.path.dirname(os.path.abspath(config_path)), path)
        try:
            _, a_hat, gate, _, _ = read_estimates_csv(path)
        except ValueError as exc:
            raise OSError(f"{path}: {exc}") from None
        g_hat = estimate_g(a_hat, gate)
        lines = ["delta,g_hat"]
        lines.extend(f"{d},{v:.17g}" for d, v in enumerate(g_hat))
        with open(os.path.join(out, "g_hat.csv"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        finite = g_hat[np.isfinite(g_hat)]
        report["g_hat_degrees"] = int(finite.size)
    _write_json(os.path.join(out, "report.json"), report)
    write_manifest(cfg, os.path.join(out, "manifest.ini"))
    print(f"wrote {os.path.join(out, 'ch_curve.csv')} (tau={tau:g})")


def _cell_seed(base: int, rep: int, gi: int, ni: int) -> int:
    seq = np.random.SeedSequence(base, spawn_key=(rep, gi, ni))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def run_figures(cfg: ExperimentConfig, workers: int = 1) -> None:
    out = cfg.output_dir
    summary: dict = {}
    for rep in range(cfg.replications):
        for gi, g in enumerate(cfg.g_values):
            truth = HenyeyGreenstein(g)
            a_true = truth.legendre_spectrum(cfg.cutoff - 1)
            for ni, n in enumerate(cfg.n_values):
                seed = _cell_seed(cfg.seed, rep, gi, ni)
                model = _model(cfg, g=g)
                obs = simulate_observations(
                    model, n, seed, method=cfg.method, step=cfg.step, workers=workers
                )
                local = ExperimentConfig(**{**cfg.__dict__, "g": g, "n": n})
                est = _fit(obs, local)
                tag = f"g{g:g}_n{n}"
                if cfg.replications > 1:
                    tag += f"_rep{rep}"
                est.write_csv(
                    os.path.join(out, f"estimates_{tag}.csv"), true_spectrum=a_true
                )
                write_density_csv(
                    os.path.join(out, f"density_{tag}.csv"),
                    reconstruct_density(est),
                    truth,
                )
                g_hat = estimate_g(est.coefficients, est.gate_passed)
                lines = ["delta,g_hat"]
                lines.extend(f"{d},{v:.17g}" for d, v in enumerate(g_hat))
                with open(
                    os.path.join(out, f"g_hat_{tag}.csv"), "w", encoding="utf-8"
                ) as fh:
                    fh.write("\n".join(lines) + "\n")
                summary[tag] = _estimate_report(est, g, n)
    _write_json(os.path.join(out, "summary.json"), summary)
    write_manifest(cfg, os.path.join(out, "manifest.ini"))
    cells = cfg.replications * len(cfg.g_values) * len(cfg.n_values)
    print(f"wrote {cells} cells to {out}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003, argparse API
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="so3decomp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in (
        ("simulate", "draw observations and write them to CSV"),
        ("decompound", "estimate the jump spectrum from observations"),
        ("scatter", "tabulate the transmitted-intensity curve"),
        ("figures", "run the full (g, n) experiment grid"),
    ):
        p = sub.add_parser(name, help=descr)
        p.add_argument("--config", metavar="PATH", default=None,
                       help="INI config file")
        p.add_argument("--seed", metavar="N", type=int, default=None,
                       help="override [run] seed")
        p.add_argument("--out", metavar="DIR", default=".",
                       help="output directory, created if missing")
        p.add_argument("--quick", action="store_true",
                       help="small-n smoke run (n capped at 500)")
        p.add_argument("--workers", metavar="N", type=int, default=1,
                       help="simulation threads; results do not depend on it")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = int(args.seed)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        if args.quick:
            cfg.n = min(cfg.n, 500)
            cfg.n_values = (min(min(cfg.n_values), 500),)
            cfg.replications = 1
        cfg.output_dir = args.out
        os.makedirs(cfg.output_dir, exist_ok=True)
        if args.command == "simulate":
            run_simulate(cfg, workers=args.workers)
        elif args.command == "decompound":
            run_decompound(cfg, config_path=args.config)
        elif args.command == "scatter":
            run_scatter(cfg, config_path=args.config)
        else:
            run_figures(cfg, workers=args.workers)
        return 0
    except ConfigError as exc:
        print(f"so3decomp: config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"so3decomp: i/o error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"so3decomp: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
