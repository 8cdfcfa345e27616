"""Batch command-line driver: reproducible experiments with CSV + manifest output.

Every run writes one or more CSVs plus a manifest.json listing each emitted
file with its SHA-256.  Outputs are bit-identical for identical
(config, seed, version): floats are printed with 17 significant digits and
all randomness flows through the seeded generator.

Exit codes: 0 success, 1 scientific failure (a certification that did not
pass), 2 usage/configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .errors import IPM1DError
from .evolution import (
    EvolutionState,
    equilibrate,
    run,
    run_decay_experiment,
)
from .grid import differentiate
from .linearized import LinearizedContext, coercivity_quotient, discrete_spectrum
from .profile import build_profile, fit_boundary_exponent, monotonicity_identity_residual
from .shooting import DEFAULT_BRACKET, shoot, sweep_root_angles
from .weighted import NormReport, WeightParams, sample_family, verify_inequalities

COMMANDS = ("profile", "shoot", "evolve", "decay", "coercivity", "spectrum", "norms")


@dataclass
class RunConfig:
    """Validated parameters of one batch run."""

    command: str
    A: float = 1.0
    target_L: float = 1.4
    bracket_lo: float = DEFAULT_BRACKET[0]
    bracket_hi: float = DEFAULT_BRACKET[1]
    n: int = 256
    dt: float = 1e-2
    frame: str = "t"
    t_max: float = 0.9
    s_max: float = 5.0
    cutoff_frac: float = 0.02
    samples: int = 200
    seed: int = 2024
    l1: float | None = None
    l2: float | None = None
    K: float | None = None
    B: float | None = None
    output_dir: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.command in ("profile", "evolve", "decay", "coercivity", "spectrum", "norms"):
            if self.A <= 0:
                raise ValueError("A must be > 0 for profile-based runs")
        if self.command == "shoot":
            if not (0 < self.target_L < np.pi / 2):
                raise ValueError("target-L must lie in (0, pi/2)")
            if not (0 < self.bracket_lo < self.bracket_hi):
                raise ValueError("bracket must satisfy 0 < lo < hi")
        if self.n < 16 or self.n > 1024:
            raise ValueError("n must lie in [16, 1024]")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.frame not in ("t", "s"):
            raise ValueError("frame must be 't' or 's'")
        if self.command == "evolve" and self.frame == "t" and not (0 < self.t_max < 1):
            raise ValueError("t-max must lie in (0, 1)")
        if self.s_max <= 0:
            raise ValueError("s-max must be positive")
        if self.cutoff_frac < 0:
            raise ValueError("cutoff-frac must be nonnegative")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")

    def weight_params(self, L: float) -> WeightParams:
        wp = WeightParams.default_for(L, l1=self.l1 if self.l1 is not None else 0.3)
        overrides = {}
        for name in ("l2", "K", "B"):
            val = getattr(self, name)
            if val is not None:
                overrides[name] = val
        if overrides:
            from dataclasses import replace

            wp = replace(wp, **overrides)
        return wp


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def write_csv(path: str, header: list, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: str, config: RunConfig, results: dict, csv_names: list, wall: float):
    manifest = {
        "command": config.command,
        "config": asdict(config),
        "version": __version__,
        "results": results,
        "wall_time_seconds": wall,
        "files": [
            {"name": name, "sha256": _sha256(os.path.join(out_dir, name))} for name in csv_names
        ],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


# ---------------------------------------------------------------------------
# Command bodies: each returns (exit_code, results_dict, [csv files written])
# ---------------------------------------------------------------------------

def _cmd_profile(cfg: RunConfig, out: str):
    pair = build_profile(cfg.A, n=cfg.n)
    write_csv(
        os.path.join(out, "profile.csv"),
        ["theta", "M", "G", "Gp"],
        zip(pair.grid.nodes, pair.M.values, pair.G.values, pair.Gp.values),
    )
    results = {
        "L": pair.L,
        "GpL": pair.GpL,
        "GpL_series_form": pair.GpL_series,
        "holder_alpha": pair.holder_alpha,
        "boundary_exponent_fit": fit_boundary_exponent(pair),
        "monotonicity_identity_residual": monotonicity_identity_residual(pair),
        "max_Mp": float(np.max(pair.Mp_identity().values)),
    }
    return 0, results, ["profile.csv"]


def _cmd_shoot(cfg: RunConfig, out: str):
    res = shoot(cfg.target_L, (cfg.bracket_lo, cfg.bracket_hi))
    sweep = sweep_root_angles([4.0, 2.0, 1.0, 0.5, 0.1, 0.01])
    rows = sorted(set(res.sweep) | set(sweep), key=lambda p: -p[0])
    write_csv(os.path.join(out, "sweep.csv"), ["A", "L"], rows)
    results = {
        "A_star": res.A_star,
        "achieved_L": res.achieved_L,
        "target_L": res.target_L,
        "iterations": res.iterations,
    }
    return 0, results, ["sweep.csv"]


def _cmd_evolve(cfg: RunConfig, out: str):
    pair = build_profile(cfg.A, n=cfg.n)
    base = equilibrate(pair)
    frame = "physical_t" if cfg.frame == "t" else "logarithmic_s"
    state = EvolutionState.from_density(base.M, frame, reference=base)
    horizon = cfg.t_max if cfg.frame == "t" else cfg.s_max
    rows = []

    def note(st):
        P = st.physical_density()
        sup_p = float(np.max(np.abs(P.values)))
        grad = float(np.max(np.abs(differentiate(P, 1).values)))
        rows.append((st.time, sup_p, sup_p * (1.0 - st.time) if cfg.frame == "t" else sup_p, grad))

    diag, final = run(state, horizon, cfg.dt, on_record=note, record_every=1)
    table = [
        (t, sup, law, np.interp(t, diag.times, diag.accumulated_gradient))
        for (t, sup, law, _) in rows
    ]
    write_csv(
        os.path.join(out, "series.csv"),
        ["t", "sup_P", "sup_P_times_1mt", "accum_grad"],
        table,
    )
    law_vals = [law for (_, _, law, _) in rows]
    results = {
        "frame": cfg.frame,
        "final_time": final.time,
        "blown_up": diag.blown_up,
        "law_min": float(np.min(law_vals)),
        "law_max": float(np.max(law_vals)),
        "accumulated_gradient_final": diag.accumulated_gradient[-1],
    }
    return 0, results, ["series.csv"]


def _cmd_decay(cfg: RunConfig, out: str):
    pair = build_profile(cfg.A, n=cfg.n)
    base = equilibrate(pair)
    wp = cfg.weight_params(pair.L)
    res = run_decay_experiment(
        base, cutoff_a=cfg.cutoff_frac * pair.L, s_max=cfg.s_max, dt=cfg.dt, wp=wp
    )
    write_csv(
        os.path.join(out, "decay.csv"),
        ["s", "sup_perturbation", "weighted_norm"],
        zip(res.times, res.sup_norm, res.weighted_norm),
    )
    results = {
        "decayed": bool(res.decayed),
        "initial_sup": res.sup_norm[0],
        "final_sup": res.sup_norm[-1],
        "min_sup": res.min_sup,
        "min_sup_time": res.min_sup_time,
        "final_time": res.times[-1],
        "blown_up": res.diagnostics.blown_up,
    }
    return 0, results, ["decay.csv"]


def _cmd_coercivity(cfg: RunConfig, out: str):
    pair = build_profile(cfg.A, n=cfg.n)
    ctx = LinearizedContext(equilibrate(pair), wp=cfg.weight_params(pair.L))
    rep = coercivity_quotient(ctx, samples=cfg.samples, seed=cfg.seed)
    write_csv(
        os.path.join(out, "coercivity.csv"),
        ["sample", "quotient"],
        list(enumerate(rep.quotients)),
    )
    results = {
        "passed": bool(rep.passed),
        "min_quotient": rep.min_quotient,
        "gram_min_eig": rep.gram_min_eig,
        "retries": rep.retries,
        "l1": rep.wp.l1,
        "B": rep.wp.B,
    }
    return (0 if rep.passed else 1), results, ["coercivity.csv"]


def _cmd_spectrum(cfg: RunConfig, out: str):
    from .linearized import assemble, numerical_rank

    pair = build_profile(cfg.A, n=cfg.n)
    ctx = LinearizedContext(equilibrate(pair), wp=cfg.weight_params(pair.L))
    rep = discrete_spectrum(ctx)
    resolved_set = set(np.round(rep.resolved, 12))
    write_csv(
        os.path.join(out, "spectrum.csv"),
        ["re", "im", "resolved"],
        [
            (z.real, z.imag, np.round(z, 12) in resolved_set)
            for z in sorted(rep.eigenvalues, key=lambda w: (-w.real, w.imag))
        ],
    )
    files = ["spectrum.csv"]
    ranks = {}
    for label, name in (("L_full", "l_full.csv"), ("L_bar", "l_bar.csv"), ("L_K", "l_k.csv")):
        mat = assemble(label, ctx)
        header = [f"col{j}" for j in range(mat.entries.shape[1])]
        write_csv(os.path.join(out, name), header, mat.entries)
        files.append(name)
        if label == "L_K":
            ranks["L_K_numerical_rank"] = numerical_rank(mat)
    results = {
        "unstable_count": rep.unstable_count,
        "grid_n": rep.grid_n,
        "companion_n": rep.companion_n,
        "top_real_parts": [float(z.real) for z in rep.stable_unstable[:8]],
        **ranks,
    }
    return 0, results, files


def _cmd_norms(cfg: RunConfig, out: str):
    pair = build_profile(cfg.A, n=cfg.n)
    wp = cfg.weight_params(pair.L)
    samples = sample_family(pair.grid, min(cfg.samples, 20), cfg.seed)
    rows = []
    for i, f in enumerate(samples):
        rep = NormReport.of(f, wp)
        rows.append(
            (
                i,
                rep.h4tilde,
                rep.h4,
                rep.pieces["value"],
                rep.pieces["second_derivative"],
                rep.pieces["weighted_low"],
                rep.pieces["weighted_high"],
            )
        )
    write_csv(
        os.path.join(out, "norms.csv"),
        ["sample", "h4tilde", "h4", "piece_value", "piece_d2", "piece_low", "piece_high"],
        rows,
    )
    report = verify_inequalities(samples, wp)
    write_csv(
        os.path.join(out, "inequalities.csv"),
        ["inequality", "constant"],
        [(k, v["constant"]) for k, v in report.items()],
    )
    results = {k: v["constant"] for k, v in report.items()}
    results["hardy_iterated_bound"] = report["hardy"]["iterated_bound"]
    return 0, results, ["norms.csv", "inequalities.csv"]


_BODIES = {
    "profile": _cmd_profile,
    "shoot": _cmd_shoot,
    "evolve": _cmd_evolve,
    "decay": _cmd_decay,
    "coercivity": _cmd_coercivity,
    "spectrum": _cmd_spectrum,
    "norms": _cmd_norms,
}


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_FLAG_FIELDS = {f.name: f for f in fields(RunConfig) if f.name != "command"}


def parse_config(argv: list) -> RunConfig:
    """Build a RunConfig from argv; a JSON config file seeds the defaults and
    explicit flags override it.  Unknown keys are rejected."""
    parser = argparse.ArgumentParser(prog="ipm1d", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON file with config keys")
    for name in _FLAG_FIELDS:
        flag = "--" + name.replace("_", "-")
        parser.add_argument(flag, dest=name, default=None)
    ns = parser.parse_args(argv)

    values = {}
    if ns.config:
        if not os.path.exists(ns.config):
            raise ValueError(f"config file not found: {ns.config}")
        with open(ns.config) as fh:
            data = json.load(fh)
        for key, val in data.items():
            if key == "command":
                continue
            if key not in _FLAG_FIELDS:
                raise ValueError(f"unknown config key: {key!r}")
            values[key] = val
    for name in _FLAG_FIELDS:
        raw = getattr(ns, name)
        if raw is None:
            continue
        values[name] = raw

    cfg_kwargs = {"command": ns.command}
    for name, val in values.items():
        field = _FLAG_FIELDS[name]
        if val is None:
            continue
        if name in ("output_dir", "frame"):
            cfg_kwargs[name] = str(val)
        elif name in ("n", "samples", "seed"):
            cfg_kwargs[name] = int(val)
        else:
            cfg_kwargs[name] = float(val)
    cfg = RunConfig(**cfg_kwargs)
    cfg.validate()
    return cfg


def resolve_output_dir(cfg: RunConfig) -> str:
    root = cfg.output_dir or os.environ.get("IPM_OUTPUT_DIR") or "runs"
    out = os.path.join(root, cfg.command)
    os.makedirs(out, exist_ok=True)
    return out


def run_config(cfg: RunConfig) -> int:
    out = resolve_output_dir(cfg)
    start = time.time()
    code, results, files = _BODIES[cfg.command](cfg, out)
    write_manifest(out, cfg, results, files, wall=time.time() - start)
    print(json.dumps({"command": cfg.command, "exit": code, "results": results}, sort_keys=True))
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:  # argparse errors already print usage
        return 2 if exc.code else 0
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run_config(cfg)
    except IPM1DError as exc:
        print(f"scientific failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
