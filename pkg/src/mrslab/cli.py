"""Command line front end: scenario parsing, experiment dispatch, and
CSV/JSON emission.

Three subcommands mirror the experiments: `sum-rate` writes sum_rate.csv,
`rate-region` writes rate_region.csv, and `lar` writes lar.csv. Every output
file is accompanied by a manifest (<name>.manifest.json) holding the tool
version, the fully resolved scenario, the seed, the wall-clock time, and a
git-style content hash of the file; re-running the manifest's scenario
reproduces the file byte for byte for any worker count.

Flags accept dB for the SNR grid and the re-scatter scale magnitude; all
internal computation is linear-scale. A JSON file passed with --config
supplies defaults for any flag (lower_snake_case keys); explicit flags win.
Exit codes: 0 success, 2 usage error, 3 numerical accuracy failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict

from . import __version__
from .channel import SystemConfig, alpha_from_db
from .experiments import (
    LAR_GROW_DIMS,
    Scenario,
    run_lar_convergence,
    run_rate_region,
    run_sum_rate_sweep,
)
from .numerics import AccuracyError

__all__ = ["main"]

SEED_ENV_VAR = "MRS_LAB_SEED"
PAPER_SCALE_TRIALS = 200000

_CONFIG_KEYS = {
    "nt", "nr", "k", "alpha_db", "sigma2", "rho_d", "rho_p", "m0", "m1",
    "n_coherence", "mrs_phases", "snr_grid_db", "trials", "seed", "workers",
    "grow_dim", "grow_grid", "out_dir",
}


class UsageError(Exception):
    pass


def _parse_snr_grid(text: str) -> tuple[float, ...]:
    """SNR grid syntax: 'start:step:stop' (inclusive) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad SNR range {text!r}; expected start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise UsageError(f"bad SNR range {text!r}; need step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(n))
    try:
        values = tuple(float(p) for p in text.split(",") if p.strip() != "")
    except ValueError as exc:
        raise UsageError(f"bad SNR grid {text!r}: {exc}") from exc
    if not values:
        raise UsageError("empty SNR grid")
    return values


def _parse_int_grid(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(p) for p in text.split(",") if p.strip() != "")
    except ValueError as exc:
        raise UsageError(f"bad dimension grid {text!r}: {exc}") from exc
    if not values:
        raise UsageError("empty dimension grid")
    return values


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys in {path}: {sorted(unknown)}")
    return raw


def _merged(args: argparse.Namespace, file_cfg: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in file_cfg and file_cfg[key] is not None:
        return file_cfg[key]
    return default


def _resolve_seed(args, file_cfg) -> int:
    seed = _merged(args, file_cfg, "seed")
    if seed is None:
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            try:
                seed = int(env)
            except ValueError as exc:
                raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
    return int(seed) if seed is not None else 0


def _build_system_config(args, file_cfg, gamma_db: float) -> SystemConfig:
    nt = _merged(args, file_cfg, "nt")
    nr = _merged(args, file_cfg, "nr")
    if nt is None:
        raise UsageError("--nt is required (flag or config file)")
    if nr is None:
        raise UsageError("--nr is required (flag or config file)")
    alpha_db = float(_merged(args, file_cfg, "alpha_db", -3.0))
    try:
        return SystemConfig(
            nt=int(nt),
            nr=int(nr),
            k=int(_merged(args, file_cfg, "k", 1)),
            alpha=alpha_from_db(alpha_db),
            gamma_db=gamma_db,
            sigma2=float(_merged(args, file_cfg, "sigma2", 1.0)),
            rho_d=_merged(args, file_cfg, "rho_d"),
            rho_p=_merged(args, file_cfg, "rho_p"),
            m0=int(_merged(args, file_cfg, "m0", 64)),
            m1=_merged(args, file_cfg, "m1"),
            n_coherence=int(_merged(args, file_cfg, "n_coherence", 1000)),
            mrs_phases=_merged(args, file_cfg, "mrs_phases"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _parse_workers(raw) -> int | None:
    if raw is None or raw == "auto":
        return None
    try:
        workers = int(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--workers takes an integer or 'auto', got {raw!r}") from exc
    if workers < 1:
        raise UsageError(f"--workers must be >= 1, got {workers}")
    return workers


def _build_scenario(args, file_cfg, experiment: str, default_snr: str) -> Scenario:
    snr_raw = _merged(args, file_cfg, "snr_grid_db", default_snr)
    if isinstance(snr_raw, str):
        snr_grid = _parse_snr_grid(snr_raw)
    else:
        snr_grid = tuple(float(v) for v in snr_raw)
    cfg = _build_system_config(args, file_cfg, gamma_db=snr_grid[0])
    trials = int(_merged(args, file_cfg, "trials", 20000))
    if getattr(args, "paper_scale", False):
        trials = max(trials, PAPER_SCALE_TRIALS)
    workers = _parse_workers(_merged(args, file_cfg, "workers", "auto"))
    grow_grid = _merged(args, file_cfg, "grow_grid", "64,256,1024,4096")
    if isinstance(grow_grid, str):
        grow_grid = _parse_int_grid(grow_grid)
    try:
        return Scenario(
            cfg=cfg,
            snr_grid_db=snr_grid,
            trials=trials,
            seed=_resolve_seed(args, file_cfg),
            experiment=experiment,
            workers=workers,
            grow_dim=str(_merged(args, file_cfg, "grow_dim", "nr")),
            grow_grid=tuple(int(v) for v in grow_grid),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _fmt(value) -> str:
    """CSV field: 17 significant digits for floats (round-trip exact)."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return format(float(value), ".17g")


def _git_blob_sha1(data: bytes) -> str:
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def _scenario_dict(scenario: Scenario) -> dict:
    d = asdict(scenario)
    cfg = d.pop("cfg")
    alpha = cfg.pop("alpha")
    cfg["alpha"] = {"re": alpha.real, "im": alpha.imag}
    cfg["beta_k"] = scenario.cfg.beta_k
    cfg["m1"] = scenario.cfg.mrs_pilot_len
    d["cfg"] = cfg
    d["snr_grid_db"] = list(d["snr_grid_db"])
    d["grow_grid"] = list(d["grow_grid"])
    return d


def _emit(out_dir: str, stem: str, header, rows, command: str,
          scenario: Scenario, started: float, extra: dict | None = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, stem + ".csv")
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    data = ("\n".join(lines) + "\n").encode("utf-8")
    with open(csv_path, "wb") as fh:
        fh.write(data)
    manifest = {
        "tool": "mrslab",
        "version": __version__,
        "command": command,
        "scenario": _scenario_dict(scenario),
        "seed": scenario.seed,
        "wall_clock_s": time.monotonic() - started,
        "output": {"file": os.path.basename(csv_path),
                   "git_blob_sha1": _git_blob_sha1(data)},
    }
    if extra:
        manifest["notes"] = extra
    with open(csv_path.removesuffix(".csv") + ".manifest.json", "w",
              encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path


def cmd_sum_rate(args) -> int:
    started = time.monotonic()
    file_cfg = _load_config_file(args.config) if args.config else {}
    scenario = _build_scenario(args, file_cfg, "sum_rate_sweep", "0:2:30")
    points = run_sum_rate_sweep(scenario)
    rows = [(p.snr_db, p.metric, p.mean_bits, p.stderr_bits,
             scenario.cfg.k, scenario.trials, scenario.seed) for p in points]
    path = _emit(args.out_dir, "sum_rate",
                 ("snr_db", "metric", "mean_bits", "stderr_bits", "k", "trials", "seed"),
                 rows, "sum-rate", scenario, started)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_rate_region(args) -> int:
    started = time.monotonic()
    file_cfg = _load_config_file(args.config) if args.config else {}
    scenario = _build_scenario(args, file_cfg, "rate_region", "10,20,30")
    points, info = run_rate_region(scenario)
    rows = [(p.snr_db, p.vertex, p.legacy_bits, p.legacy_stderr,
             p.mrs_bits, p.mrs_stderr) for p in points]
    path = _emit(args.out_dir, "rate_region",
                 ("snr_db", "vertex", "legacy_bits", "legacy_stderr",
                  "mrs_bits", "mrs_stderr"),
                 rows, "rate-region", scenario, started, extra=info)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def cmd_lar(args) -> int:
    started = time.monotonic()
    file_cfg = _load_config_file(args.config) if args.config else {}
    scenario = _build_scenario(args, file_cfg, "lar_convergence", "20")
    points = run_lar_convergence(scenario)
    rows = [(p.grow_dim, p.value, p.exact_bits, p.lar_bits, p.rel_gap) for p in points]
    path = _emit(args.out_dir, "lar",
                 ("grow_dim", "value", "exact_bits", "lar_bits", "rel_gap"),
                 rows, "lar", scenario, started)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _add_common_flags(p: argparse.ArgumentParser, default_trials: int = 20000):
    p.add_argument("--nt", type=int, help="transmit antenna count (required)")
    p.add_argument("--nr", type=int, help="receive antenna count (required)")
    p.add_argument("--K", dest="k", type=int, help="MRS antenna count (default 1)")
    p.add_argument("--alpha-db", dest="alpha_db", type=float,
                   help="MRS scale magnitude in dB; -inf disables the re-scattered "
                        "path (default -3)")
    p.add_argument("--sigma2", type=float, help="noise variance (default 1)")
    p.add_argument("--rho-d", dest="rho_d", type=float,
                   help="data power per antenna (default gamma*sigma2/nt)")
    p.add_argument("--rho-p", dest="rho_p", type=float,
                   help="pilot power per symbol (default rho_d)")
    p.add_argument("--m0", type=int, help="legacy pilot length, power of two (default 64)")
    p.add_argument("--m1", type=int,
                   help="MRS pilot length, power of two >= K+1 (default smallest such)")
    p.add_argument("--N", dest="n_coherence", type=int,
                   help="coherence interval in samples (default 1000)")
    p.add_argument("--mrs-phases", dest="mrs_phases", type=int,
                   help="M-ary polyphase alphabet size (default: continuous phase)")
    p.add_argument("--snr-db", dest="snr_grid_db",
                   help="SNR grid in dB: start:step:stop or comma list")
    p.add_argument("--trials", type=int, help=f"Monte Carlo trials (default {default_trials})")
    p.add_argument("--paper-scale", action="store_true",
                   help=f"raise trials to {PAPER_SCALE_TRIALS}")
    p.add_argument("--seed", type=int,
                   help=f"master seed (default: ${SEED_ENV_VAR} or 0)")
    p.add_argument("--workers", help="worker processes or 'auto' (default auto)")
    p.add_argument("--config", help="JSON file with scenario defaults; flags override")
    p.add_argument("--out-dir", dest="out_dir", default=".",
                   help="output directory (default .)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrslab",
        description="Monte Carlo achievable-rate laboratory for bi-static "
                    "modulated re-scatter MIMO systems")
    parser.add_argument("--version", action="version", version=f"mrslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sum-rate", help="sum-rate sweep over an SNR grid")
    _add_common_flags(p)
    p.set_defaults(func=cmd_sum_rate)

    p = sub.add_parser("rate-region", help="achievable rate region vertices")
    _add_common_flags(p)
    p.set_defaults(func=cmd_rate_region)

    p = sub.add_parser("lar", help="large-array limit convergence")
    _add_common_flags(p)
    p.add_argument("--grow", dest="grow_dim", choices=LAR_GROW_DIMS,
                   help="dimension to grow (default nr)")
    p.add_argument("--grid", dest="grow_grid", help="comma list of grown dimensions")
    p.set_defaults(func=cmd_lar)
    return parser


_VALUE_FLAGS = {
    "--nt", "--nr", "--K", "--alpha-db", "--sigma2", "--rho-d", "--rho-p",
    "--m0", "--m1", "--N", "--mrs-phases", "--snr-db", "--trials", "--seed",
    "--workers", "--config", "--out-dir", "--grow", "--grid",
}


def _merge_negative_values(argv):
    """Join values that start with '-' onto their flag (flag=value form).

    argparse would otherwise mistake values like '-inf' or '-5:2:5' for
    option strings.
    """
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok in _VALUE_FLAGS and i + 1 < len(argv)
                and argv[i + 1].startswith("-") and argv[i + 1] not in _VALUE_FLAGS):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = _build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = parser.parse_args(_merge_negative_values(list(argv)))
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AccuracyError as exc:
        print(f"accuracy failure: {exc} (best estimate {exc.estimate}, "
              f"error bound {exc.error_bound})", file=sys.stderr)
        return 3
    except ValueError as exc:
        # invalid scenario surfaced after parsing (infeasible grown dims, ...)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
