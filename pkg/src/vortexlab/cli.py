"""Command-line experiment runner: parse config, dispatch experiments, write reports.

Config files are plain ``key = value`` text (``#`` comments allowed).  Keys:

    experiments   comma-separated experiment names (default: all)
    n, L          grid resolution (power of two) and box size
    mu, lambda    shear and bulk viscosity (lambda + 2 mu > 0)
    rho_star      reference density
    gamma, pressure_scale
                  isentropic pressure law P(rho) = scale rho^gamma / gamma
    epsilon       initial-data amplitude for solver experiments
    dt            time step (default: acoustic CFL bound)
    T             experiment horizon
    seed          seed for randomized checks
    threads       worker threads recorded in reports (computation is
                  single-threaded; the field pins reproducibility metadata)

Outputs: ``reports.csv`` (one row per report), ``summary.json`` and one
``series/<experiment>__<label>.csv`` per measured series.  Exit status is 0
exactly when every report passes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .harness import (
    EXPERIMENTS,
    ExperimentContext,
    HarnessError,
    list_experiments,
    reports_to_csv,
    series_to_csv,
    summary_dict,
)
from .profiles import FluidParams, PowerPressureLaw, ProfileError
from .spectral import SpectralError, make_grid


class ConfigError(ValueError):
    pass


_INT_KEYS = {"n", "seed", "threads"}
_FLOAT_KEYS = {"l", "mu", "lambda", "lam", "rho_star", "gamma", "pressure_scale", "epsilon", "dt", "t"}


@dataclass(frozen=True)
class RunManifest:
    experiments: tuple[str, ...] = tuple(EXPERIMENTS)
    n: int = 256
    L: float = 200.0
    mu: float = 1.0
    lam: float = 0.0
    rho_star: float = 1.0
    gamma: float = 1.4
    pressure_scale: float = 1.0
    epsilon: float = 1e-2
    dt: float | None = None
    T: float = 30.0
    seed: int = 0
    threads: int = 1

    def context(self) -> ExperimentContext:
        try:
            grid = make_grid(self.n, self.L)
        except SpectralError as err:
            raise ConfigError(f"n/L: {err}") from None
        try:
            params = FluidParams(
                mu=self.mu,
                lam=self.lam,
                rho_star=self.rho_star,
                pressure=PowerPressureLaw(gamma=self.gamma, scale=self.pressure_scale),
            )
        except ProfileError as err:
            raise ConfigError(f"mu/lambda/rho_star/gamma: {err}") from None
        if self.threads < 1:
            raise ConfigError(f"threads: must be >= 1, got {self.threads}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt: must be positive, got {self.dt}")
        if not self.T > 0:
            raise ConfigError(f"T: must be positive, got {self.T}")
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon: must be nonnegative, got {self.epsilon}")
        for name in self.experiments:
            if name not in EXPERIMENTS:
                raise ConfigError(
                    f"experiments: unknown name {name!r}; available: {', '.join(EXPERIMENTS)}"
                )
        return ExperimentContext(
            grid=grid,
            params=params,
            epsilon=self.epsilon,
            T=self.T,
            dt=self.dt,
            seed=self.seed,
            threads=self.threads,
        )


def parse_config(text: str) -> RunManifest:
    """Parse key=value config text into a validated manifest."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key == "experiments":
            names = tuple(v.strip() for v in value.split(",") if v.strip())
            values["experiments"] = names
        elif key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
        elif key in _FLOAT_KEYS:
            try:
                parsed = float(value)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {value!r}") from None
            if key == "l":
                values["L"] = parsed
            elif key == "t":
                values["T"] = parsed
            elif key in ("lambda", "lam"):
                values["lam"] = parsed
            else:
                values[key] = parsed
        else:
            raise ConfigError(f"unknown config key {key!r} (line {lineno})")
    manifest = RunManifest(**values)
    manifest.context()  # validate eagerly so errors name the offending key
    return manifest


def _probe_writable(outdir: Path):
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        probe = outdir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise ConfigError(f"output directory {outdir} is not writable: {err}") from None


def run(manifest: RunManifest, outdir) -> int:
    """Execute the manifest's experiments and write reports; 0 iff all pass."""
    out = Path(outdir)
    _probe_writable(out)
    ctx = manifest.context()
    results = []
    all_reports = []
    for name in manifest.experiments:
        result = EXPERIMENTS[name](ctx)
        results.append(result)
        for rep in result.reports:
            all_reports.append(rep)
            status = "PASS" if rep.passed else "FAIL"
            print(
                f"{status} {rep.experiment}/{rep.label}: "
                f"fitted={rep.fitted:.6g} predicted={rep.predicted:.6g} "
                f"tol={rep.tolerance:g} mode={rep.mode}"
            )
    (out / "reports.csv").write_text(reports_to_csv(all_reports))
    summary = summary_dict(results, ctx)
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    series_dir = out / "series"
    series_dir.mkdir(exist_ok=True)
    for result in results:
        for label, (t, values) in result.series.items():
            safe = label.replace("/", "-")
            (series_dir / f"{result.name}__{safe}.csv").write_text(series_to_csv(t, values))
    passed = all(rep.passed for rep in all_reports)
    print(f"{'ALL PASS' if passed else 'FAILURES'}: {sum(r.passed for r in all_reports)}"
          f"/{len(all_reports)} reports passed")
    return 0 if passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vortexlab",
        description="Run decay-rate and profile-convergence experiments.",
    )
    parser.add_argument("--config", type=Path, help="path to a key=value config file")
    parser.add_argument(
        "--outdir", type=Path, default=Path("vortexlab-out"), help="output directory"
    )
    parser.add_argument(
        "--experiments",
        help="comma-separated experiment filter (overrides the config)",
    )
    parser.add_argument(
        "--list-experiments", action="store_true", help="print experiment names and exit"
    )
    parser.add_argument("--threads", type=int, help="thread count recorded in reports")
    args = parser.parse_args(argv)

    if args.list_experiments:
        for name in list_experiments():
            print(name)
        return 0

    try:
        if args.config is not None:
            manifest = parse_config(Path(args.config).read_text())
        else:
            manifest = RunManifest()
        if args.experiments:
            names = tuple(v.strip() for v in args.experiments.split(",") if v.strip())
            manifest = replace(manifest, experiments=names)
        if args.threads is not None:
            manifest = replace(manifest, threads=args.threads)
        manifest.context()
        return run(manifest, args.outdir)
    except (ConfigError, HarnessError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
