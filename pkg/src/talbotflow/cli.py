"""Command-line driver: ``talbotflow {carpet,momentum,streamlines,farfield,diagnose}``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
failures while computing or writing results.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import FAR_FIELD_DEFAULTS, ConfigError, RunConfig, load_config
from .decoherence import evaluate_grid
from .diagnostics import (
    coherence_crossing,
    detect_momentum_plateaus,
    diffraction_order_positions,
    onaxis_profile,
    revival_correlation,
)
from .flow import integrate_ensemble, ordering_check, seed_ensemble
from .model import LAMBDA_DISPLAY_UNIT, SimulationGrid, from_si
from .output import (
    density_to_gray,
    momentum_to_rgb,
    overlay_streamlines,
    write_grid_csv,
    write_grid_npz,
    write_pgm,
    write_polylines,
    write_ppm,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

DEFAULT_CHANNELS = {
    "carpet": ("density",),
    "momentum": ("kx_over_k0",),
    "farfield": ("density", "kx_over_k0"),
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for runtime failures here
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="talbotflow", description="Decohered Talbot carpets, flow lines and diagnostics.")
    parser.add_argument("--version", action="version", version=f"talbotflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "carpet": "density grid over the near field",
        "momentum": "transverse momentum k_x/k0 grid",
        "streamlines": "probability-flow streamlines of the seed ensemble",
        "farfield": "density and momentum with far-field defaults",
        "diagnose": "scalar diagnostics report",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="configuration file")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one entry")
        p.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")
    return parser


def _overrides(items) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_config(command: str, config_path=None, sets=()) -> RunConfig:
    layers = []
    if command == "farfield":
        layers.append(FAR_FIELD_DEFAULTS)
    if config_path is not None:
        layers.append(load_config(config_path))
    layers.append(_overrides(sets))
    return RunConfig.resolve(*layers)


def lambda_tag(Lambda: float) -> str:
    """Filename fragment naming ``Lambda`` in mm^-1 um^-2."""
    return f"lambda{from_si(Lambda, LAMBDA_DISPLAY_UNIT):.10g}"


def _tags(cfg: RunConfig) -> list[str]:
    tags = [lambda_tag(L) for L in cfg.lambdas]
    if len(set(tags)) != len(tags):
        raise ConfigError("decoherence.Lambda ladder contains duplicate values")
    return tags


def _write_manifest(out: Path, command: str, cfg: RunConfig, stats: list[str]) -> Path:
    path = out / f"{command}_manifest.txt"
    with open(path, "w") as fh:
        fh.write(f"# talbotflow {__version__} manifest\n# command: {command}\n")
        for line in stats:
            fh.write(f"# {line}\n")
        fh.write(cfg.to_text())
    return path


def _render_channel(name, values, clip):
    if name == "density":
        return "pgm", density_to_gray(values)
    if name == "kx_over_k0":
        return "ppm", momentum_to_rgb(values, clip)
    # other signed channels use their own symmetric range
    top = np.nanmax(np.abs(values)) if np.isfinite(values).any() else 0.0
    return "ppm", momentum_to_rgb(values, top if top > 0 else 1.0)


def cmd_grid(command: str, cfg: RunConfig, out: Path, threads: int) -> list[str]:
    setup = cfg.setup()
    grid = cfg.grid()
    channels = cfg["outputs.channels"] or DEFAULT_CHANNELS[command]
    formats = cfg["outputs.formats"]
    stats = []
    for Lambda, tag in zip(cfg.lambdas, _tags(cfg)):
        fg = evaluate_grid(grid, setup, Lambda, channels, threads=threads)
        meta = {"command": command, "Lambda": f"{Lambda!r} m^-3", "z_T": f"{setup.z_T!r} m"}
        for ch in channels:
            stem = f"{command}_{ch}_{tag}"
            if "csv" in formats:
                write_grid_csv(out / f"{stem}.csv", grid.x, grid.z, fg[ch], ch, meta)
            if "npz" in formats:
                write_grid_npz(out / f"{stem}.npz", grid.x, grid.z, fg[ch], ch)
            if "pnm" in formats:
                kind, img = _render_channel(ch, fg[ch], cfg["render.clip"])
                (write_pgm if kind == "pgm" else write_ppm)(out / f"{stem}.{kind}", img)
        stats.append(f"{tag}: invalid_pixels = {fg.invalid_count}")
    return stats


def cmd_streamlines(cfg: RunConfig, out: Path, threads: int) -> list[str]:
    setup = cfg.setup()
    ens = seed_ensemble(setup.grating, cfg["ensemble.per_slit"])
    z_range = (cfg["ensemble.z_start"], cfg["ensemble.z_end"])
    g = cfg.grid()
    carpet_grid = SimulationGrid(g.x_min, g.x_max, z_range[0], z_range[1], g.nx, g.nz)
    stats = [f"seeds = {len(ens.seeds)}"]
    for Lambda, tag in zip(cfg.lambdas, _tags(cfg)):
        lines = integrate_ensemble(ens, z_range, setup, Lambda, threads=threads)
        report = ordering_check(lines)
        early = sum(s.terminated_early for s in lines)
        meta = {"Lambda": f"{Lambda!r} m^-3", "crossings": report.crossings, "terminated_early": early}
        write_polylines(out / f"streamlines_{tag}.csv", lines, meta)
        if "pnm" in cfg["outputs.formats"]:
            rho = evaluate_grid(carpet_grid, setup, Lambda, ("density",), threads=threads)["density"]
            img = overlay_streamlines(density_to_gray(rho), carpet_grid.x, carpet_grid.z, lines)
            write_ppm(out / f"streamlines_{tag}.ppm", img)
        first = "none" if report.first_crossing_z is None else repr(report.first_crossing_z)
        stats.append(f"{tag}: crossings = {report.crossings}, first_crossing_z = {first}, terminated_early = {early}")
    return stats


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def cmd_diagnose(cfg: RunConfig, out: Path) -> list[str]:
    setup = cfg.setup()
    zT = setup.z_T
    checks = cfg["diagnose.checks"]
    far_z = cfg["diagnose.far_z"]
    if ("orders" in checks or "plateaus" in checks) and far_z < 10 * zT:
        raise ConfigError("diagnose.far_z must be at least 10 zT")
    rows = [f"# talbotflow {__version__} diagnostic report", f"z_T = {zT!r} m", f"checks = {', '.join(checks) or 'none'}"]
    failures = 0
    for Lambda, tag in zip(cfg.lambdas, _tags(cfg)):
        rows.append("")
        rows.append(f"[{tag}]")
        rows.append(f"Lambda = {Lambda!r} m^-3")
        if "crossing" in checks:
            z_star = coherence_crossing(setup, Lambda) if Lambda > 0 else None
            if z_star is None:
                rows.append("crossing.z_star = none")
            else:
                rows.append(f"crossing.z_star = {z_star!r} m")
                rows.append(f"crossing.z_star_over_zT = {z_star / zT:.6g}")
        if "revival" in checks:
            lo = cfg["diagnose.revival_min"]
            full = revival_correlation(setup, Lambda, zT).pearson
            half = revival_correlation(setup, Lambda, zT / 2, shift=setup.grating.period / 2).pearson
            ok = full >= lo and half >= lo
            failures += not ok
            rows.append(f"revival.pearson_zT = {full:.6g}")
            rows.append(f"revival.pearson_half_zT_shifted = {half:.6g}")
            rows.append(f"revival.threshold = {lo:g}")
            rows.append(f"revival.status = {_status(ok)}")
        if "orders" in checks:
            tol = cfg["diagnose.order_tol"]
            max_order = cfg["diagnose.max_order"]
            found = diffraction_order_positions(setup, Lambda, far_z, max_order)
            seen = {r.order for r in found}
            ok = all(r.relative_error <= tol for r in found)
            failures += not ok
            rows.append(f"orders.z = {far_z!r} m")
            for r in found:
                rows.append(
                    f"orders.l{r.order:+d} = peak {r.peak_x!r} m, predicted {r.predicted_x!r} m, "
                    f"relative_error {r.relative_error:.3g}"
                )
            missing = [f"{l:+d}" for l in range(-max_order, max_order + 1) if l not in seen]
            rows.append(f"orders.omitted = {', '.join(missing) or 'none'}")
            rows.append(f"orders.tolerance = {tol:g}")
            rows.append(f"orders.status = {_status(ok)}")
        if "plateaus" in checks:
            tol = cfg["diagnose.plateau_tol"]
            cut = cfg["diagnose.plateau_cut"]
            levels = detect_momentum_plateaus(setup, Lambda, far_z, density_cut=cut)
            ok = all(abs(v - round(v)) <= tol for v in levels)
            failures += not ok
            rows.append(f"plateaus.density_cut = {cut:g}")
            rows.append("plateaus.levels = " + (", ".join(f"{v:.4f}" for v in levels) or "none"))
            rows.append(f"plateaus.tolerance = {tol:g}")
            rows.append(f"plateaus.status = {_status(ok)}")
        if "onaxis" in checks:
            n = cfg["diagnose.onaxis_points"]
            zs = np.linspace(0.0, cfg["grid.z_max"], n)
            prof = onaxis_profile(setup, Lambda, zs)
            path = out / f"diagnose_onaxis_{tag}.csv"
            with open(path, "w") as fh:
                fh.write("# on-axis density; z in m, rho in 1/m\nz,rho\n")
                np.savetxt(fh, prof, fmt="%.17g", delimiter=",")
            rows.append(f"onaxis.file = {path.name}")
            rows.append(f"onaxis.max_rho = {float(prof[:, 1].max())!r} 1/m")
    (out / "diagnose_report.txt").write_text("\n".join(rows) + "\n")
    return [f"failed_checks = {failures}"]


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if args.threads < 1:
        print("talbotflow: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args.command, args.config, args.set)
    except ConfigError as exc:
        print(f"talbotflow: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out: Path = args.out
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command in DEFAULT_CHANNELS:
            stats = cmd_grid(args.command, cfg, out, args.threads)
        elif args.command == "streamlines":
            stats = cmd_streamlines(cfg, out, args.threads)
        else:
            stats = cmd_diagnose(cfg, out)
        _write_manifest(out, args.command, cfg, stats)
    except ConfigError as exc:
        print(f"talbotflow: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"talbotflow: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
