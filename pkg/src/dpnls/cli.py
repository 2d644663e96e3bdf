"""Command-line front end: reproducible solver/stability/evolution workflows.

Every subcommand reads one JSON config (defaults, overlaid by --preset, then
--config), writes its artifacts into --out, and records a manifest with the
config hash so identical configs produce byte-identical data files.  Wall
time and version live only in the manifest, never in data files.

Exit codes: 0 success (detected blowup/escape are scientific outcomes),
2 numerical failure, 3 validation failure.  Errors are emitted as one JSON
object on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DpnlsError, InvalidParams
from .model import ModelParams, classify_regime, gamma_curve, p_threshold
from .groundstate import RadialProfile, ShootingConfig, solve_ground_state
from .functionals import compute_report, strauss_bound_check
from .asymptotics import fit_tail, zero_mass_limit_study
from .stability import sign_equivalence_sweep
from .evolution import (
    EvolutionDiagnostics,
    GridSpec,
    InitialDataKind,
    WaveField,
    evolve,
    instability_escape_test,
    make_initial_data,
    sample_profile,
)

FORMAT_VERSION = "1"
LOCK_NAME = ".dpnls.lock"


def default_config() -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "seed": 0,  # reserved; all algorithms are deterministic
        "model": {"dim": 1, "p": 3.0, "q": 5.0, "omega": 0.0},
        "classifier": {"omega_small": 0.1, "omega_large": 10.0},
        "shooting": {
            "s_lo": None,
            "s_hi": None,
            "ode_atol": 1e-12,
            "ode_rtol": 1e-10,
            "r_max": None,
            "bisect_rtol": 1e-15,
            "origin_eps": 1e-6,
            "max_doublings": 60,
            "tail_cut": 1e-5,
            "stabilization_rtol": 0.01,
            "zero_mass_r_cap": 1e6,
            "grid_core_points": 2400,
            "grid_tail_ratio": 1.02,
        },
        "stability_map": {
            "p_values": [1.2, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
            "q_values": [2.0, 2.5, 3.0, 3.6, 4.2, 4.8],
            "degenerate_band": 0.02,
        },
        "zero_mass": {"omega_sequence": [0.5, 0.1, 0.02, 0.004]},
        "evolution": {
            "half_length": 40.0,
            "points": 4096,
            "dt": 2e-4,
            "t_end": 5.0,
            "diagnostics_every": 100,
            "kind": "amplitude-scaled",
            "lam": 1.0,
            "cutoff_radius": None,
            "energy_jump_rtol": 1e-9,
            "dt_floor": 1e-12,
            "blowup_grad_factor": 1e3,
            "linear_only": False,
            "snapshot_times": [],
            "escape_factor": 3.0,
        },
        "output": {"strict": False},
    }


PRESETS = {
    "algebraic-ground-state": {
        "model": {"dim": 1, "p": 3.0, "q": 5.0, "omega": 0.0},
    },
    "strong-instability": {
        "model": {"dim": 1, "p": 2.0, "q": 5.0, "omega": 1.0},
        "shooting": {"tail_cut": 1e-6, "grid_core_points": 4000},
        "evolution": {
            "half_length": 16.0, "points": 32768, "dt": 2e-4, "t_end": 1.0,
            "diagnostics_every": 20, "kind": "amplitude-scaled", "lam": 1.1,
            "energy_jump_rtol": 1e-4,
        },
    },
    "stationary-orbit": {
        "model": {"dim": 1, "p": 2.0, "q": 3.0, "omega": 1.0},
        "shooting": {"tail_cut": 1e-6, "grid_core_points": 4000},
        "evolution": {
            "half_length": 40.0, "points": 1024, "dt": 1e-4, "t_end": 5.0,
            "diagnostics_every": 500, "kind": "amplitude-scaled", "lam": 1.0,
        },
    },
    "conservation": {
        "model": {"dim": 1, "p": 2.0, "q": 3.0, "omega": 1.0},
        "shooting": {"tail_cut": 1e-6, "grid_core_points": 4000},
        "evolution": {
            "half_length": 80.0, "points": 2048, "dt": 1e-4, "t_end": 5.0,
            "diagnostics_every": 10, "kind": "l2-scaled", "lam": 1.05,
        },
    },
    "small-omega-escape": {
        "model": {"dim": 1, "p": 2.0, "q": 4.8, "omega": 0.01},
        "shooting": {"tail_cut": 1e-6, "grid_core_points": 4000},
        "evolution": {
            "half_length": 224.0, "points": 4096, "dt": 1e-3, "t_end": 2.5,
            "diagnostics_every": 50, "kind": "cutoff-l2-scaled", "lam": 1.01,
            "cutoff_radius": 60.0, "energy_jump_rtol": 1e-8,
        },
    },
    "zero-mass-limit": {
        "model": {"dim": 1, "p": 3.0, "q": 5.0, "omega": 0.0},
        "zero_mass": {"omega_sequence": [0.5, 0.1, 0.02, 0.004]},
    },
    "stability-map-1d": {
        "model": {"dim": 1, "p": 2.0, "q": 4.8, "omega": 0.0},
    },
}


def deep_merge(base: dict, overlay: dict) -> dict:
    out = dict(base)
    for key, val in overlay.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(args) -> dict:
    cfg = default_config()
    if args.preset:
        if args.preset not in PRESETS:
            raise InvalidParams(
                f"unknown preset {args.preset!r}; available: {sorted(PRESETS)}"
            )
        cfg = deep_merge(cfg, PRESETS[args.preset])
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = deep_merge(cfg, json.load(fh))
    if getattr(args, "strict", False):
        cfg["output"]["strict"] = True
    if cfg.get("format_version") != FORMAT_VERSION:
        raise InvalidParams(
            f"config format_version {cfg.get('format_version')!r} does not match "
            f"supported version {FORMAT_VERSION!r}"
        )
    return cfg


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def model_params(cfg: dict) -> ModelParams:
    m = cfg["model"]
    return ModelParams(int(m["dim"]), float(m["p"]), float(m["q"]), float(m["omega"]))


def shooting_config(cfg: dict) -> ShootingConfig:
    return ShootingConfig(**cfg["shooting"])


def write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, float):
                    cells.append(f"{cell:.16e}")
                elif isinstance(cell, bool):
                    cells.append(str(int(cell)))
                else:
                    cells.append(str(cell))
            fh.write(",".join(cells) + "\n")


class OutputDir:
    """Owns the output directory through a lock file for the process lifetime."""

    def __init__(self, path: str):
        self.path = Path(path)
        self.lock = self.path / LOCK_NAME

    def __enter__(self) -> Path:
        self.path.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise InvalidParams(
                f"output directory {self.path} is locked by another run "
                f"(remove {self.lock} if stale)"
            ) from None
        os.close(fd)
        return self.path

    def __exit__(self, *exc):
        try:
            os.unlink(self.lock)
        except FileNotFoundError:
            pass
        return False


def write_manifest(out: Path, command: str, cfg: dict, outputs: list[str],
                   wall: float, checks: dict, inputs: list[str] | None = None) -> None:
    write_json(out / "manifest.json", {
        "format_version": FORMAT_VERSION,
        "command": command,
        "config_hash": config_hash(cfg),
        "inputs": inputs or [],
        "outputs": sorted(outputs),
        "wall_time_s": wall,
        "version": __version__,
        "checks": checks,
    })


def sweep_workers() -> int:
    try:
        return max(1, int(os.environ.get("DPNLS_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    workers = sweep_workers()
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _load_profile(args) -> RadialProfile | None:
    if getattr(args, "profile_csv", None):
        meta = args.profile_meta or str(
            Path(args.profile_csv).with_suffix("")) + ".meta.json"
        return RadialProfile.load(args.profile_csv, meta)
    return None


def _report_payload(profile: RadialProfile, report, strict: bool) -> dict:
    grad = report.gradL2_sq
    checks = {
        "pohozaev_K": bool(report.pohozaev_residual_K <= 1e-6),
        "pohozaev_P": bool(report.pohozaev_residual_P <= 1e-6),
        "identity_S_KJ": bool(
            abs(report.S - report.K / (profile.params.q + 1) - report.J)
            <= 1e-10 * (abs(report.S) + 1)
        ),
        "tail_continuity": True,  # anchored exactly by construction
        "positive_action": bool(report.S > 0),
        "strauss_margin": bool(strauss_bound_check(profile) >= -1e-8),
    }
    return {
        "format_version": FORMAT_VERSION,
        "amplitude": profile.amplitude,
        "r_max": profile.r_max,
        "tail": profile.tail.as_dict(),
        "residuals": profile.residuals,
        "report": report.as_dict(),
        "checks": checks,
        "strict": strict,
    }


def cmd_groundstate(args) -> int:
    cfg = load_config(args)
    t0 = time.time()
    params = model_params(cfg)
    profile = solve_ground_state(params, shooting_config(cfg))
    report = compute_report(profile, strict=cfg["output"]["strict"])
    with OutputDir(args.out) as out:
        profile.save(out / "profile.csv", out / "profile.meta.json")
        payload = _report_payload(profile, report, cfg["output"]["strict"])
        write_json(out / "report.json", payload)
        write_manifest(out, "groundstate", cfg,
                       ["profile.csv", "profile.meta.json", "report.json"],
                       time.time() - t0, payload["checks"])
    return 0


def cmd_functionals(args) -> int:
    cfg = load_config(args)
    t0 = time.time()
    profile = _load_profile(args)
    inputs = []
    if profile is None:
        profile = solve_ground_state(model_params(cfg), shooting_config(cfg))
    else:
        inputs = [args.profile_csv]
    report = compute_report(profile, strict=cfg["output"]["strict"])
    with OutputDir(args.out) as out:
        payload = _report_payload(profile, report, cfg["output"]["strict"])
        write_json(out / "report.json", payload)
        write_manifest(out, "functionals", cfg, ["report.json"],
                       time.time() - t0, payload["checks"], inputs=inputs)
    return 0


def cmd_stability_map(args) -> int:
    cfg = load_config(args)
    t0 = time.time()
    params = model_params(cfg)
    dim = params.dim
    sm = cfg["stability_map"]
    pairs = [(p, q) for p in sm["p_values"] for q in sm["q_values"]
             if p < q and q < 1 + 4 / dim]
    if not pairs:
        raise InvalidParams("stability map grid is empty after admissibility filtering")
    scfg = shooting_config(cfg)

    def run_chunk(pair):
        return sign_equivalence_sweep(dim, [pair], scfg,
                                      degenerate_band=sm["degenerate_band"])[0]

    rows = parallel_map(run_chunk, pairs)
    ok_rows = [r for r in rows if r.status == "ok"]
    checks = {
        "row_success_rate": len(ok_rows) / len(rows),
        "agreement_outside_band": bool(all(
            r.agreement for r in ok_rows if not r.near_degenerate
        )),
    }
    p_grid = np.linspace(1.0 + 1e-9, 1 + 4 / dim, 201)
    boundary = [(float(p), gamma_curve(dim, float(p))) for p in p_grid
                if gamma_curve(dim, float(p)) >= 1.0]
    with OutputDir(args.out) as out:
        write_csv(out / "sweep.csv",
                  ["p", "q", "gamma", "closed_form", "fd_value",
                   "sign_closed_form", "sign_gamma_test", "agreement",
                   "near_degenerate", "status"],
                  [[r.p, r.q, r.gamma, r.closed_form, r.fd_value,
                    r.sign_closed_form, r.sign_gamma_test, r.agreement,
                    r.near_degenerate, r.status] for r in rows])
        write_json(out / "regions.json", {
            "format_version": FORMAT_VERSION,
            "dim": dim,
            "p_threshold": p_threshold(dim),
            "mass_critical_q": 1 + 4 / dim,
            "boundary_polyline": boundary,
        })
        outputs = ["sweep.csv", "regions.json"]
        if args.plot_data:
            write_csv(out / "boundary.csv", ["p", "gamma"], boundary)
            outputs.append("boundary.csv")
        write_manifest(out, "stability-map", cfg, outputs, time.time() - t0, checks)
    return 0 if checks["row_success_rate"] >= 0.9 else 2


def cmd_decay_fit(args) -> int:
    cfg = load_config(args)
    t0 = time.time()
    profile = _load_profile(args)
    inputs = []
    if profile is None:
        profile = solve_ground_state(model_params(cfg), shooting_config(cfg))
    else:
        inputs = [args.profile_csv]
    fit = fit_tail(profile)
    rel = abs(fit.fitted_exponent - fit.theory.exponent) / max(abs(fit.theory.exponent), 1e-30)
    checks = {"within_2pct_of_theory": bool(rel <= 0.02)}
    with OutputDir(args.out) as out:
        d = fit.as_dict()
        write_csv(out / "decayfit.csv", list(d.keys()), [list(d.values())])
        write_manifest(out, "decay-fit", cfg, ["decayfit.csv"],
                       time.time() - t0, checks, inputs=inputs)
    return 0


def cmd_zero_mass(args) -> int:
    cfg = load_config(args)
    t0 = time.time()
    params = model_params(cfg)
    study = zero_mass_limit_study(params, cfg["zero_mass"]["omega_sequence"],
                                  shooting_config(cfg))
    rows = list(study.as_rows())
    ok = [r for r in rows if r["status"] == "ok"]
    h1 = [r["delta_H1dot"] for r in ok]
    checks = {
        "rows_ok": len(ok),
        "delta_H1dot_decreasing": bool(all(b < a * 1.05 for a, b in zip(h1, h1[1:]))),
        "mass_times_omega_decreasing": bool(all(
            b["mass_times_omega"] < a["mass_times_omega"] * 1.05
            for a, b in zip(ok, ok[1:])
        )),
    }
    with OutputDir(args.out) as out:
        header = list(rows[0].keys())
        write_csv(out / "limit.csv", header, [[r[k] for k in header] for r in rows])
        write_manifest(out, "zero-mass", cfg, ["limit.csv"], time.time() - t0, checks)
    return 0


def _write_snapshot(path: Path, field: WaveField) -> None:
    x = field.grid.x
    write_csv(path, ["x", "re_u", "im_u"],
              zip(x.tolist(), field.values.real.tolist(), field.values.imag.tolist()))


def _merge_diagnostics(parts: list[EvolutionDiagnostics]) -> EvolutionDiagnostics:
    if len(parts) == 1:
        return parts[0]
    arrays = {}
    for name in ("t", "energy", "mass", "virial_P", "variance", "grad_norm",
                 "distance", "boundary_fraction"):
        chunks = [getattr(parts[0], name)]
        for part in parts[1:]:
            chunks.append(getattr(part, name)[1:])  # drop duplicated boundary sample
        arrays[name] = np.concatenate(chunks)
    last = parts[-1]
    return EvolutionDiagnostics(
        **arrays,
        blowup_flag=last.blowup_flag,
        blowup_time=last.blowup_time,
        blowup_reason=last.blowup_reason,
        dt_final=last.dt_final,
        shift_resolution=last.shift_resolution,
    )


def cmd_evolve(args) -> int:
    cfg = load_config(args)
    t0 = time.time()
    params = model_params(cfg)
    ev = cfg["evolution"]
    if ev["kind"] == "escape-test":
        return _run_escape(args, cfg, params, ev, t0)
    profile = solve_ground_state(params, shooting_config(cfg))
    grid = GridSpec(float(ev["half_length"]), int(ev["points"]))
    field = make_initial_data(InitialDataKind(ev["kind"]), profile,
                              lam=float(ev["lam"]),
                              cutoff_radius=ev["cutoff_radius"],
                              grid=grid)
    reference = sample_profile(profile, grid)
    snap_times = sorted(set(float(s) for s in ev["snapshot_times"]
                            if 0.0 < s < ev["t_end"]))
    with OutputDir(args.out) as out:
        snapdir = out / "snapshots"
        snapdir.mkdir(exist_ok=True)
        outputs = ["diag.csv", "summary.json"]
        _write_snapshot(snapdir / "snap_000.csv", field)
        outputs.append("snapshots/snap_000.csv")
        parts = []
        snap_idx = 1
        for target in snap_times + [float(ev["t_end"])]:
            field, diag = evolve(
                field, params, dt=float(ev["dt"]), t_end=target,
                diagnostics_every=int(ev["diagnostics_every"]),
                reference=reference,
                energy_jump_rtol=float(ev["energy_jump_rtol"]),
                dt_floor=float(ev["dt_floor"]),
                blowup_grad_factor=float(ev["blowup_grad_factor"]),
                linear_only=bool(ev["linear_only"]),
            )
            parts.append(diag)
            name = f"snap_{snap_idx:03d}.csv"
            _write_snapshot(snapdir / name, field)
            outputs.append(f"snapshots/{name}")
            snap_idx += 1
            if diag.blowup_flag:
                break
        diag = _merge_diagnostics(parts)
        diag.to_csv(out / "diag.csv")
        regime = classify_regime(params, **cfg["classifier"])
        if diag.blowup_flag:
            summary = (
                f"blowup detected at t = {diag.blowup_time:.6g} "
                f"({diag.blowup_reason}); consistent with: {regime.citation}"
            )
        else:
            dmax = float(np.nanmax(diag.distance))
            summary = (
                f"orbit preserved to t = {field.time:.6g}; "
                f"max orbital distance {dmax:.3e}"
            )
        e_drift = float(np.max(np.abs(diag.energy - diag.energy[0]))
                        / (abs(diag.energy[0]) + 1))
        m_drift = float(np.max(np.abs(diag.mass - diag.mass[0])) / diag.mass[0])
        payload = {
            "format_version": FORMAT_VERSION,
            "summary": summary,
            "blowup_flag": diag.blowup_flag,
            "blowup_time": diag.blowup_time,
            "blowup_reason": diag.blowup_reason,
            "regime": regime.tag.value,
            "citation": regime.citation,
            "energy_drift_rel": e_drift,
            "mass_drift_rel": m_drift,
            "max_distance": float(np.nanmax(diag.distance)),
            "shift_resolution": diag.shift_resolution,
        }
        write_json(out / "summary.json", payload)
        checks = {"blowup_flag": diag.blowup_flag}
        write_manifest(out, "evolve", cfg, outputs, time.time() - t0, checks)
    return 0


def _run_escape(args, cfg, params, ev, t0) -> int:
    report = instability_escape_test(
        params,
        lam=float(ev["lam"]),
        t_end=float(ev["t_end"]),
        escape_factor=float(ev["escape_factor"]),
        grid=GridSpec(float(ev["half_length"]), int(ev["points"])),
        cutoff_radius=ev["cutoff_radius"],
        dt=float(ev["dt"]),
        diagnostics_every=int(ev["diagnostics_every"]),
        energy_jump_rtol=float(ev["energy_jump_rtol"]),
    )
    regime = classify_regime(params, **cfg["classifier"])
    with OutputDir(args.out) as out:
        payload = report.as_dict()
        if report.escape_observed:
            payload["summary"] = (
                f"escape observed at t = {report.escape_time:.6g}; "
                f"consistent with: {regime.citation}"
            )
        else:
            payload["summary"] = "no escape within t_end"
        write_json(out / "summary.json", payload)
        write_csv(out / "diag.csv", ["t", "distance"],
                  zip(report.t_samples.tolist(), report.distance_samples.tolist()))
        write_manifest(out, "evolve", cfg, ["summary.json", "diag.csv"],
                       time.time() - t0, {"escape_observed": report.escape_observed})
    return 0


def cmd_defaults(args) -> int:
    cfg = load_config(args)
    json.dump(cfg, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpnls",
        description="Ground states and standing-wave instability for the "
                    "double-power NLS",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="JSON config file overlaying the defaults")
        p.add_argument("--preset", help=f"named preset: {', '.join(sorted(PRESETS))}")
        p.add_argument("--strict", action="store_true",
                       help="divergent norms become errors")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("groundstate", help="solve a radial ground state")
    common(p)
    p.set_defaults(func=cmd_groundstate)

    p = sub.add_parser("functionals", help="evaluate functionals on a profile")
    common(p)
    p.add_argument("--profile-csv", help="existing profile.csv (else solve)")
    p.add_argument("--profile-meta", help="sidecar meta JSON path")
    p.set_defaults(func=cmd_functionals)

    p = sub.add_parser("stability-map", help="sign-equivalence sweep over (p, q)")
    common(p)
    p.add_argument("--plot-data", action="store_true",
                   help="emit tidy boundary.csv for plotting")
    p.set_defaults(func=cmd_stability_map)

    p = sub.add_parser("decay-fit", help="fit far-field decay of a profile")
    common(p)
    p.add_argument("--profile-csv", help="existing profile.csv (else solve)")
    p.add_argument("--profile-meta", help="sidecar meta JSON path")
    p.set_defaults(func=cmd_decay_fit)

    p = sub.add_parser("zero-mass", help="zero-frequency limit study")
    common(p)
    p.set_defaults(func=cmd_zero_mass)

    p = sub.add_parser("evolve", help="time evolution with diagnostics")
    common(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("defaults", help="print the merged configuration")
    common(p, needs_out=False)
    p.set_defaults(func=cmd_defaults)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidParams, ValueError) as exc:
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 3
    except DpnlsError as exc:
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
