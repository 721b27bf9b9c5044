"""Execute a validated scenario and write its CSV outputs plus a JSON manifest."""
from __future__ import annotations

import csv
import json
import logging
import math
import platform
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .. import __version__
from .. import diagnostics as dg
from .. import verification
from ..discretization import Discretization, MagnetizationField, build_mesh
from ..errors import BlowUpError, LLControlError
from ..hysteresis import HysteresisConfig, hysteresis_sweep, loop_rows, persistence_test, summary_rows
from ..integrator import IntegratorOptions, Trajectory, integrate
from ..model import ControlSpec, Equilibrium, gain_threshold
from ..spectral import (analytic_eigenvalues, assemble_linear_operator, discrete_eigenvalues,
                        match_spectrum)
from .config import ScenarioConfig

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2

TRAJECTORY_COLUMNS = ("t", "node_index", "x", "m1", "m2", "m3")
DIAGNOSTIC_COLUMNS = ("t", "l2_dist", "h1_dist", "lyapunov", "norm_drift", "energy")


@dataclass
class ScenarioResult:
    exit_code: int
    out_dir: Path
    files: List[str] = field(default_factory=list)
    results: Dict[str, object] = field(default_factory=dict)
    manifest: Dict[str, object] = field(default_factory=dict)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _trajectory_rows(traj: Trajectory, t_offset=0.0, skip_first=False):
    x = traj.states[0].mesh.nodes
    for k, (t, state) in enumerate(zip(traj.times, traj.states)):
        if skip_first and k == 0:
            continue
        for i, (xi, m) in enumerate(zip(x, state.values)):
            yield t + t_offset, i, xi, m[0], m[1], m[2]


def _diagnostic_rows(traj: Trajectory, t_offset=0.0, skip_first=False):
    for k, d in enumerate(traj.diagnostics):
        if skip_first and k == 0:
            continue
        yield (d.t + t_offset, d.l2_distance_to_target, d.h1_distance_to_target, d.lyapunov,
               d.max_norm_drift, d.exchange_energy)


def _options(cfg: ScenarioConfig, t_final=None, allow_large_dt=False) -> IntegratorOptions:
    it = cfg.sections["integrator"]
    return IntegratorOptions(dt=it["dt"], t_final=t_final if t_final is not None else it["t_final"],
                             renormalize=it["renormalize"], record_stride=it["record_stride"],
                             allow_large_dt=it["allow_large_dt"] or allow_large_dt)


def _initial(cfg: ScenarioConfig, disc: Discretization) -> MagnetizationField:
    return MagnetizationField(cfg.initial.values(disc.mesh), disc.mesh)


def _theorem_summary(traj: Trajectory, spec: ControlSpec, params) -> dict:
    threshold = gain_threshold(params)
    out = {"gain": spec.gain, "gain_threshold": threshold, "theorem_applies": spec.gain > threshold}
    v = traj.column("lyapunov")
    out["max_lyapunov_increase"] = float(np.max(np.diff(v))) if len(v) > 1 else 0.0
    h1sq = traj.column("h1_distance_to_target") ** 2
    if spec.gain > threshold and h1sq[0] > 0:
        bound = np.exp(-2 * (spec.gain - threshold) * traj.times) * h1sq[0]
        out["max_h1_bound_ratio"] = float(np.max(h1sq / bound))
    try:
        out["decay_rate"] = dg.decay_rate_fit(traj)
    except (ValueError, LLControlError) as exc:
        out["decay_rate"] = None
        out["decay_rate_note"] = str(exc)
    return out


def _run_simulate(cfg, out, allow_large_dt, res):
    params = cfg.params
    disc = Discretization(build_mesh(cfg.n_elements, params.length))
    spec = cfg.control_spec() if cfg.kind == "simulate" else cfg.control_spec(cfg.get("control", "r"))
    traj = integrate(_initial(cfg, disc), params, spec, _options(cfg, allow_large_dt=allow_large_dt), disc)
    write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, _trajectory_rows(traj))
    write_csv(out / "diagnostics.csv", DIAGNOSTIC_COLUMNS, _diagnostic_rows(traj))
    res.files += ["trajectory.csv", "diagnostics.csv"]
    last = traj.diagnostics[-1]
    res.results.update(final_time=float(traj.times[-1]), final_l2_dist=last.l2_distance_to_target,
                       final_h1_dist=last.h1_distance_to_target,
                       max_norm_drift=float(traj.column("max_norm_drift").max()),
                       final_energy=last.exchange_energy, renormalize=traj.meta["renormalize"],
                       final_state=traj.final.values.tolist())
    if spec is not None and spec.gain > 0:
        res.results.update(_theorem_summary(traj, spec, params))
    return traj


def _run_sequence(cfg, out, allow_large_dt, res):
    params = cfg.params
    disc = Discretization(build_mesh(cfg.n_elements, params.length))
    seq, k = cfg.sections["sequence"], cfg.get("control", "k")
    phases = []
    if seq["settle_time"] > 0:
        phases.append(("settle", None, seq["settle_time"]))
    for i, r in enumerate(seq["targets"], start=1):
        phases.append((f"target_{i}", ControlSpec(k, Equilibrium(np.array(r))), seq["phase_time"]))

    state, t0 = _initial(cfg, disc), 0.0
    traj_rows, diag_rows, summaries = [], [], []
    failed = None
    for idx, (name, spec, duration) in enumerate(phases):
        opts = _options(cfg, t_final=duration, allow_large_dt=allow_large_dt)
        if spec is not None and opts.renormalize:
            opts = replace(opts, renormalize=None)
        traj = integrate(state, params, spec, opts, disc)
        traj_rows.extend(_trajectory_rows(traj, t0, skip_first=idx > 0))
        diag_rows.extend(_diagnostic_rows(traj, t0, skip_first=idx > 0))
        last = traj.diagnostics[-1]
        summary = {"phase": name, "t_start": t0, "t_end": t0 + float(traj.times[-1]),
                   "target": None if spec is None else spec.target.a.tolist(),
                   "final_l2_dist": last.l2_distance_to_target,
                   "final_state_mean": dg._trapezoid_weights(traj.final).dot(traj.final.values).tolist()}
        if spec is not None:
            summary.update(_theorem_summary(traj, spec, params))
        summaries.append(summary)
        state, t0 = traj.final, t0 + float(traj.times[-1])
        if traj.failed:
            failed = traj.failure
            break
    write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, traj_rows)
    write_csv(out / "diagnostics.csv", DIAGNOSTIC_COLUMNS, diag_rows)
    res.files += ["trajectory.csv", "diagnostics.csv"]
    res.results["phases"] = summaries
    return failed


def _run_hysteresis(cfg, out, res):
    params, h, c = cfg.params, cfg.sections["hysteresis"], cfg.sections["control"]
    mesh = build_mesh(cfg.n_elements, params.length)
    m0 = MagnetizationField(cfg.initial.values(mesh), mesh)
    hc = HysteresisConfig(omega=max(h["omegas"]), amplitude=h["amplitude"], component=h["component"],
                          observation_point=h["observation_point"], n_periods=h["n_periods"],
                          controlled=h["controlled"], model=h["model"],
                          samples_per_period=h["samples_per_period"])
    r = Equilibrium(np.array(c["r"]))
    spec = ControlSpec(c["k"], r) if h["controlled"] else None
    base = Equilibrium(np.array(h["base"])) if h["base"] is not None else None
    if h["model"] == "linear" and base is None:
        base = r
    loops = hysteresis_sweep(hc, m0, params, spec, h["omegas"], h["n_jobs"], base=base)
    verdict = persistence_test(loops, h["threshold"])
    write_csv(out / "loops.csv", ("omega", "input", "output", "sample_index"), loop_rows(loops))
    write_csv(out / "loop_summary.csv", ("omega", "area", "verdict"), summary_rows(loops, verdict))
    res.files += ["loops.csv", "loop_summary.csv"]
    res.results.update(verdict=verdict.label, area_ratio=verdict.ratio,
                       areas={repr(w): a for w, a in verdict.table})


def _run_spectrum(cfg, out, res):
    params, sp = cfg.params, cfg.sections["spectrum"]
    base = Equilibrium(np.array(sp["base"]))
    rows, per_mesh, errs = [], {}, []
    for n in sp["n_elements_list"]:
        op = assemble_linear_operator(base, params, build_mesh(n, params.length))
        vals = discrete_eigenvalues(op)
        match = match_spectrum(vals, params)
        paired = {p[1]: p for p in match.pairs}
        for i, lam in enumerate(vals):
            p = paired.get(complex(lam))
            rows.append((n, i, lam.real, lam.imag,
                         "" if p is None else p[0].real, "" if p is None else p[0].imag,
                         "" if p is None else p[2]))
        low = match.relative_errors(sp["n_modes"])
        errs.append(low)
        per_mesh[str(n)] = {"zero_modes": len(match.zero_modes),
                            "max_zero_abs": float(np.max(np.abs(match.zero_modes))) if len(match.zero_modes) else None,
                            "low_mode_rel_errors": low.tolist(),
                            "unmatched": int(len(match.unmatched))}
    write_csv(out / "eigenvalues.csv",
              ("n_elements", "index", "real", "imag", "analytic_real", "analytic_imag", "rel_error"), rows)
    write_csv(out / "analytic.csv", ("label", "n", "real", "imag"),
              ((f.label, f.n, f.value.real, f.value.imag)
               for f in analytic_eigenvalues(params, sp["n_max"])))
    res.files += ["eigenvalues.csv", "analytic.csv"]
    res.results["meshes"] = per_mesh
    if len(errs) > 1 and all(len(e) == len(errs[0]) for e in errs):
        res.results["observed_orders"] = [verification.observed_orders(np.vstack([a, b])).ravel().tolist()
                                          for a, b in zip(errs, errs[1:])]


def _run_verify(cfg, out, res):
    v = cfg.sections["verify"]
    checks = verification.run_all(v["n_fields"], v["n_elements"], v["n_equilibria"], v["seed"],
                                  cfg.params)
    write_csv(out / "verify_summary.csv", ("check", "value", "threshold", "passed", "detail"),
              ((c.name, c.value, c.threshold, "pass" if c.passed else "fail", c.detail) for c in checks))
    res.files.append("verify_summary.csv")
    res.results["checks"] = {c.name: c.passed for c in checks}
    return all(c.passed for c in checks)


def config_text(raw: Dict[str, Dict[str, str]]) -> str:
    """Serialize raw (string) sections back into scenario-file text."""
    lines = []
    for section in raw:
        lines.append(f"[{section}]")
        lines += [f"{k} = {v}" for k, v in raw[section].items()]
        lines.append("")
    return "\n".join(lines)


def run_scenario(cfg: ScenarioConfig, out_dir, allow_large_dt: bool = False) -> ScenarioResult:
    """Run ``cfg`` into ``out_dir``. Numerical failures keep partial outputs and exit with 2."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = ScenarioResult(EXIT_OK, out)
    start = time.perf_counter()
    status, failure = "ok", None
    try:
        if cfg.kind in ("simulate", "steer"):
            traj = _run_simulate(cfg, out, allow_large_dt, res)
            if traj.failed:
                status, failure = "numerical_failure", traj.failure
        elif cfg.kind == "steer_sequence":
            failure = _run_sequence(cfg, out, allow_large_dt, res)
            if failure:
                status = "numerical_failure"
        elif cfg.kind == "hysteresis_sweep":
            _run_hysteresis(cfg, out, res)
        elif cfg.kind == "spectrum":
            _run_spectrum(cfg, out, res)
        elif cfg.kind == "verify":
            if not _run_verify(cfg, out, res):
                status, failure = "verification_failed", "one or more checks failed"
    except BlowUpError as exc:
        status, failure = "numerical_failure", str(exc)
    except (LLControlError, ValueError) as exc:
        status, failure = "validation_error", str(exc)

    res.exit_code = {"ok": EXIT_OK, "validation_error": EXIT_VALIDATION}.get(status, EXIT_NUMERICAL)
    res.manifest = {
        "toolkit": "llcontrol",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "kind": cfg.kind,
        "source": cfg.source,
        "config": cfg.raw,
        "resolved": _resolved(cfg),
        "warnings": cfg.warnings,
        "status": status,
        "failure": failure,
        "partial_outputs": status == "numerical_failure",
        "allow_large_dt": allow_large_dt,
        "outputs": res.files,
        "results": _jsonable(res.results),
        "wall_time_s": time.perf_counter() - start,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(res.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if failure:
        log.error("%s: %s", status, failure)
    return res


def _resolved(cfg: ScenarioConfig):
    out = {}
    for section, values in cfg.sections.items():
        out[section] = {k: _jsonable(v) for k, v in values.items()}
    return out


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if v is None or isinstance(v, (str, int, bool)):
        return v
    return str(v)
