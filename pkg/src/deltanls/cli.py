"""Command-line front end: ``deltanls <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import csvio
from .config import COMMANDS, RunConfig, parse_config, parse_p_list, parse_range, serialize
from .errors import DeltaNLSError, FitError, ParameterError, UsageError
from .reference_data import TABLE_Q, TABLE_REL_TOL, table_rows
from .soliton_family import Grid, SolitonParams

log = logging.getLogger("deltanls")

# flag -> RunConfig field, for flags whose names differ from the field
_ALIASES = {"omega0": "omega", "range": "omega_range", "all_xi": "xi_range"}


def _add_globals(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--config", default=argparse.SUPPRESS, help="JSON file with RunConfig keys")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output CSV path (stdout if omitted)")
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    g.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS)


def _physics(p, omega=True, sigma=True):
    p.add_argument("--q", type=float)
    p.add_argument("--p", type=float)
    if sigma:
        p.add_argument("--sigma", type=int, choices=(-1, 1))
    if omega:
        p.add_argument("--omega", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deltanls", description=__doc__)
    _add_globals(ap)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("soliton", help="profile values, mass and mass derivative")
    _physics(s)
    s.add_argument("--x", type=float, help="print Q(x) (and dQ/domega with --domega)")
    s.add_argument("--mass", action="store_true")
    s.add_argument("--domega", action="store_true")

    s = sub.add_parser("omega-crit", help="critical frequency Omega(p)")
    _physics(s, omega=False, sigma=False)

    s = sub.add_parser("spectrum", help="eigenvalues of the discretized L(omega)")
    _physics(s)
    s.add_argument("--h", type=float)
    s.add_argument("--X", type=float)
    s.add_argument("--window", help="re_lo,re_hi,im_lo,im_hi")

    s = sub.add_parser("resonance-scan", help="flatness of the far-field BVP solution over omega")
    _physics(s, omega=False)
    s.add_argument("--parity", choices=("even", "odd"))
    s.add_argument("--range", help="lo:hi")
    s.add_argument("--samples", type=int)
    s.add_argument("--x0", type=float)
    s.add_argument("--h", type=float)

    s = sub.add_parser("resonance-table", help="omega1, M, omega2, Omega over a p list")
    s.add_argument("--q", type=float)
    s.add_argument("--p-list", dest="p_list")
    s.add_argument("--x0", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--extrapolate", action="store_true", default=None)

    s = sub.add_parser("jost", help="det D, transmission, reflection and Wronskian checks")
    _physics(s)
    s.add_argument("--xi", type=float)
    s.add_argument("--all-xi", dest="all_xi", help="lo:hi:n")

    s = sub.add_parser("threshold", help="|det D(0)| over an omega range")
    _physics(s, omega=False)
    s.add_argument("--omega-range", dest="omega_range", help="lo:hi")
    s.add_argument("--samples", type=int)

    s = sub.add_parser("dispersive-fit", help="decay of e^{tL} P_c applied to a Gaussian")
    _physics(s)
    s.add_argument("--alpha", type=float)
    s.add_argument("--r", type=float)
    s.add_argument("--tmax", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--X", type=float)
    s.add_argument("--window", help="a:b")
    s.add_argument("--shape", choices=("even", "odd"))

    s = sub.add_parser("evolve", help="split-step run from a perturbed soliton")
    _physics(s, omega=False)
    s.add_argument("--omega0", type=float)
    s.add_argument("--eta", type=float)
    s.add_argument("--shape", choices=("even", "odd", "projected", "projected_odd", "none"))
    s.add_argument("--tmax", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--X", type=float)

    s = sub.add_parser("modulate", help="modulation parameters of a saved trajectory")
    s.add_argument("--traj", required=True)
    s.add_argument("--alpha", type=float)
    s.add_argument("--r", type=float)

    s = sub.add_parser("reproduce-table", help="recompute the reference table and diff against it")
    s.add_argument("--x0", type=float)
    s.add_argument("--h", type=float)
    s.add_argument("--p-list", dest="p_list")
    s.add_argument("--extrapolate", action="store_true", default=None)

    for name, sp in sub.choices.items():
        _add_globals(sp)
    return ap


def config_from_args(argv=None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    cfg_path = ns.pop("config", None)
    overrides = {}
    x_eval = ns.pop("x", None)
    want_mass = ns.pop("mass", False)
    want_domega = ns.pop("domega", False)
    for k, v in ns.items():
        if v is not None:
            overrides[_ALIASES.get(k, k)] = v
    if x_eval is not None:
        overrides["x_eval"] = x_eval
    if want_domega:
        overrides["query"] = "domega"
    elif want_mass:
        overrides["query"] = "mass"
    return parse_config(overrides, cfg_path)


# ---------------------------------------------------------------- commands


def _params(cfg: RunConfig, omega=None) -> SolitonParams:
    return SolitonParams(cfg.q, cfg.sigma, cfg.p, cfg.omega if omega is None else omega)


def cmd_soliton(cfg: RunConfig) -> int:
    from .soliton_family import mass_derivative, soliton_domega, soliton_mass, soliton_profile

    P = _params(cfg)
    x = cfg.x_eval
    if x is not None:
        print(f"Q({x:g}) = {csvio.fmt(soliton_profile(P, np.array([x]))[0])}")
        if cfg.query == "domega":
            print(f"dQ/domega({x:g}) = {csvio.fmt(soliton_domega(P, np.array([x]))[0])}")
    M = soliton_mass(P)
    dM = mass_derivative(P)
    if cfg.query == "mass" or x is None:
        print(f"mass = {csvio.fmt(M)}")
        print(f"mass_derivative = {csvio.fmt(dM)}")
    if cfg.out:
        csvio.write_csv(cfg.out, ["p", "q", "omega", "mass", "mass_derivative"], [[P.p, P.q, P.omega, M, dM]])
    return 0


def cmd_omega_crit(cfg: RunConfig) -> int:
    from .soliton_family import critical_frequency

    Om = critical_frequency(cfg.q, cfg.p)
    print(f"Omega = {csvio.fmt(Om)}")
    if cfg.out:
        csvio.write_csv(cfg.out, ["p", "q", "Omega"], [[cfg.p, cfg.q, Om]])
    return 0


def cmd_spectrum(cfg: RunConfig) -> int:
    from .discrete_operators import build_linearized, discrete_spectrum

    grid = Grid.from_halfwidth(cfg.h or 0.1, cfg.X or 20.0)
    window = None
    if cfg.window:
        window = tuple(float(s) for s in cfg.window.split(","))
        if len(window) != 4:
            raise UsageError("--window expects re_lo,re_hi,im_lo,im_hi")
    lin = build_linearized(grid, _params(cfg), "discrete")
    rep = discrete_spectrum(lin, window=window)
    csvio.write_csv(cfg.out, ["re_lambda", "im_lambda"], [[z.real, z.imag] for z in rep.eigenvalues])
    print(rep.summary(), file=sys.stderr if not cfg.out else sys.stdout)
    return 0


def cmd_resonance_scan(cfg: RunConfig) -> int:
    from .resonance_shooter import scan

    if not cfg.omega_range:
        raise UsageError("--range lo:hi is required")
    lo, hi = parse_range(cfg.omega_range)
    res = scan(cfg.q, cfg.p, cfg.parity, lo, hi, cfg.samples, x0=cfg.x0, h=cfg.h or 0.01,
               sigma=cfg.sigma, threads=cfg.threads)
    csvio.write_csv(cfg.out, ["omega", "flatness"], zip(res.omegas, res.flatness))
    for w, v in res.minima:
        log.info("local minimum at omega=%.6g (flatness %.3e)", w, v)
    return 0


def cmd_resonance_table(cfg: RunConfig) -> int:
    from .resonance_shooter import resonance_table

    rows = resonance_table(cfg.q, parse_p_list(cfg.p_list), x0=cfg.x0, h=cfg.h or 0.01,
                           extrapolate_even=cfg.extrapolate, threads=cfg.threads)
    csvio.write_csv(cfg.out, ["p", "omega1", "M", "omega2", "Omega"],
                    [[r.p, r.omega1, r.mass, r.omega2, r.Omega] for r in rows])
    bad = [r for r in rows if r.errors]
    for r in bad:
        print(f"p={r.p:g}: {'; '.join(r.errors)}", file=sys.stderr)
    return 1 if bad else 0


def cmd_jost(cfg: RunConfig) -> int:
    from .jost_scattering import scattering_data

    P = _params(cfg)
    if cfg.xi_range:
        lo, hi, n = parse_range(cfg.xi_range, with_count=True)
        xis = np.linspace(lo, hi, n)
    else:
        xis = [cfg.xi]
    rows = []
    for xi in xis:
        sd = scattering_data(P, float(xi))
        d = sd.detD
        if xi != 0:
            w12 = abs(sd.wronskians["W12"] - 2j * xi) / abs(2 * xi)
        else:
            w12 = float("nan")
        w34 = abs(sd.wronskians["W34t"] + 2 * sd.mu) / (2 * sd.mu)
        rows.append([xi, d.real, d.imag, sd.Ttilde.real, sd.Ttilde.imag, sd.Rtilde.real, sd.Rtilde.imag, w12, w34])
    csvio.write_csv(cfg.out, ["xi", "re_detD", "im_detD", "re_T", "im_T", "re_R", "im_R", "w12_err", "w34_err"], rows)
    return 0


def cmd_threshold(cfg: RunConfig) -> int:
    from .jost_scattering import threshold_indicator

    if not cfg.omega_range:
        raise UsageError("--omega-range lo:hi is required")
    lo, hi = parse_range(cfg.omega_range)
    ws = np.linspace(lo, hi, cfg.samples or 25)
    rows = [[w, threshold_indicator(_params(cfg, float(w)))] for w in ws]
    csvio.write_csv(cfg.out, ["omega", "abs_detD0"], rows)
    return 0


def cmd_dispersive_fit(cfg: RunConfig) -> int:
    from .linearized_propagator import (
        decay_series, fit_decay, gaussian_bump, max_group_speed, reflection_time,
    )

    grid = Grid.from_halfwidth(cfg.h or 0.05, cfg.X or 200.0)
    t_grid = np.arange(0.0, cfg.tmax + 1e-9, 0.5)
    v0 = gaussian_bump(grid, width=1.0, phase=0.3, odd=cfg.shape in ("odd", "projected_odd"))
    ser = decay_series(_params(cfg), grid, v0, t_grid, dt=cfg.dt, alpha=cfg.alpha, r=cfg.r)
    keys = ["linf", "l2", "l2w", "lr"]
    csvio.write_csv(cfg.out, ["t"] + keys, [[t] + [ser.norms[k][i] for k in keys] for i, t in enumerate(ser.times)])
    t_ref = reflection_time(grid, max_group_speed(grid, cfg.dt))
    window = parse_range(cfg.window) if cfg.window else (min(10.0, 0.25 * t_ref), min(cfg.tmax, t_ref))
    dest = sys.stderr if not cfg.out else sys.stdout
    print(f"# window {window[0]:g}:{window[1]:g} (reflection time {t_ref:.4g})", file=dest)
    for k in ("linf", "linfw", "l2w", "lr"):
        slope, half = fit_decay(ser, k, window)
        print(f"# slope {k} = {slope:.4f} +- {half:.4f}", file=dest)
    return 0


def _traj_meta_path(path) -> Path:
    return Path(str(path) + ".json")


def cmd_evolve(cfg: RunConfig) -> int:
    from .nls_dynamics import EvolutionConfig, energy, evolve, mass, x_moment

    grid = Grid.from_halfwidth(cfg.h or 0.05, cfg.X or 200.0)
    P = _params(cfg)
    ec = EvolutionConfig(P, grid, dt=cfg.dt, t_max=cfg.tmax, eta=cfg.eta, shape=cfg.shape)
    traj = evolve(ec)
    x = grid.x
    rows = []
    for t, u in zip(traj.times, traj.states):
        rows.extend([t, xi, ui.real, ui.imag] for xi, ui in zip(x, u))
    summary = [[t, mass(u, grid), energy(u, grid, P.q, P.sigma, P.p), x_moment(u, grid)]
               for t, u in zip(traj.times, traj.states)]
    out = cfg.out or "traj.csv"
    csvio.write_csv(out, ["t", "x", "re_u", "im_u"], rows)
    stem = Path(out)
    csvio.write_csv(stem.with_name(stem.stem + "_summary.csv"), ["t", "mass", "energy", "xmoment"], summary)
    _traj_meta_path(out).write_text(serialize(cfg) + "\n")
    log.info("wrote %d samples of %d nodes to %s", len(traj.times), grid.n, out)
    return 0


def load_trajectory(path):
    """Rebuild a Trajectory from the CSV written by ``evolve`` and its JSON sidecar."""
    from .nls_dynamics import EvolutionConfig, Trajectory

    meta = _traj_meta_path(path)
    if not meta.exists():
        raise UsageError(f"missing run description {meta}")
    run = parse_config(json.loads(meta.read_text()))
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    times = np.unique(data[:, 0])
    n = data.shape[0] // times.size
    grid = Grid.from_halfwidth(run.h or 0.05, run.X or 200.0)
    if n != grid.n:
        raise UsageError(f"trajectory has {n} nodes per sample, expected {grid.n}")
    u = (data[:, 2] + 1j * data[:, 3]).reshape(times.size, n)
    P = SolitonParams(run.q, run.sigma, run.p, run.omega)
    ec = EvolutionConfig(P, grid, dt=run.dt, t_max=run.tmax, eta=run.eta, shape=run.shape)
    return Trajectory(times, u, grid, ec), run


def cmd_modulate(cfg: RunConfig) -> int:
    from .modulation_tracker import decay_report, track

    traj, run = load_trajectory(cfg.traj)
    series = track(traj)
    cols = series.table(cfg.alpha, cfg.r)
    keys = ["t", "theta", "omega", "thetadot", "omegadot", "v_h1", "v_lr", "v_l2w", "ode_residual"]
    csvio.write_csv(cfg.out, keys, csvio.columns_to_rows(cols, keys))
    dest = sys.stderr if not cfg.out else sys.stdout
    res = cols["ode_residual"]
    print(f"# orthogonality max {np.max(series.orthogonality):.3e}", file=dest)
    if np.any(np.isfinite(res)):
        print(f"# ode residual max {np.nanmax(res):.3e}", file=dest)
    print(f"# |omega(T) - omega0| {abs(series.omega[-1] - run.omega):.3e}", file=dest)
    if series.failure_index is not None:
        print(f"# decomposition failed at sample {series.failure_index}", file=dest)
        return 1
    try:
        rep = decay_report(series, run.eta, cfg.alpha, cfg.r)
    except FitError as exc:
        print(f"# verdict n/a ({exc})", file=dest)
        return 0
    print(f"# L^r slope {rep.lr_slope:.4f} (expected {rep.lr_expected:.4f})", file=dest)
    print(f"# weighted slope {rep.weighted_slope:.4f} (expected {rep.weighted_expected:.4f})", file=dest)
    print(f"# sup |v|_H1 / eta {rep.sup_h1_ratio:.4f}", file=dest)
    print(f"# verdict {'PASS' if rep.passed else 'FAIL'}", file=dest)
    return 0 if rep.passed else 1


def cmd_reproduce_table(cfg: RunConfig) -> int:
    from .jost_scattering import threshold_root
    from .resonance_shooter import resonance_table

    ref = {round(p, 6): (w, m) for p, w, m in table_rows()}
    p_list = parse_p_list(cfg.p_list)
    rows = resonance_table(TABLE_Q, p_list, x0=cfg.x0, h=cfg.h or 0.01,
                           extrapolate_even=cfg.extrapolate, threads=cfg.threads)
    out_rows = []
    report = []
    failed = False
    for r in rows:
        root = float("nan")
        if np.isfinite(r.omega1):
            try:
                root = threshold_root(TABLE_Q, r.p, (0.95 * r.omega1, 1.05 * r.omega1))
            except DeltaNLSError as exc:
                r.errors.append(f"detD0_root: {exc}")
        out_rows.append([r.p, r.omega1, r.mass, r.omega2, r.Omega, root])
        line = f"p={r.p:g}"
        if r.errors:
            failed = True
            line += "  ERROR " + "; ".join(r.errors)
        key = round(r.p, 6)
        if key in ref:
            w_ref, m_ref = ref[key]
            dw = abs(r.omega1 - w_ref) / w_ref
            dm = abs(r.mass - m_ref) / m_ref
            ok = dw <= TABLE_REL_TOL and dm <= TABLE_REL_TOL
            failed |= not ok
            line += (f"  omega1 {r.omega1:.5f} vs {w_ref:.3f} ({100 * dw:.2f}%)"
                     f"  M {r.mass:.5f} vs {m_ref:.3f} ({100 * dm:.2f}%)  {'ok' if ok else 'DEVIATES'}")
        if np.isfinite(root):
            gap = abs(r.omega1 - root)
            failed |= not gap < 1e-2
            line += f"  |omega1 - detD0_root| {gap:.2e}"
        report.append(line)
    csvio.write_csv(cfg.out, ["p", "omega1", "M", "omega2", "Omega", "detD0_root"], out_rows)
    dest = sys.stderr if not cfg.out else sys.stdout
    print("\n".join(report), file=dest)
    return 1 if failed else 0


HANDLERS = {
    "soliton": cmd_soliton,
    "omega-crit": cmd_omega_crit,
    "spectrum": cmd_spectrum,
    "resonance-scan": cmd_resonance_scan,
    "resonance-table": cmd_resonance_table,
    "jost": cmd_jost,
    "threshold": cmd_threshold,
    "dispersive-fit": cmd_dispersive_fit,
    "evolve": cmd_evolve,
    "modulate": cmd_modulate,
    "reproduce-table": cmd_reproduce_table,
}
assert set(HANDLERS) == set(COMMANDS)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except UsageError as exc:
        print(f"deltanls: usage error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return HANDLERS[cfg.command](cfg)
    except (UsageError, ParameterError) as exc:
        print(f"deltanls: usage error: {exc}", file=sys.stderr)
        return 2
    except DeltaNLSError as exc:
        print(f"deltanls: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
