"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 resolution-guard failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dispersion as disp
from .bloch import band_structure
from .cme import CmeModel
from .dynamics import (
    EnvelopeState,
    GpState,
    assemble_uapp,
    envelope_grid_for,
    error_scaling_study,
    evolve_cme,
    evolve_gp,
    periodic_box,
)
from .errors import ConfigError, NumericalError, ResolutionError, StageError
from .grid import UniformGrid, VectorField
from .io import RunConfig, read_field, write_csv, write_field
from .nls_seed import build_cme_ansatz, continue_anisotropy, effective_nls_coeffs, shoot_radial
from .petviashvili import SolitonSolution, continue_in_omega, solve_resolved
from .pipeline import _read_sidecar, build_carriers, build_perturbation, build_potential, build_sigma, run_pipeline

LOGGER = logging.getLogger("gapsolitons")



def _vector(text):
    """Float list from ``"a,b"``; combined with ``nargs="+"`` and :func:`_flat`."""
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from exc


def _flat(v):
    return None if v is None else [x for part in v for x in part]


def _config(args):
    return RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig.defaults()


def _emit_csv(path, header, rows):
    if path:
        write_csv(path, header, rows)
    else:
        import csv

        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows(rows)


def _emit_text(path, text):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_edge(args, model):
    if getattr(args, "edge", None):
        return disp.edge_from_dict(json.loads(Path(args.edge).read_text()))
    if args.band is None or args.k0 is None:
        raise ConfigError("give --edge FILE or both --band and --k0")
    return disp.band_edge(model, args.band, _flat(args.k0))


# ---------------------------------------------------------------------------
# subcommands


def cmd_bands(args):
    cfg = _config(args)
    pot = build_potential(cfg)
    ks = [_flat(k) for k in args.k] if args.k else [[float(x) for x in k] for _, k in cfg["problem"]["carriers"]]
    if not ks:
        raise ConfigError("no k-points given (--k or [problem] carriers)")
    cutoff = args.cutoff or cfg["bloch"]["cutoff"]
    n = args.bands or cfg["bloch"]["bands"]
    w = band_structure(pot, np.array(ks), cutoff, n)
    d = len(ks[0])
    _emit_csv(args.out, [f"k{i + 1}" for i in range(d)] + [f"omega_{j + 1}" for j in range(n)],
              [[*k, *row] for k, row in zip(ks, w)])


def cmd_coeffs(args):
    cfg = _config(args)
    carriers = build_carriers(cfg)
    model = CmeModel.from_carriers(carriers, build_perturbation(cfg), build_sigma(cfg),
                                   cfg["cme"]["quadrature_points"] or None)
    _emit_text(args.out, model.to_json())


def cmd_dispersion(args):
    model = CmeModel.load(args.model)
    axis = np.linspace(-args.radius, args.radius, args.points)
    Ks = np.stack(np.meshgrid(*([axis] * model.dim), indexing="ij"), axis=-1).reshape(-1, model.dim)
    w = np.linalg.eigvalsh(disp.symbol_batch(model, Ks))
    if args.velocity:
        w = w - (Ks @ np.asarray(_flat(args.velocity)))[:, None]
    header = [f"K{i + 1}" for i in range(model.dim)] + [f"Omega_{j + 1}" for j in range(model.n_modes)]
    _emit_csv(args.out, header, np.hstack([Ks, w]).tolist())


def _gap_common(args, velocity=None):
    model = CmeModel.load(args.model)
    window = tuple(_flat(args.window))
    if len(window) != 2 or not window[0] < window[1]:
        raise ConfigError("--window needs LO,HI with LO < HI")
    if velocity is None:
        rep = disp.scan_gap(model, window, args.radius, args.h_k, args.h_omega)
    else:
        rep = disp.moving_frame_scan(model, velocity, window, args.radius, args.h_k, args.h_omega)
    _emit_text(args.out, rep.to_text())


def cmd_gap(args):
    _gap_common(args)


def cmd_moving_gap(args):
    _gap_common(args, _flat(args.velocity))


def cmd_edge(args):
    model = CmeModel.load(args.model)
    if args.band is None or args.k0 is None:
        rep = disp.scan_gap(model, tuple(_flat(args.window)))
        if not rep.gaps:
            raise NumericalError("no gap found; give --band and --k0")
        gap = max(rep.gaps, key=lambda g: g[1] - g[0])
        band, K0, _ = disp.locate_band_edge(model, gap, args.side)
    else:
        band, K0 = args.band, _flat(args.k0)
    edge = disp.band_edge(model, band, K0, h=args.h)
    _emit_text(args.out, json.dumps(disp.edge_to_dict(edge), indent=2) + "\n")


def cmd_nls_seed(args):
    model = CmeModel.load(args.model)
    edge = _load_edge(args, model)
    problem = effective_nls_coeffs(model, edge, args.lam)
    profile = shoot_radial(problem)
    if args.profile:
        write_csv(args.profile, ["rho", "C"], zip(profile.rho, profile.values))
    C = profile if problem.is_isotropic else continue_anisotropy(profile, problem)
    grid = UniformGrid.centered(args.half_width, args.points, model.dim)
    seed = build_cme_ansatz(C, edge, args.epsilon, grid)
    write_field(args.out, seed)
    print(f"Omega = {edge.omega_star + args.epsilon**2 * args.lam!r}")
    print(f"Gamma = {problem.gamma!r}\nmu = {problem.mu!r}\nC0 = {profile.amplitude!r}")


def _solver_opts(args):
    return {"tol_update": args.tol_update, "max_iter": args.max_iter}


def _write_solution(path, sol):
    write_field(path, sol.field)
    Path(str(path) + ".txt").write_text(sol.to_text())


def cmd_soliton(args):
    model = CmeModel.load(args.model)
    seed = read_field(args.seed_file)
    sol, _ = solve_resolved(model, args.omega, seed, args.tol_residual, args.max_points, **_solver_opts(args))
    _write_solution(args.out, sol)
    sys.stdout.write(sol.to_text())


def cmd_continue(args):
    model = CmeModel.load(args.model)
    field_ = read_field(args.start)
    meta = _read_sidecar(args.start + ".txt") if Path(args.start + ".txt").exists() else {}
    omega0 = args.omega if args.omega is not None else float(meta.get("omega", "nan"))
    if not np.isfinite(omega0):
        raise ConfigError("starting Omega unknown: give --omega or keep the .txt sidecar next to the field")
    start, _ = solve_resolved(model, omega0, field_, args.tol_residual, args.max_points, **_solver_opts(args))
    br = continue_in_omega(model, start, args.to, d_omega=args.step, d_omega_min=args.step_min,
                           max_points=args.max_points, tol_residual=args.tol_residual, **_solver_opts(args))
    header, rows = br.to_csv_rows()
    if args.branch:
        write_csv(args.branch, header, rows)
    _write_solution(args.out, br.final)
    if not br.completed:
        raise NumericalError(br.message)


def cmd_evolve_cme(args):
    model = CmeModel.load(args.model)
    A = read_field(args.input)
    out = evolve_cme(EnvelopeState(A, 0.0, model), args.dt, args.T)
    write_field(args.out, out.field)
    print(f"T = {out.T!r}\nnorm = {out.norm()!r}\ntail = {out.tail()!r}")


def _gaussian(n, width):
    """``n`` equal envelopes ``exp(-|X|^2 / width^2)``."""
    def init(X):
        r2 = sum(x**2 for x in X)
        return [np.exp(-r2 / width**2)] * n

    return init


def cmd_evolve_gp(args):
    cfg = _config(args)
    dyn = cfg["dynamics"]
    eps = args.epsilon or cfg["problem"]["epsilon"]
    carriers = build_carriers(cfg)
    fast = periodic_box(dyn["cells"], dyn["points_per_cell"], carriers.dim)
    slow = envelope_grid_for(fast, eps, 1)
    init = _gaussian(len(carriers.modes), dyn["envelope_width"])
    A0 = EnvelopeState(VectorField(np.asarray(init(slow.mesh()), dtype=complex), slow), 0.0, None)
    u0 = assemble_uapp(carriers, A0, eps, fast)
    st = GpState(u0, fast, 0.0, eps, build_potential(cfg), build_perturbation(cfg), build_sigma(cfg))
    m0 = st.mass()
    out = evolve_gp(st, args.dt or dyn["dt_gp"], args.t)
    write_field(args.out, VectorField(out.u[None], fast))
    print(f"t = {out.t!r}\nmass = {out.mass()!r}\nmass_drift = {abs(out.mass() - m0) / m0!r}")


def cmd_validate_scaling(args):
    cfg = _config(args)
    dyn = cfg["dynamics"]
    eps_list = _flat(args.epsilons) if args.epsilons else list(dyn["epsilons"])
    T0 = args.T0 or dyn["t0"]
    carriers = build_carriers(cfg)
    model = CmeModel.from_carriers(carriers, build_perturbation(cfg), build_sigma(cfg))
    init = _gaussian(len(carriers.modes), dyn["envelope_width"])
    res = error_scaling_study(carriers, model, init, eps_list, T0, build_potential(cfg),
                              build_perturbation(cfg), build_sigma(cfg), cells=dyn["cells"],
                              points_per_cell=dyn["points_per_cell"], dt_gp=dyn["dt_gp"], dt_cme=dyn["dt_cme"])
    header, rows = res.to_csv_rows()
    _emit_csv(args.out, header, rows)
    print(f"slope = {res.slope!r}", file=sys.stderr)
    for e in res.excluded:
        print(f"excluded eps={e['epsilon']}: {e['reason']}", file=sys.stderr)
    if len(res.runs) < 2:
        raise NumericalError("fewer than two valid runs; no slope")


def cmd_pipeline(args):
    cfg = _config(args)
    res = run_pipeline(cfg, args.out)
    for name, h in sorted(res.artifacts.items()):
        print(f"{h}  {name}")


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="gapsolitons", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        s = sub.add_parser(name, help=help_)
        s.set_defaults(func=func)
        return s

    s = add("bands", cmd_bands, "Bloch band structure at given k-points (CSV)")
    s.add_argument("--config")
    s.add_argument("--k", action="append", nargs="+", type=_vector, metavar="K",
                   help="k-point components (repeatable); default: configured carriers")
    s.add_argument("--cutoff", type=int)
    s.add_argument("--bands", type=int)
    s.add_argument("--out")

    s = add("coeffs", cmd_coeffs, "CME coefficients for the configured carriers (model JSON)")
    s.add_argument("--config", required=True)
    s.add_argument("--out")

    s = add("dispersion", cmd_dispersion, "dispersion relation on a K-grid (CSV)")
    s.add_argument("--model", required=True)
    s.add_argument("--radius", type=float, default=5.0)
    s.add_argument("--points", type=int, default=101)
    s.add_argument("--velocity", nargs="+", type=_vector, help="moving-frame velocity components")
    s.add_argument("--out")

    for name, func, help_ in (("gap", cmd_gap, "spectral gap scan"),
                              ("moving-gap", cmd_moving_gap, "gap scan of the moving-frame dispersion")):
        s = add(name, func, help_)
        s.add_argument("--model", required=True)
        s.add_argument("--window", nargs="+", type=_vector, default=[[-10.0, 10.0]], metavar="LO,HI")
        s.add_argument("--radius", type=float, default=40.0)
        s.add_argument("--h-k", type=float, default=0.05)
        s.add_argument("--h-omega", type=float, default=1e-2)
        if name == "moving-gap":
            s.add_argument("--velocity", nargs="+", type=_vector, required=True)
        s.add_argument("--out")

    s = add("edge", cmd_edge, "band-edge data (JSON)")
    s.add_argument("--model", required=True)
    s.add_argument("--band", type=int)
    s.add_argument("--k0", nargs="+", type=_vector)
    s.add_argument("--window", nargs="+", type=_vector, default=[[-10.0, 10.0]], metavar="LO,HI")
    s.add_argument("--side", default="lower", choices=("lower", "upper"))
    s.add_argument("--h", type=float, default=1e-3)
    s.add_argument("--out")

    s = add("nls-seed", cmd_nls_seed, "effective NLS ground state and CME ansatz field")
    s.add_argument("--model", required=True)
    s.add_argument("--edge")
    s.add_argument("--band", type=int)
    s.add_argument("--k0", nargs="+", type=_vector)
    s.add_argument("--lambda", dest="lam", type=float, default=1.0)
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--half-width", type=float, default=60.0)
    s.add_argument("--points", type=int, default=256)
    s.add_argument("--profile", help="radial profile CSV")
    s.add_argument("--out", required=True)

    def solver_args(s):
        s.add_argument("--tol-update", type=float, default=1e-10)
        s.add_argument("--tol-residual", type=float, default=1e-8)
        s.add_argument("--max-iter", type=int, default=1000)
        s.add_argument("--max-points", type=int, default=1024)

    s = add("soliton", cmd_soliton, "Petviashvili solve of the stationary CME")
    s.add_argument("--model", required=True)
    s.add_argument("--omega", type=float, required=True)
    s.add_argument("--seed-file", required=True)
    s.add_argument("--out", required=True)
    solver_args(s)

    s = add("continue", cmd_continue, "continuation of a soliton in Omega")
    s.add_argument("--model", required=True)
    s.add_argument("--from", dest="start", required=True, help="starting field (with .txt sidecar)")
    s.add_argument("--omega", type=float, help="Omega of the starting field")
    s.add_argument("--to", type=float, required=True)
    s.add_argument("--step", type=float, default=1e-2)
    s.add_argument("--step-min", type=float, default=1e-4)
    s.add_argument("--branch", help="branch summary CSV")
    s.add_argument("--out", required=True)
    solver_args(s)

    s = add("evolve-cme", cmd_evolve_cme, "time evolution of the CME")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--out", required=True)

    s = add("evolve-gp", cmd_evolve_gp, "GP evolution from the CME approximation with Gaussian envelopes")
    s.add_argument("--config", required=True)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--out", required=True)

    s = add("validate-scaling", cmd_validate_scaling, "GP vs CME approximation error scaling in eps")
    s.add_argument("--config", required=True)
    s.add_argument("--epsilons", nargs="+", type=_vector)
    s.add_argument("--T0", type=float)
    s.add_argument("--out")

    s = add("pipeline", cmd_pipeline, "bloch -> cme -> gap -> edge -> nls -> soliton -> continuation")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (default: [pipeline] output)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResolutionError as exc:
        print(f"resolution error: {exc}", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
