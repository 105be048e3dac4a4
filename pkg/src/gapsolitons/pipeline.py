"""End-to-end construction of a gap soliton from a run configuration.

Stages: ``bloch`` (carrier Bloch waves), ``cme`` (coefficients), ``gap``
(spectral gap scan), ``edge`` (band-edge data), ``nls`` (effective NLS seed),
``soliton`` (Petviashvili solve at ``Omega_* + eps^2 lam``) and
``continuation`` (branch to the target ``Omega``).  A stage left out of
``[pipeline] stages`` is replaced by its artifact, read from the output
directory or from the file named in its config section.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dispersion as disp
from .bloch import PerturbationPotential, PeriodicPotential
from .cme import CarrierSet, CmeModel
from .errors import ConfigError, GapSolitonError, NumericalError, ResolutionError, StageError
from .grid import UniformGrid
from .io import RunConfig, read_field, sha256, write_csv, write_field
from .nls_seed import build_cme_ansatz, continue_anisotropy, effective_nls_coeffs, shoot_radial
from .petviashvili import SolitonSolution, continue_in_omega, petviashvili_solve, solve_resolved

LOGGER = logging.getLogger(__name__)

STAGES = ("bloch", "cme", "gap", "edge", "nls", "soliton", "continuation")


def build_potential(cfg):
    p = cfg["problem"]
    if p["potential_file"]:
        try:
            return PeriodicPotential.from_text(Path(p["potential_file"]).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read potential file {p['potential_file']}: {exc}") from exc
    name = p["potential"]
    if name == "cosine_product":
        return PeriodicPotential.cosine_product(p["dim"], p["potential_amplitude"])
    if name == "cosine_sum":
        return PeriodicPotential.cosine_sum([p["potential_amplitude"]] * p["dim"])
    if name == "zero":
        return PeriodicPotential.zero(p["dim"])
    raise ConfigError(f"unknown potential {name!r} (cosine_product, cosine_sum, zero or potential_file)")


def build_perturbation(cfg):
    p = cfg["problem"]
    if not p["perturbation"]:
        return PerturbationPotential.zero(p["dim"])
    return PerturbationPotential.cosine_terms(list(p["perturbation"]), dim=p["dim"])


def build_sigma(cfg):
    p = cfg["problem"]
    return PeriodicPotential.constant(p["sigma"], p["dim"])


def build_carriers(cfg, potential=None):
    p = cfg["problem"]
    if not p["carriers"]:
        raise ConfigError("[problem] carriers is empty; at least one carrier is needed")
    potential = build_potential(cfg) if potential is None else potential
    specs = [(band, k) for band, k in p["carriers"]]
    return CarrierSet.from_bloch(potential, specs, cfg["bloch"]["cutoff"], tol_omega=cfg["bloch"]["tol_omega"])


@dataclass
class PipelineResult:
    output: Path
    artifacts: dict = field(default_factory=dict)
    model: CmeModel | None = None
    gap: object | None = None
    edge: object | None = None
    soliton: SolitonSolution | None = None
    branch: object | None = None


class _Runner:
    def __init__(self, cfg, output):
        self.cfg = cfg
        self.out = Path(output)
        self.out.mkdir(parents=True, exist_ok=True)
        self.result = PipelineResult(self.out)
        self.stages = tuple(cfg["pipeline"]["stages"])
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown pipeline stage(s): {', '.join(sorted(unknown))}")

    def path(self, name):
        return self.out / name

    def record(self, name):
        self.result.artifacts[name] = sha256(self.path(name))

    def need(self, stage, path):
        path = Path(path)
        if not path.exists():
            raise StageError(stage, f"stage '{stage}' skipped but its artifact {path} does not exist", exit_code=2)
        return path

    def run(self):
        (self.out / "config.ini").write_text(self.cfg.to_text())
        self.record("config.ini")
        for stage in STAGES:
            try:
                getattr(self, f"stage_{stage}")(stage in self.stages)
            except StageError:
                raise
            except ConfigError as exc:
                raise StageError(stage, str(exc), exit_code=2) from exc
            except ResolutionError as exc:
                raise StageError(stage, str(exc), exit_code=4) from exc
            except (NumericalError, GapSolitonError, np.linalg.LinAlgError) as exc:
                raise StageError(stage, str(exc), exit_code=3) from exc
        lines = [f"{h}  {name}" for name, h in sorted(self.result.artifacts.items())]
        (self.out / "manifest.txt").write_text("\n".join(lines) + "\n")
        return self.result

    # stages ---------------------------------------------------------------

    def stage_bloch(self, active):
        if not active:
            return
        if self.cfg["cme"]["model_file"] and not self.cfg["problem"]["carriers"]:
            # hand-authored model, nothing to tabulate
            return
        carriers = build_carriers(self.cfg)
        self._carriers = carriers
        d = carriers.dim
        header = ["carrier", "band"] + [f"k{i + 1}" for i in range(d)] + ["omega"] + [f"vg{i + 1}" for i in range(d)]
        rows = []
        for i, (m, v) in enumerate(zip(carriers.modes, carriers.group_velocities())):
            rows.append([i + 1, m.band, *m.k, m.omega, *v])
        write_csv(self.path("carriers.csv"), header, rows)
        self.record("carriers.csv")

    def stage_cme(self, active):
        if not active or self.cfg["cme"]["model_file"]:
            src = self.cfg["cme"]["model_file"] or self.path("model.json")
            self.result.model = CmeModel.load(self.need("cme", src))
            return
        carriers = getattr(self, "_carriers", None) or build_carriers(self.cfg)
        m = self.cfg["cme"]["quadrature_points"] or None
        model = CmeModel.from_carriers(carriers, build_perturbation(self.cfg), build_sigma(self.cfg), m)
        model.save(self.path("model.json"))
        self.record("model.json")
        self.result.model = model

    def stage_gap(self, active):
        if not active:
            p = self.path("gap.json")
            if p.exists():
                self.result.gap = disp.gap_report_from_dict(json.loads(p.read_text()))
            return
        c = self.cfg["dispersion"]
        rep = disp.scan_gap(self.result.model, c["window"], c["radius"], c["h_k"], c["h_omega"])
        self.path("gap.json").write_text(json.dumps(disp.gap_report_to_dict(rep), indent=2))
        self.record("gap.json")
        self.result.gap = rep
        if not rep.gaps:
            raise NumericalError("no spectral gap found in the scan window")

    def _chosen_gap(self):
        rep = self.result.gap
        if rep is None or not rep.gaps:
            raise ConfigError("edge location needs a gap report (run the 'gap' stage)")
        target = self.cfg["continuation"]["target"]
        if target:
            g = rep.gap_containing(float(target))
            if g is None:
                raise ConfigError(f"continuation target {target} is not inside a scanned gap")
            return g
        return max(rep.gaps, key=lambda g: g[1] - g[0])

    def stage_edge(self, active):
        if not active:
            if {"nls", "soliton"} & set(self.stages):
                p = self.need("edge", self.path("edge.json"))
                self.result.edge = disp.edge_from_dict(json.loads(p.read_text()))
            return
        c = self.cfg["edge"]
        model = self.result.model
        if c["band"] and c["k0"]:
            band, K0 = c["band"], np.asarray(c["k0"], dtype=float)
        else:
            band, K0, _ = disp.locate_band_edge(model, self._chosen_gap(), c["side"],
                                                radius=min(self.cfg["dispersion"]["radius"], 10.0))
        edge = disp.band_edge(model, band, K0, h=c["h"])
        self.path("edge.json").write_text(json.dumps(disp.edge_to_dict(edge), indent=2))
        self.record("edge.json")
        self.result.edge = edge

    def _omega_seed(self):
        lam = self.cfg["nls"]["lambda"]
        eps = self.cfg["problem"]["epsilon"]
        return self.result.edge.omega_star + eps**2 * lam

    def stage_nls(self, active):
        if not active:
            src = self.cfg["soliton"]["seed_file"] or self.path("seed.bin")
            if "soliton" in self.stages:
                self._seed = read_field(self.need("nls", src))
            return
        c = self.cfg["nls"]
        problem = effective_nls_coeffs(self.result.model, self.result.edge, c["lambda"])
        profile = shoot_radial(problem)
        write_csv(self.path("profile.csv"), ["rho", "C"], zip(profile.rho, profile.values))
        self.record("profile.csv")
        C = profile if problem.is_isotropic else continue_anisotropy(profile, problem, steps=c["steps"], tol=c["tol"])
        s = self.cfg["soliton"]
        grid = UniformGrid.centered(s["half_width"], s["points"], self.result.model.dim)
        seed = build_cme_ansatz(C, self.result.edge, self.cfg["problem"]["epsilon"], grid)
        write_field(self.path("seed.bin"), seed)
        self.record("seed.bin")
        (self.path("nls.txt")).write_text(
            f"lambda = {problem.lam!r}\nmu = {problem.mu!r}\nGamma = {problem.gamma!r}\n"
            f"Gamma_imag = {problem.gamma_imag!r}\nC0 = {profile.amplitude!r}\n"
        )
        self.record("nls.txt")
        self._seed = seed

    def _solver_opts(self):
        s = self.cfg["soliton"]
        return {"tol_update": s["tol_update"], "max_iter": s["max_iter"], "dist_min": s["dist_min"]}

    def stage_soliton(self, active):
        if not active:
            if "continuation" in self.stages:
                field_ = read_field(self.need("soliton", self.path("soliton.bin")))
                meta = _read_sidecar(self.need("soliton", self.path("soliton.txt")))
                self.result.soliton = SolitonSolution(float(meta["omega"]), field_, float(meta["residual"]),
                                                      int(meta["iterations"]), float(meta["s_factor"]))
            return
        omega = self._omega_seed()
        gap = self.result.gap.gap_containing(omega) if self.result.gap is not None else None
        if self.result.gap is not None and gap is None:
            raise ConfigError(f"Omega = {omega:g} is not inside a scanned gap; check the sign of lambda")
        sol, _ = solve_resolved(self.result.model, omega, self._seed, self.cfg["soliton"]["tol_residual"],
                                self.cfg["continuation"]["max_points"], **self._solver_opts())
        write_field(self.path("soliton.bin"), sol.field)
        self.path("soliton.txt").write_text(sol.to_text())
        self.record("soliton.bin")
        self.record("soliton.txt")
        self.result.soliton = sol

    def stage_continuation(self, active):
        c = self.cfg["continuation"]
        if not active or not c["target"]:
            return
        br = continue_in_omega(self.result.model, self.result.soliton, float(c["target"]), d_omega=c["step"],
                               d_omega_min=c["step_min"], max_points=c["max_points"],
                               tol_residual=self.cfg["soliton"]["tol_residual"], **self._solver_opts())
        header, rows = br.to_csv_rows()
        write_csv(self.path("branch.csv"), header, rows)
        self.record("branch.csv")
        write_field(self.path("final.bin"), br.final.field)
        self.path("final.txt").write_text(br.final.to_text())
        self.record("final.bin")
        self.record("final.txt")
        self.result.branch = br
        if not br.completed:
            raise NumericalError(br.message)


def _read_sidecar(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def run_pipeline(config, output=None):
    """Run the configured stages; returns a :class:`PipelineResult`.

    Raises :class:`StageError` naming the failing stage.
    """
    cfg = config if isinstance(config, RunConfig) else RunConfig.load(config)
    out = output or cfg["pipeline"]["output"]
    return _Runner(cfg, out).run()
