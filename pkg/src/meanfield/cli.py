"""Command-line front end.

Subcommands::

    meanfield run    --config CFG [--out DIR]
    meanfield steady --config CFG (--mass M | --from-u0) [--out DIR]
    meanfield check  --config CFG STATE.json [TRAJECTORY.csv]
    meanfield sweep  --config CFG --rho-list=R1,R2,... [--out DIR]

Exit codes: 0 success/converged, 1 config or parse error, 2 horizon reached,
3 step failure, 4 Newton non-convergence, 5 a check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .energy import ProblemData
from .errors import CompatibilityError, DomainMismatchError, FitError, GraphError, PhiAdmissibilityError
from .flow import FlowProblem, TrajectoryRecord, integrate
from .graph import VertexFunction, WeightedGraph, as_values
from .phi import Phi, phi_from_dict
from .steady import fit_lojasiewicz, kazdan_warner_residual, lojasiewicz_fit, newton_solve

EXIT_OK, EXIT_CONFIG, EXIT_HORIZON, EXIT_STEP_FAILURE, EXIT_NEWTON, EXIT_CHECK = 0, 1, 2, 3, 4, 5
STATUS_EXIT = {"converged": EXIT_OK, "horizon_reached": EXIT_HORIZON, "step_failure": EXIT_STEP_FAILURE}
TRAJECTORY_HEADER = ["t", "J", "residual_inf", "mass"]
SWEEP_HEADER = ["rho", "status", "t_final", "residual_inf", "j_final", "theta_fit"]
SOLVER_FIELDS = {"tol_residual": float, "t_max": float, "dt_init": float,
                 "mass_drift_tol": float, "record_every": int, "rk_tol": float}
ENERGY_SLACK = 1e-10


class ConfigError(Exception):
    """Invalid run configuration; the message names the offending field."""


def fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass
class RunConfig:
    graph_path: Path
    phi: dict
    rho: float
    q_spec: object = "uniform"
    u0_spec: object = "zero"
    normalize_q: bool = False
    solver: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path, graph_override=None, normalize_q=False, seed=None) -> RunConfig:
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be a JSON object")
        known = {"graph_path", "phi", "rho", "q_spec", "u0_spec", "normalize_q", *SOLVER_FIELDS}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown config field")
        for key in ("graph_path", "phi", "rho"):
            if key not in raw and not (key == "graph_path" and graph_override):
                raise ConfigError(f"{key}: required config field is missing")

        gp = Path(graph_override) if graph_override else Path(raw["graph_path"])
        if not gp.is_absolute() and not graph_override:
            gp = path.parent / gp
        try:
            rho = float(raw["rho"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("rho: must be a real number") from exc
        if not math.isfinite(rho):
            raise ConfigError("rho: must be finite")
        solver = {}
        for key, typ in SOLVER_FIELDS.items():
            if key in raw:
                try:
                    solver[key] = typ(raw[key])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{key}: expected {typ.__name__}") from exc
                if not solver[key] > 0:
                    raise ConfigError(f"{key}: must be positive")
        u0_spec = raw.get("u0_spec", "zero")
        if seed is not None:
            if not (isinstance(u0_spec, dict) and "random" in u0_spec):
                raise ConfigError("u0_spec: --seed requires a random u0_spec")
            u0_spec = {"random": {**u0_spec["random"], "seed": int(seed)}}
        return cls(gp, raw["phi"], rho, raw.get("q_spec", "uniform"), u0_spec,
                   bool(raw.get("normalize_q", False)) or normalize_q, solver)

    # -- resolution into solver objects --------------------------------

    def graph(self) -> WeightedGraph:
        try:
            return WeightedGraph.load(self.graph_path)
        except OSError as exc:
            raise ConfigError(f"graph_path: cannot read {self.graph_path}: {exc.strerror}") from exc
        except (json.JSONDecodeError, GraphError) as exc:
            raise ConfigError(f"graph_path: {exc}") from exc

    def make_phi(self) -> Phi:
        try:
            return phi_from_dict(self.phi)
        except (PhiAdmissibilityError, ValueError) as exc:
            raise ConfigError(f"phi: {exc}") from exc

    def problem(self, g: WeightedGraph, rho: float | None = None) -> ProblemData:
        rho = self.rho if rho is None else rho
        phi = self.make_phi()
        spec = self.q_spec
        try:
            if spec == "uniform" or spec == {"uniform": True}:
                return ProblemData.uniform(g, rho, phi)
            if isinstance(spec, dict) and set(spec) == {"normalize"}:
                return ProblemData.build(g, rho, spec["normalize"], phi, normalize=True)
            if isinstance(spec, dict):
                return ProblemData.build(g, rho, spec, phi, normalize=self.normalize_q)
        except CompatibilityError as exc:
            raise ConfigError(f"q_spec: {exc} (set normalize_q or use --normalize-q)") from exc
        except (DomainMismatchError, TypeError, ValueError) as exc:
            raise ConfigError(f"q_spec: {exc}") from exc
        raise ConfigError("q_spec: expected \"uniform\", a vertex function, or {\"normalize\": ...}")

    def sweep_problem(self, g: WeightedGraph, rho: float) -> ProblemData:
        """Problem at another rho: uniform Q follows rho, explicit Q is shifted."""
        if self.q_spec == "uniform" or self.q_spec == {"uniform": True}:
            return self.problem(g, rho)
        base = self.problem(g)
        return ProblemData.build(g, rho, base.Q, base.phi, normalize=True)

    def seed(self) -> int | None:
        if isinstance(self.u0_spec, dict) and "random" in self.u0_spec:
            return int(self.u0_spec["random"].get("seed", 0))
        return None

    def u0(self, g: WeightedGraph) -> np.ndarray:
        spec = self.u0_spec
        if spec == "zero":
            return np.zeros(g.n)
        if isinstance(spec, dict) and set(spec) == {"random"}:
            opts = spec["random"]
            try:
                seed = int(opts.get("seed", 0))
                scale = float(opts.get("scale", 1.0))
            except (TypeError, ValueError, AttributeError) as exc:
                raise ConfigError("u0_spec: random needs integer seed and real scale") from exc
            rng = np.random.Generator(np.random.PCG64(seed))
            return rng.uniform(-scale, scale, size=g.n)
        if isinstance(spec, dict):
            try:
                return as_values(g, spec)
            except (DomainMismatchError, TypeError, ValueError) as exc:
                raise ConfigError(f"u0_spec: {exc}") from exc
        raise ConfigError("u0_spec: expected \"zero\", {\"random\": {...}}, or a vertex function")

    def flow_problem(self, data: ProblemData, u0: np.ndarray) -> FlowProblem:
        return FlowProblem(data, u0, **self.solver)


# -- output helpers ------------------------------------------------------

def trajectory_csv(traj: TrajectoryRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for s in traj.samples:
        w.writerow([fmt(s.t), fmt(s.j), fmt(s.residual_inf), fmt(s.mass)])
    return buf.getvalue()


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != TRAJECTORY_HEADER:
        raise ConfigError(f"trajectory: header must be {','.join(TRAJECTORY_HEADER)}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, 4)
    except ValueError as exc:
        raise ConfigError(f"trajectory: {exc}") from exc
    return dict(zip(TRAJECTORY_HEADER, data.T))


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def state_json(traj: TrajectoryRecord, g: WeightedGraph, seed) -> dict:
    s = traj.final
    out = {
        "status": traj.status,
        "t_final": s.t,
        "u_infty": VertexFunction(g.vertices, s.u).to_dict(),
        "residual_inf": s.residual_inf,
        "mass": s.mass,
        "j_final": s.j,
        "seed": seed,
    }
    if traj.message:
        out["message"] = traj.message
    return out


# -- commands ------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = RunConfig.load(args.config, args.graph, args.normalize_q, args.seed)
    g = cfg.graph()
    data = cfg.problem(g)
    fp = _flow_problem(cfg, data, cfg.u0(g))
    traj = integrate(fp)
    out = _outdir(args.out)
    (out / "trajectory.csv").write_text(trajectory_csv(traj))
    write_json(out / "state.json", state_json(traj, g, cfg.seed()))
    print(f"{traj.status}: t={fmt(traj.final.t)} residual_inf={traj.final.residual_inf:.3e}")
    return STATUS_EXIT[traj.status]


def cmd_steady(args) -> int:
    cfg = RunConfig.load(args.config, args.graph, args.normalize_q, args.seed)
    g = cfg.graph()
    data = cfg.problem(g)
    u0 = cfg.u0(g)
    if args.from_u0:
        target = data.mass(u0)
    else:
        target = args.mass
        if not (math.isfinite(target) and target > 0):
            raise ConfigError(f"--mass: must be positive, got {target!r}")
    res = newton_solve(data, target, u0)
    out = _outdir(args.out)
    write_json(out / "steady.json", {
        "converged": res.converged,
        "u_star": VertexFunction(g.vertices, res.u_star).to_dict(),
        "residual_inf": res.residual_inf,
        "mass_error": res.mass_error,
        "mass_target": target,
        "newton_iters": res.newton_iters,
        "jacobian_cond": res.jacobian_cond,
        "message": res.message,
    })
    print(f"converged={res.converged} residual_inf={res.residual_inf:.3e} iters={res.newton_iters}")
    return EXIT_OK if res.converged else EXIT_NEWTON


def cmd_check(args) -> int:
    cfg = RunConfig.load(args.config, args.graph, args.normalize_q, args.seed)
    g = cfg.graph()
    data = cfg.problem(g)
    fp = _flow_problem(cfg, data, np.zeros(g.n))
    try:
        state = json.loads(Path(args.state).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"state: cannot parse {args.state}: {exc}") from exc
    key = "u_infty" if "u_infty" in state else "u_star" if "u_star" in state else None
    if key is None:
        raise ConfigError("state: expected a 'u_infty' or 'u_star' field")
    try:
        u = as_values(g, state[key])
    except (DomainMismatchError, TypeError, ValueError) as exc:
        raise ConfigError(f"state.{key}: {exc}") from exc

    M = data.field(u)
    res_inf = float(np.max(np.abs(M)))
    kw = kazdan_warner_residual(data, u)
    m = data.mass(u)
    j = data.energy(u)
    checks = []  # (name, passed | None, detail)
    checks.append(("residual_inf", res_inf < fp.tol_residual, f"{res_inf:.3e} (tol {fp.tol_residual:g})"))
    checks.append(("kazdan_warner", kw <= fp.tol_residual, f"{kw:.3e}"))
    ref_mass = state.get("mass", state.get("mass_target"))
    if ref_mass is not None:
        drift = abs(m - float(ref_mass)) / float(ref_mass)
        checks.append(("mass", drift <= fp.mass_drift_tol, f"{m!r} (relative drift {drift:.2e})"))
    checks.append(("J", None, repr(j)))

    if args.trajectory:
        tr = read_trajectory_csv(args.trajectory)
        dj = np.diff(tr["J"])
        worst = float(dj.max()) if dj.size else 0.0
        checks.append(("monotone_J", worst <= ENERGY_SLACK, f"max increase {worst:.3e}"))
        if tr["mass"].size:
            m0 = tr["mass"][0]
            drift = float(np.max(np.abs(tr["mass"] - m0)) / m0)
            checks.append(("mass_conserved", drift <= fp.mass_drift_tol, f"max relative drift {drift:.2e}"))
        try:
            # the CSV carries ||M||_inf; equivalent to the L^2 norm up to constants
            fit = fit_lojasiewicz(tr["J"], tr["residual_inf"], j)
        except FitError as exc:
            checks.append(("lojasiewicz", None, f"skipped: {exc}"))
        else:
            ok = 0 < fit.theta <= 0.5 and fit.fit_quality == 1.0
            checks.append(("lojasiewicz", ok,
                           f"theta={fit.theta:.6g} C={fit.c:.6g} fit_quality={fit.fit_quality:g}"))

    failed = False
    for name, ok, detail in checks:
        verdict = "info" if ok is None else "PASS" if ok else "FAIL"
        failed |= ok is False
        print(f"{name:15s} {verdict:4s} {detail}")
    return EXIT_CHECK if failed else EXIT_OK


def _sweep_one(cfg: RunConfig, g: WeightedGraph, u0: np.ndarray, rho: float) -> list[str]:
    data = cfg.sweep_problem(g, rho)
    traj = integrate(_flow_problem(cfg, data, u0))
    s = traj.final
    theta = math.nan
    if traj.converged:
        try:
            theta = lojasiewicz_fit(traj, s.j).theta
        except FitError:
            pass
    return [fmt(rho), traj.status, fmt(s.t), fmt(s.residual_inf), fmt(s.j), fmt(theta)]


def cmd_sweep(args) -> int:
    cfg = RunConfig.load(args.config, args.graph, args.normalize_q, args.seed)
    try:
        rhos = [float(x) for x in args.rho_list.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"--rho-list: {exc}") from exc
    if not rhos or not all(math.isfinite(r) for r in rhos):
        raise ConfigError("--rho-list: need a non-empty comma-separated list of reals")
    g = cfg.graph()
    u0 = cfg.u0(g)
    cfg.problem(g)  # validate q_spec once up front
    with ThreadPoolExecutor(max_workers=min(len(rhos), 8)) as pool:
        rows = list(pool.map(lambda r: _sweep_one(cfg, g, u0, r), rhos))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    w.writerows(rows)
    out = _outdir(args.out)
    (out / "sweep.csv").write_text(buf.getvalue())
    statuses = [r[1] for r in rows]
    print(buf.getvalue(), end="")
    if all(s == "converged" for s in statuses):
        return EXIT_OK
    return EXIT_STEP_FAILURE if "step_failure" in statuses else EXIT_HORIZON


def _flow_problem(cfg: RunConfig, data: ProblemData, u0) -> FlowProblem:
    try:
        return cfg.flow_problem(data, u0)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meanfield", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--graph", help="override graph_path from the config")
        p.add_argument("--seed", type=int, help="override the random u0 seed")
        p.add_argument("--normalize-q", action="store_true",
                       help="shift Q by a constant so that int Q dmu = rho")

    p = sub.add_parser("run", help="integrate the heat flow")
    common(p)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("steady", help="solve the mean field equation by Newton")
    common(p)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--mass", type=float, help="target mass int phi(u) dmu")
    grp.add_argument("--from-u0", action="store_true", help="use the mass of u0")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("check", help="verify a state (and optionally its trajectory)")
    common(p)
    p.add_argument("state", help="state.json from run, or steady.json")
    p.add_argument("trajectory", nargs="?", help="trajectory.csv from run")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="run one flow per rho")
    common(p)
    p.add_argument("--rho-list", required=True, help="comma-separated reals, e.g. --rho-list=-4,0,1,8")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
