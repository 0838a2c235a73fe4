"""Command-line orchestration: configuration, persistence layout, CSV/JSON
output.

Exit codes: 0 success, 1 numerical failure (named module error), 2 usage or
configuration error.  All floats are serialized with shortest round-trip
decimal representation, so outputs are byte-reproducible and checkpoints
round-trip exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import branch as branch_mod
from . import lyapunov as ly
from . import physical as phys
from . import spectrum1d as sp1
from . import stream as stream_mod
from . import strip as strip_mod
from .errors import (
    CheckpointFormatError,
    NoSecondaryBranchError,
    PreconditionError,
    WavebranchError,
)
from .vorticity import VorticitySpec

__all__ = ["RunConfig", "main"]

_ENV_OUT = "WAVEBRANCH_OUT"


@dataclass
class RunConfig:
    """Run configuration; round-trips losslessly through JSON."""

    omega: list = field(default_factory=lambda: [0.0])
    L: float | None = None  # None: 30 * d_-(R)
    nq: int = 301
    np: int = 41
    newton_tol: float = 1e-10
    max_newton_iters: int = 40
    ds: float = 0.002
    steps: int = 40
    ds_grow: float = 1.3
    ds_max_factor: float = 8.0
    margin_fraction: float = 1e-2
    nu0_grid_n: int = 1024
    out_dir: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.newton_tol <= 0 or self.ds <= 0 or self.margin_fraction <= 0:
            raise ValueError("tolerances and step sizes must be positive")
        if self.nq < 9 or self.np < 9:
            raise ValueError("grid counts below minimum (9)")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        return cls(**data)

    def resolved_out_dir(self) -> str:
        return self.out_dir or os.environ.get(_ENV_OUT, ".")


def _fmt(x) -> str:
    return repr(float(x))


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    for name in ("omega", "L", "nq", "np", "newton_tol", "ds", "steps",
                 "ds_grow", "ds_max_factor", "margin_fraction", "nu0_grid_n",
                 "out_dir", "seed"):
        val = getattr(args, name.replace("-", "_"), None)
        if val is not None:
            setattr(cfg, name, val)
    cfg.__post_init__()
    return cfg


def _spec_of(cfg: RunConfig) -> VorticitySpec:
    return VorticitySpec(cfg.omega)


def _grid_of(cfg: RunConfig, spec: VorticitySpec, R: float) -> strip_mod.StripGrid:
    if cfg.L is not None:
        return strip_mod.StripGrid(L=cfg.L, nq=cfg.nq, np=cfg.np)
    return strip_mod.default_grid(spec, R, nq=cfg.nq, npp=cfg.np)


def _cmd_stream(args) -> int:
    cfg = _load_config(args)
    spec = _spec_of(cfg)
    thetas = np.linspace(args.theta_min, args.theta_max, args.n)
    lines = ["theta,d,R,F,S"]
    for th in thetas:
        s = stream_mod.stream_at(spec, float(th), n_profile=17)
        lines.append(
            ",".join(_fmt(v) for v in (s.theta, s.depth, s.R, s.froude, s.flow_force))
        )
    out = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return 0


def _cmd_critical(args) -> int:
    cfg = _load_config(args)
    spec = _spec_of(cfg)
    ds = stream_mod.dispersion_summary(spec)
    F_c = stream_mod.froude_of_theta(spec, ds.theta_c)
    print(f"theta_c {_fmt(ds.theta_c)}")
    print(f"R_c {_fmt(ds.R_c)}")
    print(f"R_0 {'inf' if np.isinf(ds.R_0) else _fmt(ds.R_0)}")
    print(f"F(theta_c) {_fmt(F_c)}")
    return 0


def _cmd_spectrum1d(args) -> int:
    cfg = _load_config(args)
    spec = _spec_of(cfg)
    theta = stream_mod.solve_theta_for_R(spec, args.R, "supercritical")
    s = stream_mod.stream_at(spec, theta)
    problem = sp1.robin_problem(s, spec, grid_n=args.grid_n or cfg.nu0_grid_n)
    print(f"nu0 {_fmt(sp1.nu0(problem))}")
    print(f"rho0 {_fmt(problem.rho0)}")
    return 0


def _cmd_solve(args) -> int:
    cfg = _load_config(args)
    spec = _spec_of(cfg)
    grid = _grid_of(cfg, spec, args.R)
    guess = strip_mod.initial_guess(spec, args.R, grid)
    sol, info = strip_mod.newton_solve(
        guess, spec, tol=cfg.newton_tol, max_iter=cfg.max_newton_iters, return_info=True
    )
    profile = phys.reconstruct(sol, spec)
    defect = phys.verify_flow_force_selection(profile, spec)
    print(f"iterations {info.iterations}")
    print(f"residual_sup {_fmt(info.residual_sup)}")
    print(f"xi0 {_fmt(sol.xi[0])}")
    print(f"d_far {_fmt(profile.depth_far)}")
    print(f"flow_force {_fmt(profile.flow_force)}")
    print(f"flow_force_variation {_fmt(profile.flow_force_variation)}")
    print(f"selection_defect {_fmt(defect)}")
    if args.out:
        strip_mod.write_checkpoint(args.out, sol, spec)
        print(f"checkpoint {args.out}")
    if args.profile_out:
        with open(args.profile_out, "w") as fh:
            fh.write(phys.profile_csv(profile))
        print(f"profile {args.profile_out}")
    return 0


def _branch_csv_lines(points) -> list:
    header = (
        "t,R,xi0,mu0,mu1,nu0,max_surface_slope,surface_margin,bottom_margin,min_hp"
    )
    lines = [header]
    for p in points:
        d = p.diag
        mu0 = "nan" if p.mu0 is None else _fmt(p.mu0)
        lines.append(
            ",".join(
                [
                    _fmt(p.t),
                    _fmt(p.R),
                    _fmt(p.field.xi[0]),
                    mu0,
                    _fmt(p.mu1),
                    _fmt(p.nu0),
                    _fmt(d.max_surface_slope),
                    _fmt(d.surface_margin),
                    _fmt(d.bottom_margin),
                    _fmt(d.min_hp),
                ]
            )
        )
    return lines


def _cmd_continue(args) -> int:
    cfg = _load_config(args)
    spec = _spec_of(cfg)
    R0 = args.R_start
    grid = _grid_of(cfg, spec, R0)
    out_dir = args.out or cfg.resolved_out_dir()
    os.makedirs(out_dir, exist_ok=True)

    guess = strip_mod.initial_guess(spec, R0, grid)
    sol = strip_mod.newton_solve(guess, spec, tol=cfg.newton_tol, max_iter=cfg.max_newton_iters)
    start = branch_mod.branch_point_from_field(sol, spec, nu0_grid_n=cfg.nu0_grid_n)
    ctrl = branch_mod.StepControl(
        newton_tol=cfg.newton_tol,
        margin_fraction=cfg.margin_fraction,
        grow=cfg.ds_grow,
        ds_max_factor=cfg.ds_max_factor,
    )
    points, status = branch_mod.continue_branch(
        start, spec, steps=cfg.steps, ds=cfg.ds, ctrl=ctrl, nu0_grid_n=cfg.nu0_grid_n
    )
    for idx, p in enumerate(points):
        strip_mod.write_checkpoint(os.path.join(out_dir, f"point_{idx:04d}.txt"), p.field, spec)
    with open(os.path.join(out_dir, "branch.csv"), "w") as fh:
        fh.write("\n".join(_branch_csv_lines(points)) + "\n")
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        fh.write(cfg.to_json() + "\n")
    print(f"status {status}")
    print(f"accepted {len(points)}")
    print(f"out {out_dir}")
    return 0


def _load_branch_dir(dirpath: str):
    csv_path = os.path.join(dirpath, "branch.csv")
    if not os.path.exists(csv_path):
        raise CheckpointFormatError(f"{dirpath}: missing branch.csv")
    with open(csv_path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = {name: i for i, name in enumerate(header)}
    points = []
    spec = None
    for idx, row in enumerate(rows):
        path = os.path.join(dirpath, f"point_{idx:04d}.txt")
        fld, omega = strip_mod.read_checkpoint(path)
        spec = omega
        mu0 = float(row[cols["mu0"]])
        points.append(
            branch_mod.BranchPoint(
                field=fld,
                t=float(row[cols["t"]]),
                R=float(row[cols["R"]]),
                mu0=None if np.isnan(mu0) else mu0,
                mu1=float(row[cols["mu1"]]),
                nu0=float(row[cols["nu0"]]),
                diag=branch_mod.diagnostics_of(fld),
            )
        )
    return points, spec


def _cmd_pairs(args) -> int:
    cfg = _load_config(args)
    points, spec = _load_branch_dir(args.branch)
    events = branch_mod.detect_events(points)
    summary = [(p.t, p.R, p) for p in points]

    def resolve(Rv, ref):
        fld = ref.field.copy()
        theta = stream_mod.solve_theta_for_R(
            spec, Rv, "supercritical", summary=strip_mod.cached_summary(spec)
        )
        fld.h[-1, :] = stream_mod.stream_profile(spec, theta, fld.grid.p)
        fld.R = Rv
        fld.theta = theta
        return strip_mod.newton_solve(fld, spec, tol=cfg.newton_tol)

    pairs = phys.find_pairs(summary, events, n_r=args.n_r, resolve=resolve)
    payload = {
        "events": [
            {"kind": e.__class__.__name__, "t": getattr(e, "t", None)} for e in events
        ],
        "pairs": [
            {
                "t1": p.t1,
                "t2": p.t2,
                "R": p.R,
                "provenance": p.provenance,
                "distance": p.distance,
            }
            for p in pairs
        ],
    }
    out = args.out or os.path.join(args.branch, "pairs.json")
    with open(out, "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"pairs {len(pairs)}")
    print(f"out {out}")
    return 0


def _cmd_ls_reduce(args) -> int:
    cfg = _load_config(args)
    fld_a, spec = strip_mod.read_checkpoint(args.checkpoint_a)
    fld_b, _ = strip_mod.read_checkpoint(args.checkpoint_b)
    pa = branch_mod.branch_point_from_field(fld_a, spec, t=0.0, nu0_grid_n=cfg.nu0_grid_n)
    pb = branch_mod.branch_point_from_field(
        fld_b, spec, t=float(np.abs(fld_b.h - fld_a.h).max()), nu0_grid_n=cfg.nu0_grid_n
    )
    payload = {
        "mu1_a": pa.mu1,
        "mu1_b": pb.mu1,
        "nu0_a": pa.nu0,
        "nu0_b": pb.nu0,
    }
    sign_change = (
        pa.mu1 < pa.nu0 * (1 - 1e-9)
        and pb.mu1 < pb.nu0 * (1 - 1e-9)
        and pa.mu1 * pb.mu1 < 0
    )
    payload["crossing_bracketed"] = bool(sign_change)
    if not sign_change:
        payload["note"] = "no mu1 sign change strictly below nu0 between the checkpoints"
        out = args.out or "ls-reduce.json"
        with open(out, "w") as fh:
            json.dump(payload, fh, indent=2)
        print(json.dumps(payload))
        raise PreconditionError(payload["note"])
    pa.tangent_x, pa.tangent_lam = branch_mod.tangent(
        pa, pb, weight=fld_a.grid.dq * fld_a.grid.dp
    )
    pa.ds = pb.t - pa.t
    try:
        seed = ly.switch_branch((pa, pb), spec, newton_tol=cfg.newton_tol)
        payload["switched"] = True
        payload["seed_R"] = seed.R
        if args.out_checkpoint:
            strip_mod.write_checkpoint(args.out_checkpoint, seed, spec)
    except NoSecondaryBranchError as exc:
        payload["switched"] = False
        payload["note"] = str(exc)
    out = args.out or "ls-reduce.json"
    with open(out, "w") as fh:
        json.dump(payload, fh, indent=2)
    print(json.dumps(payload))
    return 0


def _cmd_model_bifurcate(args) -> int:
    if args.case not in ly.MODEL_GALLERY:
        raise PreconditionError(f"unknown model case {args.case!r}")
    fam = ly.MODEL_GALLERY[args.case]()
    lb = ly.local_branches(
        fam, s_max=args.s_max, lam_max=args.lam_max, ns=args.ns, nlam=args.nlam
    )
    payload = {
        "case": args.case,
        "m_estimate": lb.m_estimate,
        "mu_m": lb.mu_m,
        "certified": lb.certified,
        "curves": [
            {
                "side": c.side,
                "classification": c.classification,
                "partner": c.partner,
                "s": [float(v) for v in c.s],
                "lambda": [float(v) for v in c.lam],
            }
            for c in lb.curves
        ],
    }
    out = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out + "\n")
    else:
        print(out)
    return 0


def _taylor_spot_check(fld, spec, seed: int) -> float:
    """Directional-derivative defect of the Jacobian along one seeded smooth
    perturbation (eps = 1e-5)."""
    grid = fld.grid
    rng = np.random.default_rng(seed)
    qs, ps = np.meshgrid(grid.q, grid.p, indexing="ij")
    v = np.zeros((grid.nq, grid.np))
    for _ in range(3):
        v += rng.normal() * np.sin(rng.integers(1, 3) * np.pi * ps) * np.cos(
            rng.uniform(0.2, 0.8) * qs + rng.uniform(0, 2 * np.pi)
        )
    v[-1, :] = 0.0
    v[:, 0] = 0.0
    vec = v[: grid.nq - 1, 1:].ravel()
    vec /= np.linalg.norm(vec)
    J = strip_mod.assemble_jacobian(fld, spec)
    eps = 1e-5
    xp = strip_mod.unpack(fld, strip_mod.pack(fld) + eps * vec)
    xm = strip_mod.unpack(fld, strip_mod.pack(fld) - eps * vec)
    cd = (strip_mod.residual_vector(xp, spec) - strip_mod.residual_vector(xm, spec)) / (2 * eps)
    return float(np.abs(cd - J @ vec).max())


def _cmd_verify(args) -> int:
    cfg = _load_config(args)
    dirpath = args.dir
    failures = []
    names = sorted(
        n for n in os.listdir(dirpath) if n.startswith("point_") and n.endswith(".txt")
    )
    if not names:
        print(f"no checkpoints found in {dirpath}")
        return 2
    for name in names:
        path = os.path.join(dirpath, name)
        try:
            fld, spec = strip_mod.read_checkpoint(path)
        except CheckpointFormatError as exc:
            failures.append(f"{name}: {exc}")
            continue
        # byte round-trip
        tmp = path + ".rt"
        strip_mod.write_checkpoint(tmp, fld, spec)
        with open(path, "rb") as fa, open(tmp, "rb") as fb:
            identical = fa.read() == fb.read()
        os.unlink(tmp)
        if not identical:
            failures.append(f"{name}: round-trip not byte-identical")
            continue
        if (np.diff(fld.h, axis=1) <= 0).any():
            failures.append(f"{name}: h_p <= 0")
            continue
        theta_err = abs(stream_mod.R_of_theta(spec, fld.theta) - fld.R)
        if theta_err > 1e-8:
            failures.append(f"{name}: far-field theta inconsistent with R ({theta_err:.2e})")
            continue
        col_err = float(
            np.abs(fld.h[-1] - stream_mod.stream_profile(spec, fld.theta, fld.grid.p)).max()
        )
        if col_err > 1e-9:
            failures.append(f"{name}: far-field column mismatch ({col_err:.2e})")
            continue
        move = branch_mod.replay_checkpoint(fld, spec)
        if move > 1e-12:
            failures.append(f"{name}: Newton replay moved {move:.2e} > 1e-12")
            continue
        res = strip_mod.residual(fld, spec)
        if res.sup > 10 * cfg.newton_tol:
            failures.append(f"{name}: residual {res.sup:.2e} above 10*tol")
            continue
        defect = _taylor_spot_check(fld, spec, cfg.seed)
        if defect > 1e-6:
            failures.append(f"{name}: Jacobian Taylor spot-check defect {defect:.2e}")
            continue
        print(f"{name}: ok (replay {move:.2e}, taylor {defect:.2e})")
    csv_path = os.path.join(dirpath, "branch.csv")
    if os.path.exists(csv_path):
        with open(csv_path) as fh:
            header = fh.readline().strip().split(",")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        cols = {name: i for i, name in enumerate(header)}
        if len(rows) != len(names):
            failures.append(f"branch.csv: {len(rows)} rows vs {len(names)} checkpoints")
        else:
            ts = [float(r[cols["t"]]) for r in rows]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                failures.append("branch.csv: t not strictly increasing")
            for idx, row in enumerate(rows):
                fld, _ = strip_mod.read_checkpoint(os.path.join(dirpath, names[idx]))
                if float(row[cols["R"]]) != fld.R:
                    failures.append(f"branch.csv row {idx}: R mismatch with checkpoint")
                    break
    if failures:
        for f in failures:
            print(f"FAIL {f}")
        return 1
    print(f"verified {len(names)} checkpoints")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wavebranch",
        description="Rotational solitary water waves: solver, continuation, "
        "bifurcation analysis, and same-Bernoulli-constant pairs.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--omega", type=float, nargs="+", help="vorticity coefficients")
        p.add_argument("--L", type=float)
        p.add_argument("--nq", type=int)
        p.add_argument("--np", type=int, dest="np")
        p.add_argument("--newton-tol", type=float, dest="newton_tol")
        p.add_argument("--nu0-grid-n", type=int, dest="nu0_grid_n")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("stream", help="tabulate the uniform-stream family")
    common(p)
    p.add_argument("--theta-min", type=float, required=True)
    p.add_argument("--theta-max", type=float, required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_stream)

    p = sub.add_parser("critical", help="critical stream: theta_c, R_c, R_0")
    common(p)
    p.set_defaults(func=_cmd_critical)

    p = sub.add_parser("spectrum1d", help="1-D Robin eigenvalue nu0 and rho0")
    common(p)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--grid-n", type=int, dest="grid_n")
    p.set_defaults(func=_cmd_spectrum1d)

    p = sub.add_parser("solve", help="solve one solitary wave at fixed R")
    common(p)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--out", help="checkpoint path")
    p.add_argument("--profile-out", dest="profile_out",
                   help="write the reconstructed profile as CSV (X, xi, psi_y_surface)")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("continue", help="pseudo-arclength branch continuation")
    common(p)
    p.add_argument("--R-start", type=float, required=True, dest="R_start")
    p.add_argument("--steps", type=int)
    p.add_argument("--ds", type=float)
    p.add_argument("--ds-grow", type=float, dest="ds_grow")
    p.add_argument("--ds-max-factor", type=float, dest="ds_max_factor")
    p.add_argument("--margin-fraction", type=float, dest="margin_fraction")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_continue)

    p = sub.add_parser("pairs", help="same-R pair finding on a branch directory")
    common(p)
    p.add_argument("--branch", required=True)
    p.add_argument("--n-r", type=int, default=10, dest="n_r")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_pairs)

    p = sub.add_parser("ls-reduce", help="Lyapunov-Schmidt reduction at a PDE crossing")
    common(p)
    p.add_argument("--checkpoint-a", required=True, dest="checkpoint_a")
    p.add_argument("--checkpoint-b", required=True, dest="checkpoint_b")
    p.add_argument("--out")
    p.add_argument("--out-checkpoint", dest="out_checkpoint")
    p.set_defaults(func=_cmd_ls_reduce)

    p = sub.add_parser("model-bifurcate", help="finite-dimensional bifurcation gallery")
    p.add_argument("--case", required=True)
    p.add_argument("--s-max", type=float, default=0.3, dest="s_max")
    p.add_argument("--lam-max", type=float, default=0.2, dest="lam_max")
    p.add_argument("--ns", type=int, default=13)
    p.add_argument("--nlam", type=int, default=41)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_model_bifurcate)

    p = sub.add_parser("verify", help="replay checkpoints and re-assert invariants")
    common(p)
    p.add_argument("--dir", required=True)
    p.set_defaults(func=_cmd_verify)

    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    try:
        return args.func(args)
    except (json.JSONDecodeError, FileNotFoundError, ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except WavebranchError as exc:
        print(f"error ({exc.__class__.__name__}): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
