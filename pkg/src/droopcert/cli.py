"""Command-line entry point: simulate, certify, margin, screen.

Exit codes: 0 success, 1 analysis precondition failed (e.g. a disconnected
network or an envelope that does not contain the start), 2 input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import caseio
from .lpcert import NOT_APPLICABLE, certify
from .margins import default_workers, margin_curve, margin_u, screen_pairs
from .model import EquilibriumError, solve_equilibrium
from .network import DisconnectedError, NetworkError
from .simulate import integrate, monitor
from .torus import edge_differences, winding_vector

EXIT_OK, EXIT_PRECONDITION, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


class PreconditionError(Exception):
    pass


def _load(args):
    path = args.case or caseio.bundled_case_path()
    model, tol = caseio.load_case(path)
    if getattr(args, "tol_file", None):
        tol = caseio.load_tolerances(args.tol_file, model)
    return model, tol


def _parse_lines(model, text: str | None):
    if not text:
        return []
    ids = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            ids.append(model.net.edge_index(tok))
        except (KeyError, ValueError, NetworkError) as exc:
            raise InputError(f"unknown line {tok!r}: {exc}") from None
    return sorted(set(ids))


def _pre_equilibrium(model):
    try:
        return solve_equilibrium(model).state
    except (EquilibriumError, DisconnectedError) as exc:
        raise PreconditionError(f"pre-fault equilibrium: {exc}") from None


def _write(out, text: str):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(args) -> int:
    model, tol = _load(args)
    ids = _parse_lines(model, args.remove_lines)
    theta0 = _pre_equilibrium(model)
    post = model.remove_lines(ids)
    traj = integrate(post, theta0, args.t_end, args.dt, stride=args.stride)
    _write(args.out, caseio.trajectory_csv(traj))
    report = monitor(traj, tol.without_edges(ids), sync_tol=args.sync_tol)
    print(report.summary(), file=sys.stderr)
    for key, val in report.worst.items():
        print(f"{key}: {val:.6g}", file=sys.stderr)
    return EXIT_OK


def _parse_gamma(text: str, m: int) -> np.ndarray:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise InputError(f"bad --gamma-deg value {text!r}") from None
    if len(vals) == 1:
        vals = vals * m
    if len(vals) != m:
        raise InputError(f"--gamma-deg needs 1 or {m} values, got {len(vals)}")
    return np.radians(vals)


def cmd_certify(args) -> int:
    model, tol = _load(args)
    ids = _parse_lines(model, args.remove_lines)
    theta0 = _pre_equilibrium(model)
    post = model.remove_lines(ids)
    if not post.net.is_connected:
        raise PreconditionError("post-fault network is disconnected")
    tol = tol.without_edges(ids)
    if args.gamma_auto:
        gamma0 = edge_differences(theta0, post.net)
        if np.any(gamma0 >= np.pi / 2):
            raise PreconditionError("a line difference is already at or beyond 90 degrees")
        u = winding_vector(theta0, post.net)
        _, gamma = margin_u(post, u, gamma0, search_budget=args.search_budget)
    else:
        gamma = _parse_gamma(args.gamma_deg, post.net.m)
    cert = certify(post, theta0, gamma, tol)
    _write(args.out, cert.to_text())
    print(f"P1: {cert.status} (delta0 {cert.delta0:.6g} Hz, v2 {cert.v2:.6g} Hz)", file=sys.stderr)
    return EXIT_PRECONDITION if cert.status == NOT_APPLICABLE else EXIT_OK


def cmd_margin(args) -> int:
    model, _ = _load(args)
    if args.points < 1:
        raise InputError("--points must be >= 1")
    if not 0 <= args.alpha_min <= args.alpha_max < 90:
        raise InputError("need 0 <= alpha-min <= alpha-max < 90")
    model.net.require_connected()
    alphas = np.radians(np.linspace(args.alpha_min, args.alpha_max, args.points))
    curve = margin_curve(model, alphas, search_budget=args.budget)
    _write(args.out, caseio.margin_csv(curve))
    return EXIT_OK


def cmd_screen(args) -> int:
    model, _ = _load(args)
    if args.samples < 0:
        raise InputError("--samples must be >= 0")
    theta0 = _pre_equilibrium(model)
    workers = default_workers() if args.workers == 0 else args.workers

    def progress(k, total):
        if args.progress:
            print(f"\r{k}/{total}", end="" if k < total else "\n", file=sys.stderr)

    res = screen_pairs(model, theta0, args.samples, args.seed, workers=workers, progress=progress)
    _write(args.out, caseio.scores_csv(res))
    ok = ~res.disconnected
    print(
        f"{int(np.sum(np.triu(ok)))} scored contingencies, {int(np.sum(np.triu(res.disconnected)))} disconnecting; "
        f"{100 * res.negative_fraction():.1f}% certified (score < 0)",
        file=sys.stderr,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="droopcert", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--case", help="case file (YAML); default: bundled IEEE RTS-24")
        sp.add_argument("--out", default="-", help="output file (default stdout)")

    s = sub.add_parser("simulate", help="integrate the post-fault dynamics from the pre-fault equilibrium")
    common(s)
    s.add_argument("--remove-lines", default="", help="comma-separated line labels, e.g. 14-16")
    s.add_argument("--t-end", type=float, default=100.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--stride", type=int, default=10, help="keep every k-th step")
    s.add_argument("--sync-tol", type=float, default=1e-3, help="Hz")
    s.add_argument("--tol-file")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("certify", help="LP certificate for the post-fault start")
    common(c)
    c.add_argument("--remove-lines", default="")
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--gamma-deg", help="envelope in degrees: one value or one per remaining line")
    g.add_argument("--gamma-auto", action="store_true", help="search the ray from gamma0 to 90 degrees")
    c.add_argument("--search-budget", type=int, default=40)
    c.add_argument("--tol-file")
    c.set_defaults(func=cmd_certify)

    m = sub.add_parser("margin", help="margin curve U(alpha) for uniform starting envelopes")
    common(m)
    m.add_argument("--alpha-min", type=float, default=0.0, help="degrees")
    m.add_argument("--alpha-max", type=float, default=45.0, help="degrees")
    m.add_argument("--points", type=int, default=10)
    m.add_argument("--budget", type=int, default=40, help="ray grid points per alpha")
    m.set_defaults(func=cmd_margin)

    r = sub.add_parser("screen", help="criticality scores for all single and double line outages")
    common(r)
    r.add_argument("--samples", type=int, default=40)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--workers", type=int, default=1, help="processes (0 = all cores)")
    r.add_argument("--progress", action="store_true")
    r.set_defaults(func=cmd_screen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, caseio.CaseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PreconditionError, DisconnectedError) as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
