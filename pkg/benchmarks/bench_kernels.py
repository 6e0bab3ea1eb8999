"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Times RK4 integration of the RTS-24 post-outage dynamics and a batch of
face LPs, and checks that both backends agree.
"""

import argparse
import time

import numpy as np

from droopcert import _kernels_py, lp, lpcert, simulate
from droopcert.caseio import load_bundled
from droopcert.model import solve_equilibrium

try:
    from droopcert import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _use(backend):
    lp.kernels = backend
    simulate.kernels = backend


def bench_rk4(model, theta0, t_end, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = simulate.integrate(model, theta0, t_end, 1e-3, stride=100)
        best = min(best, time.perf_counter() - t0)
        out = traj.states[-1]
    return best, out


def bench_lp(model, gamma, repeat):
    tpl = lpcert.FaceTemplate(model)
    best, vals = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        vals = [lp.solve(tpl.face(gamma, e, z)).value for e, z in lpcert.faces(model.net.m)[:20]]
        best = min(best, time.perf_counter() - t0)
    return best / 20, np.array(vals)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--t-end", type=float, default=10.0)
    args = ap.parse_args()

    model, _ = load_bundled()
    theta0 = solve_equilibrium(model).state
    post = model.remove_lines(["14-16"])
    gamma = np.full(model.net.m, np.radians(30.0))

    backends = [("python", _kernels_py)]
    if _compiled is not None:
        backends.insert(0, ("cython", _compiled))
    rows = {}
    for name, mod in backends:
        _use(mod)
        t_rk4, end = bench_rk4(post, theta0, args.t_end, args.repeat)
        t_lp, vals = bench_lp(model, gamma, args.repeat)
        rows[name] = (t_rk4, t_lp, end, vals)
        print(f"{name:>7}: rk4 {args.t_end:g} s horizon {t_rk4 * 1e3:9.1f} ms | face LP {t_lp * 1e3:7.2f} ms")
    if len(rows) == 2:
        c, p = rows["cython"], rows["python"]
        print(f"speedup: rk4 {p[0] / c[0]:.1f}x, face LP {p[1] / c[1]:.1f}x")
        same_inf = np.array_equal(np.isinf(c[3]), np.isinf(p[3]))
        fin = np.isfinite(c[3])
        print(f"max state difference {np.abs(c[2] - p[2]).max():.2e}, "
              f"max LP value difference {np.abs(c[3][fin] - p[3][fin]).max():.2e}, infeasible faces agree: {same_inf}")


if __name__ == "__main__":
    main()
