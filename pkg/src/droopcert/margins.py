"""Stability-margin curves and pairwise line-outage screening."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .lpcert import FaceTemplate, binding_face, v2
from .lyapunov import v_inf
from .model import KuramotoModel
from .network import cycle_basis
from .torus import edge_differences, winding_vector

HALF_PI = np.pi / 2
GAMMA_FLOOR = 1e-6  # rad; keeps envelopes strictly positive when a line carries no flow


def latin_hypercube(lower, upper, k: int, seed=None) -> np.ndarray:
    """``k`` stratified samples in the box: each coordinate hits every one of ``k`` bins once."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape:
        raise ValueError("bounds differ in shape")
    if np.any(lower > upper):
        raise ValueError("lower bound exceeds upper bound")
    if k < 0:
        raise ValueError("sample count must be nonnegative")
    rng = np.random.default_rng(seed)
    dim = lower.size
    bins = np.stack([rng.permutation(k) for _ in range(dim)], axis=1) if k else np.zeros((0, dim))
    unit = (bins + rng.random((k, dim))) / max(k, 1)
    return lower + unit * (upper - lower)


class _Searcher:
    """Keeps the pruning state for a max-over-candidates of ``v2``."""

    def __init__(self, model, u, solver=None, direction=None):
        self.model = model
        m = model.net.m
        self.direction = np.zeros(m) if direction is None else np.sign(direction)
        self.template = FaceTemplate(model, u)
        self.solver = solver
        self.best = -np.inf
        self.witness = None
        self.binding: list = []
        self.evaluated = 0

    def offer(self, gamma: np.ndarray) -> float:
        stop = None if self.witness is None else self.best
        value, table = v2(
            self.model, None, gamma, template=self.template, stop_below=stop, order=self._order(gamma),
            solver=self.solver,
        )
        self.evaluated += 1
        face = binding_face(table) if np.isfinite(value) else None
        if face is not None and face in self.binding:
            self.binding.remove(face)
        if face is not None:
            self.binding.insert(0, face)
        if self.witness is None or value > self.best:
            self.best, self.witness = value, np.array(gamma, dtype=float)
        return value

    def _order(self, gamma):
        # move-to-front list seeded by envelope width: a low face value prunes the
        # candidate, and loose edges are where low values live
        if not self.binding:
            for e in np.lexsort((np.arange(len(gamma)), -np.asarray(gamma))):
                first = -1 if self.direction[e] < 0 else 1
                self.binding += [(int(e), first), (int(e), -first)]
        return self.binding


def _ray(gamma0: np.ndarray, points: int) -> np.ndarray:
    betas = np.linspace(0.0, 1.0, points) if points > 1 else np.zeros(max(points, 0))
    return gamma0[None, :] + betas[:, None] * (HALF_PI - gamma0)[None, :]


def floor_gamma(gamma0) -> np.ndarray:
    return np.maximum(np.asarray(gamma0, dtype=float), GAMMA_FLOOR)


def margin_u(model: KuramotoModel, u, gamma0, search_budget: int = 40, extra=None, solver=None):
    """Lower estimate of the largest certifiable deviation over envelopes ``gamma >= gamma0``.

    Searches the ray from ``gamma0`` to ``pi/2`` on ``search_budget`` points,
    plus any rows of ``extra`` (clipped into ``[gamma0, pi/2]``).  Returns
    ``(estimate, witness_gamma)``.
    """
    g0 = floor_gamma(gamma0)
    if np.any(g0 >= HALF_PI):
        g = np.minimum(g0, HALF_PI)
        value, _ = v2(model, u, g, solver=solver)
        return value, g
    cands = [_ray(g0, search_budget)]
    if extra is not None and len(extra):
        cands.append(np.clip(np.atleast_2d(extra), g0, HALF_PI))
    cands = np.vstack(cands)
    if not len(cands):
        cands = g0[None, :]
    s = _Searcher(model, u, solver)
    for g in cands[np.argsort(cands.sum(axis=1), kind="stable")]:
        s.offer(g)
    return s.best, s.witness


@dataclass
class MarginCurve:
    alphas: np.ndarray  # rad
    values: np.ndarray  # Hz
    witnesses: np.ndarray

    def above(self, alpha: float, delta0: float) -> bool:
        """True when the point lies strictly above the piecewise-linear curve (no certificate)."""
        return bool(delta0 >= np.interp(alpha, self.alphas, self.values))


def margin_curve(model: KuramotoModel, alphas, u=None, search_budget: int = 40, solver=None) -> MarginCurve:
    """``U(alpha * 1)`` over a grid of uniform starting envelopes.

    Alphas are processed from largest to smallest and every earlier candidate
    stays in the pool (it dominates all smaller alphas), so the estimates are
    non-increasing in alpha by construction.
    """
    alphas = np.asarray(alphas, dtype=float)
    m = model.net.m
    order = np.argsort(-alphas, kind="stable")
    values = np.empty(alphas.size)
    wit = np.empty((alphas.size, m))
    s = _Searcher(model, u, solver)
    for idx in order:
        g0 = floor_gamma(np.full(m, alphas[idx]))
        ray = _ray(g0, search_budget) if np.all(g0 < HALF_PI) else np.minimum(g0, HALF_PI)[None, :]
        for g in ray:
            s.offer(g)
        values[idx] = s.best
        wit[idx] = s.witness
    return MarginCurve(alphas, values, wit)


@dataclass
class Contingency:
    """Outcome of one contingency: either ``disconnected`` or a score with its inputs."""

    lines: tuple
    disconnected: bool
    score: float = np.nan
    delta0: float = np.nan
    best_v2: float = np.nan
    witness: np.ndarray | None = None
    lp_evaluations: int = 0


def criticality_score(model_pre: KuramotoModel, theta_pre, contingency, test_set=None, *,
                      unit_samples=None, solver=None) -> Contingency:
    """``delta0 - max v2`` over a test set of envelopes for the post-outage network.

    ``test_set`` holds envelopes for the post-outage lines (clipped into
    ``[gamma0, pi/2]``).  Alternatively ``unit_samples`` (rows in ``[0, 1]^m``
    over the *pre-outage* lines) are mapped affinely onto
    ``[gamma0, pi/2]``.  A negative score certifies the post-outage
    trajectory from ``theta_pre``.
    """
    ids = sorted({model_pre.net.edge_index(e) for e in contingency})
    post = model_pre.remove_lines(ids)
    key = tuple(ids)
    if not post.net.is_connected:
        return Contingency(key, True)
    delta0 = v_inf(post, theta_pre)
    gamma0 = floor_gamma(edge_differences(theta_pre, post.net))
    if np.any(gamma0 >= HALF_PI):
        # no envelope in (0, pi/2] contains the start, so nothing can be certified
        return Contingency(key, False, np.inf, delta0, -np.inf)
    if unit_samples is not None:
        keep = np.setdiff1d(np.arange(model_pre.net.m), ids)
        unit = np.atleast_2d(unit_samples)[:, keep]
        cands = gamma0 + unit * (HALF_PI - gamma0)
    elif test_set is not None:
        cands = np.clip(np.atleast_2d(np.asarray(test_set, dtype=float)), gamma0, HALF_PI)
    else:
        raise ValueError("empty test set")
    if cands.shape[0] == 0:
        raise ValueError("empty test set")
    u = winding_vector(theta_pre, post.net, cycle_basis(post.net))
    th = np.asarray(theta_pre, dtype=float)
    s = _Searcher(post, u, solver, direction=th[post.net.src] - th[post.net.dst])
    for g in cands[np.argsort(cands.sum(axis=1), kind="stable")]:
        s.offer(g)
    return Contingency(key, False, delta0 - s.best, delta0, s.best, s.witness, s.evaluated)


@dataclass
class ScreeningResult:
    scores: np.ndarray  # NaN where disconnected
    disconnected: np.ndarray
    test_set: np.ndarray  # unit-box samples, one column per pre-outage line
    labels: list
    delta0: np.ndarray
    best_v2: np.ndarray

    def negative_fraction(self) -> float:
        ok = ~self.disconnected
        return float(np.mean(self.scores[ok] < 0)) if np.any(ok) else float("nan")


_WORKER = {}


def _init_worker(model_pre, theta_pre, unit, solver):
    _WORKER.update(model=model_pre, theta=theta_pre, unit=unit, solver=solver)


def _score_pair(pair):
    w = _WORKER
    lines = sorted(set(pair))
    return pair, criticality_score(w["model"], w["theta"], lines, unit_samples=w["unit"], solver=w["solver"])


def screen_pairs(model_pre: KuramotoModel, theta_pre, k_samples: int = 40, seed=0, workers: int | None = None,
                 pairs=None, solver=None, progress=None) -> ScreeningResult:
    """Score every single and double line outage.

    The ``k_samples`` envelopes are drawn once in the unit box by Latin
    hypercube and mapped onto each contingency's ``[gamma0, pi/2]``; with
    ``k_samples = 0`` the test set is ``{gamma0}``.  ``workers > 1`` spreads
    contingencies over processes; results do not depend on the worker count.
    """
    m = model_pre.net.m
    unit = latin_hypercube(np.zeros(m), np.ones(m), k_samples, seed)
    if k_samples == 0:
        unit = np.zeros((1, m))
    if pairs is None:
        pairs = [(a, b) for a in range(m) for b in range(a, m)]
    theta_pre = np.asarray(theta_pre, dtype=float)
    scores = np.full((m, m), np.nan)
    disc = np.zeros((m, m), dtype=bool)
    d0 = np.full((m, m), np.nan)
    best = np.full((m, m), np.nan)
    workers = workers or 1
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(model_pre, theta_pre, unit, solver)) as ex:
            results = ex.map(_score_pair, pairs, chunksize=max(1, len(pairs) // (8 * workers)))
            outcomes = list(_tick(results, progress, len(pairs)))
    else:
        _init_worker(model_pre, theta_pre, unit, solver)
        outcomes = list(_tick(map(_score_pair, pairs), progress, len(pairs)))
    for (a, b), res in outcomes:
        for i, j in {(a, b), (b, a)}:
            disc[i, j] = res.disconnected
            if not res.disconnected:
                scores[i, j], d0[i, j], best[i, j] = res.score, res.delta0, res.best_v2
    return ScreeningResult(scores, disc, unit, model_pre.net.edge_labels, d0, best)


def _tick(it, progress, total):
    for k, item in enumerate(it, 1):
        if progress is not None:
            progress(k, total)
        yield item


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
