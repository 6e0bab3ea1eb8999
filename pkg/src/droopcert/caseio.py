"""Case files (YAML), the bundled RTS-24 case, and CSV/text result writers.

Case schema::

    name: <str>                      # optional
    omega_star: <Hz>                 # optional, default 60
    buses:
      - {id: <int|str>, p_star: <MW>, d: <MW/Hz>}
    lines:
      - {from: <bus id>, to: <bus id>, a: <MW>}
    tolerances:                      # optional; scalars broadcast, lists are per bus / per line
      delta_bar: <Hz>
      gamma_bar_deg: <deg>
      p_bar: <MW>
      r_bar: <MW/s>
      s_bar: <MW s>

Floats are written with ``repr`` so a save/load cycle is bit-exact.
"""

from __future__ import annotations

import csv
import io
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .lyapunov import ToleranceSet
from .model import KuramotoModel
from .network import NetworkError, build_network

BUNDLED = {"ieee_rts24": "ieee_rts24.yaml"}


class CaseError(ValueError):
    """Malformed case file."""


def bundled_case_path(name: str = "ieee_rts24") -> Path:
    return Path(str(resources.files("droopcert") / "data" / BUNDLED[name]))


def _number(value, where: str) -> float:
    if isinstance(value, str):
        # YAML 1.1 resolvers leave exponents without a mantissa dot ("1e-3") as strings
        try:
            out = float(value)
        except ValueError:
            out = np.nan
        if np.isnan(out):
            raise CaseError(f"{where}: expected a number, got {value!r}")
        return out
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _require(rec, key, where):
    if not isinstance(rec, dict):
        raise CaseError(f"{where}: expected a mapping, got {rec!r}")
    if key not in rec:
        raise CaseError(f"{where}: missing field '{key}'")
    return rec[key]


def parse_case(doc) -> tuple[KuramotoModel, ToleranceSet]:
    """Validate a decoded case document and build the model and tolerances."""
    if not isinstance(doc, dict):
        raise CaseError("case document must be a mapping")
    buses = doc.get("buses")
    lines = doc.get("lines")
    if not isinstance(buses, list) or not buses:
        raise CaseError("'buses' must be a non-empty list")
    if not isinstance(lines, list):
        raise CaseError("'lines' must be a list")
    ids, p_star, d = [], [], []
    for k, rec in enumerate(buses):
        where = f"buses[{k}]"
        ids.append(_require(rec, "id", where))
        p_star.append(_number(_require(rec, "p_star", where), f"{where}.p_star"))
        dk = _number(_require(rec, "d", where), f"{where}.d")
        if not dk > 0:
            raise CaseError(f"{where}.d: droop coefficient must be positive, got {dk}")
        d.append(dk)
    recs = []
    for k, rec in enumerate(lines):
        where = f"lines[{k}]"
        a = _number(_require(rec, "a", where), f"{where}.a")
        if not a > 0:
            raise CaseError(f"{where}.a: line weight must be positive, got {a}")
        recs.append((_require(rec, "from", where), _require(rec, "to", where), a))
    try:
        net = build_network(ids, recs)
    except NetworkError as exc:
        raise CaseError(str(exc)) from None
    omega = _number(doc.get("omega_star", 60.0), "omega_star")
    model = KuramotoModel(net, np.array(d), np.array(p_star), omega)
    tol = _parse_tolerances(doc.get("tolerances"), net)
    return model, tol


def _vec(value, size, where):
    if isinstance(value, list):
        arr = np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(value)])
        if arr.size != size:
            raise CaseError(f"{where}: expected {size} entries, got {arr.size}")
        return arr
    return np.full(size, _number(value, where))


def _parse_tolerances(block, net) -> ToleranceSet:
    if block is None:
        return ToleranceSet.unconstrained(net.n, net.m)
    if not isinstance(block, dict):
        raise CaseError("'tolerances' must be a mapping")
    known = {"delta_bar", "gamma_bar_deg", "p_bar", "r_bar", "s_bar"}
    extra = set(block) - known
    if extra:
        raise CaseError(f"tolerances: unknown field(s) {sorted(extra)}")
    n, m = net.n, net.m
    inf = float("inf")
    try:
        return ToleranceSet(
            _vec(block.get("delta_bar", inf), n, "tolerances.delta_bar"),
            np.radians(_vec(block.get("gamma_bar_deg", 90.0), m, "tolerances.gamma_bar_deg")),
            _vec(block.get("p_bar", inf), n, "tolerances.p_bar"),
            _vec(block.get("r_bar", inf), n, "tolerances.r_bar"),
            _vec(block.get("s_bar", inf), n, "tolerances.s_bar"),
        )
    except ValueError as exc:
        raise CaseError(f"tolerances: {exc}") from None


def load_case(path) -> tuple[KuramotoModel, ToleranceSet]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CaseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise CaseError(f"{path}: {exc}") from None
    return parse_case(doc)


def load_tolerances(path, model: KuramotoModel) -> ToleranceSet:
    """Read a stand-alone tolerance file (the ``tolerances`` block at top level)."""
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise CaseError(f"cannot read tolerances from {path}: {exc}") from None
    if isinstance(doc, dict) and "tolerances" in doc:
        doc = doc["tolerances"]
    return _parse_tolerances(doc, model.net)


def load_bundled(name: str = "ieee_rts24"):
    return load_case(bundled_case_path(name))


def _fmt(x: float) -> str:
    return repr(float(x))


def _yaml_float(v: float) -> str:
    if np.isposinf(v):
        return ".inf"
    if np.isneginf(v):
        return "-.inf"
    text = _fmt(v)
    mant, e, exp = text.partition("e")
    if e and "." not in mant:
        text = f"{mant}.0e{exp}"
    return text


def _bus_repr(b):
    return b if isinstance(b, int) else yaml.safe_dump(b, default_flow_style=True).strip().removesuffix("...").strip()


def serialize_case(model: KuramotoModel, tolerances: ToleranceSet | None = None, name: str | None = None) -> str:
    net = model.net
    out = []
    if name:
        out.append(f"name: {name}")
    out.append(f"omega_star: {_yaml_float(model.omega_star)}")
    out.append("buses:")
    for b, p, d in zip(net.buses, model.p_star, model.d):
        out.append(f"  - {{id: {_bus_repr(b)}, p_star: {_yaml_float(p)}, d: {_yaml_float(d)}}}")
    out.append("lines:" if net.m else "lines: []")
    for s, t, w in zip(net.src, net.dst, net.weights):
        out.append(f"  - {{from: {_bus_repr(net.buses[s])}, to: {_bus_repr(net.buses[t])}, a: {_yaml_float(w)}}}")
    if tolerances is not None:
        out.append("tolerances:")
        for key, arr in (
            ("delta_bar", tolerances.delta_bar),
            ("gamma_bar_deg", np.degrees(tolerances.gamma_bar)),
            ("p_bar", tolerances.p_bar),
            ("r_bar", tolerances.r_bar),
            ("s_bar", tolerances.s_bar),
        ):
            out.append(f"  {key}: [{', '.join(_yaml_float(v) for v in arr)}]")
    return "\n".join(out) + "\n"


def save_case(path, model: KuramotoModel, tolerances: ToleranceSet | None = None, name: str | None = None):
    Path(path).write_text(serialize_case(model, tolerances, name))


# -- CSV writers ---------------------------------------------------------------


def trajectory_columns(model: KuramotoModel) -> list[str]:
    """``time, theta_<bus>..., vdev_<bus>..., gap_<line>...``."""
    net = model.net
    buses = [str(b) for b in net.buses]
    return (
        ["time"]
        + [f"theta_{b}" for b in buses]
        + [f"vdev_{b}" for b in buses]
        + [f"gap_{lab}" for lab in net.edge_labels]
    )


def trajectory_csv(traj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trajectory_columns(traj.model))
    for k in range(len(traj.times)):
        row = np.concatenate([[traj.times[k]], traj.states[k], traj.freq_dev[k], traj.edge_diffs[k]])
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def scores_csv(result) -> str:
    labels = result.labels
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["line"] + labels)
    for a, lab in enumerate(labels):
        cells = ["DISCONNECTED" if result.disconnected[a, b] else _fmt(result.scores[a, b]) for b in range(len(labels))]
        w.writerow([lab] + cells)
    return buf.getvalue()


def margin_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha_deg", "U_hz"])
    for a, v in zip(curve.alphas, curve.values):
        w.writerow([_fmt(np.degrees(a)), _fmt(v)])
    return buf.getvalue()
