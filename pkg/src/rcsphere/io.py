"""File formats: function/instance records (INI text) and JSON reports.

An instance file looks like::

    [instance]
    variance = known
    p = 3
    alpha = 0.05
    k = 10

    [a]
    kind = knots
    tail = james-stein-plus
    knots = 0, 0.57735026918962573, ...
    values = 1e-08, 1e-08, ...

    [b]
    kind = knots
    tail = constant
    tail_value = 2.7954834829151074
    knots = ...
    values = ...

``kind`` may also be ``james-stein-plus``, ``james-stein-plus-unknown``,
``constant`` (with ``value``) or ``b-star`` for closed-form functions.
Reals are written with 17 significant digits so a round trip is exact.
"""

from __future__ import annotations

import configparser
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .knots import BStar, ConstantD, JamesSteinPlus, JamesSteinPlusUnknown, KnotFunction
from .known import RcsKnown
from .unknown import RcsUnknown

FORMAT = "rcsphere-instance 1"


class SpecFileError(ValueError):
    """An instance file is missing, malformed or describes an invalid set."""


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _fmt_list(xs) -> str:
    return ", ".join(fmt(x) for x in xs)


def _tail_fields(tail) -> dict:
    if isinstance(tail, JamesSteinPlusUnknown):
        return {"tail": "james-stein-plus-unknown"}
    if isinstance(tail, JamesSteinPlus):
        return {"tail": "james-stein-plus"}
    if isinstance(tail, ConstantD):
        return {"tail": "constant", "tail_value": fmt(tail.value)}
    raise TypeError(f"cannot serialise tail {tail!r}")


def function_fields(fn) -> dict:
    if isinstance(fn, KnotFunction):
        return {"kind": "knots", **_tail_fields(fn.tail),
                "knots": _fmt_list(fn.knots), "values": _fmt_list(fn.values)}
    if isinstance(fn, JamesSteinPlusUnknown):
        return {"kind": "james-stein-plus-unknown"}
    if isinstance(fn, JamesSteinPlus):
        return {"kind": "james-stein-plus"}
    if isinstance(fn, ConstantD):
        return {"kind": "constant", "value": fmt(fn.value)}
    if isinstance(fn, BStar):
        return {"kind": "b-star"}
    raise TypeError(f"cannot serialise {type(fn).__name__}")


def instance_text(inst) -> str:
    cp = configparser.ConfigParser()
    head = {"format": FORMAT, "p": str(inst.p), "alpha": fmt(inst.alpha), "k": fmt(inst.k)}
    if isinstance(inst, RcsUnknown):
        head = {**head, "variance": "unknown", "m": str(inst.m)}
    else:
        head = {**head, "variance": "known"}
    cp["instance"] = head
    cp["a"] = function_fields(inst.a)
    cp["b"] = function_fields(inst.b)
    lines = []
    for name in cp.sections():
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {val}" for key, val in cp[name].items())
        lines.append("")
    return "\n".join(lines)


def save_instance(path, inst) -> None:
    Path(path).write_text(instance_text(inst))


def _floats(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.replace("\n", " ").split(",") if tok.strip()])


def _tail_from(sec, p, m):
    name = sec.get("tail")
    if name == "james-stein-plus":
        return JamesSteinPlus(p)
    if name == "james-stein-plus-unknown":
        return JamesSteinPlusUnknown(p, m)
    if name == "constant":
        return ConstantD(float(sec["tail_value"]))
    raise SpecFileError(f"unknown tail {name!r}")


def _function_from(sec, p, m, d):
    kind = sec.get("kind", "knots")
    if kind == "knots":
        return KnotFunction(_floats(sec["knots"]), _floats(sec["values"]), _tail_from(sec, p, m))
    if kind == "james-stein-plus":
        return JamesSteinPlus(p)
    if kind == "james-stein-plus-unknown":
        return JamesSteinPlusUnknown(p, m)
    if kind == "constant":
        return ConstantD(float(sec["value"]))
    if kind == "b-star":
        return BStar(p, d)
    raise SpecFileError(f"unknown function kind {kind!r}")


def parse_instance(text: str):
    """Instance described by ``text``; raises :class:`SpecFileError` on any defect."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
        head = cp["instance"]
        p = int(head["p"])
        alpha = float(head["alpha"])
        k = float(head.get("k", "10"))
        variance = head.get("variance", "known")
        if variance == "unknown":
            from .unknown import radius_constant_unknown
            m = int(head["m"])
            d = radius_constant_unknown(p, m, alpha)
            a = _function_from(cp["a"], p, m, d)
            b = _function_from(cp["b"], p, m, d)
            return RcsUnknown(p, m, alpha, a, b, k)
        if variance != "known":
            raise SpecFileError(f"variance must be 'known' or 'unknown', not {variance!r}")
        from .known import radius_constant
        d = radius_constant(p, alpha)
        a = _function_from(cp["a"], p, None, d)
        b = _function_from(cp["b"], p, None, d)
        return RcsKnown(p, alpha, a, b, k)
    except SpecFileError:
        raise
    except (configparser.Error, KeyError, ValueError, TypeError) as exc:
        raise SpecFileError(f"invalid instance file: {exc}") from exc


def load_instance(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecFileError(f"cannot read {path}: {exc}") from exc
    return parse_instance(text)


# ---------------------------------------------------------------------------
# JSON reports
# ---------------------------------------------------------------------------

def _clean(obj):
    # JSON has no inf/nan
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def report_dict(report) -> dict:
    """JSON-ready form of an :class:`~rcsphere.optimize.OptimizationReport`."""
    pr = report.problem
    inst = report.instance
    return _clean({
        "kind": "optimization",
        "case": pr.case.value,
        "p": pr.p,
        "m": pr.m,
        "alpha": pr.alpha,
        "k": pr.k,
        "status": report.status.value,
        "method": report.method,
        "sev_at_zero": report.sev_at_zero,
        "baseline_sev_at_zero": report.baseline_sev_at_zero,
        "min_coverage_on_grid": report.min_coverage_on_grid,
        "constraint_grid": list(pr.constraint_grid),
        "audit": report.audit.as_dict(),
        "iterations": report.iterations,
        "wall_time": report.wall_time,
        "objective_history": report.objective_history,
        "functions": {"a": function_fields(inst.a), "b": function_fields(inst.b)},
        "solver": {
            "max_iters": pr.solver.max_iters,
            "constraint_tol": pr.solver.constraint_tol,
            "step_tol": pr.solver.step_tol,
            "multistart_count": pr.solver.multistart_count,
            "seed": pr.solver.seed,
        },
    })


def schema(name: str = "report") -> dict:
    """A JSON schema shipped with the package (``report`` or ``validation``)."""
    text = resources.files("rcsphere").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
