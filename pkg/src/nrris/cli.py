"""Configuration-driven experiment runner.

A config is a JSON object ``{"experiment": ..., "parameters": {...},
"output": {"dir": ...}}``.  Angles are given in degrees and converted to
radians once, when the config is turned into model objects.  Outputs embed
the resolved config and the toolkit version, so every artifact can be
re-run exactly with ``--config <artifact>``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from . import beamopt, crack, metrics, multiport, surface
from .errors import ConfigError, NumericalError

EXPERIMENTS = ("compose", "beampattern", "optimize", "islr-sweep", "crack")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# --------------------------------------------------------------------------
# schema

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_INT1 = {"type": "integer", "minimum": 1}
_ANGLE = {"type": "number", "minimum": -90, "maximum": 90}
_OPEN_ANGLE = {"type": "number", "exclusiveMinimum": -90, "exclusiveMaximum": 90}
_COMPLEX = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}


def _obj(props: dict, required=()) -> dict:
    return {
        "type": "object",
        "properties": props,
        "required": list(required),
        "additionalProperties": False,
    }


_GRID = _obj({"start_deg": _ANGLE, "stop_deg": _ANGLE, "step_deg": _POS})

_BEAM = _obj(
    {
        "theta_b_deg": _OPEN_ANGLE,
        "theta_u_deg": _OPEN_ANGLE,
        "dl_target_deg": _ANGLE,
        "ul_target_deg": _ANGLE,
        "N": _INT1,
        "d": _POS,
        "structure": {"enum": sorted(beamopt.STRUCTURES)},
        "placement": {"enum": list(surface.PLACEMENTS)},
        "halfwidth_deg": _NONNEG,
        "grid": _GRID,
        "sidelobe_weight": {"type": "array", "items": _NONNEG, "minItems": 2, "maxItems": 2},
        "null_weight": _NONNEG,
        "null_halfwidth_deg": _NONNEG,
        "init": {"enum": ["random", "uniform"]},
        "max_iters": _INT1,
        "tol": _POS,
        "restarts": _INT1,
        "window": _INT1,
        "method": {"enum": ["gd", "cg"]},
        "seed": _SEED,
    }
)

_ELEMENT = {
    "oneOf": [
        _obj({"A": _COMPLEX, "B": _COMPLEX, "D": _COMPLEX}, ["A", "B", "D"]),
        _obj({"line_deg": _NUM}, ["line_deg"]),
        _obj(
            {"Z11": _COMPLEX, "Z12": _COMPLEX, "Z22": _COMPLEX, "Z0": _POS},
            ["Z11", "Z12", "Z22"],
        ),
    ]
}

_PARAMS = {
    "compose": _obj(
        {
            "device": {"enum": ["isolator", "gyrator", "circulator", "terminated-circulator"]},
            "elements": {"type": "array", "items": _ELEMENT},
            "psi_deg": _NUM,
            "X3": {"oneOf": [_NUM, {"enum": ["inf", "-inf"]}]},
            "phase_difference_deg": _NUM,
            "Z0": _POS,
        }
    ),
    "optimize": _BEAM,
    "beampattern": _obj(
        {
            "design": {"enum": ["optimized", "star"]},
            "optimize": _BEAM,
            "star": _obj(
                {
                    "theta_i_deg": _OPEN_ANGLE,
                    "theta_t_deg": _OPEN_ANGLE,
                    "theta_i_ul_deg": _OPEN_ANGLE,
                    "pairs": _INT1,
                    "d": _POS,
                }
            ),
            "pattern_grid": _GRID,
        }
    ),
    "islr-sweep": _obj(
        {
            "base": _BEAM,
            "sweep": _obj(
                {
                    "variable": {"enum": ["N", "ul_target_deg"]},
                    "values": {"type": "array", "items": _NUM, "minItems": 1},
                },
                ["variable", "values"],
            ),
            "structures": {
                "type": "array",
                "items": {"enum": sorted(beamopt.STRUCTURES)},
                "minItems": 1,
            },
            "seed": _SEED,
            "n_seeds": _INT1,
            "mainlobe": {"enum": ["target-box", "auto"]},
            "exclude_dl_target": {"type": "boolean"},
            "pattern_grid": _GRID,
        }
    ),
    "crack": _obj(
        {
            "M": _INT1,
            "K": _INT1,
            "N": _INT1,
            "snr_db": _NUM,
            "trials": _INT1,
            "seed": _SEED,
            "phase_profile": {"enum": list(crack.PHASE_PROFILES)},
            "estimation_noise": _NONNEG,
            "precoders": {
                "type": "array",
                "items": {"enum": list(crack.PRECODERS)},
                "minItems": 1,
                "uniqueItems": True,
            },
            "bootstrap": _obj(
                {
                    "confidence": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "resamples": _INT1,
                }
            ),
        }
    ),
}

SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "parameters": {"type": "object"},
        "output": _obj({"dir": {"type": "string", "minLength": 1}}),
        "metadata": {"type": "object"},
    },
    "required": ["experiment"],
    "additionalProperties": False,
}

# --------------------------------------------------------------------------
# defaults

_FIG5 = {
    "theta_b_deg": 20.0,
    "theta_u_deg": 40.0,
    "dl_target_deg": 40.0,
    "ul_target_deg": -50.0,
    "N": 96,
    "d": 0.5,
    "structure": "three-element",
    "placement": "consecutive",
    "halfwidth_deg": 0.5,
    "grid": {"start_deg": -90.0, "stop_deg": 90.0, "step_deg": 0.5},
    "sidelobe_weight": [2.0, 1.0],
    "null_weight": 1000.0,
    "null_halfwidth_deg": 1.0,
    "init": "random",
    "max_iters": 3000,
    "tol": 1e-8,
    "restarts": 8,
    "window": 20,
    "method": "gd",
    "seed": 0,
}

_SWEEP_BASE = dict(
    _FIG5,
    halfwidth_deg=2.0,
    sidelobe_weight=[1.0, 1.0],
    null_weight=1.0,
    method="cg",
)

_FINE = {"start_deg": -90.0, "stop_deg": 90.0, "step_deg": 0.1}

DEFAULTS = {
    "compose": {
        "device": "isolator",
        "elements": [{"line_deg": 30.0}, {"line_deg": -45.0}],
        "psi_deg": 0.0,
        "X3": 0.0,
        "Z0": multiport.ImpedanceTwoPort.__dataclass_fields__["Z0"].default,
    },
    "optimize": _FIG5,
    "beampattern": {
        "design": "optimized",
        "optimize": _FIG5,
        "star": {
            "theta_i_deg": 20.0,
            "theta_t_deg": 40.0,
            "theta_i_ul_deg": -50.0,
            "pairs": 64,
            "d": 0.5,
        },
        "pattern_grid": _FINE,
    },
    "islr-sweep": {
        "base": _SWEEP_BASE,
        "sweep": {"variable": "N", "values": [24, 48, 96, 192]},
        "structures": ["three-element"],
        "seed": 0,
        "n_seeds": 5,
        "mainlobe": "target-box",
        "exclude_dl_target": True,
        "pattern_grid": _FINE,
    },
    "crack": {
        "M": 8,
        "K": 4,
        "N": 64,
        "snr_db": 10.0,
        "trials": 2000,
        "seed": 0,
        "phase_profile": "crack",
        "estimation_noise": 0.0,
        "precoders": ["mrt", "zf"],
        "bootstrap": {"confidence": 0.99, "resamples": 2000},
    },
}

# nested blocks whose defaults are merged key by key
_NESTED = {
    "optimize": ("grid",),
    "beampattern": ("optimize", "star", "pattern_grid"),
    "islr-sweep": ("base", "pattern_grid"),
    "crack": ("bootstrap",),
}


def default_config(experiment: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown experiment {experiment!r}")
    return {
        "experiment": experiment,
        "parameters": copy.deepcopy(DEFAULTS[experiment]),
        "output": {"dir": "out"},
    }


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


# --------------------------------------------------------------------------
# validation


def _path(parts) -> str:
    s = ""
    for p in parts:
        s += f"[{p}]" if isinstance(p, int) else (f".{p}" if s else str(p))
    return s or "<root>"


def _schema_errors(schema, instance, prefix=()) -> list[str]:
    v = Draft202012Validator(schema)
    out = []
    for e in sorted(v.iter_errors(instance), key=lambda e: list(map(str, e.absolute_path))):
        out.append(f"{_path(list(prefix) + list(e.absolute_path))}: {e.message}")
    return out


def _check_beam(b: dict, where: str) -> list[str]:
    diags = []
    structure = b.get("structure", "three-element")
    g = len(beamopt.STRUCTURES.get(structure, ()))
    N = b.get("N")
    if isinstance(N, int) and g and N % g:
        diags.append(f"{where}.N: {structure} groups need N divisible by {g}, got {N}")
    grid = b.get("grid")
    if isinstance(grid, dict):
        diags += _check_grid(grid, f"{where}.grid")
    return diags


def _check_grid(g: dict, where: str) -> list[str]:
    a, b = g.get("start_deg"), g.get("stop_deg")
    if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not a < b:
        return [f"{where}: start_deg must be below stop_deg"]
    return []


def validate(config) -> list[str]:
    """Field-level diagnostics; an empty list means the config will run."""
    if not isinstance(config, dict):
        return ["<root>: config must be a JSON object"]
    diags = _schema_errors(SCHEMA, config)
    exp = config.get("experiment")
    if exp not in EXPERIMENTS:
        return diags
    params = config.get("parameters", {})
    if not isinstance(params, dict):
        return diags
    diags += _schema_errors(_PARAMS[exp], params, ("parameters",))
    if diags:
        return diags
    p = _merge(DEFAULTS[exp], params)
    if exp == "compose":
        n = len(p["elements"])
        need = {"isolator": 2, "gyrator": 2, "circulator": 3}.get(p["device"])
        if need is not None and n != need:
            diags.append(f"parameters.elements: {p['device']} groups take {need} elements, got {n}")
    elif exp == "optimize":
        diags += _check_beam(p, "parameters")
    elif exp == "beampattern":
        if p["design"] == "optimized":
            diags += _check_beam(p["optimize"], "parameters.optimize")
        diags += _check_grid(p["pattern_grid"], "parameters.pattern_grid")
    elif exp == "islr-sweep":
        diags += _check_grid(p["pattern_grid"], "parameters.pattern_grid")
        sw = p["sweep"]
        for i, v in enumerate(sw["values"]):
            w = f"parameters.sweep.values[{i}]"
            if sw["variable"] == "N":
                if v != int(v) or v < 1:
                    diags.append(f"{w}: N must be a positive integer, got {v}")
                    continue
                for s in p["structures"]:
                    diags += _check_beam(dict(p["base"], N=int(v), structure=s), w)
            elif not -90 <= v <= 90:
                diags.append(f"{w}: angle {v} deg outside [-90, 90]")
        for s in p["structures"]:
            if sw["variable"] != "N":
                diags += _check_beam(dict(p["base"], structure=s), "parameters.base")
    elif exp == "crack":
        if p["K"] > p["M"]:
            diags.append(f"parameters.K: need K <= M, got K={p['K']}, M={p['M']}")
        if p["N"] % 2:
            diags.append(f"parameters.N: two-element groups need even N, got {p['N']}")
        if not math.isfinite(p["snr_db"]):
            diags.append("parameters.snr_db: must be finite")
    return diags


def resolve(config: dict, seed: int | None = None, out_dir: str | None = None) -> dict:
    """Validated config with defaults filled in and CLI overrides applied."""
    diags = validate(config)
    if diags:
        raise ConfigError(diags)
    exp = config["experiment"]
    params = _merge(DEFAULTS[exp], config.get("parameters", {}))
    if seed is not None:
        if exp in ("optimize", "islr-sweep", "crack"):
            params["seed"] = int(seed)
        if exp == "beampattern":
            params["optimize"]["seed"] = int(seed)
    if exp == "beampattern" and params["design"] == "star":
        params.pop("optimize")
    if exp == "beampattern" and params["design"] == "optimized":
        params.pop("star")
    out = {"dir": (config.get("output") or {}).get("dir", "out")}
    if out_dir is not None:
        out["dir"] = str(out_dir)
    return {"experiment": exp, "parameters": params, "output": out}


# --------------------------------------------------------------------------
# model construction (degrees -> radians happens here only)


def _grid(g: dict) -> np.ndarray:
    n = int(math.floor((g["stop_deg"] - g["start_deg"]) / g["step_deg"] + 1e-9)) + 1
    deg = np.round(g["start_deg"] + g["step_deg"] * np.arange(n), 10)
    return np.radians(deg)


def _beam_spec(b: dict) -> beamopt.BeamSpec:
    r = math.radians
    return beamopt.BeamSpec.box(
        r(b["theta_b_deg"]),
        r(b["theta_u_deg"]),
        r(b["dl_target_deg"]),
        r(b["ul_target_deg"]),
        grid=_grid(b["grid"]),
        halfwidth=r(b["halfwidth_deg"]),
        structure=b["structure"],
        sidelobe_weight=tuple(b["sidelobe_weight"]),
        null_weight=b["null_weight"],
        null_halfwidth=r(b["null_halfwidth_deg"]),
    )


def _optimize(b: dict, threads: int = 1) -> beamopt.OptimizerTrace:
    return beamopt.optimize(
        _beam_spec(b),
        b["N"],
        b["d"],
        init=b["init"],
        max_iters=b["max_iters"],
        tol=b["tol"],
        seed=b["seed"],
        restarts=b["restarts"],
        window=b["window"],
        method=b["method"],
        placement=b["placement"],
        threads=threads,
    )


def _element(e: dict, index: int) -> multiport.TwoPortElement:
    if "line_deg" in e:
        return multiport.transmission_line_element(math.radians(e["line_deg"]))
    if "Z11" in e:
        z = multiport.ImpedanceTwoPort(
            complex(*e["Z11"]),
            complex(*e["Z12"]),
            complex(*e["Z22"]),
            e.get("Z0", multiport.ImpedanceTwoPort.__dataclass_fields__["Z0"].default),
        )
        return multiport.z_to_s(z, index)
    return multiport.TwoPortElement(complex(*e["A"]), complex(*e["B"]), complex(*e["D"]))


# --------------------------------------------------------------------------
# serialisation


def _cpair(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _cmatrix(S) -> list:
    return [[_cpair(z) for z in row] for row in np.asarray(S)]


def _jfloat(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _embedded(cfg: dict) -> dict:
    # the output location is left out so artifacts do not depend on where they live
    return {k: v for k, v in cfg.items() if k != "output"}


def _metadata(cfg: dict) -> dict:
    return {"toolkit": "nrris", "version": __version__, "config": _embedded(cfg)}


def _write_json(path: Path, cfg: dict, body: dict):
    doc = {"metadata": _metadata(cfg), **body}
    path.write_text(json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n")


def _write_csv(path: Path, cfg: dict, header, rows):
    buf = io.StringIO()
    buf.write(f"# nrris {__version__}\n")
    buf.write("# config: " + json.dumps(_embedded(cfg), separators=(",", ":"), allow_nan=False) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())


def load_config(path) -> dict:
    """Read a config, or the embedded config of a JSON/CSV artifact."""
    text = Path(path).read_text()
    if text.startswith("# nrris"):
        for line in text.splitlines():
            if line.startswith("# config: "):
                return json.loads(line[len("# config: "):])
        raise ConfigError(f"{path}: no embedded config line")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(doc, dict) and "metadata" in doc and isinstance(doc["metadata"], dict) \
            and "config" in doc["metadata"]:
        return doc["metadata"]["config"]
    return doc


# --------------------------------------------------------------------------
# experiments


def _run_compose(cfg, out: Path, threads: int) -> list[Path]:
    p = cfg["parameters"]
    dev = p["device"]
    body = {"device": dev}
    if dev == "terminated-circulator":
        Z0 = p["Z0"]
        if "phase_difference_deg" in p:
            X3 = multiport.reactance_for_phase_difference(math.radians(p["phase_difference_deg"]), Z0)
        else:
            X3 = float(p["X3"])
        G = multiport.terminated_circulator_group(math.radians(p["psi_deg"]), X3, Z0)
        body["X3"] = _jfloat(X3)
        S = G.S
        oracle = None
    else:
        els = [_element(e, i) for i, e in enumerate(p["elements"])]
        fn = {
            "isolator": multiport.compose_isolator_group,
            "gyrator": multiport.compose_gyrator_group,
            "circulator": multiport.compose_circulator_group,
        }[dev]
        device = {"isolator": multiport.ISOLATOR, "gyrator": multiport.GYRATOR,
                  "circulator": multiport.CIRCULATOR}[dev]
        S = fn(*els).S
        oracle = multiport.compose_group_oracle(els, device).S
        body["elements"] = [
            {"A": _cpair(e.A), "B": _cpair(e.B), "D": _cpair(e.D)} for e in els
        ]
    body["matrix"] = _cmatrix(S)
    if oracle is not None:
        body["oracle_matrix"] = _cmatrix(oracle)
        body["max_oracle_deviation"] = float(np.max(np.abs(S - oracle)))
    body["reciprocal"] = bool(np.allclose(S, S.T, rtol=0, atol=1e-12))
    body["unitary"] = multiport.is_unitary(S)
    body["passivity_margin"] = multiport.passivity_margin(S)
    path = out / "compose.json"
    _write_json(path, cfg, body)
    return [path]


def _trace_rows(tr):
    return [(k, f, a, b) for k, f, a, b in tr.rows()]


def _phase_body(tr, b) -> dict:
    params = beamopt.phases_to_group_params(tr.phi, b["structure"], b["placement"])
    groups = []
    for prm in params:
        if isinstance(prm, beamopt.TerminatedPair):
            groups.append({"psi": prm.psi, "X3": _jfloat(prm.X3), "Z0": prm.Z0})
        else:
            groups.append({"betas": [float(x) for x in prm.betas]})
    return {
        "phi": [_cpair(z) for z in tr.phi],
        "groups": groups,
        "final_objective": tr.final_objective,
        "alpha": tr.final_alpha,
        "alpha_prime": tr.final_alpha_ul,
        "iterations": tr.iterations,
        "converged": tr.converged,
        "best_restart": tr.restart,
        "restart_objectives": list(tr.restart_objectives),
    }


def _run_optimize(cfg, out: Path, threads: int) -> list[Path]:
    b = cfg["parameters"]
    tr = _optimize(b, threads)
    p1, p2 = out / "trace.csv", out / "phases.json"
    _write_csv(p1, cfg, ("iter", "objective", "alpha", "alpha_prime"), _trace_rows(tr))
    _write_json(p2, cfg, _phase_body(tr, b))
    return [p1, p2]


def _pattern_rows(p: metrics.Beampattern):
    return [(round(math.degrees(a), 10), v) for a, v in zip(p.grid, p.power_db)]


def _run_beampattern(cfg, out: Path, threads: int) -> list[Path]:
    p = cfg["parameters"]
    fine = _grid(p["pattern_grid"])
    paths = []
    if p["design"] == "star":
        s = p["star"]
        r = math.radians
        S = surface.star_closed_form(r(s["theta_i_deg"]), r(s["theta_t_deg"]),
                                     r(s["theta_i_ul_deg"]), s["pairs"], s["d"])
        pats = {
            "dl": metrics.sample_pattern(S, r(s["theta_i_deg"]), fine, "1->2"),
            "ul": metrics.sample_pattern(S, r(s["theta_t_deg"]), fine, "2->1"),
        }
    else:
        b = p["optimize"]
        tr = _optimize(b, threads)
        S = beamopt.surface_from_phases(tr.phi, b["structure"], b["d"], b["placement"])
        pats = {
            "dl": metrics.sample_pattern(S, math.radians(b["theta_b_deg"]), fine),
            "ul": metrics.sample_pattern(S, math.radians(b["theta_u_deg"]), fine),
        }
        ph = out / "phases.json"
        _write_json(ph, cfg, _phase_body(tr, b))
        paths.append(ph)
    summary = {}
    for name, pat in pats.items():
        path = out / f"{name}_pattern.csv"
        _write_csv(path, cfg, ("angle_deg", "power_db"), _pattern_rows(pat))
        paths.append(path)
        summary[name] = {"peak_deg": round(math.degrees(metrics.peak_angle(pat)), 10)}
    if p["design"] == "optimized":
        b = p["optimize"]
        ul = pats["ul"]
        k = int(np.argmin(np.abs(fine - math.radians(b["theta_b_deg"]))))
        summary["ul"]["reciprocal_level_db"] = float(ul.power_db[k])
    sp = out / "summary.json"
    _write_json(sp, cfg, {"patterns": summary})
    paths.append(sp)
    return paths


def _islr_point(b: dict, p: dict, fine: np.ndarray) -> float:
    tr = _optimize(b)
    S = beamopt.surface_from_phases(tr.phi, b["structure"], b["d"], b["placement"])
    pat = metrics.sample_pattern(S, math.radians(b["theta_u_deg"]), fine)
    hw = math.radians(b["halfwidth_deg"])
    ul, dl = math.radians(b["ul_target_deg"]), math.radians(b["dl_target_deg"])
    excl = [(dl - hw, dl + hw)] if p["exclude_dl_target"] else []
    main = (ul - hw, ul + hw) if p["mainlobe"] == "target-box" else "auto"
    return metrics.islr(pat, main, excl)


def _run_islr_sweep(cfg, out: Path, threads: int) -> list[Path]:
    p = cfg["parameters"]
    fine = _grid(p["pattern_grid"])
    var = p["sweep"]["variable"]
    jobs = []
    for s in p["structures"]:
        for v in p["sweep"]["values"]:
            for i in range(p["n_seeds"]):
                b = dict(p["base"], structure=s, seed=p["seed"] + i)
                b[var] = int(v) if var == "N" else float(v)
                jobs.append(b)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            vals = list(pool.map(lambda b: _islr_point(b, p, fine), jobs))
    else:
        vals = [_islr_point(b, p, fine) for b in jobs]
    rows = [(b["structure"], b["N"], b["ul_target_deg"], b["seed"], v) for b, v in zip(jobs, vals)]
    path = out / "islr.csv"
    _write_csv(path, cfg, ("structure", "N", "ul_target_deg", "seed", "islr_db"), rows)
    med = {}
    for s in p["structures"]:
        med[s] = [
            {var: v, "median_islr_db": float(np.median([r[4] for r in rows
                                                         if r[0] == s and r[1 if var == "N" else 2] == v]))}
            for v in (int(x) if var == "N" else float(x) for x in p["sweep"]["values"])
        ]
    sp = out / "islr_summary.json"
    _write_json(sp, cfg, {"variable": var, "medians": med})
    return [path, sp]


def _run_crack(cfg, out: Path, threads: int) -> list[Path]:
    p = cfg["parameters"]
    sc = crack.CrackScenario(
        M=p["M"], K=p["K"], N=p["N"], snr_db=p["snr_db"], trials=p["trials"], seed=p["seed"],
        phase_profile=p["phase_profile"], estimation_noise=p["estimation_noise"],
    )
    rows, summaries = [], []
    for pre in p["precoders"]:
        base = crack.ergodic_rates(crack.with_mode(sc, "reciprocal-baseline"), pre, threads)
        att = crack.ergodic_rates(sc, pre, threads)
        for mode, res in (("reciprocal-baseline", base), ("nr-crack", att)):
            rows += [(t, pre, mode, v) for t, v in enumerate(res.rates)]
        s = crack.summarize(base, att)
        s["bootstrap_ci"] = list(crack.bootstrap_gap(
            base, att, p["bootstrap"]["confidence"], p["bootstrap"]["resamples"], p["seed"]))
        summaries.append(s)
    p1, p2 = out / "rates.csv", out / "crack_summary.json"
    _write_csv(p1, cfg, ("trial", "precoder", "mode", "sum_rate_bps_hz"), rows)
    _write_json(p2, cfg, {"summaries": summaries})
    return [p1, p2]


_RUNNERS = {
    "compose": _run_compose,
    "beampattern": _run_beampattern,
    "optimize": _run_optimize,
    "islr-sweep": _run_islr_sweep,
    "crack": _run_crack,
}


def run(config: dict, out_dir=None, seed: int | None = None, threads: int = 1) -> list[Path]:
    """Validate, resolve and execute ``config``; returns the written files."""
    cfg = resolve(config, seed, out_dir)
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[cfg["experiment"]](cfg, out, max(1, int(threads)))


# --------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nrris", description="Non-reciprocal RIS experiments.")
    ap.add_argument("--version", action="version", version=f"nrris {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("validate",):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config or an artifact with an embedded config")
        if name != "validate":
            sp.add_argument("--out", help="output directory (overrides the config)")
            sp.add_argument("--seed", type=int, help="base seed (overrides the config)")
            sp.add_argument("--threads", type=int, default=1, help="worker threads")
        if name in EXPERIMENTS:
            sp.add_argument("--print-default", action="store_true",
                            help="print the default config and exit")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if getattr(args, "print_default", False):
            print(json.dumps(default_config(args.command), indent=2))
            return EXIT_OK
        if args.config:
            config = load_config(args.config)
        elif args.command == "validate":
            raise ConfigError("validate needs --config")
        else:
            config = default_config(args.command)
        if args.command == "validate":
            diags = validate(config)
            for d in diags:
                print(d)
            if not diags:
                print("ok")
            return EXIT_CONFIG if diags else EXIT_OK
        if config.get("experiment", args.command) != args.command:
            raise ConfigError(
                f"experiment: config is for {config.get('experiment')!r}, "
                f"not {args.command!r}"
            )
        config = dict(config, experiment=args.command)
        config.pop("metadata", None)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must be an unsigned 64-bit integer")
        paths = run(config, args.out, args.seed, args.threads)
        for p in paths:
            print(p)
        return EXIT_OK
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ZeroDivisionError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
