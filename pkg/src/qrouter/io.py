"""Scenario files, bundled reference tables and CSV readers."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .analysis import Estimate
from .router import NAMED_PHASES, RouterConfig, SignalQubit
from .source import CHANNELS, SourceParams

_PHASE = {"anyOf": [{"type": "number"}, {"enum": sorted(NAMED_PHASES)}]}
_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_POL = {"anyOf": [{"enum": ["H", "V", "D", "A", "R", "L"]}, {"type": "null"}]}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "source": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mu_signal": {"type": "number", "minimum": 0},
                "p_pair": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "pair_rate": {"type": "number", "minimum": 0},
                "rep_rate": {"type": "number", "exclusiveMinimum": 0},
                "eta": {"anyOf": [
                    {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    {"type": "object", "additionalProperties": False,
                     "properties": {c: {"type": "number", "exclusiveMinimum": 0, "maximum": 1}
                                    for c in CHANNELS}}]},
                "distinguishable": {"type": "boolean"},
            },
        },
        "router": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "controls": {"type": "array", "items": _PHASE, "minItems": 1},
                "regime": {"enum": ["basic_1_16", "swap_1_8", "feedforward_1_4"]},
                "control2_shift": {"enum": ["preparation", "waveplate"]},
                "compensate_output_phase": {"type": "boolean"},
            },
        },
        "signals": {
            "type": "array",
            "minItems": 1,
            "items": {"anyOf": [
                {"enum": ["H", "V", "D", "A", "R", "L"]},
                {"type": "object", "additionalProperties": False, "required": ["alpha", "beta"],
                 "properties": {"name": {"type": "string"}, "alpha": _COMPLEX, "beta": _COMPLEX}}]},
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["ideal", "monte_carlo"]},
                "duration_s": {"type": "number", "minimum": 0},
                "interval_s": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "include_accidentals": {"type": "boolean"},
                "projections": {"type": "object", "additionalProperties": False,
                                "properties": {"OUT1": _POL, "OUT2": _POL}},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "phi": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "start": {"type": "number"},
                "stop": {"type": "number"},
                "num": {"type": "integer", "minimum": 1},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string"}, "format": {"enum": ["csv", "json"]}},
        },
    },
}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    raw: dict

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        try:
            jsonschema.validate(doc, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ScenarioError(f"scenario invalid at {where}: {exc.message}") from None
        src = doc.get("source", {})
        if "p_pair" in src and "pair_rate" in src:
            raise ScenarioError("give either source.p_pair or source.pair_rate, not both")
        return cls(doc)

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    def source_params(self, duration: float | None = None) -> SourceParams:
        src = dict(self.section("source"))
        run = self.section("run")
        kw: dict[str, Any] = {}
        for key in ("mu_signal", "p_pair", "rep_rate", "eta", "distinguishable"):
            if key in src:
                kw[key] = src[key]
        if "pair_rate" in src:
            kw["p_pair"] = src["pair_rate"] / src.get("rep_rate", SourceParams().rep_rate)
        kw["duration"] = duration if duration is not None else run.get("duration_s", 120.0)
        return SourceParams(**kw)

    def controls(self) -> list:
        return self.section("router").get("controls", ["OFF", "ON"])

    def router_config(self, control) -> RouterConfig:
        r = self.section("router")
        return RouterConfig(control=control, regime=r.get("regime", "basic_1_16"),
                            control2_shift=r.get("control2_shift", "preparation"),
                            compensate_output_phase=r.get("compensate_output_phase", False))

    def signals(self) -> list[tuple[str, SignalQubit]]:
        out = []
        for i, s in enumerate(self.raw.get("signals", ["H", "V", "D", "A", "R", "L"])):
            if isinstance(s, str):
                out.append((s, SignalQubit.named(s)))
            else:
                q = SignalQubit(complex(*s["alpha"]), complex(*s["beta"]))
                out.append((s.get("name", f"custom{i}"), q))
        return out

    def sweep_grid(self) -> np.ndarray | None:
        sw = self.section("sweep")
        if "phi" in sw:
            return np.asarray(sw["phi"], dtype=float)
        if {"start", "stop", "num"} <= set(sw):
            return np.linspace(sw["start"], sw["stop"], sw["num"])
        return None

    @property
    def seed(self) -> int | None:
        return self.section("run").get("seed")


# -- tables -------------------------------------------------------------------

class TableError(ValueError):
    pass


def read_table(path_or_text, required: tuple[str, ...], numeric: tuple[str, ...]) -> list[dict]:
    """Read a CSV with ``#`` comments; errors name the offending line."""
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        name = str(path_or_text)
        text = Path(path_or_text).read_text()
    else:
        name, text = "<table>", path_or_text
    lines = [(i, line) for i, line in enumerate(text.splitlines(), start=1)
             if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise TableError(f"{name}: empty table")
    reader = csv.reader([line for _, line in lines])
    header = [h.strip() for h in next(reader)]
    missing = [c for c in required if c not in header]
    if missing:
        raise TableError(f"{name}:{lines[0][0]}: missing columns {missing}")
    rows = []
    for (lineno, _), cells in zip(lines[1:], reader):
        if len(cells) != len(header):
            raise TableError(f"{name}:{lineno}: expected {len(header)} fields, got {len(cells)}")
        row = dict(zip(header, (c.strip() for c in cells)))
        for col in numeric:
            if col not in row:
                continue
            try:
                row[col] = float(row[col])
            except ValueError:
                raise TableError(f"{name}:{lineno}: column {col!r} is not a number: {row[col]!r}") from None
            if not np.isfinite(row[col]):
                raise TableError(f"{name}:{lineno}: column {col!r} is not finite")
        row["_line"] = lineno
        rows.append(row)
    return rows


def bundled(name: str) -> Path:
    return Path(str(resources.files("qrouter") / "data" / name))


def load_routing_table(path=None) -> tuple[dict, dict]:
    """Per-state ``{"ON": Estimate, "OFF": Estimate}`` for raw and corrected P2."""
    rows = read_table(path or bundled("routing.csv"),
                      ("signal_state", "control_setting", "p2", "sigma_p2", "p2_corr", "sigma_p2_corr"),
                      ("p2", "sigma_p2", "p2_corr", "sigma_p2_corr"))
    raw: dict[str, dict] = {}
    corr: dict[str, dict] = {}
    for r in rows:
        ctrl = r["control_setting"].upper()
        if ctrl not in ("ON", "OFF"):
            raise TableError(f"line {r['_line']}: control_setting must be ON or OFF")
        raw.setdefault(r["signal_state"], {})[ctrl] = Estimate(r["p2"], r["sigma_p2"])
        corr.setdefault(r["signal_state"], {})[ctrl] = Estimate(r["p2_corr"], r["sigma_p2_corr"])
    return raw, corr


def load_fidelity_table(path=None) -> tuple[dict, dict]:
    rows = read_table(path or bundled("fidelity.csv"),
                      ("signal_state", "control_setting", "f", "sigma_f", "f_corr", "sigma_f_corr"),
                      ("f", "sigma_f", "f_corr", "sigma_f_corr"))
    raw, corr = {}, {}
    for r in rows:
        key = (r["signal_state"], r["control_setting"].upper())
        if key in raw:
            raise TableError(f"line {r['_line']}: duplicate row for {key}")
        raw[key] = Estimate(r["f"], r["sigma_f"])
        corr[key] = Estimate(r["f_corr"], r["sigma_f_corr"])
    return raw, corr


def load_fringe_table(path=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = read_table(path or bundled("fringe.csv"), ("phase_rad", "rel_counts", "error"),
                      ("phase_rad", "rel_counts", "error"))
    arr = np.array([[r["phase_rad"], r["rel_counts"], r["error"]] for r in rows])
    return arr[:, 0], arr[:, 1], arr[:, 2]


COUNT_COLUMNS = ("signal_state", "control_setting", "cc1", "cc2", "acc1", "acc2", "duration_s")


def load_count_table(path) -> list[dict]:
    rows = read_table(path, COUNT_COLUMNS, ("cc1", "cc2", "acc1", "acc2", "duration_s"))
    for r in rows:
        for col in ("cc1", "cc2"):
            if r[col] < 0 or r[col] != int(r[col]):
                raise TableError(f"{path}:{r['_line']}: {col} must be a non-negative integer")
        for col in ("acc1", "acc2", "duration_s"):
            if r[col] < 0:
                raise TableError(f"{path}:{r['_line']}: {col} must be non-negative")
        r.setdefault("regime", "interfering")
        if r["regime"] not in ("interfering", "detuned"):
            raise TableError(f"{path}:{r['_line']}: unknown regime {r['regime']!r}")
    return rows


def load_reference() -> dict:
    return json.loads(bundled("reference.json").read_text())
