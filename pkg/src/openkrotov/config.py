"""JSON run configuration for the command-line front end.

Matrices are nested lists of ``[re, im]`` pairs, or a string naming a JSON
file (relative to the config file) that holds such a list. After parsing,
every matrix is inline, so ``parse(serialize(parse(doc))) == parse(doc)``.

Example::

    {
      "model": {"name": "TwoLevelDamping", "params": {"gamma": 1.0}},
      "grid": {"T": 5.0, "N": 500},
      "objective": {"kind": "state", "initial": {"basis": 0}, "target": {"basis": 1}},
      "guess": [{"form": "sin2", "amplitude": 0.1}],
      "options": {"lambda": 1.0, "max_iterations": 200, "fidelity_goal": 0.99}
    }
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import LindbladGenerator
from .dynamics import ControlField, TimeGrid, read_csv
from .functionals import BasisStrategy, Gate, StateToState
from .krotov import KrotovOptions, LambdaAdaptation, ShapeFunction, ShapeKind
from .models import ModelSpec, build_model, logical_subspace
from .spectral import SpectralFilter

Matrix = tuple[tuple[complex, ...], ...]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


_GATES = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
    "H": np.array([[1, 1], [1, -1]]) / np.sqrt(2),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    "CZ": np.diag([1, 1, 1, -1]),
}


def _freeze(m) -> Matrix:
    m = np.asarray(m, dtype=complex)
    return tuple(tuple(complex(x) for x in row) for row in m)


def _thaw(m: Matrix) -> np.ndarray:
    return np.array(m, dtype=complex)


def _dump_matrix(m: Matrix) -> list:
    return [[[x.real, x.imag] for x in row] for row in m]


class _Reader:
    def __init__(self, base_dir: Path | None):
        self.base_dir = base_dir

    def path(self, name: str) -> Path:
        p = Path(name)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        if not p.is_file():
            raise ConfigError(f"file not found: {p}")
        return p

    def matrix(self, value, what: str, dim: int | None = None) -> Matrix:
        if isinstance(value, str):
            if value in _GATES:
                return _freeze(_GATES[value])
            try:
                value = json.loads(self.path(value).read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{what}: {value} is not valid JSON ({exc})") from None
        if isinstance(value, dict):
            if dim is None:
                raise ConfigError(f"{what}: state shorthand needs a known dimension")
            if "basis" in value:
                k = int(value["basis"])
                if not 0 <= k < dim:
                    raise ConfigError(f"{what}: basis index {k} out of range")
                m = np.zeros((dim, dim), dtype=complex)
                m[k, k] = 1
                return _freeze(m)
            if value.get("mixed"):
                return _freeze(np.eye(dim) / dim)
            raise ConfigError(f"{what}: unknown state shorthand {value}")
        try:
            arr = np.array(value, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{what}: matrices must be nested [re, im] pairs") from None
        if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
            raise ConfigError(f"{what}: expected a square array of [re, im] pairs, got shape {arr.shape}")
        return _freeze(arr[..., 0] + 1j * arr[..., 1])


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str  # "state" or "gate"
    initial: Matrix | None = None
    target: Matrix | None = None
    gate: Matrix | None = None
    basis: str = "reduced3"
    weights: tuple[float, ...] | None = None
    subspace: tuple[int, ...] | None = None


@dataclass(frozen=True)
class GuessConfig:
    form: str
    amplitude: float = 0.0
    t0: float | None = None
    sigma: float | None = None
    frequency: float = 0.0
    phase: float = 0.0
    path: str | None = None
    column: int | None = None


@dataclass(frozen=True)
class RunConfig:
    grid: tuple[float, int]
    model: tuple[str, tuple[tuple[str, Any], ...]] | None = None
    drift: Matrix | None = None
    controls: tuple[Matrix, ...] = ()
    channels: tuple[tuple[Matrix, float], ...] = ()
    initial_state: Matrix | None = None
    target_state: Matrix | None = None
    objective: ObjectiveConfig | None = None
    guess: tuple[GuessConfig, ...] = ()
    options: tuple[tuple[str, Any], ...] = ()
    spectral_filters: tuple[tuple[float, tuple[tuple[float, float, float], ...]], ...] = ()
    t_list: tuple[float, ...] = ()
    output_dir: str | None = None
    seed: int = 0
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    # Builders for the library objects described by this config.
    def generator(self) -> LindbladGenerator:
        if "gen" not in self._cache:
            if self.model is not None:
                name, params = self.model
                gen = build_model(ModelSpec(name, dict(params)))
            else:
                gen = LindbladGenerator(
                    _thaw(self.drift),
                    tuple(_thaw(h) for h in self.controls),
                    tuple((_thaw(a), rate) for a, rate in self.channels),
                )
            self._cache["gen"] = gen
        return self._cache["gen"]

    def time_grid(self) -> TimeGrid:
        return TimeGrid(*self.grid)

    def krotov_options(self) -> KrotovOptions:
        opts = dict(self.options)
        shape = dict(opts.pop("shape", ()))
        return KrotovOptions(
            lambda_a=opts.get("lambda", 1.0),
            max_iterations=int(opts.get("max_iterations", 100)),
            fidelity_goal=opts.get("fidelity_goal", 0.999),
            delta_f_tolerance=opts.get("delta_f_tolerance", 0.0),
            shape=ShapeFunction(ShapeKind(shape.get("kind", "sin2")), shape.get("ramp_fraction", 0.1)),
            lambda_adaptation=LambdaAdaptation(opts.get("lambda_adaptation", "fixed")),
            u_max=opts.get("u_max"),
        )

    def filters(self) -> list[SpectralFilter]:
        return [SpectralFilter(alpha, bands) for alpha, bands in self.spectral_filters]

    def control_objective(self):
        obj = self.objective
        if obj is None:
            raise ConfigError("no objective given")
        gen = self.generator()
        if obj.kind == "state":
            return StateToState(_thaw(obj.initial), _thaw(obj.target))
        subspace = obj.subspace
        if subspace is None and self.model is not None:
            subspace = tuple(logical_subspace(self.model[0]))
            if len(subspace) != len(obj.gate):
                subspace = None
        return Gate(
            _thaw(obj.gate), BasisStrategy(obj.basis), obj.weights, subspace, full_dim=gen.dim
        )

    def guess_field(self) -> ControlField:
        grid = self.time_grid()
        t = grid.control_times
        tf = grid.t_final
        rows = []
        for g in self.guess:
            if g.form == "constant":
                rows.append(np.full(t.shape, g.amplitude))
            elif g.form == "gaussian":
                t0 = tf / 2 if g.t0 is None else g.t0
                sigma = tf / 6 if g.sigma is None else g.sigma
                rows.append(g.amplitude * np.exp(-0.5 * ((t - t0) / sigma) ** 2))
            elif g.form == "sin2":
                rows.append(g.amplitude * np.sin(np.pi * t / tf) ** 2 * np.cos(g.frequency * t + g.phase))
            else:  # file
                header, data = read_csv(Path(g.path).read_text())
                col = g.column if g.column is not None else len(rows) + 1
                if data.shape[0] != grid.n_steps or col >= data.shape[1]:
                    raise ConfigError(f"pulse file {g.path} does not match the grid or lacks column {col}")
                rows.append(data[:, col])
        return ControlField(grid, np.array(rows, dtype=float).reshape(len(rows), grid.n_steps))


_GUESS_FORMS = ("constant", "gaussian", "sin2", "file")
_OPTION_KEYS = {"lambda", "max_iterations", "fidelity_goal", "delta_f_tolerance", "shape", "lambda_adaptation", "u_max"}
_TOP_KEYS = {
    "model", "matrices", "grid", "initial_state", "target_state", "objective", "guess",
    "options", "spectral_filter", "scan", "output_dir", "seed",
}


def parse_config(doc: dict, base_dir: str | os.PathLike | None = None) -> RunConfig:
    """Validate a config document and return the normalized `RunConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    reader = _Reader(Path(base_dir) if base_dir is not None else None)
    try:
        cfg = _parse(doc, reader)
        _validate(cfg)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _parse(doc: dict, reader: _Reader) -> RunConfig:
    if "grid" not in doc:
        raise ConfigError("missing 'grid'")
    grid = (float(doc["grid"]["T"]), int(doc["grid"]["N"]))
    TimeGrid(*grid)
    kwargs: dict[str, Any] = {"grid": grid}
    if ("model" in doc) == ("matrices" in doc):
        raise ConfigError("give exactly one of 'model' and 'matrices'")
    if "model" in doc:
        params = doc["model"].get("params", {})
        spec = ModelSpec(doc["model"]["name"], params)
        kwargs["model"] = (spec.name, tuple(sorted(dict(params).items())))
    else:
        mats = doc["matrices"]
        kwargs["drift"] = reader.matrix(mats["drift"], "drift")
        kwargs["controls"] = tuple(
            reader.matrix(h, f"control {j}") for j, h in enumerate(mats.get("controls", []))
        )
        kwargs["channels"] = tuple(
            (reader.matrix(c["operator"], f"channel {k}"), float(c["rate"]))
            for k, c in enumerate(mats.get("channels", []))
        )
    cfg = RunConfig(**kwargs)
    dim = cfg.generator().dim
    n_controls = cfg.generator().n_controls

    for key in ("initial_state", "target_state"):
        if doc.get(key) is not None:
            kwargs[key] = reader.matrix(doc[key], key, dim)
    if doc.get("objective") is not None:
        kwargs["objective"] = _parse_objective(doc["objective"], reader, dim)
    guesses = doc.get("guess", [{"form": "constant", "amplitude": 0.0}] * n_controls)
    if isinstance(guesses, dict):
        guesses = [guesses]
    kwargs["guess"] = tuple(_parse_guess(g, reader) for g in guesses)
    if len(kwargs["guess"]) != n_controls:
        raise ConfigError(f"expected {n_controls} guess entries, got {len(kwargs['guess'])}")
    opts = dict(doc.get("options", {}))
    unknown = set(opts) - _OPTION_KEYS
    if unknown:
        raise ConfigError(f"unknown option keys: {', '.join(sorted(unknown))}")
    if "shape" in opts:
        shape = dict(opts["shape"])
        opts["shape"] = tuple(sorted(shape.items()))
    kwargs["options"] = tuple(sorted(opts.items()))
    filters = doc.get("spectral_filter")
    if filters is not None:
        if isinstance(filters, dict):
            filters = [filters]
        kwargs["spectral_filters"] = tuple(
            (
                float(f["alpha"]),
                tuple(
                    (float(lo), math.inf if hi is None else float(hi), float(v))
                    for lo, hi, v in f["bands"]
                ),
            )
            for f in filters
        )
    if doc.get("scan") is not None:
        kwargs["t_list"] = tuple(float(t) for t in doc["scan"]["T_list"])
    if doc.get("output_dir") is not None:
        kwargs["output_dir"] = str(doc["output_dir"])
    kwargs["seed"] = int(doc.get("seed", 0))
    return RunConfig(**kwargs)


def _parse_objective(obj: dict, reader: _Reader, dim: int) -> ObjectiveConfig:
    kind = obj.get("kind")
    if kind == "state":
        return ObjectiveConfig(
            "state",
            initial=reader.matrix(obj["initial"], "objective.initial", dim),
            target=reader.matrix(obj["target"], "objective.target", dim),
        )
    if kind == "gate":
        weights = obj.get("weights")
        subspace = obj.get("subspace")
        return ObjectiveConfig(
            "gate",
            gate=reader.matrix(obj["gate"], "objective.gate"),
            basis=BasisStrategy(obj.get("basis", "reduced3")).value,
            weights=None if weights is None else tuple(float(w) for w in weights),
            subspace=None if subspace is None else tuple(int(i) for i in subspace),
        )
    raise ConfigError(f"objective kind must be 'state' or 'gate', got {kind!r}")


def _parse_guess(g: dict, reader: _Reader) -> GuessConfig:
    form = g.get("form")
    if form not in _GUESS_FORMS:
        raise ConfigError(f"guess form must be one of {_GUESS_FORMS}, got {form!r}")
    if form == "file":
        return GuessConfig("file", path=str(reader.path(g["path"]).resolve()), column=g.get("column"))
    known = {"form", "amplitude", "t0", "sigma", "frequency", "phase"}
    unknown = set(g) - known
    if unknown:
        raise ConfigError(f"unknown guess keys: {', '.join(sorted(unknown))}")
    return GuessConfig(
        form,
        amplitude=float(g.get("amplitude", 0.0)),
        t0=None if g.get("t0") is None else float(g["t0"]),
        sigma=None if g.get("sigma") is None else float(g["sigma"]),
        frequency=float(g.get("frequency", 0.0)),
        phase=float(g.get("phase", 0.0)),
    )


def _validate(cfg: RunConfig):
    """Build every derived object once so that errors surface at parse time."""
    cfg.generator()
    cfg.krotov_options()
    cfg.filters()
    cfg.guess_field()
    dim = cfg.generator().dim
    for m in (cfg.initial_state, cfg.target_state):
        if m is not None and len(m) != dim:
            raise ConfigError(f"state dimension {len(m)} does not match system dimension {dim}")
    if cfg.objective is not None:
        cfg.control_objective()
    if cfg.t_list:
        ts = list(cfg.t_list)
        if len(set(ts)) != len(ts):
            raise ConfigError("scan T_list contains duplicates")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError("scan T_list must be increasing")


def serialize_config(cfg: RunConfig) -> dict:
    """Inverse of `parse_config` on normalized configs."""
    doc: dict[str, Any] = {"grid": {"T": cfg.grid[0], "N": cfg.grid[1]}}
    if cfg.model is not None:
        doc["model"] = {"name": cfg.model[0], "params": dict(cfg.model[1])}
    else:
        doc["matrices"] = {
            "drift": _dump_matrix(cfg.drift),
            "controls": [_dump_matrix(h) for h in cfg.controls],
            "channels": [{"operator": _dump_matrix(a), "rate": r} for a, r in cfg.channels],
        }
    for key in ("initial_state", "target_state"):
        m = getattr(cfg, key)
        if m is not None:
            doc[key] = _dump_matrix(m)
    obj = cfg.objective
    if obj is not None:
        if obj.kind == "state":
            doc["objective"] = {
                "kind": "state",
                "initial": _dump_matrix(obj.initial),
                "target": _dump_matrix(obj.target),
            }
        else:
            o = {"kind": "gate", "gate": _dump_matrix(obj.gate), "basis": obj.basis}
            if obj.weights is not None:
                o["weights"] = list(obj.weights)
            if obj.subspace is not None:
                o["subspace"] = list(obj.subspace)
            doc["objective"] = o
    guesses = []
    for g in cfg.guess:
        if g.form == "file":
            entry = {"form": "file", "path": g.path}
            if g.column is not None:
                entry["column"] = g.column
        else:
            entry = {"form": g.form, "amplitude": g.amplitude, "frequency": g.frequency, "phase": g.phase}
            if g.t0 is not None:
                entry["t0"] = g.t0
            if g.sigma is not None:
                entry["sigma"] = g.sigma
        guesses.append(entry)
    doc["guess"] = guesses
    opts = dict(cfg.options)
    if "shape" in opts:
        opts["shape"] = dict(opts["shape"])
    doc["options"] = opts
    if cfg.spectral_filters:
        doc["spectral_filter"] = [
            {"alpha": alpha, "bands": [[lo, None if math.isinf(hi) else hi, v] for lo, hi, v in bands]}
            for alpha, bands in cfg.spectral_filters
        ]
    if cfg.t_list:
        doc["scan"] = {"T_list": list(cfg.t_list)}
    if cfg.output_dir is not None:
        doc["output_dir"] = cfg.output_dir
    doc["seed"] = cfg.seed
    return doc


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc, path.parent)
