"""
Experiment configuration files.

A configuration is a TOML document with the sections [model], [horizon],
[target], [optimizer], [run], [gradcheck] and [rankscan]; every section and
key is optional. Parsing is strict: unknown sections and keys, and values
of the wrong type, are rejected with a ConfigError pointing at the
offending line.

Example:

    [model]
    kind = "random_bath"
    n_b = 8

    [horizon]
    t_final = 1.0
    intervals = 4

    [target]
    kind = "identity"

    [run]
    seeds = [0, 1, 2]
"""
import logging
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple, Union

import numpy as np

from .errors import ConfigError, LandscapeError
from .model import (
    ControlSystem,
    TargetSpec,
    build_central_spin,
    build_custom,
    build_random_bath,
    build_random_closed,
    random_target,
)
from .optimizer import AscentConfig
from .types import ComplexMatrix

__all__ = [
    "MODEL_KINDS",
    "TARGET_KINDS",
    "RANKSCAN_SOURCES",
    "ModelConfig",
    "HorizonConfig",
    "TargetConfig",
    "RunConfig",
    "GradcheckConfig",
    "RankscanConfig",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]

logger = logging.getLogger(__name__)

MODEL_KINDS = ("central_spin", "random_bath", "custom", "closed")
TARGET_KINDS = ("random", "identity", "explicit")
RANKSCAN_SOURCES = ("random", "trajectory")

# Horizon used when [horizon] leaves a field out, per model kind.
_DEFAULT_HORIZON = {
    "central_spin": (100, 20.0),
    "random_bath": (4, 1.0),
    "custom": (4, 1.0),
    "closed": (4, 1.0),
}


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """
    The [model] section.

    Attributes:
        kind (str):         One of MODEL_KINDS.
        q_b (int):          Number of bath spins (central_spin).
        couplings (Optional[Tuple[float, ...]]): Coupling constants (central_spin); all 1.0 if unset.
        n_a (int):          Dimension of system A (custom, closed).
        n_b (int):          Dimension of system B (random_bath, custom).
        h0 (Optional[ComplexMatrix]):       Drift Hamiltonian (custom, closed).
        controls (Optional[ComplexMatrix]): Control Hamiltonians, shape (M, N_A, N_A) (custom, closed).
        random (bool):      Draw a random closed system per seed (closed).
        n_controls (int):   Number of random controls (closed with random = true).
    """

    kind: str = "central_spin"
    q_b: int = 3
    couplings: Optional[Tuple[float, ...]] = None
    n_a: int = 2
    n_b: int = 8
    h0: Optional[ComplexMatrix] = None
    controls: Optional[ComplexMatrix] = None
    random: bool = False
    n_controls: int = 1


@dataclass(frozen=True)
class HorizonConfig:
    """The [horizon] section; unset fields take the model kind's default."""

    t_final: Optional[float] = None
    intervals: Optional[int] = None


@dataclass(frozen=True, eq=False)
class TargetConfig:
    """The [target] section: kind is one of TARGET_KINDS; matrix is used for explicit targets."""

    kind: str = "random"
    matrix: Optional[ComplexMatrix] = None


@dataclass(frozen=True)
class RunConfig:
    """
    The [run] section.

    Attributes:
        seeds (Tuple[int, ...]): The seeds; one ascent per seed.
        output (str):            The output directory.
        jobs (int):              Maximum number of concurrent seeds.
        seed_offset (int):       Added to every seed (command line only).
        emit_trace (bool):       Write trace files.
        emit_spectra (bool):     Write gradient spectra files.
        emit_controls (bool):    Write final control files.
    """

    seeds: Tuple[int, ...] = (0,)
    output: str = "out"
    jobs: int = 1
    seed_offset: int = 0
    emit_trace: bool = True
    emit_spectra: bool = True
    emit_controls: bool = True


@dataclass(frozen=True)
class GradcheckConfig:
    """
    The [gradcheck] section.

    Attributes:
        draws (int):           Number of random (c, φ) draws.
        step (float):          Central-difference step.
        amplitude (float):     Controls are drawn uniformly from [-amplitude, amplitude].
        phi_amplitude (float): φ is drawn uniformly from [-phi_amplitude, phi_amplitude].
        tolerance (float):     Maximum accepted relative error.
    """

    draws: int = 20
    step: float = 1e-5
    amplitude: float = 1.0
    phi_amplitude: float = 1.0
    tolerance: float = 1e-5


@dataclass(frozen=True)
class RankscanConfig:
    """
    The [rankscan] section: source is one of RANKSCAN_SOURCES, points the
    number of random points per seed, amplitude their control range.
    """

    source: str = "random"
    points: int = 20
    amplitude: float = 1.0


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """
    ExperimentConfig is a parsed configuration file.

    Attributes:
        path (str):                  The file it was read from.
        model (ModelConfig):         The [model] section.
        horizon (HorizonConfig):     The [horizon] section.
        target (TargetConfig):       The [target] section.
        optimizer (AscentConfig):    The [optimizer] section.
        run (RunConfig):             The [run] section.
        gradcheck (GradcheckConfig): The [gradcheck] section.
        rankscan (RankscanConfig):   The [rankscan] section.
    """

    path: str
    model: ModelConfig = ModelConfig()
    horizon: HorizonConfig = HorizonConfig()
    target: TargetConfig = TargetConfig()
    optimizer: AscentConfig = AscentConfig()
    run: RunConfig = RunConfig()
    gradcheck: GradcheckConfig = GradcheckConfig()
    rankscan: RankscanConfig = RankscanConfig()

    def seeds(self) -> List[int]:
        """Returns the effective seeds, seed + seed_offset."""
        return [s + self.run.seed_offset for s in self.run.seeds]

    def horizon_pair(self) -> Tuple[int, float]:
        intervals, t_final = _DEFAULT_HORIZON[self.model.kind]
        if self.horizon.intervals is not None:
            intervals = self.horizon.intervals
        if self.horizon.t_final is not None:
            t_final = self.horizon.t_final
        return intervals, t_final

    def system(self, seed: int) -> ControlSystem:
        """
        Builds the control system for an effective seed. The seed only
        matters for random_bath and for closed systems with random = true.
        """
        m = self.model
        intervals, t_final = self.horizon_pair()
        if m.kind == "central_spin":
            return build_central_spin(m.q_b, m.couplings, intervals, t_final)
        if m.kind == "random_bath":
            return build_random_bath(m.n_b, seed, intervals, t_final)
        if m.kind == "closed" and m.random:
            return build_random_closed(m.n_a, m.n_controls, seed, intervals, t_final)
        n_b = 1 if m.kind == "closed" else m.n_b
        return build_custom(m.h0, m.controls, m.n_a, n_b, (intervals, t_final))

    def target_for(self, sys: ControlSystem, seed: int) -> TargetSpec:
        """Returns the target W for a system and an effective seed."""
        if self.target.kind == "identity":
            return TargetSpec.identity(sys.n_a)
        if self.target.kind == "explicit":
            return TargetSpec.from_matrix(self.target.matrix)
        return random_target(sys.n_a, seed)

    def with_overrides(
        self,
        output: Optional[str] = None,
        jobs: Optional[int] = None,
        seed_offset: Optional[int] = None,
        rank_tol: Optional[float] = None,
    ) -> "ExperimentConfig":
        """
        Returns a copy with command-line overrides applied; None leaves a
        field unchanged.

        Raises:
            ConfigError: If an override is out of range.
        """
        run = self.run
        if output is not None:
            run = replace(run, output=output)
        if jobs is not None:
            if jobs < 1:
                raise ConfigError(self.path, f"--jobs must be at least 1 (was {jobs})")
            run = replace(run, jobs=jobs)
        if seed_offset is not None:
            lowest = min(run.seeds) + seed_offset
            if lowest < 0:
                raise ConfigError(self.path, f"--seed-offset {seed_offset} gives the negative seed {lowest}")
            run = replace(run, seed_offset=seed_offset)
        optimizer = self.optimizer
        if rank_tol is not None:
            try:
                optimizer = replace(optimizer, rank_tolerance=rank_tol)
            except ValueError as e:
                raise ConfigError(self.path, f"--rank-tol: {e}")
        return replace(self, run=run, optimizer=optimizer)


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    # Line number of a section header, or of a key inside that section.
    header = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")
    current = None
    for number, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return number
            continue
        if key is not None and current == section and re.match(rf'^\s*"?{re.escape(key)}"?\s*=', line):
            return number
    return None


class _Section:
    """
    _Section reads the values of one TOML table and remembers which keys
    were consumed, so that leftovers can be rejected.
    """

    def __init__(self, name: str, table: Any, path: str, text: str):
        if not isinstance(table, dict):
            raise ConfigError(path, f"[{name}] must be a table", _line_of(text, name))
        self.name = name
        self.table = table
        self.path = path
        self.text = text
        self.used: Set[str] = set()

    def error(self, key: Optional[str], message: str) -> ConfigError:
        where = f"{self.name}.{key}" if key else f"[{self.name}]"
        return ConfigError(self.path, f"{where}: {message}", _line_of(self.text, self.name, key))

    def get(self, key: str, default: Any, kinds: Tuple[type, ...], what: str) -> Any:
        self.used.add(key)
        if key not in self.table:
            return default
        value = self.table[key]
        # bool is an int subclass; only accept it where a bool is asked for.
        if isinstance(value, bool) and bool not in kinds:
            raise self.error(key, f"expected {what}, got a boolean")
        if not isinstance(value, kinds):
            raise self.error(key, f"expected {what}, got {type(value).__name__}")
        return value

    def integer(self, key: str, default: Any, minimum: Optional[int] = None) -> Any:
        value = self.get(key, default, (int,), "an integer")
        if value is not None and minimum is not None and value < minimum:
            raise self.error(key, f"must be at least {minimum} (was {value})")
        return value

    def real(self, key: str, default: Any, positive: bool = False) -> Any:
        value = self.get(key, default, (int, float), "a number")
        if value is None:
            return None
        value = float(value)
        if not np.isfinite(value) or (positive and value <= 0):
            raise self.error(key, f"must be a {'positive ' if positive else ''}finite number (was {value})")
        return value

    def flag(self, key: str, default: bool) -> bool:
        return self.get(key, default, (bool,), "true or false")

    def choice(self, key: str, default: str, choices: Tuple[str, ...]) -> str:
        value = self.get(key, default, (str,), "a string")
        if value not in choices:
            raise self.error(key, f"must be one of {', '.join(choices)} (was {value!r})")
        return value

    def reals(self, key: str) -> Optional[Tuple[float, ...]]:
        values = self.get(key, None, (list,), "a list of numbers")
        if values is None:
            return None
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            raise self.error(key, "expected a list of numbers")
        return tuple(float(v) for v in values)

    def integers(self, key: str, default: Tuple[int, ...]) -> Tuple[int, ...]:
        values = self.get(key, default, (list,), "a list of integers")
        if not values or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in values):
            raise self.error(key, "expected a non-empty list of non-negative integers")
        return tuple(values)

    def matrix(self, key: str, rank: int = 2) -> Optional[ComplexMatrix]:
        self.used.add(key)
        if key not in self.table:
            return None
        try:
            return _complex_array(self.table[key], rank)
        except (TypeError, ValueError) as e:
            raise self.error(key, str(e))

    def finish(self):
        unknown = [k for k in self.table if k not in self.used]
        if unknown:
            raise self.error(unknown[0], "unknown key")


def _complex_entry(x) -> complex:
    if isinstance(x, bool):
        raise TypeError("matrix entries must be numbers or [re, im] pairs")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in x):
        return complex(x[0], x[1])
    raise TypeError("matrix entries must be numbers or [re, im] pairs")


def _complex_array(value, rank: int) -> ComplexMatrix:
    """
    Converts nested lists to a complex array of the given rank, where each
    entry is a number or an [re, im] pair.
    """
    def convert(v, depth):
        if depth == 0:
            return _complex_entry(v)
        if not isinstance(v, list) or not v:
            raise TypeError(f"expected a nested list of rank {rank}")
        return [convert(x, depth - 1) for x in v]

    try:
        return np.array(convert(value, rank), dtype=np.complex128)
    except ValueError:
        raise ValueError("rows of a matrix must have equal length")


def _model(s: _Section) -> ModelConfig:
    kind = s.choice("kind", "central_spin", MODEL_KINDS)
    cfg = ModelConfig(
        kind=kind,
        q_b=s.integer("q_b", 3, minimum=1),
        couplings=s.reals("couplings"),
        n_a=s.integer("n_a", 2, minimum=1),
        n_b=s.integer("n_b", 8, minimum=1),
        h0=s.matrix("h0"),
        controls=s.matrix("controls", rank=3),
        random=s.flag("random", False),
        n_controls=s.integer("n_controls", 1, minimum=1),
    )
    needs_matrices = kind == "custom" or (kind == "closed" and not cfg.random)
    if needs_matrices and cfg.h0 is None:
        raise s.error("h0", f"a {kind} model needs h0")
    if needs_matrices and cfg.controls is None:
        raise s.error("controls", f"a {kind} model needs controls")
    return cfg


def _horizon(s: _Section) -> HorizonConfig:
    return HorizonConfig(t_final=s.real("t_final", None, positive=True), intervals=s.integer("intervals", None, minimum=1))


def _target(s: _Section) -> TargetConfig:
    kind = s.choice("kind", "random", TARGET_KINDS)
    matrix = s.matrix("matrix")
    if kind == "explicit" and matrix is None:
        raise s.error("matrix", "an explicit target needs a matrix")
    return TargetConfig(kind, matrix)


def _optimizer(s: _Section) -> AscentConfig:
    d = AscentConfig()
    values = dict(
        gamma0=s.real("gamma0", d.gamma0, positive=True),
        grow=s.real("grow", d.grow, positive=True),
        shrink=s.real("shrink", d.shrink, positive=True),
        max_iters=s.integer("max_iters", d.max_iters, minimum=0),
        max_rejects_in_row=s.integer("max_rejects_in_row", d.max_rejects_in_row, minimum=1),
        improvement_floor=s.real("improvement_floor", d.improvement_floor),
        convergence_tol=s.real("convergence_tol", d.convergence_tol),
        record_gradient_spectra=s.flag("record_gradient_spectra", d.record_gradient_spectra),
        rank_tolerance=s.real("rank_tolerance", d.rank_tolerance, positive=True),
        escape_stationary=s.flag("escape_stationary", d.escape_stationary),
        stationary_tol=s.real("stationary_tol", d.stationary_tol),
        curvature_tol=s.real("curvature_tol", d.curvature_tol),
        hessian_step=s.real("hessian_step", d.hessian_step, positive=True),
        escape_radius=s.real("escape_radius", d.escape_radius, positive=True),
        time_symmetric=s.flag("time_symmetric", d.time_symmetric),
    )
    try:
        return AscentConfig(**values)
    except ValueError as e:
        raise s.error(None, str(e))


def _run(s: _Section) -> RunConfig:
    return RunConfig(
        seeds=s.integers("seeds", (0,)),
        output=s.get("output", "out", (str,), "a string"),
        jobs=s.integer("jobs", 1, minimum=1),
        emit_trace=s.flag("emit_trace", True),
        emit_spectra=s.flag("emit_spectra", True),
        emit_controls=s.flag("emit_controls", True),
    )


def _gradcheck(s: _Section) -> GradcheckConfig:
    return GradcheckConfig(
        draws=s.integer("draws", 20, minimum=1),
        step=s.real("step", 1e-5, positive=True),
        amplitude=s.real("amplitude", 1.0),
        phi_amplitude=s.real("phi_amplitude", 1.0),
        tolerance=s.real("tolerance", 1e-5, positive=True),
    )


def _rankscan(s: _Section) -> RankscanConfig:
    return RankscanConfig(
        source=s.choice("source", "random", RANKSCAN_SOURCES),
        points=s.integer("points", 20, minimum=1),
        amplitude=s.real("amplitude", 1.0),
    )


_READERS = {
    "model": _model,
    "horizon": _horizon,
    "target": _target,
    "optimizer": _optimizer,
    "run": _run,
    "gradcheck": _gradcheck,
    "rankscan": _rankscan,
}


def parse_config(text: str, path: str = "<config>") -> ExperimentConfig:
    """
    Parses the text of a configuration file and checks that it describes a
    valid system and target.

    Args:
        text: The TOML document.
        path: Where it came from, for error messages.

    Returns:
        The ExperimentConfig.

    Raises:
        ConfigError: On TOML syntax errors, unknown sections or keys,
                     malformed values, or matrices that do not form a valid
                     system or target.
    """
    try:
        data: Dict[str, Any] = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ConfigError(path, str(e), int(m.group(1)) if m else None)

    sections = {}
    for name, table in data.items():
        if name not in _READERS:
            raise ConfigError(path, f"unknown section [{name}]", _line_of(text, name))
        section = _Section(name, table, path, text)
        sections[name] = _READERS[name](section)
        section.finish()

    cfg = ExperimentConfig(path=path, **sections)

    # The first seed stands for all: matrices and dimensions do not depend on it.
    try:
        sys = cfg.system(cfg.seeds()[0])
        w = cfg.target_for(sys, cfg.seeds()[0])
    except (LandscapeError, ValueError) as e:
        section = "target" if "target" in str(e) else "model"
        raise ConfigError(path, str(e), _line_of(text, section))
    if w.n_a != sys.n_a:
        raise ConfigError(path, f"target dimension {w.n_a} does not match system A dimension {sys.n_a}",
                          _line_of(text, "target"))

    logger.debug("parsed %s: %s model with N = %d, L = %d", path, cfg.model.kind, sys.n, sys.intervals)
    return cfg


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Reads and parses a configuration file.

    Raises:
        ConfigError: If the file cannot be read or is invalid.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(str(path), f"cannot read file: {e.strerror or e}")
    return parse_config(text, str(path))
