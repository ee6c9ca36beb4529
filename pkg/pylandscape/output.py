"""
Result files.

Every file is comma separated with a header row; floats are written with 17
significant digits and booleans as 0/1, so identical runs produce
byte-identical files. One file of each kind is written per seed:

    trace_seed<k>.csv     iter, F, one_minus_F, J, gamma, grad_norm, rank_Gc, rank_Gcphi, degenerate
    spectra_seed<k>.csv   iter, matrix, index, sigma       (matrix is Gc or Gcphi)
    controls_seed<k>.csv  interval, c0, ..., c<M-1>
    rankscan_seed<k>.csv  point, F, case, required_rank, rank_Gc, rank_Gcphi, condition_met, sum_omega, antisymmetric
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np

from .diagnostics import RankReport, phiopt_identity_check
from .gradients import bundle
from .landscape import Target, evaluate
from .model import ControlSystem, as_controls
from .optimizer import OptimizerTrace
from .types import ControlVector, RealVector

__all__ = [
    "TRACE_COLUMNS",
    "SPECTRA_COLUMNS",
    "RANKSCAN_COLUMNS",
    "trace_path",
    "spectra_path",
    "controls_path",
    "rankscan_path",
    "format_value",
    "write_trace",
    "write_spectra",
    "write_controls",
    "write_rankscan",
    "read_table",
    "read_trace",
    "read_spectra",
    "read_controls",
    "VerifyReport",
    "verify_outputs",
]

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("iter", "F", "one_minus_F", "J", "gamma", "grad_norm", "rank_Gc", "rank_Gcphi", "degenerate")
SPECTRA_COLUMNS = ("iter", "matrix", "index", "sigma")
RANKSCAN_COLUMNS = ("point", "F", "case", "required_rank", "rank_Gc", "rank_Gcphi",
                    "condition_met", "sum_omega", "antisymmetric")

PathLike = Union[str, Path]


def trace_path(out: PathLike, seed: int) -> Path:
    return Path(out) / f"trace_seed{seed}.csv"


def spectra_path(out: PathLike, seed: int) -> Path:
    return Path(out) / f"spectra_seed{seed}.csv"


def controls_path(out: PathLike, seed: int) -> Path:
    return Path(out) / f"controls_seed{seed}.csv"


def rankscan_path(out: PathLike, seed: int) -> Path:
    return Path(out) / f"rankscan_seed{seed}.csv"


def format_value(x) -> str:
    """
    Formats one cell: booleans as 0/1, integers as-is, floats with 17
    significant digits, anything else with str.
    """
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _write(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(x) for x in row])
    logger.info("wrote %s", path)
    return path


def write_trace(out: PathLike, seed: int, trace: OptimizerTrace) -> Path:
    rows = (
        (r.iteration, r.fidelity, r.one_minus_f, r.j_value, r.gamma, r.grad_norm, r.rank_c, r.rank_stack, r.degenerate)
        for r in trace.records
    )
    return _write(trace_path(out, seed), TRACE_COLUMNS, rows)


def write_spectra(out: PathLike, seed: int, trace: OptimizerTrace) -> Path:
    """
    Writes the recorded singular values of G_c and G_{c,φ} in long format.
    Iterates without recorded spectra are skipped.
    """
    def rows():
        for r in trace.records:
            for name, s in (("Gc", r.singular_values_c), ("Gcphi", r.singular_values)):
                if s is None:
                    continue
                for i, sigma in enumerate(s):
                    yield r.iteration, name, i, sigma

    return _write(spectra_path(out, seed), SPECTRA_COLUMNS, rows())


def write_controls(out: PathLike, seed: int, c: ControlVector) -> Path:
    c = np.atleast_2d(np.asarray(c, dtype=np.float64))
    columns = ["interval"] + [f"c{m}" for m in range(c.shape[1])]
    return _write(controls_path(out, seed), columns, ([l, *row] for l, row in enumerate(c)))


def write_rankscan(out: PathLike, seed: int, reports: Sequence[RankReport], fidelities: Sequence[float]) -> Path:
    rows = (
        (i, f, r.case.value, r.required_rank, r.rank_c, r.numerical_rank, r.condition_met,
         r.sum_omega_mod_2pi, r.spectrum_antisymmetric)
        for i, (r, f) in enumerate(zip(reports, fidelities))
    )
    return _write(rankscan_path(out, seed), RANKSCAN_COLUMNS, rows)


def read_table(path: PathLike) -> Dict[str, List[str]]:
    """
    Reads a result file into a mapping from column name to the column's
    cells, unparsed.
    """
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        columns: Dict[str, List[str]] = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                columns[name].append(cell)
    return columns


def read_trace(path: PathLike) -> Dict[str, np.ndarray]:
    """Reads a trace file; integer and flag columns become int arrays, the rest float arrays."""
    table = read_table(path)
    ints = {"iter", "rank_Gc", "rank_Gcphi", "degenerate"}
    return {k: np.array(v, dtype=np.int64 if k in ints else np.float64) for k, v in table.items()}


def read_spectra(path: PathLike) -> Dict[int, Dict[str, RealVector]]:
    """Reads a spectra file into {iter: {"Gc": σ, "Gcphi": σ}}."""
    table = read_table(path)
    spectra: Dict[int, Dict[str, List[float]]] = {}
    for it, name, sigma in zip(table["iter"], table["matrix"], table["sigma"]):
        spectra.setdefault(int(it), {}).setdefault(name, []).append(float(sigma))
    return {it: {k: np.array(v) for k, v in d.items()} for it, d in spectra.items()}


def read_controls(path: PathLike) -> ControlVector:
    table = read_table(path)
    names = sorted((k for k in table if k != "interval"), key=lambda k: int(k[1:]))
    return np.array([table[k] for k in names], dtype=np.float64).T


@dataclass
class VerifyReport:
    """
    The result of re-checking one seed's output files.

    Attributes:
        seed (int):            The seed.
        checked (List[str]):   Names of the checks that were run.
        violations (List[str]): One message per failed check.
    """

    seed: int
    checked: List[str] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_outputs(
    sys: ControlSystem,
    w: Target,
    out: PathLike,
    seed: int,
    tol: float = 1e-7,
    fidelity_tol: float = 1e-9,
) -> VerifyReport:
    """
    Re-reads the files of one seed and re-verifies them offline:

      - F is non-decreasing over the iterates of the trace file;
      - the final controls reproduce the final F of the trace within fidelity_tol;
      - the φ_opt identities |Σ sin ω| <= tol and ||G_φ g(ω)||_∞ <= tol hold
        at the final controls.

    Files that were not emitted are skipped.
    """
    report = VerifyReport(seed)
    trace_file, controls_file = trace_path(out, seed), controls_path(out, seed)

    final_f = None
    if trace_file.exists():
        trace = read_trace(trace_file)
        f = trace["F"]
        report.checked.append("monotone")
        drops = np.flatnonzero(np.diff(f) < 0)
        if drops.size:
            report.violations.append(f"F decreases after iteration {int(trace['iter'][drops[0]])}")
        if f.size:
            final_f = float(f[-1])

    if controls_file.exists():
        c = as_controls(sys, read_controls(controls_file))
        ev = evaluate(sys, w, c)
        if final_f is not None:
            report.checked.append("final_fidelity")
            if abs(ev.fidelity - final_f) > fidelity_tol:
                report.violations.append(f"final controls give F = {ev.fidelity:.17g}, trace says {final_f:.17g}")
        report.checked.append("phi_opt_identities")
        check = phiopt_identity_check(ev, bundle(sys, w, c, evaluation=ev), tol)
        if not check.passed:
            report.violations.append(
                f"φ_opt identities violated: |Σ sin ω| = {check.sum_sin:.3g}, ||G_φ g||_∞ = {check.grad_phi_norm:.3g}")

    for message in report.violations:
        logger.warning("seed %d: %s", seed, message)
    return report
