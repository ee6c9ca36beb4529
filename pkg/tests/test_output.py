import tempfile
from pathlib import Path

import numpy as np

from pylandscape.test import TestCase
from pylandscape import (
    TRACE_COLUMNS,
    AscentConfig,
    build_central_spin,
    bundle,
    format_value,
    random_target,
    rank_condition,
    read_controls,
    read_spectra,
    read_table,
    read_trace,
    ascend,
    trace_path,
    controls_path,
    verify_outputs,
    write_controls,
    write_rankscan,
    write_spectra,
    write_trace,
)


class TestFormat(TestCase):

    def test_format_value(self):
        cases = {
            "true": (True, "1"),
            "false": (np.bool_(False), "0"),
            "int": (np.int64(12), "12"),
            "float": (0.1, "0.10000000000000001"),
            "integral_float": (2.0, "2"),
            "string": ("Gc", "Gc"),
        }
        for name, (value, expected) in cases.items():
            with self.subTest(name):
                self.assertEqual(format_value(value), expected)

    def test_float_round_trip(self):
        for x in self.rng.standard_normal(50):
            self.assertEqual(float(format_value(x)), x)


class TestFiles(TestCase):

    def fixtureInit(self):
        self.sys = build_central_spin(1, intervals=4, t_final=2.0)
        self.w = random_target(2, seed=3)
        self.trace = ascend(self.sys, self.w, self.rng.uniform(-1, 1, (4, 1)),
                            AscentConfig(max_iters=8, record_gradient_spectra=True))
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)

    def write_all(self, out):
        write_trace(out, 0, self.trace)
        write_spectra(out, 0, self.trace)
        write_controls(out, 0, self.trace.controls)

    def test_trace_round_trip(self):
        self.write_all(self.out)
        trace = read_trace(trace_path(self.out, 0))
        self.assertEqual(tuple(trace), TRACE_COLUMNS)
        self.assertEqual(list(trace["iter"]), [r.iteration for r in self.trace.records])
        self.assertEqual(list(trace["F"]), list(self.trace.fidelities()))
        self.assertEqual(list(trace["rank_Gc"]), [r.rank_c for r in self.trace.records])

    def test_spectra_round_trip(self):
        self.write_all(self.out)
        spectra = read_spectra(self.out / "spectra_seed0.csv")
        self.assertEqual(sorted(spectra), [r.iteration for r in self.trace.records])
        for r in self.trace.records:
            self.assertAllClose(spectra[r.iteration]["Gc"], r.singular_values_c, atol=0.0)
            self.assertAllClose(spectra[r.iteration]["Gcphi"], r.singular_values, atol=0.0)

    def test_controls_round_trip(self):
        self.write_all(self.out)
        self.assertAllClose(read_controls(controls_path(self.out, 0)), self.trace.controls, atol=0.0)
        self.assertEqual(list(read_table(controls_path(self.out, 0))), ["interval", "c0"])

    def test_byte_identical(self):
        other = self.out / "again"
        self.write_all(self.out)
        self.write_all(other)
        for name in ("trace_seed0.csv", "spectra_seed0.csv", "controls_seed0.csv"):
            self.assertEqual((self.out / name).read_bytes(), (other / name).read_bytes())

    def test_rankscan(self):
        reports, fidelities = [], []
        for _ in range(3):
            grads = bundle(self.sys, self.w, self.rng.uniform(-1, 1, (4, 1)))
            reports.append(rank_condition(grads))
            fidelities.append(grads.fidelity)
        path = write_rankscan(self.out, 2, reports, fidelities)
        self.assertEqual(path.name, "rankscan_seed2.csv")
        table = read_table(path)
        self.assertEqual(table["point"], ["0", "1", "2"])
        self.assertEqual(table["case"], [r.case.value for r in reports])
        self.assertEqual(table["condition_met"], ["1" if r.condition_met else "0" for r in reports])


class TestVerify(TestCase):

    def fixtureInit(self):
        self.sys = build_central_spin(1, intervals=4, t_final=2.0)
        self.w = random_target(2, seed=5)
        self.trace = ascend(self.sys, self.w, self.rng.uniform(-1, 1, (4, 1)), AscentConfig(max_iters=8))
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)
        write_trace(self.out, 1, self.trace)
        write_controls(self.out, 1, self.trace.controls)

    def test_ok(self):
        report = verify_outputs(self.sys, self.w, self.out, 1)
        self.assertTrue(report.ok, report.violations)
        self.assertEqual(report.checked, ["monotone", "final_fidelity", "phi_opt_identities"])

    def test_decreasing_trace(self):
        path = trace_path(self.out, 1)
        lines = path.read_text().splitlines()
        cells = lines[-1].split(",")
        cells[1] = "0"
        lines[-1] = ",".join(cells)
        path.write_text("\n".join(lines) + "\n")
        with self.assertLogs("pylandscape.output", "WARNING") as _:
            report = verify_outputs(self.sys, self.w, self.out, 1)
        self.assertFalse(report.ok)
        self.assertTrue(any("decreases" in v for v in report.violations))
        self.assertTrue(any("final controls" in v for v in report.violations))

    def test_tampered_controls(self):
        write_controls(self.out, 1, self.trace.controls + 0.1)
        with self.assertLogs("pylandscape.output", "WARNING") as _:
            report = verify_outputs(self.sys, self.w, self.out, 1)
        self.assertEqual(len(report.violations), 1)

    def test_missing_files(self):
        report = verify_outputs(self.sys, self.w, self.out, 7)
        self.assertEqual(report.checked, [])
        self.assertTrue(report.ok)
