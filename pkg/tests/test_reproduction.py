"""
Full-size reproduction runs. These take minutes and are skipped unless the
PYLANDSCAPE_SLOW environment variable is set.
"""
import os
import unittest
from pathlib import Path

import numpy as np

from pylandscape.test import TestCase
from pylandscape import (
    RankCase,
    Status,
    ascend,
    bundle,
    load_config,
    modal_rank,
    rank_condition,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

slow = unittest.skipUnless(os.environ.get("PYLANDSCAPE_SLOW"), "set PYLANDSCAPE_SLOW=1 to run reproduction tests")


@slow
class TestCentralSpin(TestCase):

    def test_ten_targets(self):
        cfg = load_config(CONFIGS / "central_spin.toml")
        for seed in cfg.seeds():
            sys = cfg.system(seed)
            w = cfg.target_for(sys, seed)
            trace = ascend(sys, w, cfg=cfg.optimizer)
            with self.subTest(seed=seed):
                self.assertNotEqual(trace.status, Status.NON_FINITE)
                self.assertTrue(np.all(np.diff(1 - trace.fidelities()) <= 0))
                self.assertLessEqual(trace.final.one_minus_f, 1e-2)
                self.assertEqual(modal_rank(r.rank_stack for r in trace.records), 16)
                self.assertEqual(modal_rank(r.rank_c for r in trace.records), 10)
                self.assertTrue(all(r.identities_ok for r in trace.records))


@slow
class TestRandomBath(TestCase):

    def test_ten_baths(self):
        cfg = load_config(CONFIGS / "random_bath.toml")
        for seed in cfg.seeds():
            sys = cfg.system(seed)
            w = cfg.target_for(sys, seed)
            trace = ascend(sys, w, cfg=cfg.optimizer)
            report = rank_condition(bundle(sys, w, trace.controls))
            with self.subTest(seed=seed):
                self.assertGreaterEqual(trace.final.fidelity, 0.999)
                self.assertGreaterEqual(trace.escapes, 1)
                self.assertAllClose(trace.controls, trace.controls[::-1], atol=0.0)
                self.assertEqual(modal_rank(r.rank_stack for r in trace.records), 11)
                self.assertEqual(modal_rank(r.rank_c for r in trace.records), 3)
                self.assertIs(report.case, RankCase.SYMMETRIC_SPECTRUM)
                self.assertEqual(report.required_rank, 8)
                self.assertTrue(report.condition_met)
