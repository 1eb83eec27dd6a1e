import os
import sys
import tempfile
import unittest

import numpy as np
import pandas as pd
from scipy.signal import lfilter

# Add root project directory to path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, project_root)

from core.errors import ChainFileError, InvalidArgumentError, UndefinedVarianceError
from diagnostics import (
    acf,
    acf_table,
    ces,
    effective_size,
    efficiency_report,
    ergodic_means,
    ess,
    gelman_rubin,
    gelman_rubin_trace,
    iat,
    mc_standard_error,
    read_chain_csv,
    write_report_csv,
)


def ar1(phi, n, seed):
    noise = np.random.default_rng(seed).standard_normal(n + 1000)
    return lfilter([1.0], [1.0, -phi], noise)[1000:]


class TestAutocorrelation(unittest.TestCase):
    """ACF and integrated autocorrelation time"""

    def test_white_noise(self):
        n = 100_000
        x = np.random.default_rng(1).standard_normal(n)
        rho = acf(x, 5)
        self.assertEqual(rho[0], 1.0)
        self.assertLess(abs(rho[1]), 3 / np.sqrt(n))
        self.assertAlmostEqual(iat(x), 1.0, delta=0.1)

    def test_ar1_lag_one(self):
        self.assertAlmostEqual(float(acf(ar1(0.5, 100_000, 2), 1)[1]), 0.5, delta=0.02)

    def test_ar1_iat(self):
        # (1 + phi) / (1 - phi)
        self.assertLess(abs(iat(ar1(0.5, 100_000, 3)) / 3.0 - 1.0), 0.10)
        self.assertLess(abs(iat(ar1(0.9, 1_000_000, 4)) / 19.0 - 1.0), 0.15)

    def test_constant_chain(self):
        with self.assertRaises(UndefinedVarianceError):
            acf(np.full(100, 2.5))
        with self.assertRaises(UndefinedVarianceError):
            iat(np.full(100, 2.5))

    def test_preconditions(self):
        with self.assertRaises(InvalidArgumentError):
            acf([1.0])
        with self.assertRaises(InvalidArgumentError):
            acf(np.arange(10.0), 10)
        with self.assertRaises(InvalidArgumentError):
            iat(np.random.default_rng(0).standard_normal(49))


class TestEfficiency(unittest.TestCase):
    """ESS and cost per effective sample"""

    def test_published_efficiency_figures(self):
        self.assertAlmostEqual(effective_size(2000, 30.42), 65.75, places=2)
        self.assertAlmostEqual(round(ces(10.99, 2000, 30.42), 2), 0.17)
        self.assertAlmostEqual(round(ces(49.63, 2000, 61.15), 2), 1.52)
        self.assertAlmostEqual(ces(1.0, 400, 1.0), 1.0 / 400)

    def test_ces_monotone(self):
        self.assertLess(ces(1.0, 100, 2.0), ces(2.0, 100, 2.0))
        self.assertLess(ces(1.0, 100, 2.0), ces(1.0, 100, 3.0))
        self.assertGreater(ces(1.0, 100, 2.0), ces(1.0, 200, 2.0))

    def test_nonpositive_inputs(self):
        with self.assertRaises(InvalidArgumentError):
            ces(0.0, 100, 1.0)
        with self.assertRaises(InvalidArgumentError):
            ces(1.0, 0, 1.0)
        with self.assertRaises(InvalidArgumentError):
            effective_size(100, -1.0)

    def test_iid_ess_close_to_length(self):
        x = np.random.default_rng(5).standard_normal(1000)
        self.assertGreater(ess(x), 700)
        self.assertLess(ess(x), 1300)

    def test_report_consistency(self):
        x = ar1(0.7, 5000, 6)
        report = efficiency_report(x, cpu_seconds=3.0, sampler="chromatic", parameter="tau2")
        self.assertAlmostEqual(report.ces, report.iat * 3.0 / 5000)
        self.assertLessEqual(report.ess, report.n_retained)
        self.assertGreaterEqual(report.iat, 1.0)

    def test_standard_error_and_running_means(self):
        x = np.random.default_rng(7).standard_normal(40_000)
        self.assertAlmostEqual(mc_standard_error(x), 1 / np.sqrt(40_000), delta=0.001)
        np.testing.assert_allclose(ergodic_means([1.0, 3.0, 5.0]), [1.0, 2.0, 3.0])


class TestGelmanRubin(unittest.TestCase):
    """Potential scale reduction factor"""

    def test_converged_chains(self):
        gen = np.random.default_rng(8)
        r = gelman_rubin([gen.standard_normal(10_000) for _ in range(3)])
        self.assertGreater(r, 0.99)
        self.assertLess(r, 1.05)

    def test_separated_chains(self):
        gen = np.random.default_rng(9)
        self.assertGreater(gelman_rubin([gen.standard_normal(500), 100 + gen.standard_normal(500)]), 1.2)

    def test_preconditions(self):
        with self.assertRaises(InvalidArgumentError):
            gelman_rubin([np.arange(20.0)])
        with self.assertRaises(InvalidArgumentError):
            gelman_rubin([np.arange(20.0), np.arange(21.0)])
        with self.assertRaises(InvalidArgumentError):
            gelman_rubin([np.arange(5.0), np.arange(5.0)])

    def test_trace_ends_at_full_length(self):
        gen = np.random.default_rng(10)
        trace = gelman_rubin_trace([gen.standard_normal(1000) for _ in range(2)])
        self.assertEqual(list(trace.columns), ["draws", "psrf"])
        self.assertEqual(int(trace["draws"].iloc[-1]), 1000)
        self.assertTrue(np.all(np.diff(trace["draws"]) > 0))


class TestChainFiles(unittest.TestCase):
    """Chain CSV parsing and report output"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, text, name="chain.csv"):
        path = os.path.join(self.tmp.name, name)
        with open(path, "w") as f:
            f.write(text)
        return path

    def test_blank_sigma2_is_allowed(self):
        path = self._write("iter,beta0,sigma2,tau2,seconds\n1,0.5,,1.0,0.01\n2,0.6,,1.1,0.01\n")
        frame = read_chain_csv(path)
        self.assertEqual(len(frame), 2)
        self.assertTrue(frame["sigma2"].isna().all())
        self.assertAlmostEqual(frame["tau2"].iloc[1], 1.1)

    def test_bad_value_reports_line(self):
        path = self._write("iter,beta0,sigma2,tau2,seconds\n1,0.5,1,1.0,0.01\n2,abc,1,1.1,0.01\n")
        with self.assertRaises(ChainFileError) as ctx:
            read_chain_csv(path)
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn("chain.csv:3", str(ctx.exception))

    def test_wrong_field_count_reports_line(self):
        path = self._write("iter,beta0,sigma2,tau2,seconds\n1,0.5,1,1.0,0.01\n2,0.6,1,1.1,0.01,9\n")
        with self.assertRaises(ChainFileError) as ctx:
            read_chain_csv(path)
        self.assertEqual(ctx.exception.line, 3)

    def test_header_is_checked(self):
        path = self._write("iter,beta,sigma2,tau2,seconds\n1,0.5,1,1.0,0.01\n2,0.6,1,1.1,0.01\n")
        with self.assertRaises(ChainFileError) as ctx:
            read_chain_csv(path)
        self.assertEqual(ctx.exception.line, 1)

    def test_too_short(self):
        path = self._write("iter,beta0,sigma2,tau2,seconds\n1,0.5,1,1.0,0.01\n")
        with self.assertRaises(ChainFileError):
            read_chain_csv(path)

    def test_acf_table_skips_missing_parameters(self):
        gen = np.random.default_rng(11)
        frame = pd.DataFrame({"beta0": gen.standard_normal(200), "sigma2": np.nan, "tau2": gen.standard_normal(200)})
        table = acf_table(frame, 10)
        self.assertEqual(list(table.columns), ["lag", "beta0", "tau2"])
        self.assertEqual(len(table), 11)

    def test_report_columns(self):
        x = ar1(0.5, 2000, 12)
        single = write_report_csv([efficiency_report(x, 2.0, "block")], os.path.join(self.tmp.name, "a.csv"))
        self.assertEqual(list(pd.read_csv(single).columns), ["sampler", "cpu_seconds", "ess", "iat", "ces"])
        several = write_report_csv(
            [efficiency_report(x, 2.0, "block", "beta0"), efficiency_report(x, 2.0, "block", "tau2")],
            os.path.join(self.tmp.name, "b.csv"))
        frame = pd.read_csv(several)
        self.assertEqual(list(frame.columns), ["parameter", "sampler", "cpu_seconds", "ess", "iat", "ces"])
        self.assertEqual(frame["parameter"].tolist(), ["beta0", "tau2"])


if __name__ == "__main__":
    unittest.main()
