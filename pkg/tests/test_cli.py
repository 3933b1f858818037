import contextlib
import io
import json
import logging
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from src.errors import NoConvergence
from src.lattice import special
from src.lattice.domain import write_domain_file
from src.main import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, cli


class CliTests(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.config = self.dir / "config.json"
        self.config.write_text(json.dumps({
            "paths": {"data_dir": str(self.dir / "data")},
            "output": {"dir": str(self.dir / "results")},
        }), encoding="utf-8")
        sd = special.self_dual_rect(1)
        self.quad_file = self.dir / "quad.txt"
        write_domain_file(self.quad_file, sd.domain, [sd.marks[k] for k in "abcd"])

    def tearDown(self):
        root = logging.getLogger()
        for handler in list(root.handlers):
            root.removeHandler(handler)
            handler.close()
        self.tmp.cleanup()

    def run_cli(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = cli(list(argv) + ["--config", str(self.config), "--quiet"])
        return code, out.getvalue()

    def test_usage_errors_exit_2(self):
        with contextlib.redirect_stderr(io.StringIO()):
            self.assertEqual(cli([]), EXIT_VALIDATION)
            self.assertEqual(cli(["nosuchcommand"]), EXIT_VALIDATION)
            self.assertEqual(cli(["arms", "--R", "four"]), EXIT_VALIDATION)

    def test_validation_errors_exit_2(self):
        code, _ = self.run_cli("extremal")
        self.assertEqual(code, EXIT_VALIDATION)
        code, _ = self.run_cli("arms", "--r", "4", "--R", "6", "--out", "-")
        self.assertEqual(code, EXIT_VALIDATION)

    def test_numerical_errors_exit_3(self):
        with mock.patch("src.main.extremal_report", side_effect=NoConvergence("stalled")):
            code, _ = self.run_cli("extremal", "--domain", str(self.quad_file))
        self.assertEqual(code, EXIT_NUMERICAL)

    def test_extremal_report(self):
        out = self.dir / "ext.json"
        code, _ = self.run_cli("extremal", "--domain", str(self.quad_file), "--refine", "4", "--out", str(out))
        self.assertEqual(code, EXIT_OK)
        report = json.loads(out.read_text(encoding="utf-8"))
        self.assertAlmostEqual(report["ell"], 2.0, places=6)
        self.assertAlmostEqual(report["product"], 1.0, places=6)

    def test_enumerate_to_stdout(self):
        code, text = self.run_cli("enumerate", "--domain", str(self.quad_file), "--q", "1", "--out", "-")
        self.assertEqual(code, EXIT_OK)
        rows = json.loads(text)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["edges"], 7)
        self.assertAlmostEqual(rows[0]["crossing"], 0.5, places=10)

    def test_arms_records_are_reproducible(self):
        args = ("arms", "--q", "2", "--r", "1", "--R", "2", "4", "--samples", "20", "--burn-in", "2",
                "--chains", "2", "--seed", "7")
        first, second = self.dir / "a.csv", self.dir / "b.csv"
        self.assertEqual(self.run_cli(*args, "--out", str(first))[0], EXIT_OK)
        self.assertEqual(self.run_cli(*args, "--out", str(second))[0], EXIT_OK)
        self.assertEqual(first.read_bytes(), second.read_bytes())
        lines = first.read_text(encoding="utf-8").splitlines()
        self.assertTrue(lines[0].startswith("experiment,q,"))
        self.assertEqual(sum(1 for ln in lines if ln.startswith("arm_frequency,")), 2)
        self.assertEqual(sum(1 for ln in lines if ln.startswith("arm_exponent,")), 1)

    def test_default_output_location(self):
        code, _ = self.run_cli("extremal", "--domain", str(self.quad_file), "--refine", "2")
        self.assertEqual(code, EXIT_OK)
        self.assertTrue((self.dir / "results" / "extremal.json").exists())


if __name__ == "__main__":
    unittest.main()
