import json
import tempfile
import unittest
from pathlib import Path

from src.actions import ExperimentConfig
from src.errors import ConfigError
from src.main import deep_merge, get_default_config, load_config

ROOT = Path(__file__).resolve().parent.parent


class LoadConfigTests(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "cfg" / "config.json"

    def tearDown(self):
        self.tmp.cleanup()

    def test_missing_file_is_created(self):
        data = load_config(self.path)
        self.assertTrue(self.path.exists())
        self.assertEqual(json.loads(self.path.read_text(encoding="utf-8")), data)
        self.assertEqual(data["master_seed"], 42)

    def test_corrupted_file_is_backed_up(self):
        self.path.parent.mkdir(parents=True)
        self.path.write_text("{not json", encoding="utf-8")
        data = load_config(self.path)
        backup = self.path.with_suffix(".json.corrupted")
        self.assertTrue(backup.exists())
        self.assertEqual(backup.read_text(encoding="utf-8"), "{not json")
        self.assertEqual(data, get_default_config())
        self.assertEqual(json.loads(self.path.read_text(encoding="utf-8")), data)

    def test_user_values_merge_over_defaults(self):
        self.path.parent.mkdir(parents=True)
        self.path.write_text(json.dumps({"q": [3.0], "chain": {"samples": 10}}), encoding="utf-8")
        data = load_config(self.path)
        self.assertEqual(data["q"], [3.0])
        self.assertEqual(data["chain"]["samples"], 10)
        self.assertEqual(data["chain"]["burn_in"], 100)

    def test_root_must_be_object(self):
        self.path.parent.mkdir(parents=True)
        self.path.write_text("[1, 2]", encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_config(self.path)

    def test_deep_merge_leaves_base_untouched(self):
        base = {"a": {"b": 1, "c": 2}}
        merged = deep_merge(base, {"a": {"c": 3}})
        self.assertEqual(merged, {"a": {"b": 1, "c": 3}})
        self.assertEqual(base["a"]["c"], 2)


class ExperimentConfigTests(unittest.TestCase):
    def test_shipped_config_is_valid(self):
        data = json.loads((ROOT / "config.json").read_text(encoding="utf-8"))
        cfg = ExperimentConfig.from_dict(data)
        self.assertEqual(cfg.q, [1.0, 2.0])
        self.assertEqual(cfg.arms.R, [4, 8, 16])

    def test_defaults_round_trip(self):
        cfg = ExperimentConfig.from_dict(get_default_config())
        self.assertEqual(cfg.to_dict(), ExperimentConfig().to_dict())

    def test_unknown_keys_rejected(self):
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_dict({"bogus": 1})
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_dict({"chain": {"nope": 1}})
        with self.assertRaises(ConfigError):
            ExperimentConfig.from_dict({"chain": 5})

    def test_validation(self):
        bad = [
            {"q": []},
            {"q": [-1.0]},
            {"chain": {"algorithm": "metropolis"}},
            {"chain": {"samples": 0}},
            {"arms": {"r": [2], "R": [3]}},
            {"arms": {"R": [8, 4]}},
            {"arms": {"mask": "third"}},
            {"output": {"format": "xml"}},
            {"touch": {"families": ["nope"]}},
            {"truncation_factor": 1},
            {"extremal": {"tol": 0.0}},
        ]
        for data in bad:
            with self.subTest(data=data):
                with self.assertRaises(ConfigError):
                    ExperimentConfig.from_dict(data)


if __name__ == "__main__":
    unittest.main()
