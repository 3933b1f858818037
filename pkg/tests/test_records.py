import json
import math
import tempfile
import unittest
from pathlib import Path

from src.errors import ConfigError
from src.managers.records import EstimateRecord, RecordStore, param_keys, records_from_csv, records_to_csv


class RecordFormatTests(unittest.TestCase):
    def setUp(self):
        self.records = [
            EstimateRecord("crossing", 1.0, {"quad": "rect:8x4", "bc": "free"}, 0.5, 0.01, 2000, 42, 12.5),
            EstimateRecord("crossing", 2.0, {"quad": "rect:8x4", "exact": True}, 0.25, 0.0, 0, 42, 3.0),
        ]

    def test_header_and_param_union(self):
        self.assertEqual(param_keys(self.records), ["quad", "bc", "exact"])
        lines = records_to_csv(self.records).splitlines()
        self.assertEqual(lines[0], "experiment,q,quad,bc,exact,estimate,std_err,n_samples,seed,wall_ms")
        self.assertEqual(lines[1], "crossing,1.0,rect:8x4,free,,0.5,0.01,2000,42,0")
        self.assertEqual(lines[2], "crossing,2.0,rect:8x4,,1,0.25,0.0,0,42,0")

    def test_timing_only_when_enabled(self):
        timed = records_to_csv(self.records, record_timing=True).splitlines()
        self.assertTrue(timed[1].endswith(",12.5"))

    def test_csv_read_back(self):
        again = records_from_csv(records_to_csv(self.records))
        self.assertEqual([r.params for r in again], [{"quad": "rect:8x4", "bc": "free"},
                                                     {"quad": "rect:8x4", "exact": "1"}])
        self.assertEqual(again[0].n_samples, 2000)
        with self.assertRaises(ConfigError):
            records_from_csv("a,b,c\n1,2,3\n")

    def test_nan_estimates(self):
        rec = EstimateRecord("arm_exponent", 1.0, {"sigma": "10"})
        self.assertIsNone(rec.to_json()["estimate"])
        self.assertIn(",nan,nan,", records_to_csv([rec]))
        back = EstimateRecord.from_json(rec.to_json())
        self.assertTrue(math.isnan(back.estimate))

    def test_list_params(self):
        rec = EstimateRecord("arms", 1.0, {"R": [4, 8, 16]}, 1.0)
        self.assertIn("4 8 16", records_to_csv([rec]))


class RecordStoreTests(unittest.TestCase):
    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()
        self.base = Path(self.tempdir.name)

    def tearDown(self):
        self.tempdir.cleanup()

    def test_unknown_format(self):
        with self.assertRaises(ConfigError):
            RecordStore(self.base / "out.txt")

    def test_json_store_and_append(self):
        store = RecordStore(self.base / "runs" / "out.json")
        store.write([EstimateRecord("touch_p", 4.0, {"R": 4}, 0.3)])
        store.append([EstimateRecord("touch_p", 4.0, {"R": 8}, 0.2)])
        loaded = store.load()
        self.assertEqual([r.params["R"] for r in loaded], [4, 8])
        data = json.loads(store.path.read_text(encoding="utf-8"))
        self.assertEqual(data[0]["wall_ms"], 0)

    def test_same_records_same_bytes(self):
        recs = [EstimateRecord("chains_k_mean", 1.0, {"N": 16}, 1.25, 0.1, 100, 7, 99.0)]
        one = RecordStore(self.base / "a.csv").write(recs).read_bytes()
        two = RecordStore(self.base / "b.csv").write(recs).read_bytes()
        self.assertEqual(one, two)

    def test_corrupted_file_is_backed_up(self):
        path = self.base / "out.json"
        path.write_text("{not json", encoding="utf-8")
        store = RecordStore(path)
        self.assertEqual(store.load(), [])
        self.assertFalse(path.exists())
        self.assertTrue((self.base / "out.json.corrupted").exists())

    def test_corrupted_csv_is_backed_up(self):
        path = self.base / "out.csv"
        path.write_text("experiment,q,estimate\nx,notanumber,1\n", encoding="utf-8")
        self.assertEqual(RecordStore(path).load(), [])
        self.assertTrue((self.base / "out.csv.corrupted").exists())


if __name__ == "__main__":
    unittest.main()
