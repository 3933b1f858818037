import os
import threading
import time
import unittest
from unittest.mock import patch

from src.managers.jobs import THREADS_ENV, JobPool, resolve_workers, run_jobs


class ResolveWorkersTests(unittest.TestCase):
    def test_explicit_request_wins(self):
        with patch.dict(os.environ, {THREADS_ENV: "7"}):
            self.assertEqual(resolve_workers(3), 3)

    def test_environment_and_auto(self):
        with patch.dict(os.environ, {THREADS_ENV: "5"}):
            self.assertEqual(resolve_workers(), 5)
        with patch.dict(os.environ, {THREADS_ENV: "0"}):
            self.assertEqual(resolve_workers(), os.cpu_count() or 1)
        with patch.dict(os.environ, {THREADS_ENV: "lots"}):
            self.assertGreaterEqual(resolve_workers(), 1)


class JobPoolTests(unittest.TestCase):
    def test_results_in_index_order(self):
        def slow_square(x):
            time.sleep(0.001 * (10 - x))
            return x * x

        self.assertEqual(run_jobs(slow_square, list(range(10)), workers=4), [x * x for x in range(10)])

    def test_worker_count_does_not_change_values(self):
        payloads = list(range(50))
        one = run_jobs(lambda x: x + 1, payloads, workers=1)
        many = run_jobs(lambda x: x + 1, payloads, workers=8)
        self.assertEqual(one, many)

    def test_first_error_is_reraised(self):
        def fail_on_three(x):
            if x == 3:
                raise ValueError("three")
            return x

        with self.assertRaises(ValueError):
            run_jobs(fail_on_three, list(range(6)), workers=2)

    def test_callback_and_submit_after_stop(self):
        seen = []
        lock = threading.Lock()

        def done(result):
            with lock:
                seen.append(result.index)

        pool = JobPool(lambda x: x, workers=2, on_job_done=done)
        pool.start()
        for i in range(5):
            pool.submit(i, i)
        pool.stop()
        self.assertEqual(sorted(seen), list(range(5)))
        self.assertEqual([r.index for r in pool.get_results()], list(range(5)))
        with self.assertRaises(RuntimeError):
            pool.submit(9, 9)

    def test_empty_payloads(self):
        self.assertEqual(run_jobs(lambda x: x, []), [])


if __name__ == "__main__":
    unittest.main()
