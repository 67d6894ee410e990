"""Tests for the restart worker pool."""

import pytest

from src.services.workers import Task, Worker, WorkerPool


class TestWorkerPool:
    """Test WorkerPool."""

    def test_map_keeps_item_order(self):
        """Test that results come back in item order whatever the scheduling."""
        with WorkerPool(3) as pool:
            results = pool.map(lambda x: x * x, range(20))
        assert results == [x * x for x in range(20)]

    def test_lowest_failed_task_is_raised(self):
        """Test that the error of the lowest-indexed failing task propagates."""

        def task(x):
            if x in (3, 5):
                raise ValueError(f"task {x}")
            return x

        with WorkerPool(2) as pool:
            with pytest.raises(ValueError, match="task 3"):
                pool.map(task, range(8))

    def test_pool_reusable_after_error(self):
        """Test that a failed map leaves the pool usable."""
        with WorkerPool(2) as pool:
            with pytest.raises(ZeroDivisionError):
                pool.map(lambda x: 1 / x, [0])
            assert pool.map(lambda x: 1 / x, [1, 2]) == [1.0, 0.5]

    def test_status(self):
        """Test the reported pool status."""
        with WorkerPool(2) as pool:
            status = pool.get_status()
        assert status["num_workers"] == 2
        assert status["pending"] == 0
        assert [w["worker_id"] for w in status["workers"]] == [0, 1]
        assert all(w["backlog"] == 0 for w in status["workers"])

    def test_invalid_size(self):
        """Test that at least one worker is required."""
        with pytest.raises(ValueError):
            WorkerPool(0)


class TestWorker:
    """Test a single Worker."""

    def test_submit_before_start(self):
        """Test that a stopped worker refuses tasks."""
        with pytest.raises(RuntimeError, match="not running"):
            Worker(0).submit(Task(0, str, 1, lambda *args: None))

    def test_done_receives_result(self, mocker):
        """Test that a finished task reports its index and result."""
        done = mocker.Mock()
        worker = Worker(0)
        worker.start()
        try:
            worker.submit(Task(7, str, 42, done))
            worker.queue.join()
        finally:
            worker.stop()
        done.assert_called_once_with(7, "42", None)
        assert not worker.running

    def test_done_receives_error(self, mocker):
        """Test that a failing task reports its exception instead of a result."""
        done = mocker.Mock()
        worker = Worker(1)
        worker.start()
        try:
            worker.submit(Task(2, int, "x", done))
            worker.queue.join()
        finally:
            worker.stop()
        index, result, error = done.call_args.args
        assert (index, result) == (2, None)
        assert isinstance(error, ValueError)

    def test_stop_drains_queue(self):
        """Test that stop runs the tasks queued before it."""
        seen = []
        worker = Worker(0)
        worker.start()
        for i in range(5):
            worker.submit(Task(i, seen.append, i, lambda *args: None))
        worker.stop()
        assert seen == [0, 1, 2, 3, 4]
        assert worker.backlog() == 0
