"""Thread worker pool for independent solver restarts.

Each restart is a pure function of its index, so the pool only has to run tasks and hand the
results back keyed by that index; the order in which threads finish never shows up in the output.
"""

import threading
from dataclasses import dataclass
from queue import Queue
from typing import Any, Callable, Dict, Iterable, List, Optional

from ..core.logging import get_logger

logger = get_logger(__name__)

Outcome = Callable[[int, Any, Optional[BaseException]], None]


@dataclass(frozen=True)
class Task:
    """One unit of work: ``done(index, fn(arg), None)`` or ``done(index, None, error)``."""

    index: int
    fn: Callable[[Any], Any]
    arg: Any
    done: Outcome


_STOP = object()


class Worker:
    """One daemon thread with its own queue."""

    def __init__(self, worker_id: int):
        self.worker_id = worker_id
        self.queue: "Queue[Any]" = Queue()
        self.active: Optional[Task] = None
        self._thread: Optional[threading.Thread] = None

    @property
    def running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def start(self) -> None:
        if self.running:
            return
        self._thread = threading.Thread(target=self._loop, name=f"bklkit-worker-{self.worker_id}", daemon=True)
        self._thread.start()
        logger.debug("Worker started", worker_id=self.worker_id)

    def stop(self, timeout: float = 5.0) -> None:
        """Finish queued tasks, then end the thread."""
        if not self.running:
            return
        self.queue.put(_STOP)
        assert self._thread is not None
        self._thread.join(timeout=timeout)
        logger.debug("Worker stopped", worker_id=self.worker_id)

    def submit(self, task: Task) -> None:
        if not self.running:
            raise RuntimeError(f"worker {self.worker_id} is not running")
        self.queue.put(task)

    def backlog(self) -> int:
        """Queued tasks plus the one being run."""
        return self.queue.qsize() + (self.active is not None)

    def _loop(self) -> None:
        while True:
            item = self.queue.get()
            try:
                if item is _STOP:
                    return
                self.active = item
                self._run(item)
            finally:
                self.active = None
                self.queue.task_done()

    def _run(self, task: Task) -> None:
        try:
            result = task.fn(task.arg)
        except Exception as e:
            logger.warning("Restart failed", worker_id=self.worker_id, index=task.index, error=str(e))
            task.done(task.index, None, e)
        else:
            task.done(task.index, result, None)


class WorkerPool:
    """Fixed set of workers; ``map`` returns results in item order."""

    def __init__(self, num_workers: int):
        if num_workers < 1:
            raise ValueError(f"num_workers must be at least 1, got {num_workers}")
        self.num_workers = num_workers
        self.workers: List[Worker] = [Worker(i) for i in range(num_workers)]
        self._results: Dict[int, Any] = {}
        self._errors: Dict[int, BaseException] = {}
        self._pending = 0
        self._settled = threading.Condition()

    def start(self) -> None:
        logger.debug("Starting worker pool", num_workers=self.num_workers)
        for worker in self.workers:
            worker.start()

    def stop(self) -> None:
        for worker in self.workers:
            worker.stop()

    def _record(self, index: int, result: Any, error: Optional[BaseException]) -> None:
        with self._settled:
            if error is None:
                self._results[index] = result
            else:
                self._errors[index] = error
            self._pending -= 1
            self._settled.notify_all()

    def _least_loaded(self) -> Worker:
        return min(self.workers, key=lambda w: (w.backlog(), w.worker_id))

    def map(self, fn: Callable[[Any], Any], items: Iterable[Any]) -> List[Any]:
        """Apply ``fn`` to every item on the pool threads.

        Raises:
            Exception: The error of the lowest-indexed failed item, after all items finished.
        """
        items = list(items)
        with self._settled:
            self._results, self._errors = {}, {}
            self._pending = len(items)
        for index, item in enumerate(items):
            self._least_loaded().submit(Task(index, fn, item, self._record))
        with self._settled:
            self._settled.wait_for(lambda: self._pending == 0)
        if self._errors:
            raise self._errors[min(self._errors)]
        return [self._results[index] for index in range(len(items))]

    def get_status(self) -> Dict[str, Any]:
        with self._settled:
            pending = self._pending
        return {
            "num_workers": self.num_workers,
            "pending": pending,
            "workers": [
                {"worker_id": w.worker_id, "running": w.running, "backlog": w.backlog()} for w in self.workers
            ],
        }

    def __enter__(self) -> "WorkerPool":
        self.start()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.stop()
