import concurrent.futures
import logging
import os
import threading

__all__ = ("Application", "initialize_app", "get_app", "close_app")

logger = logging.getLogger(__name__)

_DEFAULT_APP_NAME = "<DEFAULT>"
_DEFAULT_BATCH_SIZE = 4096
_APP_LOCK = threading.Lock()

_apps: dict[str, "Application"] = {}


class Application:
    """
    Represents a pitchopt runtime configuration.

    This class holds the solver settings shared by every search and manages
    the process pool used when the exact search is partitioned across workers.

    Parameters
    ----------
    name : str
        Unique identifier for this application instance.
    workers : int
        Number of worker processes for partitioned searches. ``1`` runs
        everything in the calling process.
    time_limit : float, optional
        Default wall-clock limit in seconds for searches that receive none.
    batch_size : int
        Number of candidate sequences evaluated per vectorized batch.
    """

    __slots__ = (
        "_name",
        "_workers",
        "_executor",
        "_executor_lock",
        "time_limit",
        "batch_size",
    )

    def __init__(
        self,
        name: str,
        workers: int,
        time_limit: float | None,
        batch_size: int,
    ) -> None:
        self._name = name
        self._workers = workers
        self._executor: concurrent.futures.ProcessPoolExecutor | None = None
        self._executor_lock = threading.Lock()
        self.time_limit = time_limit
        self.batch_size = batch_size

    @property
    def name(self) -> str:
        """Application name."""
        return self._name

    @property
    def workers(self) -> int:
        """Worker process count."""
        return self._workers

    @property
    def executor(self) -> concurrent.futures.ProcessPoolExecutor:
        """
        The process pool used by partitioned searches.

        The pool is lazily created when first accessed.
        """
        with self._executor_lock:
            if self._executor is None:
                logger.debug("starting process pool with %d workers", self._workers)
                self._executor = concurrent.futures.ProcessPoolExecutor(self._workers)
            return self._executor

    def shutdown(self) -> None:
        with self._executor_lock:
            if self._executor is not None:
                self._executor.shutdown()
                self._executor = None


def _env_number(key: str, cast: type[int] | type[float]) -> int | float | None:
    raw = os.getenv(key)
    if not raw:
        return None
    try:
        return cast(raw)
    except ValueError:
        raise ValueError(f"{key}={raw!r} is not a valid {cast.__name__}") from None


def initialize_app(
    workers: int | None = None,
    time_limit: float | None = None,
    *,
    batch_size: int | None = None,
    name: str = _DEFAULT_APP_NAME,
) -> Application:
    """
    Initialize the pitchopt application.

    Settings that are not provided are read from the environment variables
    ``PITCHOPT_WORKERS``, ``PITCHOPT_TIME_LIMIT`` and ``PITCHOPT_BATCH_SIZE``.

    Parameters
    ----------
    workers : int, optional
        Worker process count. Defaults to 1.
    time_limit : float, optional
        Default search time limit in seconds.
    batch_size : int, optional
        Candidates per vectorized batch. Defaults to 4096.
    name : str, optional
        Unique name for this application instance. Defaults to a global default name.

    Returns
    -------
    Application
        The initialized application instance.

    Raises
    ------
    ValueError
        If a setting is not positive, or if an application with the same name
        is already initialized.
    """
    if workers is None:
        workers = int(_env_number("PITCHOPT_WORKERS", int) or 1)
    if time_limit is None:
        time_limit = _env_number("PITCHOPT_TIME_LIMIT", float)
    if batch_size is None:
        batch_size = int(_env_number("PITCHOPT_BATCH_SIZE", int) or _DEFAULT_BATCH_SIZE)

    if workers < 1:
        raise ValueError(f"{workers=}")
    if batch_size < 1:
        raise ValueError(f"{batch_size=}")
    if time_limit is not None and time_limit <= 0:
        raise ValueError(f"{time_limit=}")

    with _APP_LOCK:
        if name not in _apps:
            app = _apps[name] = Application(name, workers, time_limit, batch_size)
            return app

    if name == _DEFAULT_APP_NAME:
        raise ValueError(
            "The default pitchopt app already initialized. If you want to initialize "
            "multiple applications, give a unique value to the `name` parameter."
        )
    raise ValueError(f"pitchopt app named {name!r} already initialized.")


def get_app(name: str = _DEFAULT_APP_NAME) -> Application:
    """
    Retrieve an initialized application instance by name.

    Raises
    ------
    ValueError
        If no application with the specified name exists.
    """
    with _APP_LOCK:
        if name in _apps:
            return _apps[name]
    raise ValueError(f"pitchopt app named {name!r} not exists.")


def close_app(name: str = _DEFAULT_APP_NAME) -> None:
    """
    Close an initialized application and shut down its process pool.

    Raises
    ------
    ValueError
        If no application with the specified name exists.
    """
    app = get_app(name)
    with _APP_LOCK:
        del _apps[name]
    app.shutdown()


def check_initialized_app(app: Application | None) -> Application:
    if app is None:
        with _APP_LOCK:
            default = _apps.get(_DEFAULT_APP_NAME)
        if default is not None:
            return default
        try:
            return initialize_app()
        except ValueError:
            # initialized concurrently by another thread
            return get_app()
    if app is not get_app(app.name):
        raise ValueError("Application instance not initialized via the pitchopt module.")
    return app
