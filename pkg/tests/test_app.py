import pytest

from pitchopt import _app, _errors
from pitchopt.pitch import standard_instance


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for key in ("PITCHOPT_WORKERS", "PITCHOPT_TIME_LIMIT", "PITCHOPT_BATCH_SIZE"):
        monkeypatch.delenv(key, raising=False)


def test_registry():
    app = _app.initialize_app(workers=2, time_limit=5.0, batch_size=64, name="registry")
    try:
        assert _app.get_app("registry") is app
        assert (app.name, app.workers, app.time_limit, app.batch_size) == (
            "registry",
            2,
            5.0,
            64,
        )
        with pytest.raises(ValueError, match="already initialized"):
            _app.initialize_app(name="registry")
    finally:
        _app.close_app("registry")
    with pytest.raises(ValueError, match="not exists"):
        _app.get_app("registry")


def test_environment(monkeypatch):
    monkeypatch.setenv("PITCHOPT_WORKERS", "3")
    monkeypatch.setenv("PITCHOPT_TIME_LIMIT", "1.5")
    monkeypatch.setenv("PITCHOPT_BATCH_SIZE", "100")
    app = _app.initialize_app(name="environment")
    try:
        assert (app.workers, app.time_limit, app.batch_size) == (3, 1.5, 100)
    finally:
        _app.close_app("environment")


def test_defaults():
    app = _app.initialize_app(name="defaults")
    try:
        assert (app.workers, app.time_limit, app.batch_size) == (1, None, 4096)
    finally:
        _app.close_app("defaults")


@pytest.mark.parametrize(
    "kwargs", [dict(workers=0), dict(batch_size=0), dict(time_limit=-1.0)]
)
def test_invalid_settings(kwargs):
    with pytest.raises(ValueError):
        _app.initialize_app(name="invalid", **kwargs)


def test_invalid_environment(monkeypatch):
    monkeypatch.setenv("PITCHOPT_WORKERS", "many")
    with pytest.raises(ValueError, match="PITCHOPT_WORKERS"):
        _app.initialize_app(name="invalid-env")


def test_default_app_is_created_on_demand():
    try:
        app = _app.check_initialized_app(None)
        assert app is _app.get_app()
        assert _app.check_initialized_app(None) is app
    finally:
        _app.close_app()


def test_foreign_application_is_rejected():
    stray = _app.Application("stray", 1, None, 16)
    with pytest.raises(ValueError):
        _app.check_initialized_app(stray)


def test_executor_is_lazy_and_released():
    app = _app.initialize_app(workers=2, name="pool")
    try:
        assert app.executor is app.executor
    finally:
        _app.close_app("pool")
    assert app._executor is None


def test_exit_codes():
    assert _errors.exit_code(_errors.InfeasibleInstanceError("x")) == 1
    assert _errors.exit_code(_errors.InstanceFormatError("x")) == 2
    assert _errors.exit_code(_errors.PitchoptError("x")) == 2
    error = _errors.TrailingUnitsError("j")
    assert isinstance(error, IndexError)
    assert error.message == "j"
    with pytest.raises(_errors.TrailingUnitsError):
        standard_instance(10, 1, 8).tire_length(21)
