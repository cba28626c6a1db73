import pytest

from edgeperf import default_registry


@pytest.fixture(autouse=True)
def _isolate_profile_env(monkeypatch):
    # Keep an ambient EDGEPERF_PROFILES from redirecting CLI tests.
    monkeypatch.delenv("EDGEPERF_PROFILES", raising=False)


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def p15(registry):
    return registry.get("dsr1-qwen-1.5b")


@pytest.fixture(scope="session")
def p8(registry):
    return registry.get("dsr1-llama-8b")


@pytest.fixture(scope="session")
def p14(registry):
    return registry.get("dsr1-qwen-14b")
