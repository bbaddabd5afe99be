import pytest
from loguru import logger

from common.config import get_settings
from mechanism.instance import Instance
from mechanism.valuations import Linear


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Fresh settings per test, with reports written under tmp_path."""
    monkeypatch.setenv("KELLYLAB_OUTPUT_DIR", str(tmp_path / "reports"))
    get_settings.cache_clear()
    yield get_settings()
    get_settings.cache_clear()


@pytest.fixture
def audit_log():
    """Messages logged through the audit channel."""
    messages = []
    handler = logger.add(messages.append, filter=lambda record: record["extra"].get("audit", False),
                         format="{message}")
    yield messages
    logger.remove(handler)


@pytest.fixture
def two_linear():
    """Two linear agents on one resource with slopes 1 and 0.5."""
    return Instance(m=1, valuations=(Linear((1.0,)), Linear((0.5,))), name="two-linear")
