import pytest

from support import snowboarding_set


@pytest.fixture
def snow_ds():
    return snowboarding_set()
