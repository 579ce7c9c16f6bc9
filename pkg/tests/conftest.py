import numpy as np
import pytest

from aewave.config import resolve_config
from aewave.pipeline import STAGES, Run


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """The default 10 s synthetic record pushed through every stage once."""
    run = Run(resolve_config(), tmp_path_factory.mktemp("default_run"))
    summaries = {name: stage(run) for name, stage in STAGES.items()}
    return run, summaries
