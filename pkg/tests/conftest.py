import pytest

from tapeloop.corpus import CORPUS
from tapeloop.tm2pm import compile_tm_to_pm
from tapeloop.tf_compile import compile_pm_to_tf


@pytest.fixture(scope="session")
def compiled():
    """One compiled artifact and weight set per corpus machine."""
    out = {}
    for name, entry in CORPUS.items():
        artifact = compile_tm_to_pm(entry.spec, space_bound=2)
        weights = compile_pm_to_tf(artifact.pm, window=artifact.queue_size)
        out[name] = (entry, artifact, weights)
    return out
