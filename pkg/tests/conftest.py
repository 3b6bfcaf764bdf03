import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from svfend import data, encoders, synth


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory) -> Path:
    """A 10-event / 4-per-event separable dataset saved with its caches."""
    root = tmp_path_factory.mktemp("synthds")
    dataset = synth.generate_synthetic_dataset(10, 4, seed=11, separability=1.0)
    data.save_dataset(dataset, root / "dataset.jsonl")
    synth.write_feature_caches(dataset, root, seed=11, separability=1.0)
    return root


@pytest.fixture(scope="session")
def synth_dataset(synth_dir) -> data.Dataset:
    return data.load_dataset(synth_dir / "dataset.jsonl")


@pytest.fixture(scope="session")
def stub_plugins():
    return encoders.default_stub_plugins()
