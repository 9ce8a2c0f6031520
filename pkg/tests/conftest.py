import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from uforest.io import LabeledDataset

settings.register_profile(
    "deterministic",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("deterministic")


def toy_dataset(X, y, n_classes=None):
    """Wrap plain arrays as a LabeledDataset with generated names."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 1 and np.asarray(y).size > 1:
        X = X.T
    y = None if y is None else np.asarray(y, dtype=np.int64)
    k = n_classes if n_classes is not None else (
        0 if y is None else int(y.max()) + 1)
    return LabeledDataset(
        features=X,
        feature_names=tuple(f"x{j + 1}" for j in range(X.shape[1])),
        labels=y,
        label_names=tuple(str(c) for c in range(k)),
    )


@pytest.fixture
def tmp_csv(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write
