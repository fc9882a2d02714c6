import numpy as np
import pytest

from intentplan.motion import ReachConfig, synth_reach_dataset


@pytest.fixture(scope="session")
def small_dataset():
    """Four targets, few repetitions; shared across tests that just need data."""
    config = ReachConfig(
        targets=(
            np.array([0.5, -0.25, 0.14]),
            np.array([0.56, -0.08, 0.14]),
            np.array([0.56, 0.08, 0.14]),
            np.array([0.5, 0.25, 0.14]),
        ),
        repetitions=6,
        fps=10.0,
        duration=3.0,
    )
    return synth_reach_dataset(config, seed=123)


@pytest.fixture(scope="session")
def two_class_windows(small_dataset):
    from intentplan.motion import extract_windows

    windows = []
    for demo in small_dataset.demonstrations:
        action = int(demo.actions[0])
        if action in (0, 2):
            windows.extend(
                extract_windows(demo, 6, 6, num_actions=small_dataset.num_actions, stride=3)
            )
    return windows
