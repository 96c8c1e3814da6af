import os

import hypothesis
import numpy as np

hypothesis.settings.register_profile(
    "ci", max_examples=30, deadline=None, derandomize=True
)
hypothesis.settings.register_profile(
    "thorough", max_examples=200, deadline=None
)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "ci"))


def dense_forward_dft(n: int) -> np.ndarray:
    """Unitary forward DFT matrix built straight from the definition.

    Kept independent of any FFT routine so it can serve as the oracle for
    transform round trips and for the partial inverse-DFT measurement rows.
    """
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(-2j * np.pi * j * k / n) / np.sqrt(n)


def dense_inverse_dft(n: int) -> np.ndarray:
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(2j * np.pi * j * k / n) / np.sqrt(n)
