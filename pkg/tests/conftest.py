"""Shared fixtures: the bundled corpus loaded once per session."""

import pytest

from invdesc import load_image
from invdesc.data import corpus_paths, sample_path


@pytest.fixture(scope="session")
def corpus_images():
    """The three bundled 128x128 grayscale test images."""
    return [load_image(p) for p in corpus_paths()]


@pytest.fixture(scope="session")
def sample_image():
    """The bundled 64x64 sample image."""
    return load_image(sample_path())
