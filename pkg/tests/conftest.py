import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from driftfluid.spectral import Grid, SpectralField


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def random_band_field(grid: Grid, kmax: int, rng, amplitude: float = 1.0,
                      mean: float = 0.0) -> SpectralField:
    """Random real field supported on |k_i| <= kmax on every axis, with
    fluctuation coefficients scaled by `amplitude` and the stated mean."""
    coeffs = (rng.standard_normal(grid.shape)
              + 1j * rng.standard_normal(grid.shape))
    keep = np.ones(grid.shape, dtype=bool)
    for i in range(grid.ndim):
        keep &= np.abs(grid.mode_grid(i)) <= kmax
    coeffs = np.where(keep, coeffs, 0.0)
    raw = SpectralField(grid, coeffs, real=False)
    sym = amplitude * 0.5 * (raw.coeffs + raw.conj().coeffs)
    sym[(0,) * grid.ndim] = mean
    return SpectralField(grid, sym, real=True)
