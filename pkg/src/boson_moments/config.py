"""Tolerances and desk-scale caps."""

import os

EXACT_TOL = 1e-10
EVOLVED_TOL = 1e-8
ZERO_EIGENVALUE_CUTOFF = 1e-12
SEMISIMPLE_COND_LIMIT = 1e8
SIGN_THRESHOLD = 1e-6

#: dense paths over modes (PSD checks, spectra) refuse matrices larger than this
DENSE_MODE_CAP = 64


def dense_dimension_cap() -> int:
    """Sector dimension above which moment evolution switches to Krylov action."""
    return int(os.environ.get("BOSON_MOMENTS_CAP", "4096"))


#: largest single sector (number of complex amplitudes) ever allocated
MEMORY_CAP = 4_000_000
#: largest number of nonzero initial moments accepted by the encoder
NONZERO_MOMENT_CAP = 100_000
