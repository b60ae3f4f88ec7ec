"""O(N^2) reference path for the Riesz potential, used to cross-validate the
FFT route.  Kept separate so the numba dependency stays in one place."""

import numpy as np
from numba import njit


@njit(cache=True)
def direct_convolve(coords, rho, kweights, kshape, kbase):
    """For each masked node x, sum w(x - y) * rho(y) over masked nodes y.

    coords: (N, n) integer node indices, lexicographic order.
    kweights: flattened kernel table with shape kshape; kbase is the index
    of the zero offset per axis.  Inner loop is sequential, so the summation
    order is fixed.
    """
    npts, ndim = coords.shape
    strides = np.empty(ndim, dtype=np.int64)
    strides[ndim - 1] = 1
    for a in range(ndim - 2, -1, -1):
        strides[a] = strides[a + 1] * kshape[a + 1]
    out = np.empty(npts)
    for i in range(npts):
        acc = 0.0
        for j in range(npts):
            flat = 0
            for a in range(ndim):
                flat += (coords[i, a] - coords[j, a] + kbase[a]) * strides[a]
            acc += kweights[flat] * rho[j]
        out[i] = acc
    return out
