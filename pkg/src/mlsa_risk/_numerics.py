"""Small jitted helpers shared by the model kernels and the samplers."""

from numba import njit

# Inner sums longer than this use compensated (Kahan) accumulation.
KAHAN_THRESHOLD = 1 << 16


@njit(cache=True)
def pair_means(coarse_sum, rest_sum, k_coarse, m):
    """Coarse and fine inner means from the two partial payoff sums.

    ``coarse_sum`` covers the first ``k_coarse`` payoffs and ``rest_sum``
    the remaining ``k_coarse * (m - 1)``.  The fine mean is built
    recursively from the coarse one rather than as a plain mean.
    """
    coarse = coarse_sum / k_coarse
    fine = coarse / m + rest_sum / (k_coarse * m)
    return coarse, fine
