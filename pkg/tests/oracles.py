"""Independent oracles for the biased option targets.

Given ``Y``, the nested option loss with ``K`` inner draws is
``-1 + (1 - delta) / K * chi2'_K(K delta Y^2 / (1 - delta))``, a scaled
noncentral chi-square.  Its VaR and ES follow from one-dimensional
quadrature over ``Y`` and root finding, with no simulation involved.
"""

from scipy import integrate, optimize, stats


def option_nested_sf(x, k, delta=0.5):
    """P(X_h > x) for h = 1/k."""
    b2 = 1.0 - delta

    def integrand(y):
        return stats.ncx2.sf((x + 1.0) * k / b2, k, k * delta * y * y / b2) * stats.norm.pdf(y)

    return 2.0 * integrate.quad(integrand, 0.0, 12.0, limit=400, epsabs=1e-13)[0]


def option_nested_truth(k, alpha=0.975, delta=0.5):
    """(VaR, ES) of the nested option loss with k inner draws."""
    xi = optimize.brentq(lambda x: option_nested_sf(x, k, delta) - (1.0 - alpha), 0.5, 4.0,
                         xtol=1e-12)
    tail = integrate.quad(lambda x: option_nested_sf(x, k, delta), xi, 60.0, limit=400,
                          epsabs=1e-12)[0]
    return xi, xi + tail / (1.0 - alpha)


# Frozen output of option_nested_truth (alpha = 0.975, delta = 0.5).
OPTION_NESTED_TRUTH = {
    4: (2.5699449996370354, 3.678528301715322),
    16: (2.15511317195114, 3.0991757948424814),
    32: (2.0838531172438697, 3.00047876088025),
    50: (2.058041283156743, 2.9647887787864144),
    64: (2.0479804283626026, 2.950886295663877),
    100: (2.035026070239389, 2.9329925939428723),
    128: (2.0299824797193082, 2.926028114410236),
    200: (2.0234930889257026, 2.917068981428484),
}
