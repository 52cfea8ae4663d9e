"""Coordinate-free invariant coordinate selection for multivariate, compositional and density data."""

__version__ = "0.1.0"

from .eucspace import (  # noqa: E402
    ConditioningError,
    DimensionError,
    GramBasis,
    ICSError,
    NotPositiveDefiniteError,
    spd_inv,
    spd_inv_sqrt,
    spd_sqrt,
)
from .scatter import (  # noqa: E402
    COV,
    COV4,
    CoordinateSample,
    WeightFunction,
    empirical_cov,
    empirical_cov_w,
    empirical_mean,
    mahalanobis_norms,
)
from .ics import (  # noqa: E402
    ICSSolution,
    dual_basis,
    ics_multivariate,
    invariant_coordinates,
    reconstruct,
    solve_ics,
)
from .simplex import alr_coords, clr_comp, clr_comp_inv, coda_sample, gram_alr, ics_coda  # noqa: E402
from .bayes_spline import (  # noqa: E402
    DensitySpline,
    SplineSpaceSpec,
    bayes_inner,
    bayes_inner_double,
    clr_fn,
    clr_inv,
    density_floor,
    density_sample,
    eigendensities,
    gram_zb,
    ics_density,
    zb_basis,
)
from .mpl import ConvergenceError, MPLConfig, mpl_fit, smooth_clr_spline  # noqa: E402
from .outlier import (  # noqa: E402
    KappaRule,
    OutlierReport,
    dagostino_pvalue,
    detect,
    ics_distance,
    monte_carlo_cutoff,
    param_grid_sweep,
    select_components,
)

__all__ = [
    "ConditioningError",
    "DimensionError",
    "GramBasis",
    "ICSError",
    "NotPositiveDefiniteError",
    "spd_inv",
    "spd_inv_sqrt",
    "spd_sqrt",
    "COV",
    "COV4",
    "CoordinateSample",
    "WeightFunction",
    "empirical_cov",
    "empirical_cov_w",
    "empirical_mean",
    "mahalanobis_norms",
    "ICSSolution",
    "dual_basis",
    "ics_multivariate",
    "invariant_coordinates",
    "reconstruct",
    "solve_ics",
    "DensitySpline",
    "SplineSpaceSpec",
    "bayes_inner",
    "bayes_inner_double",
    "clr_fn",
    "clr_inv",
    "density_floor",
    "density_sample",
    "eigendensities",
    "gram_zb",
    "ics_density",
    "zb_basis",
    "KappaRule",
    "OutlierReport",
    "dagostino_pvalue",
    "detect",
    "ics_distance",
    "monte_carlo_cutoff",
    "param_grid_sweep",
    "select_components",
    "alr_coords",
    "clr_comp",
    "clr_comp_inv",
    "coda_sample",
    "gram_alr",
    "ics_coda",
    "ConvergenceError",
    "MPLConfig",
    "mpl_fit",
    "smooth_clr_spline",
]
