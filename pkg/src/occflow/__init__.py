"""Occupied processes: occupation measures, path-dependent volatility, pricing and stopping."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DimensionError,
    DomainError,
    EmptyOccupationError,
    ExtrapolationError,
    NoSolutionError,
    OccflowError,
    SimulationError,
)
from .occupation import (  # noqa: E402
    Clock,
    CorridorGrid,
    DiscreteOccupation,
    LocalTimeQuery,
    TimePermutation,
    interval_mass,
    local_time,
    make_grid,
    metric,
    occupation_from_path,
    occupation_integral,
    shuffle_path,
    spot_local_time,
    support_bounds,
)
from .sde import (  # noqa: E402
    ConstantVol,
    GuyonToyVol,
    LocalVol,
    LocalVolTable,
    OccupiedEnsemble,
    SimConfig,
    ema,
    euler_occupied,
    guyon_toy_vol,
    simulate_bm,
)
from .lov import LovConfig, TanhSensitivity, check_positivity, particle_projection, simulate_lov  # noqa: E402
from .pricing import bs_price, bs_vega, implied_vol, mc_price  # noqa: E402
from .stopping import (  # noqa: E402
    analytic_euro_value,
    eps_expansion,
    inspection_value,
    lsmc_value,
    two_date_value,
)
