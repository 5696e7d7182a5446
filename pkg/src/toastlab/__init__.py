"""toastlab: separating cross-sections, corridor toasts, and entire functions
with prescribed critical points, realized on finite orbit windows."""

from .group_model import (
    BoolGroupElement,
    DeltaSet,
    GroupPoint,
    boolean_pair_sequence,
    cocycle,
    delta_element,
    norm,
)
from .orbit_window import (
    ConfigurationView,
    OrbitWindow,
    generate_window,
    phi_view,
    views_equal,
)
from .cross_section import (
    BetaTuple,
    Filtration,
    SelectorTable,
    SeparatingCrossSection,
    beta,
    build_filtration,
    build_selectors,
    build_separating_case1,
    build_separating_case2,
    greedy_lacunary,
    upsilon,
    verify_separation,
)
from .toast import (
    Box,
    Toast,
    ToastParams,
    build_grid_toast,
    is_grid_separated,
    is_polyconvex_d1,
    validate_polyconvex_toast,
    validate_toast,
)
from .entire import (
    EntireRep,
    EpsDeltaLedger,
    RestrictedRegion,
    SolverOptions,
    choose_epsilon,
    derivative,
    evaluate,
    measure_delta,
    prescribe_and_approximate,
    restricted_region,
    run_induction,
)
from .analysis import error_decay_report, locate_critical_points, verify_gradient_floor

__version__ = "0.1.0"
