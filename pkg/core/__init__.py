from .errors import (
    GmrfError,
    InvalidArgumentError,
    NotPositiveDefiniteError,
    SingularFactorError,
    UndefinedVarianceError,
    ChainFileError,
)
from .graph import (
    MarkovGraph,
    Coloring,
    build_lattice,
    from_edge_list,
    greedy_color,
    validate_coloring,
    color_order,
)
from .rng import RngStream, draw_normal, draw_inverse_gamma
from .polyagamma import PgParams, draw_pg, draw_pg_vector
from .gmrf import (
    GmrfConditional,
    FieldState,
    FieldUpdater,
    SamplerKind,
    iar_structure,
    proper_car_structure,
    posterior_conditional,
    block_sample,
    single_site_sweep,
    chromatic_sweep,
    exact_moments_dense,
)

__all__ = [
    'GmrfError',
    'InvalidArgumentError',
    'NotPositiveDefiniteError',
    'SingularFactorError',
    'UndefinedVarianceError',
    'ChainFileError',
    'MarkovGraph',
    'Coloring',
    'build_lattice',
    'from_edge_list',
    'greedy_color',
    'validate_coloring',
    'color_order',
    'RngStream',
    'draw_normal',
    'draw_inverse_gamma',
    'PgParams',
    'draw_pg',
    'draw_pg_vector',
    'GmrfConditional',
    'FieldState',
    'FieldUpdater',
    'SamplerKind',
    'iar_structure',
    'proper_car_structure',
    'posterior_conditional',
    'block_sample',
    'single_site_sweep',
    'chromatic_sweep',
    'exact_moments_dense',
]
