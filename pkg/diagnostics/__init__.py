from .efficiency import (
    EfficiencyReport,
    acf,
    iat,
    ess,
    ces,
    effective_size,
    gelman_rubin,
    gelman_rubin_trace,
    ergodic_means,
    mc_standard_error,
    efficiency_report,
    write_report_csv,
    read_chain_csv,
    acf_table,
)

__all__ = [
    'EfficiencyReport',
    'acf',
    'iat',
    'ess',
    'ces',
    'effective_size',
    'gelman_rubin',
    'gelman_rubin_trace',
    'ergodic_means',
    'mc_standard_error',
    'efficiency_report',
    'write_report_csv',
    'read_chain_csv',
    'acf_table',
]
