"""
Configuration module for frameprobe.
"""

from .settings import (
    configure_logging,
    get_ce_epochs,
    get_ce_l2,
    get_ce_step_size,
    get_log_level,
    get_ood_prefix,
    get_prob_profile,
    get_seed,
    parse_seed,
)

__all__ = [
    'configure_logging',
    'get_ce_epochs',
    'get_ce_l2',
    'get_ce_step_size',
    'get_log_level',
    'get_ood_prefix',
    'get_prob_profile',
    'get_seed',
    'parse_seed',
]
