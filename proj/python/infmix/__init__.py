"""Python access to the infmix library (renewal sequences, operators, mixing series)."""
from ._infmix import (  # noqa: F401
    __version__,
    a_seq,
    correlation_operator,
    fit_rate,
    lsv_return_time,
    parse_toml,
    renewal_sequence,
    run,
    selftest,
    synthetic_T_mean,
    verify,
)
