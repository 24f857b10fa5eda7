"""Stochastic control of jump diffusions: certificates, simulation, BSDEs, HJB and verification."""

from ._jumpctl import (
    ConfigError,
    Error,
    Lin1Params,
    OuDecayParams,
    Problem,
    ValueFunction,
    __version__,
    c_p,
    certify,
    eta_bp,
    lin1_ctrl_value,
    lin1_moment_rate,
    make_lin1,
    make_lin1_controls,
    make_lin1_ctrl,
    make_ou_decay,
    moment_curve,
    ou_decay_y,
    poisson_moment_oracle,
    replay,
    run,
    simulate,
    solve_bsde,
    solve_hjb,
)

__all__ = [
    "ConfigError",
    "Error",
    "Lin1Params",
    "OuDecayParams",
    "Problem",
    "ValueFunction",
    "__version__",
    "c_p",
    "certify",
    "eta_bp",
    "lin1_ctrl_value",
    "lin1_moment_rate",
    "make_lin1",
    "make_lin1_controls",
    "make_lin1_ctrl",
    "make_ou_decay",
    "moment_curve",
    "ou_decay_y",
    "poisson_moment_oracle",
    "replay",
    "run",
    "simulate",
    "solve_bsde",
    "solve_hjb",
]
