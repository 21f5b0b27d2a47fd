"""Nets, spiderwebs, retraction families and their certification toolkit."""

from .geometry import Ambient, BlockSpace, NormKind, Vector, block_norms, norm, radial_project
from .nets import (
    BudgetExceededError,
    LipschitzEquivalence,
    NetParams,
    ParseError,
    SeparationError,
    Spiderweb,
    SpiderwebBase,
    build_spiderweb_base,
    greedy_separated,
    net_to_spiderweb,
    sphere_candidates,
    transport_basis,
    validate_net,
)
from .family import RetractionFamily
from .retract_fd import OrderedNet, Psi, build_fd_family, build_ordered_net, n_of, phi_fd, psi, rho

__all__ = [
    "Ambient",
    "BlockSpace",
    "BudgetExceededError",
    "LipschitzEquivalence",
    "NetParams",
    "NormKind",
    "OrderedNet",
    "ParseError",
    "Psi",
    "RetractionFamily",
    "SeparationError",
    "Spiderweb",
    "SpiderwebBase",
    "Vector",
    "block_norms",
    "build_fd_family",
    "build_ordered_net",
    "build_spiderweb_base",
    "greedy_separated",
    "n_of",
    "net_to_spiderweb",
    "norm",
    "phi_fd",
    "psi",
    "radial_project",
    "rho",
    "sphere_candidates",
    "transport_basis",
    "validate_net",
]

__version__ = "0.1.0"
