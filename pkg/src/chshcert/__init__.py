"""Certified upper bounds on singlet extractability for a CHSH-saturating state family."""

from chshcert.qubit_algebra import (
    AffineChannel,
    ExtremalChannelParams,
    InvalidChannelError,
    InvalidParameterError,
    InvalidStateError,
    KrausPair,
)
from chshcert.chsh_model import REFERENCE_PARAMS, StateFamilyParams, Strategy, chsh_score
from chshcert.bounds import ReducedPoint, epsilon_rho, iota_sup, residual_cube_certificate
from chshcert.certifier import CertificateReport, CertProblem, certify, resume

__all__ = [
    "AffineChannel",
    "CertProblem",
    "CertificateReport",
    "ExtremalChannelParams",
    "InvalidChannelError",
    "InvalidParameterError",
    "InvalidStateError",
    "KrausPair",
    "REFERENCE_PARAMS",
    "ReducedPoint",
    "StateFamilyParams",
    "Strategy",
    "certify",
    "chsh_score",
    "epsilon_rho",
    "iota_sup",
    "residual_cube_certificate",
    "resume",
]

__version__ = "0.1.0"
