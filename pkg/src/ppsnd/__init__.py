"""Privacy-preserving secure neighbor discovery (PP-SND) and a CR-TL SND baseline.

Subpackages of interest: :mod:`ppsnd.phe` (Paillier), :mod:`ppsnd.geo`
(coordinate pipeline and ranging), :mod:`ppsnd.pseudonym` (LTCA/PCA and
wallets), :mod:`ppsnd.protocol` (state machines), :mod:`ppsnd.simnet`
(deterministic simulator and adversaries), :mod:`ppsnd.bench` and
:mod:`ppsnd.trace`.
"""

from .errors import (AuthenticationError, ConfigurationError, DecodeError, DecryptionError, DomainError,
                     IssuanceError, KeyMismatchError, PPSNDError, RangingError, RateLimitedError,
                     SimulationError, SummaryError, WalletExhaustedError)
from .geo import GeoCoordinate, d_tof, enc_coord, euclid_distance_m, hec_diff, normalize_deg
from .phe import PaillierKeyPair, decrypt, encrypt, he_add, he_scalar_mul, he_sub, keygen
from .protocol import AbortReason, Outcome, SessionConfig, SessionResult
from .simnet import World, attach_curious_initiator, attach_eavesdropper, attach_forger, attach_relay
from .trace import Transcript, privacy_scan

__version__ = "0.1.0"

__all__ = [
    "AbortReason", "AuthenticationError", "ConfigurationError", "DecodeError", "DecryptionError",
    "DomainError", "GeoCoordinate", "IssuanceError", "KeyMismatchError", "Outcome", "PPSNDError",
    "PaillierKeyPair", "RangingError", "RateLimitedError", "SessionConfig", "SessionResult",
    "SimulationError", "SummaryError", "Transcript", "WalletExhaustedError", "World",
    "attach_curious_initiator", "attach_eavesdropper", "attach_forger", "attach_relay", "d_tof",
    "decrypt", "enc_coord", "encrypt", "euclid_distance_m", "he_add", "he_scalar_mul", "he_sub",
    "hec_diff", "keygen", "normalize_deg", "privacy_scan",
]
