"""Privacy-preserving keystroke-dynamics continuous authentication."""

from .fixedpoint import DEFAULT_PARAMS, FixedPointParams, decode, encode, to_offset_domain
from .keystroke import GeneratorProfile, KeyEvent, ReferenceTemplate, build_template, synthesize
from .paillier import HomPrivateKey, HomPublicKey, keygen
from .trust import Decision, TrustParams

__all__ = [
    "DEFAULT_PARAMS",
    "Decision",
    "FixedPointParams",
    "GeneratorProfile",
    "HomPrivateKey",
    "HomPublicKey",
    "KeyEvent",
    "ReferenceTemplate",
    "TrustParams",
    "build_template",
    "decode",
    "encode",
    "keygen",
    "synthesize",
    "to_offset_domain",
]

__version__ = "0.1.0"
