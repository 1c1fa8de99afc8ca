"""Exception hierarchy shared by all ppkda modules."""


class PpkdaError(Exception):
    """Base class for all errors raised by this package."""


# --- numerics ---

class RangeOverflow(PpkdaError):
    """A value does not fit the configured fixed-point range."""


# --- crypto ---

class UnsupportedKeySize(PpkdaError):
    pass


class EntropyFailure(PpkdaError):
    pass


class MessageOutOfRange(PpkdaError):
    """Plaintext outside [0, n)."""


class KeyMismatch(PpkdaError):
    """Ciphertexts under different keys were combined, or decrypted with the wrong key."""


class MalformedCiphertext(PpkdaError):
    pass


# --- secure comparison ---

class ParamsTooLarge(PpkdaError):
    """Fixed-point parameters do not fit the plaintext space of the key in use."""


class InvalidState(PpkdaError):
    """A protocol session method was called out of order."""


class ProtocolAbort(PpkdaError):
    """A revealed value was outside its allowed domain."""


# --- keystroke / trust ---

class InvalidEvent(PpkdaError):
    pass


class InsufficientSamples(PpkdaError):
    pass


class ZeroSigma(PpkdaError):
    pass


class InvalidParams(PpkdaError):
    pass


class SteppedAfterReject(PpkdaError):
    pass


# --- protocol ---

class DuplicateUser(PpkdaError):
    pass


class UnknownUser(PpkdaError):
    pass


class UnknownKeyIndex(PpkdaError):
    pass


class SessionRejected(PpkdaError):
    """A keystroke arrived on a session that already rejected the user."""


class SessionExpired(PpkdaError):
    """A keystroke arrived after the session idle timeout."""


# --- transport / store ---

class FrameTooLarge(PpkdaError):
    pass


class ConnectionClosed(PpkdaError):
    pass


class MalformedPayload(PpkdaError):
    pass


class NotFound(PpkdaError):
    pass


class InvalidUserId(PpkdaError):
    pass


class StorageIO(PpkdaError):
    pass
