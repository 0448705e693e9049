"""Exception taxonomy shared by every layer.

The CLI maps these onto exit codes, the HTTP services onto status codes,
so raising the right class matters more than the message text.
"""


class PmcdbError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class ParameterError(PmcdbError):
    """Malformed input: wrong length, out-of-range value, bad configuration."""

    code = "parameter"


class ProtocolError(PmcdbError):
    """Structurally inconsistent protocol message (size mismatch, unknown id)."""

    code = "protocol"


class CryptoError(PmcdbError):
    """Cryptographic failure that is not an authentication failure."""

    code = "crypto"


class AuthError(CryptoError):
    """Ciphertext failed authentication on decrypt."""

    code = "auth"


class RevokedUserError(AuthError):
    """Caller is on the service's revoked-user list."""

    code = "revoked"


class StoreFormatError(PmcdbError):
    """Persisted store file is corrupt, truncated, or from a different layout."""

    code = "store"
