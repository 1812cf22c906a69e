"""Exception types shared across the package.

Validation failures raise ValueError (argument contracts) or one of the
classes below (file formats), all rooted at DeepcandError so the CLI can
map them to a single machine-readable diagnostic path.
"""


class DeepcandError(Exception):
    """Base class for errors raised by this package."""


class FormatError(DeepcandError):
    """A byte stream or text stream violates an on-disk format."""


class BadMagicError(FormatError):
    """The leading magic bytes are not the expected tag."""


class BadVersionError(FormatError):
    """The format version field holds an unsupported value."""


class TruncatedPayloadError(FormatError):
    """The payload is shorter or longer than the header promises."""


class NonFiniteError(FormatError):
    """Loaded values contain NaN or infinity."""


class IndexFormatError(FormatError):
    """A corpus index line is malformed or violates range constraints."""
