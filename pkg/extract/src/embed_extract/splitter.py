"""Rule-based sentence splitting.

SPLITTER_VERSION names the rule set and is stamped into the output index
metadata, so downstream consumers can tell when a corpus was produced by
a different splitter.
"""

import re

SPLITTER_VERSION = "regex-v1"

# a sentence ends at ., ! or ? (optionally followed by one closing quote
# or bracket, which stays attached) when whitespace and an upper-case
# letter, digit, or opening quote follow
_BOUNDARY = re.compile(
    r"(?:(?<=[.!?])|(?<=[.!?][\"')\]]))\s+(?=[\"'(\[]?[A-Z0-9])"
)


def split_sentences(text: str) -> list[str]:
    """Split text into sentences; internal whitespace collapses to single spaces.

    Text without terminal punctuation comes back as one sentence. No
    abbreviation handling; "Dr. Smith" splits.
    """
    pieces = _BOUNDARY.split(text.strip())
    return [" ".join(p.split()) for p in pieces if p.strip()]
