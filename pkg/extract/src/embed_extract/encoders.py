"""Sentence encoders.

The default is a deterministic hashing encoder: each token hashes to a
fixed unit vector and a sentence is the mean of its token vectors. It
needs no model weights, gives reproducible output on any machine, and
keeps same-vocabulary sentences close together, which is all the
downstream selection mechanism cares about. A pretrained
sentence-transformers route is available as "sbert:<model>" when real
semantic embeddings are wanted.
"""

import hashlib
import re

import numpy as np

_TOKEN = re.compile(r"[a-z0-9']+")


class EncoderLoadError(RuntimeError):
    """Requested encoder cannot be constructed."""


class HashEncoder:
    """Deterministic token-hashing encoder, mean-pooled per sentence."""

    def __init__(self, dim: int = 768):
        if int(dim) < 1:
            raise EncoderLoadError(f"hash encoder dim must be positive, got {dim}")
        self.dim = int(dim)
        self._cache: dict[str, np.ndarray] = {}

    @property
    def identity(self) -> str:
        return f"hash:{self.dim}"

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            gen = np.random.Generator(np.random.Philox(int.from_bytes(digest, "little")))
            vec = gen.standard_normal(self.dim)
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:  # unreachable in practice, keep the vector usable
                vec[0] = 1.0
                norm = 1.0
            vec /= norm
            self._cache[token] = vec
        return vec

    def encode(self, sentences) -> np.ndarray:
        out = np.zeros((len(sentences), self.dim), dtype=np.float64)
        for i, sentence in enumerate(sentences):
            tokens = _TOKEN.findall(sentence.lower())
            if tokens:
                out[i] = np.mean([self._token_vector(t) for t in tokens], axis=0)
        return out


class SbertEncoder:
    """Pretrained sentence-transformers model; dim follows the checkpoint."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderLoadError(
                "sentence-transformers is not installed; "
                "pip install embed-extract[sbert] or use the hash encoder"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderLoadError(f"could not load {model_name!r}: {exc}") from exc
        self._name = model_name
        self.dim = int(self._model.get_sentence_embedding_dimension())

    @property
    def identity(self) -> str:
        return f"sbert:{self._name}"

    def encode(self, sentences) -> np.ndarray:
        return np.asarray(self._model.encode(list(sentences)), dtype=np.float64)


def load_encoder(name: str = "hash:768"):
    """Build an encoder from its name: "hash", "hash:<dim>", or "sbert:<model>"."""
    scheme, _, arg = name.partition(":")
    if scheme == "hash":
        if not arg:
            return HashEncoder()
        try:
            return HashEncoder(int(arg))
        except ValueError:
            raise EncoderLoadError(f"bad hash encoder dim {arg!r}") from None
    if scheme == "sbert":
        if not arg:
            raise EncoderLoadError("sbert encoder needs a model name, e.g. sbert:all-MiniLM-L6-v2")
        return SbertEncoder(arg)
    raise EncoderLoadError(f"unknown encoder {name!r}; expected hash[:dim] or sbert:<model>")
