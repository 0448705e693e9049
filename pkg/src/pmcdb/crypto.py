"""Stateless cryptographic primitives shared by every role.

All functions here are pure: given the same key material and inputs they
return the same outputs, so they are safe to call from any thread. Standard
vetted constructions are used throughout — BLAKE2b for keyed and public
hashing, SHAKE-256 as the nonce expander, AES-ECB as the per-element
deterministic cipher, and AES-GCM for the group-metadata envelope.
"""

import hashlib
import random
import secrets
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import AuthError, ParameterError

_AES_BLOCK = 16
_GCM_NONCE = 12

KEY_BITS_DEFAULT = 128


@dataclass(frozen=True)
class SecretKeys:
    """The two symmetric keys of the scheme.

    ``s1`` stays with the admin and users only; ``s2`` is additionally shared
    with the index/witness service so it can expand stored seeds into nonces.
    """

    s1: bytes
    s2: bytes

    def __post_init__(self):
        if not self.s1 or not self.s2:
            raise ParameterError("keys must be non-empty")
        if len(self.s1) != len(self.s2):
            raise ParameterError("s1 and s2 must have equal length")
        if self.s1 == self.s2:
            raise ParameterError("s1 and s2 must differ")
        if len(self.s1) not in (16, 24, 32):
            raise ParameterError("key length must be 16, 24 or 32 bytes")

    @classmethod
    def generate(cls, k_bits: int = KEY_BITS_DEFAULT) -> "SecretKeys":
        if k_bits % 8:
            raise ParameterError("k must be a whole number of bytes")
        n = k_bits // 8
        s1 = secrets.token_bytes(n)
        s2 = secrets.token_bytes(n)
        while s2 == s1:
            s2 = secrets.token_bytes(n)
        return cls(s1, s2)


@dataclass(frozen=True)
class SchemeParams:
    """Global length and grouping parameters.

    The tag is always ``hash_len + elem_len`` bytes and seeds are exactly one
    element wide: result decryption recovers a seed by XORing an element-sized
    blinding value with the returned token, so the two widths must coincide.
    """

    field_count: int
    elem_len: int = 16
    hash_len: int = 32
    witness_len: int = 32
    group_bits: int = 0
    lambda_min: int = 1
    group_mode: str = "hash"
    group_mod: int = 0

    def __post_init__(self):
        if self.field_count < 1:
            raise ParameterError("field_count must be >= 1")
        if self.elem_len < 1 or self.elem_len % _AES_BLOCK:
            raise ParameterError(
                "elem_len must be a positive multiple of %d (AES block size)" % _AES_BLOCK
            )
        if not 1 <= self.hash_len <= 64:
            raise ParameterError("hash_len must be within 1..64")
        if not 1 <= self.witness_len <= 64:
            raise ParameterError("witness_len must be within 1..64")
        if not 0 <= self.group_bits <= 8 * self.hash_len:
            raise ParameterError("group_bits out of range")
        if self.lambda_min < 1:
            raise ParameterError("lambda_min must be >= 1")
        if self.group_mode not in ("hash", "mod"):
            raise ParameterError("group_mode must be 'hash' or 'mod'")
        if self.group_mode == "mod" and self.group_mod < 1:
            raise ParameterError("group_mod must be >= 1 in mod grouping mode")

    @property
    def seed_len(self) -> int:
        return self.elem_len

    @property
    def tag_len(self) -> int:
        return self.hash_len + self.elem_len

    @property
    def nonce_len(self) -> int:
        return self.field_count * self.elem_len + self.tag_len

    @property
    def record_len(self) -> int:
        return self.nonce_len


def rand_bytes(n: int, rng: random.Random | None = None) -> bytes:
    """Fresh randomness: OS entropy by default, a seeded generator in tests."""
    if rng is None:
        return secrets.token_bytes(n)
    return rng.randbytes(n)


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ParameterError("xor operands must have equal length")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def keyed_hash(key: bytes, message: bytes, out_len: int = 32) -> bytes:
    """Keyed digest of ``out_len`` bytes (BLAKE2b in keyed mode)."""
    return hashlib.blake2b(message, key=key, digest_size=out_len).digest()


def public_hash(message: bytes, out_len: int = 32) -> bytes:
    """Unkeyed digest of ``out_len`` bytes; anyone can recompute it."""
    return hashlib.blake2b(message, digest_size=out_len).digest()


def group_encode(s1: bytes, element: bytes, bits: int, hash_len: int = 32) -> int:
    """Map an element to its group id: the low ``bits`` bits of a keyed hash.

    ``bits = 0`` collapses everything into a single group 0.
    """
    if not 0 <= bits <= 8 * hash_len:
        raise ParameterError("bits must be within 0..%d" % (8 * hash_len))
    digest = keyed_hash(s1, element, hash_len)
    return int.from_bytes(digest, "big") & ((1 << bits) - 1)


def mod_group_encode(element: bytes, modulus: int) -> int:
    """Alternate group encoder for integer-keyed tables: value mod modulus.

    Elements are expected to be zero-padded decimal strings; anything that
    does not parse (the NULL sentinel, arbitrary bytes) falls back to the big
    integer value of the raw bytes so the mapping stays total.
    """
    if modulus < 1:
        raise ParameterError("modulus must be >= 1")
    text = element.rstrip(b"\x00")
    try:
        value = int(text.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        value = int.from_bytes(element, "big")
    return value % modulus


def element_group(keys: SecretKeys, params: SchemeParams, element: bytes) -> int:
    """Group id of an element under the configured grouping mode."""
    if params.group_mode == "mod":
        return mod_group_encode(element, params.group_mod)
    return group_encode(keys.s1, element, params.group_bits, params.hash_len)


def prg_expand(s2: bytes, seed: bytes, params: SchemeParams) -> bytes:
    """Expand a seed into a full record nonce (one segment per field + tag part)."""
    if len(seed) != params.seed_len:
        raise ParameterError(
            "seed must be %d bytes, got %d" % (params.seed_len, len(seed))
        )
    return hashlib.shake_256(s2 + seed).digest(params.nonce_len)


def nonce_segment(nonce: bytes, field: int, params: SchemeParams) -> bytes:
    """Field segment (1-based) of an expanded nonce."""
    if not 1 <= field <= params.field_count:
        raise ParameterError("field index out of range")
    start = (field - 1) * params.elem_len
    return nonce[start:start + params.elem_len]


def nonce_tag_part(nonce: bytes, params: SchemeParams) -> bytes:
    """Trailing tag-sized segment of an expanded nonce."""
    return nonce[params.field_count * params.elem_len:]


def _ecb(s1: bytes, data: bytes, encrypt: bool) -> bytes:
    if not data or len(data) % _AES_BLOCK:
        raise ParameterError("data length must be a positive multiple of 16")
    cipher = Cipher(algorithms.AES(s1), modes.ECB())
    ctx = cipher.encryptor() if encrypt else cipher.decryptor()
    return ctx.update(data) + ctx.finalize()


def det_encrypt(s1: bytes, element: bytes) -> bytes:
    """Deterministic keyed bijection on fixed-width elements (AES-ECB)."""
    return _ecb(s1, element, True)


def det_decrypt(s1: bytes, element: bytes) -> bytes:
    return _ecb(s1, element, False)


def det_encrypt_many(s1: bytes, elements: list[bytes]) -> list[bytes]:
    """Encrypt several equal-width elements with one cipher context."""
    if not elements:
        return []
    width = len(elements[0])
    joined = _ecb(s1, b"".join(elements), True)
    return [joined[i:i + width] for i in range(0, len(joined), width)]


def det_decrypt_many(s1: bytes, elements: list[bytes]) -> list[bytes]:
    if not elements:
        return []
    width = len(elements[0])
    joined = _ecb(s1, b"".join(elements), False)
    return [joined[i:i + width] for i in range(0, len(joined), width)]


def seal(key: bytes, plaintext: bytes, rng: random.Random | None = None) -> bytes:
    """Semantically secure authenticated encryption (AES-GCM, random nonce)."""
    nonce = rand_bytes(_GCM_NONCE, rng)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, None)


def unseal(key: bytes, blob: bytes) -> bytes:
    if len(blob) < _GCM_NONCE + 16:
        raise AuthError("sealed blob too short")
    try:
        return AESGCM(key).decrypt(blob[:_GCM_NONCE], blob[_GCM_NONCE:], None)
    except InvalidTag as exc:
        raise AuthError("sealed blob failed authentication") from exc


def prp_shuffle(seed, ids: list) -> list:
    """Seeded permutation of ``ids`` (swap each slot with a random later one).

    Deterministic for a given seed so shuffles are replayable in tests;
    production callers draw the seed from OS entropy.
    """
    if not ids:
        raise ParameterError("cannot shuffle an empty id list")
    if len(set(ids)) != len(ids):
        raise ParameterError("ids must be duplicate-free")
    rng = random.Random(seed)
    out = list(ids)
    for i in range(len(out) - 1):
        j = rng.randrange(i, len(out))
        out[i], out[j] = out[j], out[i]
    return out
