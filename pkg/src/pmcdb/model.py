"""Core data types shared by every role: records, queries, directories, witnesses.

Everything here is a plain value object. Directories (the group map and the
nonce list) are owned by exactly one role's state machine; the types carry no
behaviour beyond construction, validation, and byte-level (de)serialisation.
"""

import random
import struct
from dataclasses import dataclass
from enum import Enum

from .crypto import (
    SchemeParams,
    SecretKeys,
    keyed_hash,
    rand_bytes,
    seal,
    unseal,
    xor_bytes,
)
from .errors import ParameterError


def null_element(params: SchemeParams) -> bytes:
    """The reserved sentinel filling surplus dummy slots (all 0xFF bytes)."""
    return b"\xff" * params.elem_len


def pad_element(raw: bytes, elem_len: int) -> bytes:
    """Right-pad with zero bytes to the fixed element width; reject oversize."""
    if len(raw) > elem_len:
        raise ParameterError(
            "element of %d bytes exceeds the %d-byte width" % (len(raw), elem_len)
        )
    return raw + bytes(elem_len - len(raw))


def unpad_element(element: bytes) -> bytes:
    return element.rstrip(b"\x00")


class QueryType(str, Enum):
    SELECT = "select"
    DELETE = "delete"


@dataclass(frozen=True)
class Record:
    """One plaintext row: fixed-width elements plus a real/dummy flag."""

    elements: tuple
    flag: bool = True

    def validate(self, params: SchemeParams):
        if len(self.elements) != params.field_count:
            raise ParameterError(
                "record has %d elements, expected %d"
                % (len(self.elements), params.field_count)
            )
        for e in self.elements:
            if len(e) != params.elem_len:
                raise ParameterError("element width %d != %d" % (len(e), params.elem_len))


@dataclass(frozen=True)
class EncryptedRecord:
    """Blinded row: one ciphertext block per field plus the filtering tag."""

    blinded: tuple
    tag: bytes

    def to_bytes(self) -> bytes:
        return b"".join(self.blinded) + self.tag

    @classmethod
    def from_bytes(cls, raw: bytes, params: SchemeParams) -> "EncryptedRecord":
        if len(raw) != params.record_len:
            raise ParameterError(
                "encrypted record must be %d bytes, got %d" % (params.record_len, len(raw))
            )
        w = params.elem_len
        blinded = tuple(raw[i * w:(i + 1) * w] for i in range(params.field_count))
        return cls(blinded, raw[params.field_count * w:])


def xor_record(ercd: EncryptedRecord, mask: bytes, params: SchemeParams) -> EncryptedRecord:
    """XOR a whole-record mask into an encrypted record (re-randomisation step)."""
    return EncryptedRecord.from_bytes(xor_bytes(ercd.to_bytes(), mask), params)


@dataclass(frozen=True)
class Query:
    qtype: QueryType
    field: int
    element: bytes

    def validate(self, params: SchemeParams):
        if not 1 <= self.field <= params.field_count:
            raise ParameterError("query field %d out of range" % self.field)
        if len(self.element) != params.elem_len:
            raise ParameterError("query element must be %d bytes" % params.elem_len)


@dataclass(frozen=True)
class EncryptedQuery:
    qtype: QueryType
    field: int
    e_star: bytes


@dataclass(frozen=True)
class GroupMeta:
    """Decrypted per-group metadata: the element set and its padding threshold."""

    elements: frozenset
    threshold: int

    def to_bytes(self) -> bytes:
        parts = [struct.pack(">IQ", len(self.elements), self.threshold)]
        parts.extend(sorted(self.elements))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, raw: bytes, params: SchemeParams) -> "GroupMeta":
        if len(raw) < 12:
            raise ParameterError("group metadata too short")
        count, threshold = struct.unpack(">IQ", raw[:12])
        body = raw[12:]
        if len(body) != count * params.elem_len:
            raise ParameterError("group metadata body size mismatch")
        w = params.elem_len
        elems = frozenset(body[i * w:(i + 1) * w] for i in range(count))
        return cls(elems, threshold)


@dataclass
class GroupEntry:
    """What the index service stores per group: the id list and sealed metadata."""

    il: list
    meta_ct: bytes


@dataclass(frozen=True)
class NonceEntry:
    """Seed and its expanded nonce, position-aligned with the encrypted store."""

    seed: bytes
    nonce: bytes


@dataclass(frozen=True)
class Witness:
    """Per-record pair letting the storage service test a match (w) and the
    querying user recover the record's seed (t)."""

    w: bytes
    t: bytes


@dataclass(frozen=True)
class SearchHit:
    rid: int
    ercd: EncryptedRecord
    t: bytes


@dataclass
class SearchResult:
    hits: list


@dataclass
class PlainDatabase:
    """Plaintext rows plus derived per-field views (universe, occurrences)."""

    rows: list
    field_names: tuple | None = None

    def __post_init__(self):
        self.rows = list(self.rows)

    def __len__(self):
        return len(self.rows)

    def validate(self, params: SchemeParams):
        for row in self.rows:
            row.validate(params)

    def universe(self, field: int, include_null: bool = False) -> set:
        if not self.rows:
            return set()
        null = b"\xff" * len(self.rows[0].elements[field - 1])
        out = set()
        for row in self.rows:
            e = row.elements[field - 1]
            if include_null or e != null:
                out.add(e)
        return out


def occurrence_census(
    db: PlainDatabase, field: int, include_dummies: bool = False
) -> dict:
    """Exact per-element occurrence counts for one field.

    Setup padding maths counts real rows only; auditing a padded database
    counts everything, so the caller picks the scope.
    """
    if db.rows and not 1 <= field <= len(db.rows[0].elements):
        raise ParameterError("field %d out of range" % field)
    counts: dict = {}
    for row in db.rows:
        if not include_dummies and not row.flag:
            continue
        e = row.elements[field - 1]
        counts[e] = counts.get(e, 0) + 1
    return counts


def tag_make(
    real: bool,
    n_tag: bytes,
    s1: bytes,
    params: SchemeParams,
    rng: random.Random | None = None,
) -> bytes:
    """Build a record tag.

    A real record's tag is ``(H_k(S) || S) XOR n_tag`` for fresh randomness
    ``S``; a dummy's tag is uniform bytes, so it fails the check below except
    with negligible probability.
    """
    if len(n_tag) != params.tag_len:
        raise ParameterError("n_tag must be %d bytes" % params.tag_len)
    if not real:
        return rand_bytes(params.tag_len, rng)
    s = rand_bytes(params.elem_len, rng)
    return xor_bytes(keyed_hash(s1, s, params.hash_len) + s, n_tag)


def tag_check(tag: bytes, n_tag: bytes, s1: bytes, params: SchemeParams) -> bool:
    """True iff the tag marks a real record once unblinded with its nonce part."""
    if len(tag) != params.tag_len or len(n_tag) != params.tag_len:
        raise ParameterError("tag and n_tag must be %d bytes" % params.tag_len)
    plain = xor_bytes(tag, n_tag)
    tag_l, tag_r = plain[:params.hash_len], plain[params.hash_len:]
    return tag_l == keyed_hash(s1, tag_r, params.hash_len)


def seal_meta(
    keys: SecretKeys,
    meta: GroupMeta,
    rng: random.Random | None = None,
) -> bytes:
    return seal(keys.s1, meta.to_bytes(), rng)


def open_meta(keys: SecretKeys, blob: bytes, params: SchemeParams) -> GroupMeta:
    return GroupMeta.from_bytes(unseal(keys.s1, blob), params)
