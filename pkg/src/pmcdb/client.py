"""User-side cryptography: record and query encryption, result decryption,
insert bundles, and delete-tag rewriting.

All state is per call or per session (a fresh blinding value per query), so
any number of concurrent sessions are safe as long as they do not share a
session object.
"""

import logging
import random
from dataclasses import dataclass

from .crypto import (
    SchemeParams,
    SecretKeys,
    det_decrypt_many,
    det_encrypt,
    det_encrypt_many,
    element_group,
    nonce_segment,
    nonce_tag_part,
    prg_expand,
    rand_bytes,
    xor_bytes,
)
from .errors import ParameterError, ProtocolError
from .model import (
    EncryptedQuery,
    EncryptedRecord,
    GroupMeta,
    NonceEntry,
    Query,
    Record,
    SearchResult,
    null_element,
    seal_meta,
    tag_check,
    tag_make,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuerySession:
    """Everything the user must remember between issuing a query and
    decrypting its result: the blinding value never leaves the client."""

    eta: bytes
    gid: int
    eq: EncryptedQuery


@dataclass(frozen=True)
class FetchedMeta:
    """Group metadata as fetched for one field of a pending insert.

    ``gid`` is the group the index service actually served, which may be the
    closest existing group rather than the element's own encoding.
    """

    field: int
    gid: int
    meta: GroupMeta


@dataclass
class InsertBundle:
    """One real record plus the dummies that keep its groups uniformly padded."""

    records: list  # (EncryptedRecord, NonceEntry, group-id tuple), real row first
    updated_meta: list  # (field, gid, new sealed metadata)
    dummy_count: int


def rcd_enc(
    rcd: Record,
    flag: bool,
    keys: SecretKeys,
    params: SchemeParams,
    rng: random.Random | None = None,
):
    """Encrypt one row: deterministic per-element cipher XOR a fresh nonce.

    Returns ``(ercd, seed, nonce, groups)`` where ``groups`` holds the group
    id of each field's element.
    """
    rcd.validate(params)
    seed = rand_bytes(params.seed_len, rng)
    nonce = prg_expand(keys.s2, seed, params)
    enc = det_encrypt_many(keys.s1, list(rcd.elements))
    blinded = []
    groups = []
    for f, ct in enumerate(enc, 1):
        start = (f - 1) * params.elem_len
        blinded.append(xor_bytes(ct, nonce[start:start + params.elem_len]))
        groups.append(element_group(keys, params, rcd.elements[f - 1]))
    tag = tag_make(flag, nonce_tag_part(nonce, params), keys.s1, params, rng)
    return EncryptedRecord(tuple(blinded), tag), seed, nonce, tuple(groups)


def query_enc(
    q: Query,
    keys: SecretKeys,
    params: SchemeParams,
    rng: random.Random | None = None,
) -> QuerySession:
    """Blind a query; type and field travel in the clear by design."""
    q.validate(params)
    eta = rand_bytes(params.elem_len, rng)
    gid = element_group(keys, params, q.element)
    e_star = xor_bytes(det_encrypt(keys.s1, q.element), eta)
    return QuerySession(eta, gid, EncryptedQuery(q.qtype, q.field, e_star))


def rcd_dec(
    sr: SearchResult,
    eta: bytes,
    keys: SecretKeys,
    params: SchemeParams,
) -> list:
    """Recover the real rows of a search result, silently dropping dummies.

    Entries that do not even parse are skipped (and counted in the debug log)
    rather than aborting the whole result.
    """
    out = []
    skipped = 0
    for hit in sr.hits:
        try:
            if len(hit.t) != params.seed_len:
                raise ParameterError("witness token has wrong length")
            seed = xor_bytes(hit.t, eta)
            nonce = prg_expand(keys.s2, seed, params)
            if not tag_check(hit.ercd.tag, nonce_tag_part(nonce, params), keys.s1, params):
                continue  # dummy (or deleted) record
            blocks = [
                xor_bytes(hit.ercd.blinded[f - 1], nonce_segment(nonce, f, params))
                for f in range(1, params.field_count + 1)
            ]
            elements = det_decrypt_many(keys.s1, blocks)
            out.append(Record(tuple(elements), flag=True))
        except ParameterError:
            skipped += 1
    if skipped:
        log.debug("dropped %d malformed result entries", skipped)
    return out


def build_insert(
    rcd: Record,
    fetched: list,
    keys: SecretKeys,
    params: SchemeParams,
    rng: random.Random | None = None,
) -> InsertBundle:
    """Construct the encrypted insert set for one real row.

    Per field: if the element is already known to its group, every *other*
    group element gains one dummy occurrence and the threshold rises by one;
    if it is new, the element itself is padded up to the current threshold
    and joins the element set. A group that has never held a record (threshold
    zero) is bootstrapped by giving each existing element one dummy and
    setting the threshold to one, which keeps occurrences uniform.
    """
    rcd.validate(params)
    if len(fetched) != params.field_count:
        raise ProtocolError("need one fetched metadata entry per field")

    pools = []  # per field: elements to distribute over the dummy rows
    new_metas = []
    eff_groups = []
    for fm in fetched:
        e = rcd.elements[fm.field - 1]
        elems = set(fm.meta.elements)
        tau = fm.meta.threshold
        if e in elems:
            pool = sorted(elems - {e})
            tau += 1
        elif tau == 0:
            pool = sorted(elems)
            elems.add(e)
            tau = 1
        else:
            pool = [e] * (tau - 1)
            elems.add(e)
        pools.append(pool)
        eff_groups.append(fm.gid)
        new_metas.append((fm.field, fm.gid, seal_meta(keys, GroupMeta(frozenset(elems), tau), rng)))

    w_count = max((len(p) for p in pools), default=0)
    null = null_element(params)

    ercd, seed, nonce, _ = rcd_enc(rcd, True, keys, params, rng)
    records = [(ercd, NonceEntry(seed, nonce), tuple(eff_groups))]

    for j in range(w_count):
        elems = []
        grcd = []
        for f in range(params.field_count):
            if j < len(pools[f]):
                elems.append(pools[f][j])
                grcd.append(eff_groups[f])
            else:
                elems.append(null)
                grcd.append(element_group(keys, params, null))
        dummy = Record(tuple(elems), flag=False)
        d_ercd, d_seed, d_nonce, _ = rcd_enc(dummy, False, keys, params, rng)
        records.append((d_ercd, NonceEntry(d_seed, d_nonce), tuple(grcd)))

    return InsertBundle(records, new_metas, w_count)


def rebuild_delete_tags(
    matched_ids,
    searched: list,
    eta: bytes,
    keys: SecretKeys,
    params: SchemeParams,
    rng: random.Random | None = None,
) -> list:
    """New tags for every searched record of a delete query.

    Matched records become dummies (uniform random tags); unmatched records
    get a fresh tag of the same class they already had, so nothing about them
    changes observably except the bytes.
    """
    matched = set(matched_ids)
    updates = []
    for rid, tag, t in searched:
        if t is None or len(t) != params.seed_len:
            raise ProtocolError("missing witness token for record %d" % rid)
        if rid in matched:
            updates.append((rid, rand_bytes(params.tag_len, rng)))
            continue
        seed = xor_bytes(t, eta)
        nonce = prg_expand(keys.s2, seed, params)
        n_tag = nonce_tag_part(nonce, params)
        real = tag_check(tag, n_tag, keys.s1, params)
        updates.append((rid, tag_make(real, n_tag, keys.s1, params, rng)))
    return updates
