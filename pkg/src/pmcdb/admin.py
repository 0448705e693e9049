"""Trusted-admin pipeline: grouping, dummy padding, bulk encryption, compaction.

The admin holds both keys, so it is the only party that can rebuild plaintext
from the two stores. ``decrypt_store`` below is that oracle; tests and the
auditor lean on it heavily.
"""

import random
import warnings
from dataclasses import dataclass

from .client import rcd_enc
from .crypto import (
    SchemeParams,
    SecretKeys,
    det_decrypt_many,
    element_group,
    nonce_segment,
    nonce_tag_part,
    prp_shuffle,
    rand_bytes,
    xor_bytes,
)
from .errors import ParameterError
from .model import (
    GroupEntry,
    GroupMeta,
    NonceEntry,
    PlainDatabase,
    Record,
    null_element,
    occurrence_census,
    open_meta,
    seal_meta,
    tag_check,
)


@dataclass
class SetupOutput:
    edb: list
    gdb: dict
    ndb: list
    sigma_max: int


def group_gen(
    db: PlainDatabase,
    keys: SecretKeys,
    params: SchemeParams,
    universes: list | None = None,
) -> dict:
    """Partition each field's universe into groups and compute thresholds.

    ``universes`` lets an empty database be bootstrapped with pre-defined
    element sets (every group then starts with threshold 0). Undersized
    groups are a deployment smell, not a protocol violation, so they warn.
    """
    null = null_element(params)
    groups = {}
    for f in range(1, params.field_count + 1):
        occ = occurrence_census(db, f)
        universe = set(occ)
        if universes is not None:
            universe |= set(universes[f - 1])
        universe.discard(null)
        by_gid: dict = {}
        for e in universe:
            by_gid.setdefault(element_group(keys, params, e), set()).add(e)
        for gid, elems in by_gid.items():
            tau = max((occ.get(e, 0) for e in elems), default=0)
            if len(elems) < params.lambda_min:
                warnings.warn(
                    "group (%d, %d) holds %d distinct elements, below the "
                    "configured minimum of %d" % (f, gid, len(elems), params.lambda_min)
                )
            groups[(f, gid)] = GroupMeta(frozenset(elems), tau)
    return groups


def dummy_gen(
    db: PlainDatabase,
    groups: dict,
    params: SchemeParams,
    rng: random.Random | None = None,
):
    """Pad every group to a uniform occurrence with dummy rows, then shuffle.

    Returns ``(padded_db, per_field_need, sigma_max)``. Field ``f`` needs
    ``sum(tau - O(e))`` dummy slots; the database gets the maximum over
    fields, and surplus slots are filled with the NULL sentinel.
    """
    null = null_element(params)
    assignment = {}
    need_per_field = {}
    for f in range(1, params.field_count + 1):
        occ = occurrence_census(db, f)
        stream = []
        for (gf, gid) in sorted(k for k in groups if k[0] == f):
            meta = groups[(gf, gid)]
            need = {e: meta.threshold - occ.get(e, 0) for e in sorted(meta.elements)}
            while any(v > 0 for v in need.values()):
                for e in sorted(need):
                    if need[e] > 0:
                        stream.append(e)
                        need[e] -= 1
        assignment[f] = stream
        need_per_field[f] = len(stream)

    sigma_max = max(need_per_field.values(), default=0)
    rows = [Record(r.elements, flag=True) for r in db.rows]
    for j in range(sigma_max):
        elems = tuple(
            assignment[f][j] if j < len(assignment[f]) else null
            for f in range(1, params.field_count + 1)
        )
        rows.append(Record(elems, flag=False))

    if rows:
        order = prp_shuffle(rand_bytes(16, rng), list(range(len(rows))))
        rows = [rows[i] for i in order]
    return PlainDatabase(rows, db.field_names), need_per_field, sigma_max


def setup(
    keys: SecretKeys,
    db: PlainDatabase,
    params: SchemeParams,
    universes: list | None = None,
    rng: random.Random | None = None,
) -> SetupOutput:
    """Full bootstrap: group, pad, encrypt, and build all three stores."""
    db.validate(params)
    if any(not r.flag for r in db.rows):
        raise ParameterError("setup expects a real-only database")

    groups = group_gen(db, keys, params, universes)
    padded, _, sigma_max = dummy_gen(db, groups, params, rng)

    gdb = {
        key: GroupEntry([], seal_meta(keys, meta, rng)) for key, meta in groups.items()
    }
    edb = []
    ndb = []
    for rid, row in enumerate(padded.rows):
        ercd, seed, nonce, grcd = rcd_enc(row, row.flag, keys, params, rng)
        edb.append(ercd)
        ndb.append(NonceEntry(seed, nonce))
        for f, gid in enumerate(grcd, 1):
            entry = gdb.get((f, gid))
            if entry is None:
                # a NULL-only group: present for indexing, empty element set
                entry = GroupEntry([], seal_meta(keys, GroupMeta(frozenset(), 0), rng))
                gdb[(f, gid)] = entry
            entry.il.append(rid)
    return SetupOutput(edb, gdb, ndb, sigma_max)


def decrypt_store(edb: list, ndb: list, keys: SecretKeys, params: SchemeParams) -> list:
    """Admin oracle: unblind and decrypt the whole store back to flagged rows."""
    if len(edb) != len(ndb):
        raise ParameterError("encrypted store and nonce store are misaligned")
    rows = []
    for ercd, entry in zip(edb, ndb):
        nonce = entry.nonce
        blocks = [
            xor_bytes(ercd.blinded[f - 1], nonce_segment(nonce, f, params))
            for f in range(1, params.field_count + 1)
        ]
        elements = det_decrypt_many(keys.s1, blocks)
        real = tag_check(ercd.tag, nonce_tag_part(nonce, params), keys.s1, params)
        rows.append(Record(tuple(elements), flag=real))
    return rows


def compact(
    edb: list,
    ndb: list,
    gdb: dict,
    keys: SecretKeys,
    params: SchemeParams,
    rng: random.Random | None = None,
):
    """Periodic dummy trimming.

    For each group whose every element is covered by at least one dummy row,
    one covering dummy per element is downgraded to NULL (occurrences stay
    uniform, the threshold drops by one). Dummies reduced to all-NULL are
    physically removed and the stores are rebuilt, which also repairs all the
    id lists and position alignment.

    Returns ``(edb, ndb, gdb, removed)``.
    """
    rows = decrypt_store(edb, ndb, keys, params)
    work = [list(r.elements) for r in rows]
    flags = [r.flag for r in rows]
    null = null_element(params)

    metas = {key: open_meta(keys, entry.meta_ct, params) for key, entry in gdb.items()}
    new_metas = {}
    for (f, gid), meta in sorted(metas.items()):
        if not meta.elements or meta.threshold == 0:
            new_metas[(f, gid)] = meta
            continue
        chosen = {}
        for e in sorted(meta.elements):
            cover = [
                i for i in range(len(work))
                if not flags[i] and work[i][f - 1] == e
            ]
            if not cover:
                chosen = None
                break
            chosen[e] = cover[0]
        if chosen is None:
            new_metas[(f, gid)] = meta
            continue
        for e, i in chosen.items():
            work[i][f - 1] = null
        new_metas[(f, gid)] = GroupMeta(meta.elements, meta.threshold - 1)

    kept = [
        Record(tuple(elems), flag=flag)
        for elems, flag in zip(work, flags)
        if flag or any(e != null for e in elems)
    ]
    removed = len(work) - len(kept)

    # Elements absorbed into a neighbouring group on insert must stay with
    # that group, so registration follows meta membership, not raw encoding.
    owner = {}
    for (f, gid), meta in new_metas.items():
        for e in meta.elements:
            owner[(f, e)] = gid

    out_gdb = {
        key: GroupEntry([], seal_meta(keys, meta, rng)) for key, meta in new_metas.items()
    }
    out_edb = []
    out_ndb = []
    for rid, row in enumerate(kept):
        ercd, seed, nonce, raw_grcd = rcd_enc(row, row.flag, keys, params, rng)
        out_edb.append(ercd)
        out_ndb.append(NonceEntry(seed, nonce))
        for f, raw_gid in enumerate(raw_grcd, 1):
            gid = owner.get((f, row.elements[f - 1]), raw_gid)
            entry = out_gdb.get((f, gid))
            if entry is None:
                entry = GroupEntry([], seal_meta(keys, GroupMeta(frozenset(), 0), rng))
                out_gdb[(f, gid)] = entry
            entry.il.append(rid)
    return out_edb, out_ndb, out_gdb, removed
