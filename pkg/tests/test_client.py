import json
import random
from pathlib import Path

import pytest

from pmcdb.client import (
    FetchedMeta,
    build_insert,
    query_enc,
    rcd_dec,
    rebuild_delete_tags,
)
from pmcdb.crypto import (
    SchemeParams,
    det_decrypt_many,
    det_encrypt,
    element_group,
    nonce_segment,
    nonce_tag_part,
    prg_expand,
    xor_bytes,
)
from pmcdb.errors import ProtocolError
from pmcdb.model import (
    GroupMeta,
    Query,
    QueryType,
    Record,
    SearchHit,
    SearchResult,
    null_element,
    open_meta,
    tag_check,
    tag_make,
)
from pmcdb.client import rcd_enc

from conftest import pe, unp

FIXTURES = Path(__file__).parent / "fixtures"


class TestRcdEnc:
    def test_construction_inverse(self, keys, params):
        rng = random.Random(0)
        rcd = Record((pe("Bob"), pe("27")))
        ercd, seed, nonce, grcd = rcd_enc(rcd, True, keys, params, rng)
        blocks = [
            xor_bytes(ercd.blinded[f - 1], nonce_segment(nonce, f, params))
            for f in (1, 2)
        ]
        assert tuple(det_decrypt_many(keys.s1, blocks)) == rcd.elements
        assert tag_check(ercd.tag, nonce_tag_part(nonce, params), keys.s1, params)

    def test_fresh_seeds_same_groups(self, keys, params):
        rcd = Record((pe("Bob"), pe("27")))
        a = rcd_enc(rcd, True, keys, params)
        b = rcd_enc(rcd, True, keys, params)
        assert a[0].to_bytes() != b[0].to_bytes()
        assert a[3] == b[3]

    def test_group_vector_matches_elements(self, keys, params):
        rcd = Record((pe("Bob"), pe("27")))
        _, _, _, grcd = rcd_enc(rcd, True, keys, params)
        assert grcd == (
            element_group(keys, params, pe("Bob")),
            element_group(keys, params, pe("27")),
        )

    def test_dummy_tag_fails_check(self, keys, params):
        rcd = Record((pe("Bill"), pe("25")), flag=False)
        ercd, _, nonce, _ = rcd_enc(rcd, False, keys, params)
        assert not tag_check(ercd.tag, nonce_tag_part(nonce, params), keys.s1, params)


class TestQueryEnc:
    def test_fresh_blinding_same_group(self, keys, params):
        q = Query(QueryType.SELECT, 1, pe("Bob"))
        a = query_enc(q, keys, params)
        b = query_enc(q, keys, params)
        assert a.eq.e_star != b.eq.e_star
        assert a.gid == b.gid

    def test_blinding_inverse(self, keys, params):
        q = Query(QueryType.SELECT, 1, pe("Bob"))
        s = query_enc(q, keys, params)
        assert xor_bytes(s.eq.e_star, s.eta) == det_encrypt(keys.s1, pe("Bob"))

    def test_group_agrees_with_rcd_enc(self, keys, params):
        s = query_enc(Query(QueryType.SELECT, 1, pe("Bob")), keys, params)
        _, _, _, grcd = rcd_enc(Record((pe("Bob"), pe("27"))), True, keys, params)
        assert s.gid == grcd[0]

    def test_type_and_field_in_clear(self, keys, params):
        s = query_enc(Query(QueryType.DELETE, 2, pe("27")), keys, params)
        assert s.eq.qtype is QueryType.DELETE
        assert s.eq.field == 2


class TestRcdDec:
    def test_empty_result(self, keys, params):
        assert rcd_dec(SearchResult([]), bytes(16), keys, params) == []

    def test_filters_dummies(self, keys, params):
        rng = random.Random(1)
        eta = rng.randbytes(16)
        hits = []
        real = Record((pe("Bob"), pe("27")))
        dummy = Record((pe("Bill"), pe("25")), flag=False)
        for rcd, flag in ((real, True), (dummy, False)):
            ercd, seed, nonce, _ = rcd_enc(rcd, flag, keys, params, rng)
            hits.append(SearchHit(len(hits), ercd, xor_bytes(seed, eta)))
        out = rcd_dec(SearchResult(hits), eta, keys, params)
        assert [tuple(unp(e) for e in r.elements) for r in out] == [("Bob", "27")]

    def test_malformed_entry_skipped(self, keys, params):
        rng = random.Random(2)
        eta = rng.randbytes(16)
        rcd = Record((pe("Bob"), pe("27")))
        ercd, seed, nonce, _ = rcd_enc(rcd, True, keys, params, rng)
        good = SearchHit(0, ercd, xor_bytes(seed, eta))
        bad = SearchHit(1, ercd, b"short")
        out = rcd_dec(SearchResult([bad, good]), eta, keys, params)
        assert len(out) == 1


def _staff_metas(keys, params, staff_setup):
    metas = {}
    for (f, gid), entry in staff_setup.gdb.items():
        metas[(f, gid)] = open_meta(keys, entry.meta_ct, params)
    return metas


class TestBuildInsert:
    def test_staff_trace_fixture(self, keys, params, staff_setup):
        trace = json.loads((FIXTURES / "staff_insert_trace.json").read_text())
        rcd = Record(tuple(pe(v) for v in trace["insert"]))
        metas = _staff_metas(keys, params, staff_setup)
        fetched = []
        for f, e in enumerate(rcd.elements, 1):
            gid = element_group(keys, params, e)
            fetched.append(FetchedMeta(f, gid, metas[(f, gid)]))

        bundle = build_insert(rcd, fetched, keys, params, random.Random(3))
        assert bundle.dummy_count == trace["dummy_count"]
        assert len(bundle.records) == trace["dummy_count"] + 1

        for spec_field, (f, gid, ct) in zip(trace["per_field"], bundle.updated_meta):
            meta = open_meta(keys, ct, params)
            assert meta.threshold == spec_field["tau_after"]
            assert sorted(unp(e) for e in meta.elements) == spec_field["group_elements"]

        # dummy rows decrypt to the traced values
        got = []
        for ercd, entry, _ in bundle.records[1:]:
            blocks = [
                xor_bytes(ercd.blinded[f - 1], nonce_segment(entry.nonce, f, params))
                for f in (1, 2)
            ]
            got.append([unp(e) for e in det_decrypt_many(keys.s1, blocks)])
        assert got == trace["dummy_rows"]

    def test_all_new_elements_tau_one_groups(self, keys):
        p = SchemeParams(field_count=1, group_bits=0)
        meta = GroupMeta(frozenset({pe("a")}), 1)
        bundle = build_insert(
            Record((pe("zzz"),)), [FetchedMeta(1, 0, meta)], keys, p
        )
        assert bundle.dummy_count == 0
        assert len(bundle.records) == 1
        new_meta = open_meta(keys, bundle.updated_meta[0][2], p)
        assert pe("zzz") in new_meta.elements
        assert new_meta.threshold == 1

    def test_bootstrap_empty_group(self, keys):
        # a never-populated group: threshold jumps to one and existing
        # elements each get a dummy so occurrences stay uniform
        p = SchemeParams(field_count=1, group_bits=0)
        meta = GroupMeta(frozenset({pe("a"), pe("b")}), 0)
        bundle = build_insert(
            Record((pe("c"),)), [FetchedMeta(1, 0, meta)], keys, p
        )
        assert bundle.dummy_count == 2
        new_meta = open_meta(keys, bundle.updated_meta[0][2], p)
        assert new_meta.threshold == 1
        assert len(new_meta.elements) == 3

    def test_surplus_slots_null(self, keys):
        # field 1 needs 2 dummies, field 2 none: its slots become NULL
        p = SchemeParams(field_count=2, group_bits=0)
        m1 = GroupMeta(frozenset({pe("a"), pe("b"), pe("c")}), 4)
        m2 = GroupMeta(frozenset({pe("x")}), 7)
        bundle = build_insert(
            Record((pe("a"), pe("zz"))),
            [FetchedMeta(1, 0, m1), FetchedMeta(2, 0, m2)],
            keys,
            p,
            random.Random(4),
        )
        # field 1: member -> |E|-1 = 2; field 2: new -> tau-1 = 6 -> W = 6
        assert bundle.dummy_count == 6
        null = null_element(p)
        f1_elements = []
        for ercd, entry, grcd in bundle.records[1:]:
            blocks = [
                xor_bytes(ercd.blinded[f - 1], nonce_segment(entry.nonce, f, p))
                for f in (1, 2)
            ]
            elems = det_decrypt_many(keys.s1, blocks)
            f1_elements.append(elems[0])
        assert f1_elements[2:] == [null] * 4

    def test_occurrence_uniform_after_many_random_inserts(self, keys, params, staff_system):
        # oracle: decrypt everything and recount per group
        from pmcdb.admin import decrypt_store
        from pmcdb.model import PlainDatabase, occurrence_census

        orch = staff_system
        rng = random.Random(5)
        pool = ["Alice", "Anna", "Bob", "Bill"]
        ages = ["25", "27", "30", "33"]
        for _ in range(25):
            orch.run_insert(Record((pe(rng.choice(pool)), pe(rng.choice(ages)))))
        rows = decrypt_store(orch.sss.edb, orch.iws.ndb, keys, params)
        db = PlainDatabase(rows)
        for (f, gid), entry in orch.iws.gdb.items():
            meta = open_meta(keys, entry.meta_ct, params)
            occ = occurrence_census(db, f, include_dummies=True)
            counts = {occ.get(e, 0) for e in meta.elements}
            assert len(counts) <= 1, (f, gid, counts)
            if counts:
                assert counts.pop() == meta.threshold

    def test_wrong_meta_count(self, keys, params):
        with pytest.raises(ProtocolError):
            build_insert(Record((pe("a"), pe("b"))), [], keys, params)


class TestRebuildDeleteTags:
    def _searched(self, keys, params, rows, eta, rng):
        searched = []
        nonces = []
        for i, (rcd, flag) in enumerate(rows):
            ercd, seed, nonce, _ = rcd_enc(rcd, flag, keys, params, rng)
            searched.append((i, ercd.tag, xor_bytes(seed, eta)))
            nonces.append(nonce)
        return searched, nonces

    def test_no_match_preserves_classes(self, keys, params):
        rng = random.Random(6)
        eta = rng.randbytes(16)
        rows = [
            (Record((pe("Bob"), pe("27"))), True),
            (Record((pe("Bill"), pe("25")), flag=False), False),
        ]
        searched, nonces = self._searched(keys, params, rows, eta, rng)
        updates = rebuild_delete_tags([], searched, eta, keys, params, rng)
        assert [u[0] for u in updates] == [0, 1]
        for (rid, new_tag), nonce, (_, flag) in zip(updates, nonces, rows):
            got = tag_check(new_tag, nonce_tag_part(nonce, params), keys.s1, params)
            assert got is flag

    def test_matched_tags_become_random(self, keys, params):
        rng = random.Random(7)
        eta = rng.randbytes(16)
        rows = [(Record((pe("Bob"), pe("27"))), True)]
        searched, nonces = self._searched(keys, params, rows, eta, rng)
        hits = 0
        for _ in range(10_000):
            updates = rebuild_delete_tags([0], searched, eta, keys, params, rng)
            if tag_check(updates[0][1], nonce_tag_part(nonces[0], params), keys.s1, params):
                hits += 1
        assert hits == 0

    def test_missing_witness_token(self, keys, params):
        with pytest.raises(ProtocolError):
            rebuild_delete_tags([], [(0, bytes(48), None)], bytes(16), keys, params)
