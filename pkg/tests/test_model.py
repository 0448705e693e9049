import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmcdb.crypto import SchemeParams, SecretKeys, prg_expand, rand_bytes
from pmcdb.errors import ParameterError
from pmcdb.model import (
    EncryptedRecord,
    GroupMeta,
    PlainDatabase,
    Record,
    null_element,
    occurrence_census,
    open_meta,
    pad_element,
    seal_meta,
    tag_check,
    tag_make,
    xor_record,
)

from conftest import STAFF_ROWS, pe

S1 = bytes(range(16))


@pytest.fixture
def p2():
    return SchemeParams(field_count=2)


class TestElements:
    def test_pad_and_reject(self):
        assert pad_element(b"abc", 16) == b"abc" + bytes(13)
        with pytest.raises(ParameterError):
            pad_element(b"x" * 17, 16)

    def test_null_sentinel(self, p2):
        assert null_element(p2) == b"\xff" * 16


class TestRecordTypes:
    def test_record_validation(self, p2):
        Record((pe("a"), pe("b"))).validate(p2)
        with pytest.raises(ParameterError):
            Record((pe("a"),)).validate(p2)
        with pytest.raises(ParameterError):
            Record((b"short", pe("b"))).validate(p2)

    def test_encrypted_record_round_trip(self, p2):
        rng = random.Random(0)
        er = EncryptedRecord((rng.randbytes(16), rng.randbytes(16)), rng.randbytes(48))
        raw = er.to_bytes()
        assert len(raw) == p2.record_len
        assert EncryptedRecord.from_bytes(raw, p2) == er

    def test_xor_record_identity(self, p2):
        rng = random.Random(1)
        er = EncryptedRecord((rng.randbytes(16), rng.randbytes(16)), rng.randbytes(48))
        assert xor_record(er, bytes(p2.record_len), p2) == er

    def test_from_bytes_length_check(self, p2):
        with pytest.raises(ParameterError):
            EncryptedRecord.from_bytes(b"short", p2)


class TestCensus:
    def test_staff_name_counts(self):
        db = PlainDatabase([Record((pe(n), pe(a))) for n, a in STAFF_ROWS])
        counts = occurrence_census(db, 1)
        want = {pe("Alice"): 1, pe("Anna"): 1, pe("Bob"): 2, pe("Bill"): 1}
        assert counts == want

    def test_empty_db(self):
        assert occurrence_census(PlainDatabase([]), 1) == {}

    def test_random_db_matches_independent_scan(self):
        # oracle: a second, separately written linear pass
        rng = random.Random(2)
        rows = [
            Record((pe("v%d" % rng.randint(0, 9)),), flag=rng.random() < 0.8)
            for _ in range(500)
        ]
        db = PlainDatabase(rows)
        for include in (False, True):
            got = occurrence_census(db, 1, include_dummies=include)
            want = {}
            for r in rows:
                if include or r.flag:
                    want[r.elements[0]] = want.get(r.elements[0], 0) + 1
            assert got == want

    def test_field_out_of_range(self):
        db = PlainDatabase([Record((pe("a"),))])
        with pytest.raises(ParameterError):
            occurrence_census(db, 2)


class TestTags:
    def test_real_tag_round_trip_always(self, p2):
        rng = random.Random(3)
        for _ in range(200):
            n_tag = rng.randbytes(p2.tag_len)
            tag = tag_make(True, n_tag, S1, p2, rng)
            assert tag_check(tag, n_tag, S1, p2)

    def test_dummy_tags_never_check(self, p2):
        # Monte Carlo scan; false positive rate is 2^-256 per trial
        rng = random.Random(4)
        n_tag = rng.randbytes(p2.tag_len)
        hits = 0
        for _ in range(1_000_000):
            if tag_check(rng.randbytes(p2.tag_len), n_tag, S1, p2):
                hits += 1
        assert hits == 0

    def test_wrong_nonce_fails(self, p2):
        rng = random.Random(5)
        for _ in range(10_000):
            n_tag = rng.randbytes(p2.tag_len)
            tag = tag_make(True, n_tag, S1, p2, rng)
            assert not tag_check(tag, rng.randbytes(p2.tag_len), S1, p2)

    def test_length_validation(self, p2):
        with pytest.raises(ParameterError):
            tag_make(True, b"short", S1, p2)
        with pytest.raises(ParameterError):
            tag_check(b"short", bytes(p2.tag_len), S1, p2)


class TestGroupMeta:
    def test_round_trip(self, p2):
        meta = GroupMeta(frozenset({pe("a"), pe("b")}), 7)
        keys = SecretKeys(S1, bytes(range(16, 32)))
        blob = seal_meta(keys, meta)
        assert open_meta(keys, blob, p2) == meta

    @given(
        st.sets(st.binary(min_size=16, max_size=16), max_size=6),
        st.integers(min_value=0, max_value=10_000),
    )
    @settings(max_examples=50)
    def test_serialisation_property(self, elems, tau):
        p = SchemeParams(field_count=2)
        meta = GroupMeta(frozenset(elems), tau)
        assert GroupMeta.from_bytes(meta.to_bytes(), p) == meta


class TestStoreAlignmentInvariant:
    def test_nonce_entry_consistency(self, p2):
        # invariant: nonce = expansion of seed at all times
        rng = random.Random(6)
        s2 = bytes(range(16, 32))
        seed = rand_bytes(16, rng)
        nonce = prg_expand(s2, seed, p2)
        assert prg_expand(s2, seed, p2) == nonce
