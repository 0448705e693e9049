"""Storage and Search Service: owns the encrypted record store.

This role never sees blinding values, seeds, nonces, or the shared expansion
key; its state has no fields for them. It matches records purely by comparing
public hashes of XORed ciphertext against the witnesses supplied per query.
"""

from dataclasses import dataclass

from ..crypto import SchemeParams, public_hash, xor_bytes
from ..errors import ProtocolError, RevokedUserError
from ..model import EncryptedQuery, EncryptedRecord, SearchHit, SearchResult


@dataclass
class SearchReply:
    """Search outcome: matched entries, plus the per-id match bitmap and the
    tags of everything searched (both needed by delete queries)."""

    result: SearchResult
    matched: list
    searched_tags: list  # (rid, tag) for every searched id, in list order


class StagedSearch:
    """Two-phase match: digests are precomputed from the query and id list
    while the witness set is still in flight, then compared on arrival."""

    def __init__(self, state: "SssState", eq: EncryptedQuery, il: list):
        self._state = state
        self.eq = eq
        self.il = list(il)
        f = eq.field
        self.temps = [
            public_hash(
                xor_bytes(state.record(rid).blinded[f - 1], eq.e_star),
                state.params.witness_len,
            )
            for rid in self.il
        ]

    def finish(self, en: list) -> SearchReply:
        if len(en) != len(self.il):
            raise ProtocolError(
                "witness set size %d != id list size %d" % (len(en), len(self.il))
            )
        hits = []
        matched = []
        tags = []
        for rid, temp, wit in zip(self.il, self.temps, en):
            ercd = self._state.record(rid)
            ok = temp == wit.w
            matched.append(ok)
            tags.append((rid, ercd.tag))
            if ok:
                hits.append(SearchHit(rid, ercd, wit.t))
        return SearchReply(SearchResult(hits), matched, tags)


class SssState:
    def __init__(self, edb: list, params: SchemeParams):
        self.edb = list(edb)
        self.params = params
        self.revoked: set = set()

    def __len__(self):
        return len(self.edb)

    def check_user(self, user: str | None):
        if user is not None and user in self.revoked:
            raise RevokedUserError("user %r is revoked at the storage service" % user)

    def record(self, rid: int) -> EncryptedRecord:
        if not 0 <= rid < len(self.edb):
            raise ProtocolError("record id %d out of range" % rid)
        return self.edb[rid]

    def records(self, il: list) -> list:
        """The searched records, in id-list order (shuffle input)."""
        return [self.record(rid) for rid in il]

    def stage(self, eq: EncryptedQuery, il: list, user: str | None = None) -> StagedSearch:
        self.check_user(user)
        return StagedSearch(self, eq, il)

    def search(
        self,
        eq: EncryptedQuery,
        il: list,
        en: list,
        user: str | None = None,
    ) -> SearchReply:
        """One-shot match over the supplied id list."""
        return self.stage(eq, il, user).finish(en)

    def append(self, ercds: list, user: str | None = None) -> list:
        self.check_user(user)
        start = len(self.edb)
        self.edb.extend(ercds)
        return list(range(start, len(self.edb)))

    def apply_shuffle(self, ids: list, ercds_new: list):
        """Overwrite the listed positions with re-randomised records."""
        if len(ids) != len(ercds_new):
            raise ProtocolError("shuffled record count does not match id list")
        for rid in ids:
            if not 0 <= rid < len(self.edb):
                raise ProtocolError("record id %d out of range" % rid)
        for rid, ercd in zip(ids, ercds_new):
            self.edb[rid] = ercd

    def apply_tags(self, updates: list, user: str | None = None):
        """Replace only the tag bytes of the named records."""
        self.check_user(user)
        for rid, _ in updates:
            if not 0 <= rid < len(self.edb):
                raise ProtocolError("record id %d out of range" % rid)
        for rid, tag in updates:
            old = self.edb[rid]
            if len(tag) != self.params.tag_len:
                raise ProtocolError("tag must be %d bytes" % self.params.tag_len)
            self.edb[rid] = EncryptedRecord(old.blinded, tag)
