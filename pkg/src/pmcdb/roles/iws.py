"""Index and Witness Service: owns the group directory and the nonce store.

Holds the shared expansion key so it can blind nonces into witnesses, but by
construction never receives an encrypted record or a blinded query element.
"""

import random

from ..crypto import (
    SchemeParams,
    nonce_segment,
    prg_expand,
    prp_shuffle,
    public_hash,
    rand_bytes,
    xor_bytes,
)
from ..errors import ParameterError, ProtocolError, RevokedUserError
from ..model import NonceEntry, Witness


class IwsState:
    def __init__(
        self,
        gdb: dict,
        ndb: list,
        s2: bytes,
        params: SchemeParams,
        rng: random.Random | None = None,
    ):
        self.gdb = dict(gdb)
        self.ndb = list(ndb)
        self.s2 = s2
        self.params = params
        self.revoked: set = set()
        self.rng = rng

    def check_user(self, user: str | None):
        if user is not None and user in self.revoked:
            raise RevokedUserError("user %r is revoked at the index service" % user)

    def resolve_group(self, field: int, gid: int) -> int:
        """Exact group if present, otherwise the Hamming-closest one.

        Ties break toward the smallest group id, so resolution is a pure
        function of the directory contents.
        """
        if (field, gid) in self.gdb:
            return gid
        candidates = [g for (f, g) in self.gdb if f == field]
        if not candidates:
            raise ProtocolError("no groups exist for field %d" % field)
        return min(candidates, key=lambda g: ((g ^ gid).bit_count(), g))

    def group_il(self, field: int, gid: int) -> list:
        """Current id list of a group (resolved), as a fresh copy."""
        return list(self.gdb[(field, self.resolve_group(field, gid))].il)

    def nonce_blind(
        self,
        field: int,
        eta: bytes,
        gid: int,
        user: str | None = None,
    ):
        """Witness set for one query: ``(il, en)`` with entries aligned."""
        self.check_user(user)
        if len(eta) != self.params.elem_len:
            raise ParameterError("eta must be %d bytes" % self.params.elem_len)
        if not 1 <= field <= self.params.field_count:
            raise ParameterError("field %d out of range" % field)
        il = self.group_il(field, gid)
        en = []
        for rid in il:
            entry = self._entry(rid)
            n_f = nonce_segment(entry.nonce, field, self.params)
            en.append(
                Witness(
                    w=public_hash(xor_bytes(n_f, eta), self.params.witness_len),
                    t=xor_bytes(eta, entry.seed),
                )
            )
        return il, en

    def _entry(self, rid: int) -> NonceEntry:
        if not 0 <= rid < len(self.ndb):
            raise ProtocolError("record id %d out of range" % rid)
        return self.ndb[rid]

    def pre_shuffle(self, il: list):
        """Permute a group's positions and refresh every touched nonce.

        Returns ``(il_prime, nn)`` where ``il_prime[i]`` is the destination of
        the record currently at ``il[i]`` and ``nn`` maps each destination to
        ``old_nonce XOR new_nonce``. Every id list in every field is remapped
        through the same permutation.
        """
        if not il:
            raise ProtocolError("cannot shuffle an empty id list")
        if len(set(il)) != len(il):
            raise ProtocolError("id list contains duplicates")
        for rid in il:
            self._entry(rid)

        il_prime = prp_shuffle(rand_bytes(16, self.rng), list(il))

        moved = {src: self.ndb[src] for src in il}
        for src, dst in zip(il, il_prime):
            self.ndb[dst] = moved[src]

        mapping = dict(zip(il, il_prime))
        for entry in self.gdb.values():
            entry.il = [mapping.get(rid, rid) for rid in entry.il]

        nn = {}
        for dst in il_prime:
            seed = rand_bytes(self.params.seed_len, self.rng)
            fresh = prg_expand(self.s2, seed, self.params)
            nn[dst] = xor_bytes(self.ndb[dst].nonce, fresh)
            self.ndb[dst] = NonceEntry(seed, fresh)
        return il_prime, nn

    def register_insert(
        self, entries: list, ids: list, new_metas: list, user: str | None = None
    ):
        """Record the nonce entries and group memberships of an insert.

        ``ids`` are the positions the storage service assigned; they must be
        exactly the next free positions here or the two stores would drift.
        """
        self.check_user(user)
        if len(entries) != len(ids):
            raise ProtocolError("entry count %d != id count %d" % (len(entries), len(ids)))
        expected = list(range(len(self.ndb), len(self.ndb) + len(ids)))
        if list(ids) != expected:
            raise ProtocolError("insert ids collide with existing positions")
        for (f, gid, _) in new_metas:
            if (f, gid) not in self.gdb:
                raise ProtocolError("metadata update for unknown group (%d, %d)" % (f, gid))

        for rid, (seed, nonce, grcd) in zip(ids, entries):
            if len(grcd) != self.params.field_count:
                raise ProtocolError("group vector must name every field")
            self.ndb.append(NonceEntry(seed, nonce))
            for f, gid in enumerate(grcd, 1):
                eff = self.resolve_group(f, gid)
                self.gdb[(f, eff)].il.append(rid)

        for f, gid, meta_ct in new_metas:
            self.gdb[(f, gid)].meta_ct = meta_ct

    def fetch_group_meta(self, field: int, gid: int, user: str | None = None):
        """Sealed metadata of the (resolved) group; this service cannot read it."""
        self.check_user(user)
        eff = self.resolve_group(field, gid)
        return eff, self.gdb[(field, eff)].meta_ct
