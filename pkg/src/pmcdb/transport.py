"""Protocol orchestration and the instrumented message bus.

The orchestrator plays the user: it encrypts locally, relays every protocol
message between the three services (in-process states or HTTP clients, duck
typed), and records each logical message with its source and destination.
The recorded log is what the isolation audit inspects: every value a service
must never see is registered in a secrets ledger as it is created, and the
audit then checks no message delivered to that service carries one.

Registered secrets are expanded into their on-the-wire fragments (a nonce is
registered whole, per field segment, and as its tag part; a record whole, per
blinded element, and as its tag), so the audit's exact matching catches a
misrouted field without scanning every payload byte-by-byte.
"""

import random
import threading
from dataclasses import dataclass, fields, is_dataclass
from enum import Enum

from .client import (
    FetchedMeta,
    build_insert,
    query_enc,
    rcd_dec,
    rebuild_delete_tags,
)
from .crypto import SchemeParams, SecretKeys, element_group
from .errors import PmcdbError
from .model import (
    Query,
    QueryType,
    Record,
    open_meta,
)
from .roles.rss import ShuffleJob


class MsgType(Enum):
    QUERY = "query"
    NONCE_REQ = "nonce_req"
    WITNESS_SET = "witness_set"
    SEARCH_RESULT = "search_result"
    SHUFFLE_REQ = "shuffle_req"
    SHUFFLE_DATA = "shuffle_data"
    SHUFFLED_RECORDS = "shuffled_records"
    INSERT = "insert"
    INSERT_IDS = "insert_ids"
    DELETE_TAGS = "delete_tags"
    META_FETCH = "meta_fetch"
    META_REPLY = "meta_reply"
    ERROR = "error"


@dataclass(frozen=True)
class Message:
    src: str
    dst: str
    msg_type: MsgType
    payload: object


def iter_bytes_values(obj):
    """Yield every bytes value reachable inside a payload structure."""
    if isinstance(obj, (bytes, bytearray)):
        yield bytes(obj)
    elif is_dataclass(obj) and not isinstance(obj, type):
        for f in fields(obj):
            yield from iter_bytes_values(getattr(obj, f.name))
    elif isinstance(obj, dict):
        for k, v in obj.items():
            yield from iter_bytes_values(k)
            yield from iter_bytes_values(v)
    elif isinstance(obj, (list, tuple, set, frozenset)):
        for item in obj:
            yield from iter_bytes_values(item)


# What each service must never be sent, by secret category.
FORBIDDEN = {
    "sss": ("eta", "seed", "nonce", "s2"),
    "iws": ("record", "e_star"),
    "rss": ("witness", "e_star"),
}


class SecretsLedger:
    """Registry of every secret value the audit must look for."""

    def __init__(self, params: SchemeParams):
        self.params = params
        self._sets = {cat: set() for cats in FORBIDDEN.values() for cat in cats}

    def register(self, category: str, value: bytes):
        if value:
            self._sets[category].add(bytes(value))

    def register_nonce(self, nonce: bytes):
        p = self.params
        self.register("nonce", nonce)
        for f in range(p.field_count):
            self.register("nonce", nonce[f * p.elem_len:(f + 1) * p.elem_len])
        self.register("nonce", nonce[p.field_count * p.elem_len:])

    def register_record(self, ercd):
        self.register("record", ercd.to_bytes())
        for block in ercd.blinded:
            self.register("record", block)
        self.register("record", ercd.tag)

    def known(self, category: str, blob: bytes) -> bool:
        return blob in self._sets[category]


@dataclass(frozen=True)
class IsolationViolation:
    index: int
    src: str
    dst: str
    msg_type: MsgType
    category: str


class Orchestrator:
    """Runs the select/insert/delete flows over three role handles.

    ``sss``/``iws``/``rss`` can be the in-process states or HTTP clients with
    the same method surface. Same-field operations are serialised with one
    lock per field, which subsumes the required same-group ordering (search,
    then that group's shuffle, before the next touch of the group).
    """

    def __init__(
        self,
        keys: SecretKeys,
        params: SchemeParams,
        sss,
        iws,
        rss,
        rng: random.Random | None = None,
        probe=None,
    ):
        self.keys = keys
        self.params = params
        self.sss = sss
        self.iws = iws
        self.rss = rss
        self.rng = rng
        self.log: list = []
        self.ledger = SecretsLedger(params)
        self.ledger.register("s2", keys.s2)
        self._probe = probe
        self._field_locks = {
            f: threading.Lock() for f in range(1, params.field_count + 1)
        }
        self._sync_secrets()

    # -- bookkeeping ---------------------------------------------------

    def _record(self, src, dst, msg_type, payload):
        self.log.append(Message(src, dst, msg_type, payload))

    def _sync_secrets(self):
        if self._probe is None:
            return
        ndb, edb = self._probe()
        for entry in ndb:
            self.ledger.register("seed", entry.seed)
            self.ledger.register_nonce(entry.nonce)
        for ercd in edb:
            self.ledger.register_record(ercd)

    def _call(self, role: str, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PmcdbError as exc:
            self._record(
                role, "user", MsgType.ERROR,
                {"role": role, "code": exc.code, "message": str(exc)},
            )
            raise

    # -- protocol flows ------------------------------------------------

    def run_select(self, q: Query, user: str = "user") -> list:
        """Full select flow; returns the decrypted real rows."""
        with self._field_locks[q.field]:
            rows, _ = self._select_phase(q, user)
            return rows

    def _select_phase(self, q: Query, user: str):
        session = query_enc(q, self.keys, self.params, self.rng)
        self.ledger.register("eta", session.eta)
        self.ledger.register("e_star", session.eq.e_star)

        self._record(user, "sss", MsgType.QUERY, session.eq)
        self._record(user, "iws", MsgType.NONCE_REQ,
                     {"field": q.field, "eta": session.eta, "gid": session.gid})
        il, en = self._call(
            "iws", self.iws.nonce_blind, q.field, session.eta, session.gid, user
        )
        for wit in en:
            self.ledger.register("witness", wit.w)
        self._record("iws", "sss", MsgType.WITNESS_SET, {"il": il, "en": en})

        reply = self._call("sss", self.sss.search, session.eq, il, en, user)
        self._record("sss", "user", MsgType.SEARCH_RESULT, reply)

        rows = rcd_dec(reply.result, session.eta, self.keys, self.params)
        return rows, (session, il, en, reply)

    def _shuffle_group(self, il: list):
        if not il:
            return
        self._record("orch", "iws", MsgType.SHUFFLE_REQ, {"il": il})
        il_prime, nn = self._call("iws", self.iws.pre_shuffle, il)
        self._record("iws", "rss", MsgType.SHUFFLE_DATA, {"il_prime": il_prime, "nn": nn})

        ercds = self._call("sss", self.sss.records, il)
        self._record("sss", "rss", MsgType.SHUFFLE_DATA, {"ids": il, "ercds": ercds})

        job = ShuffleJob(ids=list(il), ercds=ercds, il_prime=il_prime, nn=nn)
        dest, fresh = self._call("rss", self.rss.shuffle, job)
        for ercd in fresh:
            self.ledger.register_record(ercd)
        self._record("rss", "sss", MsgType.SHUFFLED_RECORDS,
                     {"ids": dest, "ercds": fresh})
        self._call("sss", self.sss.apply_shuffle, dest, fresh)
        self._sync_secrets()

    def run_insert(self, rcd: Record, user: str = "user"):
        """Insert one real row (and the dummies keeping its groups uniform)."""
        rcd.validate(self.params)
        for lock in self._field_locks.values():
            lock.acquire()
        try:
            grcd = [
                element_group(self.keys, self.params, rcd.elements[f - 1])
                for f in range(1, self.params.field_count + 1)
            ]
            self._record(user, "iws", MsgType.META_FETCH,
                         {"groups": list(enumerate(grcd, 1))})
            fetched = []
            for f, gid in enumerate(grcd, 1):
                eff, meta_ct = self._call(
                    "iws", self.iws.fetch_group_meta, f, gid, user
                )
                fetched.append(
                    FetchedMeta(f, eff, open_meta(self.keys, meta_ct, self.params))
                )
            self._record("iws", user, MsgType.META_REPLY,
                         {"metas": [(fm.field, fm.gid) for fm in fetched]})

            bundle = build_insert(rcd, fetched, self.keys, self.params, self.rng)
            for ercd, entry, _ in bundle.records:
                self.ledger.register_record(ercd)
                self.ledger.register("seed", entry.seed)
                self.ledger.register_nonce(entry.nonce)

            ercds = [ercd for ercd, _, _ in bundle.records]
            self._record(user, "sss", MsgType.INSERT, {"ercds": ercds})
            ids = self._call("sss", self.sss.append, ercds, user)
            self._record("sss", "iws", MsgType.INSERT_IDS, {"ids": ids})

            entries = [(e.seed, e.nonce, g) for _, e, g in bundle.records]
            self._record(user, "iws", MsgType.INSERT,
                         {"entries": entries, "metas": bundle.updated_meta})
            self._call(
                "iws", self.iws.register_insert, entries, ids, bundle.updated_meta, user
            )
            self._sync_secrets()

            for f, gid in sorted({(fm.field, fm.gid) for fm in fetched}):
                il = self._call("iws", self.iws.group_il, f, gid)
                self._shuffle_group(il)
            return ids
        finally:
            for lock in self._field_locks.values():
                lock.release()

    def run_delete(self, q: Query, user: str = "user") -> int:
        """Delete by predicate; returns how many real rows were matched."""
        q = Query(QueryType.DELETE, q.field, q.element)
        with self._field_locks[q.field]:
            rows, (session, il, en, reply) = self._select_phase(q, user)
            matched_ids = [rid for rid, ok in zip(il, reply.matched) if ok]
            t_by_id = {rid: wit.t for rid, wit in zip(il, en)}
            searched = [
                (rid, tag, t_by_id.get(rid)) for rid, tag in reply.searched_tags
            ]
            updates = rebuild_delete_tags(
                matched_ids, searched, session.eta, self.keys, self.params, self.rng
            )
            self._record(user, "sss", MsgType.DELETE_TAGS, {"updates": updates})
            self._call("sss", self.sss.apply_tags, updates, user)
            self._shuffle_group(il)
            return len(rows)

    # -- administration -------------------------------------------------

    def revoke_user(self, user: str):
        self.sss.revoked.add(user)
        self.iws.revoked.add(user)

    # -- auditing --------------------------------------------------------

    def isolation_audit(self) -> list:
        """Scan the message log for values a destination must never receive."""
        return isolation_audit(self.log, self.ledger)


def isolation_audit(log: list, ledger: SecretsLedger) -> list:
    violations = []
    for i, msg in enumerate(log):
        for blob in iter_bytes_values(msg.payload):
            for category in FORBIDDEN.get(msg.dst, ()):
                if ledger.known(category, blob):
                    violations.append(
                        IsolationViolation(i, msg.src, msg.dst, msg.msg_type, category)
                    )
    return violations


class LocalRss:
    """In-process stand-in for the shuffle service."""

    def __init__(self, params: SchemeParams):
        self.params = params

    def shuffle(self, job: ShuffleJob):
        from .roles.rss import shuffle_records

        return shuffle_records(job, self.params)


def build_inproc_system(
    keys: SecretKeys,
    params: SchemeParams,
    setup_out,
    rng: random.Random | None = None,
) -> Orchestrator:
    """Wire the three roles in-process with full audit instrumentation."""
    from .roles.iws import IwsState
    from .roles.sss import SssState

    sss = SssState(setup_out.edb, params)
    iws = IwsState(setup_out.gdb, setup_out.ndb, keys.s2, params, rng=rng)

    def probe():
        return list(iws.ndb), list(sss.edb)

    return Orchestrator(
        keys, params, sss=sss, iws=iws, rss=LocalRss(params), rng=rng, probe=probe
    )
