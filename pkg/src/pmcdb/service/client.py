"""HTTP adapters giving the remote role services the same method surface as
the in-process states, so the orchestrator cannot tell them apart."""

import httpx

from ..errors import (
    AuthError,
    ParameterError,
    PmcdbError,
    ProtocolError,
    RevokedUserError,
    StoreFormatError,
)
from ..model import EncryptedQuery, SearchHit, SearchResult
from ..roles.rss import ShuffleJob
from ..roles.sss import SearchReply
from . import schemas as sc

_BY_CODE = {
    "revoked": RevokedUserError,
    "auth": AuthError,
    "protocol": ProtocolError,
    "parameter": ParameterError,
    "store": StoreFormatError,
}


class _RevokedView:
    """Remote revocation list: adding here revokes at the service."""

    def __init__(self, http):
        self._http = http

    def add(self, user: str):
        self._http.post("/revoke", {"user": user})


class _HttpRole:
    def __init__(self, base_url: str, client: httpx.Client | None = None):
        self._client = client or httpx.Client(base_url=base_url, timeout=30.0)
        self.revoked = _RevokedView(self)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code >= 400:
            self._raise(resp)
        return resp.json()

    def get(self, path: str) -> dict:
        resp = self._client.get(path)
        if resp.status_code >= 400:
            self._raise(resp)
        return resp.json()

    @staticmethod
    def _raise(resp):
        try:
            body = resp.json()
            cls = _BY_CODE.get(body.get("code"), PmcdbError)
            raise cls(body.get("message", "remote error"))
        except (ValueError, KeyError):
            raise PmcdbError("remote error: HTTP %d" % resp.status_code) from None


class HttpSss(_HttpRole):
    def search(self, eq: EncryptedQuery, il, en, user=None) -> SearchReply:
        body = self.post("/search", {
            "user": user,
            "qtype": eq.qtype.value,
            "field": eq.field,
            "e_star": eq.e_star.hex(),
            "il": list(il),
            "witnesses": [sc.WitnessModel.wrap(w).model_dump() for w in en],
        })
        hits = [
            SearchHit(
                h["rid"],
                sc.EncryptedRecordModel(**h["record"]).unwrap(),
                bytes.fromhex(h["t"]),
            )
            for h in body["hits"]
        ]
        tags = [(rid, bytes.fromhex(tag)) for rid, tag in body["searched_tags"]]
        return SearchReply(SearchResult(hits), body["matched"], tags)

    def append(self, ercds, user=None):
        body = self.post("/append", {
            "user": user,
            "records": [sc.EncryptedRecordModel.wrap(r).model_dump() for r in ercds],
        })
        return body["ids"]

    def records(self, il):
        body = self.post("/records", {"il": list(il)})
        return [sc.EncryptedRecordModel(**r).unwrap() for r in body["records"]]

    def apply_shuffle(self, ids, ercds_new):
        self.post("/apply-shuffle", {
            "ids": list(ids),
            "records": [sc.EncryptedRecordModel.wrap(r).model_dump() for r in ercds_new],
        })

    def apply_tags(self, updates, user=None):
        self.post("/apply-tags", {
            "user": user,
            "updates": [(rid, tag.hex()) for rid, tag in updates],
        })


class HttpIws(_HttpRole):
    def nonce_blind(self, field, eta, gid, user=None):
        body = self.post("/nonce-blind", {
            "user": user, "field": field, "eta": eta.hex(), "gid": gid,
        })
        en = [sc.WitnessModel(**w).unwrap() for w in body["witnesses"]]
        return body["il"], en

    def pre_shuffle(self, il):
        body = self.post("/pre-shuffle", {"il": list(il)})
        nn = {int(rid): bytes.fromhex(m) for rid, m in body["masks"].items()}
        return body["il_prime"], nn

    def register_insert(self, entries, ids, new_metas, user=None):
        self.post("/register-insert", {
            "user": user,
            "entries": [
                {"seed": s.hex(), "nonce": n.hex(), "grcd": list(g)}
                for s, n, g in entries
            ],
            "ids": list(ids),
            "metas": [
                {"field": f, "gid": g, "meta_ct": ct.hex()} for f, g, ct in new_metas
            ],
        })

    def fetch_group_meta(self, field, gid, user=None):
        body = self.post("/meta", {"user": user, "field": field, "gid": gid})
        return body["gid"], bytes.fromhex(body["meta_ct"])

    def group_il(self, field, gid):
        return self.post("/group-il", {"field": field, "gid": gid})["il"]


class HttpRss(_HttpRole):
    def shuffle(self, job: ShuffleJob):
        body = self.post("/shuffle", {
            "ids": list(job.ids),
            "records": [sc.EncryptedRecordModel.wrap(r).model_dump() for r in job.ercds],
            "il_prime": list(job.il_prime),
            "masks": {rid: m.hex() for rid, m in job.nn.items()},
        })
        return body["ids"], [sc.EncryptedRecordModel(**r).unwrap() for r in body["records"]]
