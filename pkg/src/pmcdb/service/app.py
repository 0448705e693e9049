"""FastAPI applications hosting each role.

Every role gets its own app so the three services can run on genuinely
separate hosts. Domain errors map onto HTTP statuses with a structured body
(`role`, `code`, `message`) that the HTTP clients translate back into the
matching exception classes.
"""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import (
    AuthError,
    ParameterError,
    PmcdbError,
    ProtocolError,
    RevokedUserError,
    StoreFormatError,
)
from ..crypto import SchemeParams
from ..model import EncryptedQuery, QueryType
from ..roles.iws import IwsState
from ..roles.rss import ShuffleJob, shuffle_records
from ..roles.sss import SssState
from . import schemas as sc

_STATUS = {
    RevokedUserError: 403,
    AuthError: 401,
    ProtocolError: 409,
    ParameterError: 422,
    StoreFormatError: 500,
}


def _install_error_handler(app: FastAPI, role: str):
    @app.exception_handler(PmcdbError)
    async def handle(request: Request, exc: PmcdbError):
        status = 400
        for cls, code in _STATUS.items():
            if isinstance(exc, cls):
                status = code
                break
        return JSONResponse(
            status_code=status,
            content=sc.ErrorModel(role=role, code=exc.code, message=str(exc)).model_dump(),
        )


def create_sss_app(state: SssState, persist=None) -> FastAPI:
    app = FastAPI(title="storage-search-service")
    _install_error_handler(app, "sss")

    @app.post("/search", response_model=sc.SearchResponse)
    def search(req: sc.SearchRequest):
        eq = EncryptedQuery(QueryType(req.qtype), req.field, bytes.fromhex(req.e_star))
        en = [w.unwrap() for w in req.witnesses]
        reply = state.search(eq, req.il, en, req.user)
        return sc.SearchResponse(
            hits=[
                sc.SearchHitModel(
                    rid=h.rid,
                    record=sc.EncryptedRecordModel.wrap(h.ercd),
                    t=h.t.hex(),
                )
                for h in reply.result.hits
            ],
            matched=reply.matched,
            searched_tags=[(rid, tag.hex()) for rid, tag in reply.searched_tags],
        )

    @app.post("/append", response_model=sc.AppendResponse)
    def append(req: sc.AppendRequest):
        ids = state.append([r.unwrap() for r in req.records], req.user)
        return sc.AppendResponse(ids=ids)

    @app.post("/records", response_model=sc.RecordsResponse)
    def records(req: sc.RecordsRequest):
        return sc.RecordsResponse(
            records=[sc.EncryptedRecordModel.wrap(r) for r in state.records(req.il)]
        )

    @app.post("/apply-shuffle")
    def apply_shuffle(req: sc.ApplyShuffleRequest):
        state.apply_shuffle(req.ids, [r.unwrap() for r in req.records])
        return {"ok": True}

    @app.post("/apply-tags")
    def apply_tags(req: sc.ApplyTagsRequest):
        state.apply_tags(
            [(rid, bytes.fromhex(tag)) for rid, tag in req.updates], req.user
        )
        return {"ok": True}

    @app.post("/revoke")
    def revoke(req: sc.RevokeRequest):
        state.revoked.add(req.user)
        return {"ok": True}

    @app.post("/persist")
    def persist_now():
        if persist is None:
            raise ProtocolError("this service was started without a store directory")
        persist()
        return {"ok": True}

    @app.get("/stats", response_model=sc.StatsResponse)
    def stats():
        return sc.StatsResponse(role="sss", record_count=len(state.edb))

    return app


def create_iws_app(state: IwsState, persist=None) -> FastAPI:
    app = FastAPI(title="index-witness-service")
    _install_error_handler(app, "iws")

    @app.post("/nonce-blind", response_model=sc.NonceBlindResponse)
    def nonce_blind(req: sc.NonceBlindRequest):
        il, en = state.nonce_blind(req.field, bytes.fromhex(req.eta), req.gid, req.user)
        return sc.NonceBlindResponse(
            il=il, witnesses=[sc.WitnessModel.wrap(w) for w in en]
        )

    @app.post("/pre-shuffle", response_model=sc.PreShuffleResponse)
    def pre_shuffle(req: sc.PreShuffleRequest):
        il_prime, nn = state.pre_shuffle(req.il)
        return sc.PreShuffleResponse(
            il_prime=il_prime, masks={rid: m.hex() for rid, m in nn.items()}
        )

    @app.post("/register-insert")
    def register_insert(req: sc.RegisterInsertRequest):
        entries = [
            (bytes.fromhex(e.seed), bytes.fromhex(e.nonce), tuple(e.grcd))
            for e in req.entries
        ]
        metas = [(m.field, m.gid, bytes.fromhex(m.meta_ct)) for m in req.metas]
        state.register_insert(entries, req.ids, metas, req.user)
        return {"ok": True}

    @app.post("/meta", response_model=sc.MetaFetchResponse)
    def meta(req: sc.MetaFetchRequest):
        gid, meta_ct = state.fetch_group_meta(req.field, req.gid, req.user)
        return sc.MetaFetchResponse(gid=gid, meta_ct=meta_ct.hex())

    @app.post("/group-il", response_model=sc.GroupIlResponse)
    def group_il(req: sc.GroupIlRequest):
        return sc.GroupIlResponse(il=state.group_il(req.field, req.gid))

    @app.post("/revoke")
    def revoke(req: sc.RevokeRequest):
        state.revoked.add(req.user)
        return {"ok": True}

    @app.post("/persist")
    def persist_now():
        if persist is None:
            raise ProtocolError("this service was started without a store directory")
        persist()
        return {"ok": True}

    @app.get("/stats", response_model=sc.StatsResponse)
    def stats():
        return sc.StatsResponse(
            role="iws", record_count=len(state.ndb), group_count=len(state.gdb)
        )

    return app


def create_rss_app(params: SchemeParams) -> FastAPI:
    app = FastAPI(title="rerandomise-shuffle-service")
    _install_error_handler(app, "rss")

    @app.post("/shuffle", response_model=sc.ShuffleResponse)
    def shuffle(req: sc.ShuffleRequest):
        job = ShuffleJob(
            ids=req.ids,
            ercds=[r.unwrap() for r in req.records],
            il_prime=req.il_prime,
            nn={rid: bytes.fromhex(m) for rid, m in req.masks.items()},
        )
        ids, fresh = shuffle_records(job, params)
        return sc.ShuffleResponse(
            ids=ids, records=[sc.EncryptedRecordModel.wrap(r) for r in fresh]
        )

    @app.get("/stats", response_model=sc.StatsResponse)
    def stats():
        return sc.StatsResponse(role="rss")

    return app
