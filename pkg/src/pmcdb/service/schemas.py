"""Pydantic request/response models for the three role services.

Byte strings travel as lowercase hex. The wire stays JSON throughout; record
and witness geometry is validated by the role state, not re-checked here.
"""

from pydantic import BaseModel

from ..model import EncryptedRecord, Witness


class EncryptedRecordModel(BaseModel):
    blinded: list[str]
    tag: str

    @classmethod
    def wrap(cls, ercd: EncryptedRecord) -> "EncryptedRecordModel":
        return cls(blinded=[b.hex() for b in ercd.blinded], tag=ercd.tag.hex())

    def unwrap(self) -> EncryptedRecord:
        return EncryptedRecord(
            tuple(bytes.fromhex(b) for b in self.blinded), bytes.fromhex(self.tag)
        )


class WitnessModel(BaseModel):
    w: str
    t: str

    @classmethod
    def wrap(cls, wit: Witness) -> "WitnessModel":
        return cls(w=wit.w.hex(), t=wit.t.hex())

    def unwrap(self) -> Witness:
        return Witness(bytes.fromhex(self.w), bytes.fromhex(self.t))


class ErrorModel(BaseModel):
    role: str
    code: str
    message: str


# -- storage/search service ------------------------------------------------


class SearchRequest(BaseModel):
    user: str | None = None
    qtype: str
    field: int
    e_star: str
    il: list[int]
    witnesses: list[WitnessModel]


class SearchHitModel(BaseModel):
    rid: int
    record: EncryptedRecordModel
    t: str


class SearchResponse(BaseModel):
    hits: list[SearchHitModel]
    matched: list[bool]
    searched_tags: list[tuple[int, str]]


class AppendRequest(BaseModel):
    user: str | None = None
    records: list[EncryptedRecordModel]


class AppendResponse(BaseModel):
    ids: list[int]


class RecordsRequest(BaseModel):
    il: list[int]


class RecordsResponse(BaseModel):
    records: list[EncryptedRecordModel]


class ApplyShuffleRequest(BaseModel):
    ids: list[int]
    records: list[EncryptedRecordModel]


class ApplyTagsRequest(BaseModel):
    user: str | None = None
    updates: list[tuple[int, str]]


# -- index/witness service ---------------------------------------------------


class NonceBlindRequest(BaseModel):
    user: str | None = None
    field: int
    eta: str
    gid: int


class NonceBlindResponse(BaseModel):
    il: list[int]
    witnesses: list[WitnessModel]


class PreShuffleRequest(BaseModel):
    il: list[int]


class PreShuffleResponse(BaseModel):
    il_prime: list[int]
    masks: dict[int, str]


class InsertEntryModel(BaseModel):
    seed: str
    nonce: str
    grcd: list[int]


class MetaUpdateModel(BaseModel):
    field: int
    gid: int
    meta_ct: str


class RegisterInsertRequest(BaseModel):
    user: str | None = None
    entries: list[InsertEntryModel]
    ids: list[int]
    metas: list[MetaUpdateModel]


class MetaFetchRequest(BaseModel):
    user: str | None = None
    field: int
    gid: int


class MetaFetchResponse(BaseModel):
    gid: int
    meta_ct: str


class GroupIlRequest(BaseModel):
    field: int
    gid: int


class GroupIlResponse(BaseModel):
    il: list[int]


# -- re-randomise/shuffle service ---------------------------------------------


class ShuffleRequest(BaseModel):
    ids: list[int]
    records: list[EncryptedRecordModel]
    il_prime: list[int]
    masks: dict[int, str]


class ShuffleResponse(BaseModel):
    ids: list[int]
    records: list[EncryptedRecordModel]


# -- shared admin/ops ----------------------------------------------------------


class RevokeRequest(BaseModel):
    user: str


class StatsResponse(BaseModel):
    role: str
    record_count: int | None = None
    group_count: int | None = None
