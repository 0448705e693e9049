"""Persistence: binary store formats, CSV ingestion, key and manifest handling.

All three stores share one header layout (magic, version, geometry, count).
Files are position-aligned: record ``i`` in the encrypted store corresponds
to entry ``i`` in the nonce store. Keys never enter store files; they come
from the ``PMCDB_S1`` / ``PMCDB_S2`` environment variables or a key file.
"""

import csv
import json
import os
import random
import struct
from pathlib import Path

from .crypto import SchemeParams, SecretKeys
from .errors import ParameterError, StoreFormatError
from .model import (
    EncryptedRecord,
    GroupEntry,
    NonceEntry,
    PlainDatabase,
    Record,
    pad_element,
)

MAGIC = b"PMCD"
VERSION = 1

ENV_S1 = "PMCDB_S1"
ENV_S2 = "PMCDB_S2"

_HEADER = struct.Struct(">4sHHHHQ")


def _write_header(fh, params: SchemeParams, count: int):
    fh.write(
        _HEADER.pack(
            MAGIC, VERSION, params.field_count, params.elem_len, params.tag_len, count
        )
    )


def _read_header(fh, params: SchemeParams) -> int:
    raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise StoreFormatError("truncated store header")
    magic, version, fcount, elem_len, tag_len, count = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise StoreFormatError("bad magic %r" % magic)
    if version != VERSION:
        raise StoreFormatError("unsupported store version %d" % version)
    if (fcount, elem_len, tag_len) != (
        params.field_count,
        params.elem_len,
        params.tag_len,
    ):
        raise StoreFormatError("store geometry does not match the parameters")
    return count


def _read_exact(fh, n: int) -> bytes:
    raw = fh.read(n)
    if len(raw) != n:
        raise StoreFormatError("truncated store body")
    return raw


def save_edb(path, edb: list, params: SchemeParams):
    with open(path, "wb") as fh:
        _write_header(fh, params, len(edb))
        for ercd in edb:
            fh.write(ercd.to_bytes())


def load_edb(path, params: SchemeParams) -> list:
    with open(path, "rb") as fh:
        count = _read_header(fh, params)
        edb = [
            EncryptedRecord.from_bytes(_read_exact(fh, params.record_len), params)
            for _ in range(count)
        ]
        if fh.read(1):
            raise StoreFormatError("trailing bytes after declared record count")
    return edb


def save_ndb(path, ndb: list, params: SchemeParams):
    with open(path, "wb") as fh:
        _write_header(fh, params, len(ndb))
        for entry in ndb:
            fh.write(entry.seed)
            fh.write(entry.nonce)


def load_ndb(path, params: SchemeParams) -> list:
    with open(path, "rb") as fh:
        count = _read_header(fh, params)
        ndb = []
        for _ in range(count):
            seed = _read_exact(fh, params.seed_len)
            nonce = _read_exact(fh, params.nonce_len)
            ndb.append(NonceEntry(seed, nonce))
        if fh.read(1):
            raise StoreFormatError("trailing bytes after declared entry count")
    return ndb


def _encode_gid(gid: int) -> bytes:
    width = max(1, (gid.bit_length() + 7) // 8)
    return gid.to_bytes(width, "big")


def save_gdb(path, gdb: dict, params: SchemeParams):
    with open(path, "wb") as fh:
        _write_header(fh, params, len(gdb))
        for (field, gid), entry in sorted(gdb.items()):
            fh.write(struct.pack(">H", field))
            g = _encode_gid(gid)
            fh.write(struct.pack(">I", len(g)))
            fh.write(g)
            fh.write(struct.pack(">I", len(entry.il)))
            for rid in entry.il:
                fh.write(struct.pack(">Q", rid))
            fh.write(struct.pack(">I", len(entry.meta_ct)))
            fh.write(entry.meta_ct)


def load_gdb(path, params: SchemeParams) -> dict:
    with open(path, "rb") as fh:
        count = _read_header(fh, params)
        gdb = {}
        for _ in range(count):
            (field,) = struct.unpack(">H", _read_exact(fh, 2))
            (glen,) = struct.unpack(">I", _read_exact(fh, 4))
            gid = int.from_bytes(_read_exact(fh, glen), "big")
            (ilen,) = struct.unpack(">I", _read_exact(fh, 4))
            il = [
                struct.unpack(">Q", _read_exact(fh, 8))[0] for _ in range(ilen)
            ]
            (mlen,) = struct.unpack(">I", _read_exact(fh, 4))
            meta_ct = _read_exact(fh, mlen)
            gdb[(field, gid)] = GroupEntry(il, meta_ct)
        if fh.read(1):
            raise StoreFormatError("trailing bytes after declared entry count")
    return gdb


# -- plaintext ingestion -----------------------------------------------


def ingest_csv(path, params: SchemeParams | None = None, elem_len: int = 16) -> PlainDatabase:
    """Load a UTF-8 CSV with a header row into fixed-width plaintext rows.

    Cells are zero-padded to the element width; oversize cells and ragged
    rows are rejected outright.
    """
    width = params.elem_len if params is not None else elem_len
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParameterError("CSV file %s is empty" % path) from None
        if not header:
            raise ParameterError("CSV header row is empty")
        fcount = len(header)
        if params is not None and fcount != params.field_count:
            raise ParameterError(
                "CSV has %d columns, parameters expect %d" % (fcount, params.field_count)
            )
        rows = []
        for lineno, cells in enumerate(reader, 2):
            if len(cells) != fcount:
                raise ParameterError(
                    "row %d has %d cells, expected %d" % (lineno, len(cells), fcount)
                )
            elements = tuple(pad_element(c.encode("utf-8"), width) for c in cells)
            rows.append(Record(elements, flag=True))
    return PlainDatabase(rows, field_names=tuple(header))


def generate_int_table(
    n_rows: int,
    universe: int = 1000,
    elem_len: int = 16,
    rng: random.Random | None = None,
) -> PlainDatabase:
    """Synthetic single-field table of zero-padded decimal integer keys.

    Keys repeat naturally (drawn uniformly from ``1..universe``), which gives
    the occurrence spread the padding machinery has to smooth out. Pairs with
    ``group_mode='mod'`` for value-mod-N grouping.
    """
    rng = rng or random.Random()
    digits = max(len(str(universe)), 1)
    rows = []
    for _ in range(n_rows):
        key = rng.randint(1, universe)
        rows.append(
            Record((pad_element(str(key).zfill(digits).encode(), elem_len),), flag=True)
        )
    return PlainDatabase(rows, field_names=("key",))


# -- keys ----------------------------------------------------------------


def generate_keys(k_bits: int = 128) -> SecretKeys:
    return SecretKeys.generate(k_bits)


def save_keys(path, keys: SecretKeys):
    payload = {"s1": keys.s1.hex(), "s2": keys.s2.hex()}
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2) + "\n")
    try:
        os.chmod(path, 0o600)
    except OSError:
        pass


def load_keys(key_file=None) -> SecretKeys:
    """Keys from the environment, falling back to a JSON key file."""
    s1_hex = os.environ.get(ENV_S1)
    s2_hex = os.environ.get(ENV_S2)
    if s1_hex and s2_hex:
        return SecretKeys(bytes.fromhex(s1_hex), bytes.fromhex(s2_hex))
    if key_file is None:
        raise ParameterError(
            "no keys: set %s/%s or provide a key file" % (ENV_S1, ENV_S2)
        )
    try:
        payload = json.loads(Path(key_file).read_text())
        return SecretKeys(bytes.fromhex(payload["s1"]), bytes.fromhex(payload["s2"]))
    except (OSError, KeyError, ValueError) as exc:
        raise ParameterError("unusable key file %s: %s" % (key_file, exc)) from exc


# -- deployment manifest --------------------------------------------------

EDB_FILE = "edb.bin"
NDB_FILE = "ndb.bin"
GDB_FILE = "gdb.bin"
MANIFEST_FILE = "manifest.json"


def save_manifest(dirpath, params: SchemeParams, field_names=None):
    payload = {
        "field_count": params.field_count,
        "elem_len": params.elem_len,
        "hash_len": params.hash_len,
        "witness_len": params.witness_len,
        "group_bits": params.group_bits,
        "lambda_min": params.lambda_min,
        "group_mode": params.group_mode,
        "group_mod": params.group_mod,
        "field_names": list(field_names) if field_names else None,
    }
    Path(dirpath, MANIFEST_FILE).write_text(json.dumps(payload, indent=2) + "\n")


def load_manifest(dirpath):
    try:
        payload = json.loads(Path(dirpath, MANIFEST_FILE).read_text())
    except OSError as exc:
        raise StoreFormatError("cannot read manifest in %s: %s" % (dirpath, exc)) from exc
    names = payload.pop("field_names", None)
    params = SchemeParams(**payload)
    return params, tuple(names) if names else None


def save_stores(dirpath, edb, ndb, gdb, params: SchemeParams, field_names=None):
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    save_edb(dirpath / EDB_FILE, edb, params)
    save_ndb(dirpath / NDB_FILE, ndb, params)
    save_gdb(dirpath / GDB_FILE, gdb, params)
    save_manifest(dirpath, params, field_names)


def load_stores(dirpath):
    dirpath = Path(dirpath)
    params, field_names = load_manifest(dirpath)
    edb = load_edb(dirpath / EDB_FILE, params)
    ndb = load_ndb(dirpath / NDB_FILE, params)
    gdb = load_gdb(dirpath / GDB_FILE, params)
    if len(edb) != len(ndb):
        raise StoreFormatError("encrypted store and nonce store are misaligned")
    return edb, ndb, gdb, params, field_names
