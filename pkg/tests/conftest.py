import random

import pytest

from pmcdb.admin import setup
from pmcdb.crypto import SchemeParams, SecretKeys, element_group
from pmcdb.model import PlainDatabase, Record, pad_element
from pmcdb.transport import build_inproc_system

# Key searched so that 1-bit hash grouping reproduces the reference split of
# the staff fixture: {Alice, Anna} | {Bob, Bill} and {25, 27} | {30, 33}.
STAFF_S1 = bytes.fromhex("5781e2028bd85779ecef9d86f6f86802")
STAFF_S2 = bytes.fromhex("9f8e7d6c5b4a39281706f5e4d3c2b1a0")

STAFF_ROWS = [
    ("Alice", "27"),
    ("Anna", "30"),
    ("Bob", "27"),
    ("Bill", "25"),
    ("Bob", "33"),
]


def pe(text: str, width: int = 16) -> bytes:
    return pad_element(text.encode(), width)


def unp(element: bytes) -> str:
    return element.rstrip(b"\x00").decode()


@pytest.fixture
def keys():
    return SecretKeys(STAFF_S1, STAFF_S2)


@pytest.fixture
def params():
    return SchemeParams(field_count=2, group_bits=1)


@pytest.fixture
def staff_db():
    rows = [Record((pe(n), pe(a)), flag=True) for n, a in STAFF_ROWS]
    return PlainDatabase(rows, field_names=("Name", "Age"))


@pytest.fixture
def staff_setup(keys, params, staff_db):
    return setup(keys, staff_db, params, rng=random.Random(7))


@pytest.fixture
def staff_system(keys, params, staff_setup):
    return build_inproc_system(keys, params, staff_setup, rng=random.Random(11))


def assert_staff_grouping(keys, params):
    """The searched key must keep producing the reference partition."""
    g = lambda s: element_group(keys, params, pe(s))
    assert g("Alice") == g("Anna") != g("Bob") == g("Bill")
    assert g("25") == g("27") != g("30") == g("33")


def random_plain_db(
    rng: random.Random,
    fields: int,
    max_rows: int = 60,
    pool_size: int = 8,
    elem_len: int = 16,
) -> PlainDatabase:
    """Small random table drawing elements from a bounded pool per field."""
    n = rng.randint(1, max_rows)
    pools = [
        ["f%d_v%d" % (f, i) for i in range(rng.randint(1, pool_size))]
        for f in range(fields)
    ]
    rows = [
        Record(
            tuple(pe(rng.choice(pools[f]), elem_len) for f in range(fields)),
            flag=True,
        )
        for _ in range(n)
    ]
    return PlainDatabase(rows)
