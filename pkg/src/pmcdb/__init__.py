"""Searchable encrypted store split across three non-colluding services.

A trusted admin pads each field's element groups to a uniform occurrence with
dummy rows and encrypts everything under two keys. Queries are blinded per
session; a storage service matches ciphertext against per-query witnesses
from an index service, and a third service re-randomises and shuffles the
searched records after every query so repeated queries stay unlinkable.
"""

from .crypto import SchemeParams, SecretKeys
from .model import (
    EncryptedQuery,
    EncryptedRecord,
    PlainDatabase,
    Query,
    QueryType,
    Record,
)
from .admin import SetupOutput, setup
from .transport import Orchestrator, build_inproc_system

__all__ = [
    "SchemeParams",
    "SecretKeys",
    "EncryptedQuery",
    "EncryptedRecord",
    "PlainDatabase",
    "Query",
    "QueryType",
    "Record",
    "SetupOutput",
    "setup",
    "Orchestrator",
    "build_inproc_system",
]

__version__ = "0.1.0"
