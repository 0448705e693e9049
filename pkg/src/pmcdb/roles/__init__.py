from .sss import SearchReply, SssState, StagedSearch
from .iws import IwsState
from .rss import ShuffleJob, shuffle_records

__all__ = [
    "SearchReply",
    "SssState",
    "StagedSearch",
    "IwsState",
    "ShuffleJob",
    "shuffle_records",
]
