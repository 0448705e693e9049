"""Re-randomise and Shuffle Service: stateless, keyless, one job at a time.

Given the searched records, their destination order, and the XOR masks from
the index service, it rearranges and re-blinds. It cannot validate content
(it holds no keys) — only structural consistency.
"""

from dataclasses import dataclass

from ..crypto import SchemeParams
from ..errors import ProtocolError
from ..model import xor_record


@dataclass
class ShuffleJob:
    """One shuffle request.

    ``ids``/``ercds`` are parallel (record ``ercds[i]`` currently lives at
    ``ids[i]``); ``il_prime[i]`` is where it moves; ``nn`` maps destination id
    to the mask that rebinds the record for its new position.
    """

    ids: list
    ercds: list
    il_prime: list
    nn: dict

    def validate(self):
        if not (len(self.ids) == len(self.ercds) == len(self.il_prime)):
            raise ProtocolError("shuffle job lists are not aligned")
        if set(self.ids) != set(self.il_prime):
            raise ProtocolError("destination ids are not a permutation of source ids")
        if set(self.nn) != set(self.il_prime):
            raise ProtocolError("mask keys do not cover the destination ids")


def shuffle_records(job: ShuffleJob, params: SchemeParams):
    """Apply the permutation and the masks; returns ``(il_prime, new_records)``
    aligned so that ``new_records[i]`` belongs at position ``il_prime[i]``."""
    job.validate()
    out = []
    for ercd, dst in zip(job.ercds, job.il_prime):
        out.append(xor_record(ercd, job.nn[dst], params))
    return list(job.il_prime), out
