"""Mechanical privacy checks run against a live in-process system.

Each audit is computed from observable artifacts only: the orchestrator's
message log, store snapshots, and the admin decryption oracle. Queries in
different groups remain distinguishable by design (result sizes differ across
groups); the audits therefore always reason within a group.
"""

import json
import random
from dataclasses import dataclass, field

from .admin import decrypt_store
from .model import Query, QueryType, Record, open_meta, unpad_element
from .transport import MsgType, Orchestrator


@dataclass
class PatternReport:
    size_uniform: dict = field(default_factory=dict)
    forward_ok: bool | None = None
    backward_ok: bool | None = None
    untrace_stats: dict | None = None
    isolation_violations: list | None = None

    def lines(self):
        """Human-readable one-line-per-finding rendering."""
        out = []
        for key, info in sorted(self.size_uniform.items()):
            out.append(
                "size-pattern group (%d, %d): %s (threshold %d, result sizes %s)"
                % (key[0], key[1], "uniform" if info["uniform"] else "NON-UNIFORM",
                   info["threshold"], sorted(set(info["sizes"].values())))
            )
        if self.forward_ok is not None:
            out.append("forward privacy: %s" % ("ok" if self.forward_ok else "VIOLATED"))
        if self.backward_ok is not None:
            out.append("backward privacy: %s" % ("ok" if self.backward_ok else "VIOLATED"))
        if self.untrace_stats is not None:
            s = self.untrace_stats
            out.append(
                "untraceability: %d trials, %d distinct layouts, ciphertext refresh %s"
                % (s["trials"], s["distinct_layouts"],
                   "ok" if s["ciphertext_refreshed"] else "MISSING")
            )
        if self.isolation_violations is not None:
            out.append(
                "isolation: %d violation(s)" % len(self.isolation_violations)
            )
        return out

    def jsonl(self):
        """Machine-readable line-delimited rendering."""
        out = []
        for key, info in sorted(self.size_uniform.items()):
            out.append(json.dumps({
                "audit": "size_pattern", "field": key[0], "gid": key[1],
                "uniform": info["uniform"], "threshold": info["threshold"],
            }))
        if self.forward_ok is not None:
            out.append(json.dumps({"audit": "forward", "ok": self.forward_ok}))
        if self.backward_ok is not None:
            out.append(json.dumps({"audit": "backward", "ok": self.backward_ok}))
        if self.untrace_stats is not None:
            out.append(json.dumps({"audit": "untraceability", **self.untrace_stats}))
        if self.isolation_violations is not None:
            out.append(json.dumps({
                "audit": "isolation",
                "violations": len(self.isolation_violations),
            }))
        return out


def _group_metas(orch: Orchestrator):
    return {
        key: open_meta(orch.keys, entry.meta_ct, orch.params)
        for key, entry in orch.iws.gdb.items()
    }


def _last_result_size(orch: Orchestrator) -> int:
    for msg in reversed(orch.log):
        if msg.msg_type is MsgType.SEARCH_RESULT:
            return len(msg.payload.result.hits)
    raise RuntimeError("no search result in the message log")


def audit_size_pattern(orch: Orchestrator) -> dict:
    """Every in-group query must return exactly the group's threshold."""
    verdicts = {}
    for key, meta in sorted(_group_metas(orch).items()):
        if not meta.elements:
            continue
        f, _ = key
        sizes = {}
        for e in sorted(meta.elements):
            orch.run_select(Query(QueryType.SELECT, f, e))
            sizes[unpad_element(e).decode("utf-8", "replace")] = _last_result_size(orch)
        verdicts[key] = {
            "threshold": meta.threshold,
            "sizes": sizes,
            "uniform": all(v == meta.threshold for v in sizes.values()),
        }
    return verdicts


def pick_real_query(orch: Orchestrator, rng: random.Random):
    """A (field, element) pair that currently has at least one occurrence."""
    candidates = []
    for (f, _), meta in _group_metas(orch).items():
        if meta.threshold > 0:
            candidates.extend((f, e) for e in sorted(meta.elements))
    if not candidates:
        raise RuntimeError("store has no queryable elements")
    return candidates[rng.randrange(len(candidates))]


def _matching_row(orch: Orchestrator, f: int, e: bytes) -> Record:
    """A real row whose field ``f`` equals ``e``; other fields reuse known elements."""
    from .model import null_element

    metas = _group_metas(orch)
    elements = []
    for fld in range(1, orch.params.field_count + 1):
        if fld == f:
            elements.append(e)
            continue
        pool = sorted(
            {e2 for (ff, _), m in metas.items() if ff == fld for e2 in m.elements}
        )
        elements.append(pool[0] if pool else null_element(orch.params))
    return Record(tuple(elements), flag=True)


def audit_forward(
    orch: Orchestrator,
    trials: int = 10,
    rng: random.Random | None = None,
    with_inserts: bool = True,
) -> bool:
    """Stale query material must match nothing once the group is shuffled.

    Each trial captures a live (query, witness set) pair, confirms it matches
    (no shuffle yet — the negative control), shuffles the group, then replays
    the stale pair. Every other trial shuffles by inserting a row that matches
    the captured query, confirming post-capture inserts stay invisible too.
    """
    rng = rng or random.Random()
    from .client import query_enc

    for trial in range(trials):
        f, e = pick_real_query(orch, rng)
        session = query_enc(Query(QueryType.SELECT, f, e), orch.keys, orch.params, rng)
        il, en = orch.iws.nonce_blind(f, session.eta, session.gid)
        live = orch.sss.search(session.eq, il, en)
        if not any(live.matched):
            return False  # negative control failed: live pair must match

        if with_inserts and trial % 2 == 1:
            orch.run_insert(_matching_row(orch, f, e))
        else:
            orch._shuffle_group(il)

        stale = orch.sss.search(session.eq, il, en)
        if any(stale.matched):
            return False
    return True


def audit_backward(
    orch: Orchestrator,
    delete_query: Query,
    ops: int = 100,
    rng: random.Random | None = None,
) -> bool:
    """Deleted rows must never decrypt out of any later result.

    Runs the delete, then an interleaved workload of selects (and occasional
    re-deletes) checked after every step against a plaintext shadow of the
    live rows.
    """
    rng = rng or random.Random()
    shadow = _live_rows(orch)
    orch.run_delete(delete_query)
    f = delete_query.field
    shadow = [
        r for r in shadow if r.elements[f - 1] != delete_query.element
    ]

    for _ in range(ops):
        f, e = pick_real_query(orch, rng)
        got = sorted(r.elements for r in orch.run_select(Query(QueryType.SELECT, f, e)))
        want = sorted(r.elements for r in shadow if r.elements[f - 1] == e)
        if got != want:
            return False
        if rng.random() < 0.1:
            fd, ed = pick_real_query(orch, rng)
            orch.run_delete(Query(QueryType.DELETE, fd, ed))
            shadow = [r for r in shadow if r.elements[fd - 1] != ed]
    return _padding_uniform(orch)


def _live_rows(orch: Orchestrator) -> list:
    return [
        r for r in decrypt_store(orch.sss.edb, orch.iws.ndb, orch.keys, orch.params)
        if r.flag
    ]


def _padding_uniform(orch: Orchestrator) -> bool:
    """Within every group, all elements (real + dummy rows) occur equally."""
    rows = decrypt_store(orch.sss.edb, orch.iws.ndb, orch.keys, orch.params)
    counts = [dict() for _ in range(orch.params.field_count)]
    for r in rows:
        for f, e in enumerate(r.elements):
            counts[f][e] = counts[f].get(e, 0) + 1
    for (f, _), meta in _group_metas(orch).items():
        occ = {counts[f - 1].get(e, 0) for e in meta.elements}
        if len(occ) > 1:
            return False
    return True


def audit_untraceability(
    orch: Orchestrator,
    query: Query,
    trials: int = 20,
) -> dict:
    """Distribution summary of where a repeated query's records end up.

    Asserts only the mechanically checkable consequences of re-randomisation:
    ciphertext bytes at every touched position change after each shuffle.
    Position layouts are reported, not judged.
    """
    layouts = {}
    refreshed = True
    for _ in range(trials):
        before = {rid: er.to_bytes() for rid, er in enumerate(orch.sss.edb)}
        orch.run_select(query)
        touched = None
        for msg in reversed(orch.log):
            if msg.msg_type is MsgType.SHUFFLED_RECORDS:
                touched = list(msg.payload["ids"])
                break
        if touched is None:
            continue
        for rid in touched:
            if orch.sss.edb[rid].to_bytes() == before[rid]:
                refreshed = False
        layout = _layout(orch, touched)
        layouts[layout] = layouts.get(layout, 0) + 1
    return {
        "trials": trials,
        "distinct_layouts": len(layouts),
        "layout_counts": {str(k): v for k, v in sorted(layouts.items())},
        "ciphertext_refreshed": refreshed,
    }


def _layout(orch: Orchestrator, touched: list):
    """Where each distinct plaintext row of the touched set now lives.

    Only well-defined when the touched rows are pairwise distinct; duplicate
    rows collapse into the same key, which still yields a stable summary.
    """
    import hashlib

    rows = decrypt_store(orch.sss.edb, orch.iws.ndb, orch.keys, orch.params)
    placed = {}
    for rid in sorted(touched):
        label = hashlib.blake2b(
            b"|".join(rows[rid].elements), digest_size=8
        ).hexdigest()
        placed.setdefault(label, []).append(rid)
    return tuple(sorted((k, tuple(v)) for k, v in placed.items()))


def fuzz_workload(
    orch: Orchestrator,
    ops: int = 1000,
    rng: random.Random | None = None,
    insert_pool: list | None = None,
) -> int:
    """Drive a mixed select/insert/delete workload; returns operations run."""
    rng = rng or random.Random()
    ran = 0
    for _ in range(ops):
        roll = rng.random()
        if roll < 0.70 or not insert_pool:
            f, e = pick_real_query(orch, rng)
            orch.run_select(Query(QueryType.SELECT, f, e))
        elif roll < 0.85:
            orch.run_insert(insert_pool[rng.randrange(len(insert_pool))])
        else:
            f, e = pick_real_query(orch, rng)
            orch.run_delete(Query(QueryType.DELETE, f, e))
        ran += 1
    return ran


def run_all(
    orch: Orchestrator,
    rng: random.Random | None = None,
    untrace_query: Query | None = None,
    untrace_trials: int = 20,
    forward_trials: int = 10,
    backward_ops: int = 25,
) -> PatternReport:
    """Convenience driver used by the CLI audit command."""
    rng = rng or random.Random()
    report = PatternReport()
    report.size_uniform = audit_size_pattern(orch)
    report.forward_ok = audit_forward(orch, trials=forward_trials, rng=rng)
    f, e = pick_real_query(orch, rng)
    report.backward_ok = audit_backward(
        orch, Query(QueryType.DELETE, f, e), ops=backward_ops, rng=rng
    )
    if untrace_query is None:
        f2, e2 = pick_real_query(orch, rng)
        untrace_query = Query(QueryType.SELECT, f2, e2)
    report.untrace_stats = audit_untraceability(orch, untrace_query, untrace_trials)
    report.isolation_violations = orch.isolation_audit()
    return report
