"""Operator command line: a thin client over the library and the services.

Exit codes: 0 ok, 2 usage, 3 protocol, 4 crypto/auth, 5 io.
"""

import random
import sys
from pathlib import Path

import click

from . import admin as admin_mod
from . import auditor as auditor_mod
from . import store as store_mod
from .crypto import SchemeParams
from .errors import (
    AuthError,
    ParameterError,
    PmcdbError,
    ProtocolError,
    StoreFormatError,
)
from .model import (
    Query,
    QueryType,
    open_meta,
    pad_element,
    unpad_element,
)
from .transport import Orchestrator, build_inproc_system

EXIT_USAGE = 2
EXIT_PROTOCOL = 3
EXIT_CRYPTO = 4
EXIT_IO = 5


def _fail(exc: Exception) -> int:
    click.echo("error: %s" % exc, err=True)
    if isinstance(exc, (ParameterError, click.ClickException)):
        return EXIT_USAGE
    if isinstance(exc, (AuthError,)):
        return EXIT_CRYPTO
    if isinstance(exc, (ProtocolError,)):
        return EXIT_PROTOCOL
    if isinstance(exc, (StoreFormatError, OSError)):
        return EXIT_IO
    return EXIT_PROTOCOL


def _run(fn):
    try:
        fn()
    except (PmcdbError, OSError) as exc:
        sys.exit(_fail(exc))


@click.group()
def main():
    """Encrypted multi-service store: setup, queries, audits."""


def _keys(key_file):
    return store_mod.load_keys(key_file)


def _seeded(seed):
    return random.Random(seed) if seed is not None else None


def _field_index(field, field_names, field_count):
    if field_names and field in field_names:
        return field_names.index(field) + 1
    try:
        idx = int(field)
    except ValueError:
        raise ParameterError("unknown field %r" % field) from None
    if not 1 <= idx <= field_count:
        raise ParameterError("field index %d out of range" % idx)
    return idx


def _build_system(store_dir, key_file, seed, transport, sss_url, iws_url, rss_url):
    keys = _keys(key_file)
    if transport == "http":
        from .service.client import HttpIws, HttpRss, HttpSss

        params, field_names = store_mod.load_manifest(store_dir)
        orch = Orchestrator(
            keys,
            params,
            sss=HttpSss(sss_url),
            iws=HttpIws(iws_url),
            rss=HttpRss(rss_url),
            rng=_seeded(seed),
        )
        return orch, params, field_names, None
    edb, ndb, gdb, params, field_names = store_mod.load_stores(store_dir)
    out = admin_mod.SetupOutput(edb, gdb, ndb, sigma_max=0)
    orch = build_inproc_system(keys, params, out, rng=_seeded(seed))

    def save_back():
        store_mod.save_stores(
            store_dir, orch.sss.edb, orch.iws.ndb, orch.iws.gdb, params, field_names
        )

    return orch, params, field_names, save_back


_transport_opts = [
    click.option("--store-dir", required=True, type=click.Path(), help="Deployment directory"),
    click.option("--key-file", type=click.Path(), default=None, help="JSON key file"),
    click.option("--seed", type=int, default=None, help="Deterministic RNG seed (tests)"),
    click.option("--transport", type=click.Choice(["inproc", "http"]), default="inproc"),
    click.option("--sss", "sss_url", default="http://127.0.0.1:8001"),
    click.option("--iws", "iws_url", default="http://127.0.0.1:8002"),
    click.option("--rss", "rss_url", default="http://127.0.0.1:8003"),
]


def _with_transport(fn):
    for opt in reversed(_transport_opts):
        fn = opt(fn)
    return fn


@main.command()
@click.argument("csv_path", type=click.Path(exists=True))
@click.argument("out_dir", type=click.Path())
@click.option("--group-bits", default=0, help="Bits of the group encoder output")
@click.option("--lambda", "lambda_min", default=1, help="Minimum distinct elements per group")
@click.option("--elem-len", default=16, help="Element width in bytes")
@click.option("--group-mode", type=click.Choice(["hash", "mod"]), default="hash")
@click.option("--group-mod", default=0, help="Modulus for mod grouping")
@click.option("--seed", type=int, default=None)
@click.option("--key-file", type=click.Path(), default=None,
              help="Existing key file; a new one is generated in OUT_DIR otherwise")
def init(csv_path, out_dir, group_bits, lambda_min, elem_len, group_mode, group_mod, seed, key_file):
    """Encrypt a CSV into a deployment directory (stores + manifest)."""

    def body():
        db = store_mod.ingest_csv(csv_path, elem_len=elem_len)
        if not db.rows:
            raise ParameterError("refusing to initialise from an empty table")
        params = SchemeParams(
            field_count=len(db.rows[0].elements),
            elem_len=elem_len,
            group_bits=group_bits,
            lambda_min=lambda_min,
            group_mode=group_mode,
            group_mod=group_mod,
        )
        try:
            keys = store_mod.load_keys(key_file)
        except ParameterError:
            keys = store_mod.generate_keys()
            key_path = Path(out_dir) / "keys.json"
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            store_mod.save_keys(key_path, keys)
            click.echo("generated keys in %s (move them off the service hosts)" % key_path)
        out = admin_mod.setup(keys, db, params, rng=_seeded(seed))
        store_mod.save_stores(out_dir, out.edb, out.gdb, out.ndb, params, db.field_names)
        click.echo(
            "initialised %s: %d records (%d dummy), %d groups"
            % (out_dir, len(out.edb), out.sigma_max, len(out.gdb))
        )

    _run(body)


@main.command()
@click.argument("role", type=click.Choice(["sss", "iws", "rss"]))
@click.option("--store-dir", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8001)
@click.option("--key-file", type=click.Path(), default=None,
              help="Key file (the index service needs the shared expansion key)")
def serve(role, store_dir, host, port, key_file):
    """Host one role over HTTP (state lives in memory; POST /persist to write back)."""

    def body():
        import uvicorn

        from .roles.iws import IwsState
        from .roles.sss import SssState
        from .service.app import create_iws_app, create_rss_app, create_sss_app

        edb, ndb, gdb, params, field_names = store_mod.load_stores(store_dir)
        if role == "sss":
            state = SssState(edb, params)

            def persist():
                store_mod.save_edb(Path(store_dir) / store_mod.EDB_FILE, state.edb, params)

            app = create_sss_app(state, persist)
        elif role == "iws":
            keys = _keys(key_file)
            state = IwsState(gdb, ndb, keys.s2, params)

            def persist():
                store_mod.save_ndb(Path(store_dir) / store_mod.NDB_FILE, state.ndb, params)
                store_mod.save_gdb(Path(store_dir) / store_mod.GDB_FILE, state.gdb, params)

            app = create_iws_app(state, persist)
        else:
            app = create_rss_app(params)
        uvicorn.run(app, host=host, port=port, log_level="warning")

    _run(body)


@main.command()
@click.argument("field")
@click.argument("element")
@_with_transport
def select(field, element, store_dir, key_file, seed, transport, sss_url, iws_url, rss_url):
    """Run an equality select and print the matching rows."""

    def body():
        orch, params, field_names, save_back = _build_system(
            store_dir, key_file, seed, transport, sss_url, iws_url, rss_url
        )
        f = _field_index(field, field_names, params.field_count)
        e = pad_element(element.encode(), params.elem_len)
        rows = orch.run_select(Query(QueryType.SELECT, f, e))
        for row in rows:
            click.echo(",".join(
                unpad_element(x).decode("utf-8", "replace") for x in row.elements
            ))
        click.echo("%d row(s)" % len(rows), err=True)
        if save_back:
            save_back()

    _run(body)


@main.command()
@click.argument("values", nargs=-1, required=True)
@_with_transport
def insert(values, store_dir, key_file, seed, transport, sss_url, iws_url, rss_url):
    """Insert one row (one value per field)."""

    def body():
        from .model import Record

        orch, params, field_names, save_back = _build_system(
            store_dir, key_file, seed, transport, sss_url, iws_url, rss_url
        )
        if len(values) != params.field_count:
            raise ParameterError(
                "expected %d values, got %d" % (params.field_count, len(values))
            )
        row = Record(
            tuple(pad_element(v.encode(), params.elem_len) for v in values), flag=True
        )
        ids = orch.run_insert(row)
        click.echo("inserted %d record(s)" % len(ids))
        if save_back:
            save_back()

    _run(body)


@main.command()
@click.argument("field")
@click.argument("element")
@_with_transport
def delete(field, element, store_dir, key_file, seed, transport, sss_url, iws_url, rss_url):
    """Delete rows matching an equality predicate."""

    def body():
        orch, params, field_names, save_back = _build_system(
            store_dir, key_file, seed, transport, sss_url, iws_url, rss_url
        )
        f = _field_index(field, field_names, params.field_count)
        e = pad_element(element.encode(), params.elem_len)
        count = orch.run_delete(Query(QueryType.DELETE, f, e))
        click.echo("deleted %d row(s)" % count)
        if save_back:
            save_back()

    _run(body)


@main.command()
@click.argument(
    "kind",
    type=click.Choice(["size", "forward", "backward", "untrace", "isolation", "all"]),
)
@click.option("--store-dir", required=True, type=click.Path())
@click.option("--key-file", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--trials", default=20, help="Trial count for sampled audits")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Also write the machine-readable report here (JSON lines)")
def audit(kind, store_dir, key_file, seed, trials, out_path):
    """Run pattern audits against a fresh in-process system built from the stores."""

    def body():
        keys = _keys(key_file)
        edb, ndb, gdb, params, _ = store_mod.load_stores(store_dir)
        out = admin_mod.SetupOutput(edb, gdb, ndb, sigma_max=0)
        rng = _seeded(seed) or random.Random()
        orch = build_inproc_system(keys, params, out, rng=_seeded(seed))
        report = auditor_mod.PatternReport()
        if kind in ("size", "all"):
            report.size_uniform = auditor_mod.audit_size_pattern(orch)
        if kind in ("forward", "all"):
            report.forward_ok = auditor_mod.audit_forward(orch, trials=max(trials // 2, 2), rng=rng)
        if kind in ("backward", "all"):
            f, e = auditor_mod.pick_real_query(orch, rng)
            report.backward_ok = auditor_mod.audit_backward(
                orch, Query(QueryType.DELETE, f, e), ops=trials, rng=rng
            )
        if kind in ("untrace", "all"):
            f, e = auditor_mod.pick_real_query(orch, rng)
            report.untrace_stats = auditor_mod.audit_untraceability(
                orch, Query(QueryType.SELECT, f, e), trials=trials
            )
        if kind in ("isolation", "all"):
            if kind == "isolation" and not orch.log:
                auditor_mod.fuzz_workload(orch, ops=min(trials * 5, 200), rng=rng)
            report.isolation_violations = orch.isolation_audit()
        for line in report.lines():
            click.echo(line)
        if out_path:
            Path(out_path).write_text("\n".join(report.jsonl()) + "\n")
        bad = (
            any(not v["uniform"] for v in report.size_uniform.values())
            or report.forward_ok is False
            or report.backward_ok is False
            or bool(report.isolation_violations)
        )
        if bad:
            raise ProtocolError("one or more audits failed")

    _run(body)


@main.command()
@click.option("--store-dir", required=True, type=click.Path())
@click.option("--key-file", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
def compact(store_dir, key_file, seed):
    """Trim removable dummy rows and rebuild the stores (admin operation)."""

    def body():
        keys = _keys(key_file)
        edb, ndb, gdb, params, field_names = store_mod.load_stores(store_dir)
        new_edb, new_ndb, new_gdb, removed = admin_mod.compact(
            edb, ndb, gdb, keys, params, rng=_seeded(seed)
        )
        store_mod.save_stores(store_dir, new_edb, new_ndb, new_gdb, params, field_names)
        click.echo(
            "compacted: removed %d record(s), %d remain" % (removed, len(new_edb))
        )

    _run(body)


@main.command()
@click.option("--store-dir", required=True, type=click.Path())
@click.option("--key-file", type=click.Path(), default=None)
def stats(store_dir, key_file):
    """Print store statistics (needs keys: reads group metadata and flags)."""

    def body():
        keys = _keys(key_file)
        edb, ndb, gdb, params, field_names = store_mod.load_stores(store_dir)
        rows = admin_mod.decrypt_store(edb, ndb, keys, params)
        real = sum(1 for r in rows if r.flag)
        click.echo("records: %d (%d real, %d dummy)" % (len(rows), real, len(rows) - real))
        click.echo("groups: %d" % len(gdb))
        header = "%-8s %-10s %-10s %-6s %-6s" % ("field", "group", "|IL|", "|E|", "tau")
        click.echo(header)
        for (f, gid), entry in sorted(gdb.items()):
            meta = open_meta(keys, entry.meta_ct, params)
            name = field_names[f - 1] if field_names else str(f)
            click.echo(
                "%-8s %-10d %-10d %-6d %-6d"
                % (name, gid, len(entry.il), len(meta.elements), meta.threshold)
            )

    _run(body)


if __name__ == "__main__":
    main()
