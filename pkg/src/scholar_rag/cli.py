"""Command-line entry points: ingest, query, serve, eval, selftest.

Results go to standard output; logs go to standard error. Exit codes:

    ingest   0 ok (per-record rejections included), 1 fatal parse/file error,
             2 embedder unreachable
    query    0 ok, 1 invalid request or corrupt state, 2 no index,
             3 generation requested but LLM unreachable, 4 embedder unreachable
    eval     0 ok, 1 fatal, 2 no index, 4 embedder unreachable
    selftest 0 all checks pass, 1 first failing check named in output
    serve    runs until interrupted

The --json flag switches each reporting subcommand to the same JSON the HTTP
service emits. --report-dir on query and eval writes CSV tables and rendered
PNG charts into the given directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import AppConfig, load_config
from .corpus import ParseFormatError, StorageError
from .engine import InvalidRequestError, NoIndexError, RagEngine, StageUnavailableError
from .index import CorruptIndexError
from .rag import BudgetExhaustedError
from .selfcheck import run_selfcheck

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_INDEX = 2
EXIT_INGEST_EMBEDDER_DOWN = 2
EXIT_LLM_DOWN = 3
EXIT_EMBEDDER_DOWN = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scholar-rag",
        description="Local retrieval-augmented collaborator recommendation over a publication corpus.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, default=None, help="TOML configuration file")
        p.add_argument("--data-dir", type=Path, default=None, help="override the data directory")

    p_ingest = sub.add_parser("ingest", help="parse a corpus file, embed new records, update the index")
    common(p_ingest)
    p_ingest.add_argument("--corpus", type=Path, required=True, help="JSONL or PubMed XML file")
    p_ingest.add_argument("--format", choices=["jsonl", "pubmed-xml"], default="jsonl")
    p_ingest.add_argument("--json", action="store_true", help="emit the ingest report as JSON")

    p_query = sub.add_parser("query", help="rank documents and aggregate collaborator recommendations")
    common(p_query)
    p_query.add_argument("--q", required=True, help="query text")
    p_query.add_argument("--k", type=int, default=None, help="number of documents to retrieve")
    p_query.add_argument("--generate", action="store_true", help="also call the configured LLM")
    p_query.add_argument("--json", action="store_true", help="emit the query response as JSON")
    p_query.add_argument("--report-dir", type=Path, default=None, help="write CSV tables and charts here")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    common(p_serve)
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)

    p_eval = sub.add_parser("eval", help="self-retrieval comparison: embedding vs keyword baseline")
    common(p_eval)
    p_eval.add_argument("--corpus", type=Path, default=None, help="optional corpus file to ingest first")
    p_eval.add_argument("--format", choices=["jsonl", "pubmed-xml"], default="jsonl")
    p_eval.add_argument("--json", action="store_true", help="emit the comparison as JSON")
    p_eval.add_argument("--report-dir", type=Path, default=None, help="write CSV tables and charts here")

    p_self = sub.add_parser("selftest", help="run the built-in invariant suite")
    common(p_self)
    p_self.add_argument("--index", type=Path, default=None, help="also validate this index file")
    p_self.add_argument("--json", action="store_true", help="emit check results as JSON")

    return parser


def _configure(args: argparse.Namespace) -> AppConfig:
    config = load_config(args.config)
    if getattr(args, "data_dir", None) is not None:
        config.data_dir = args.data_dir
    return config


def _engine(config: AppConfig) -> RagEngine:
    return RagEngine(config)


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _configure(args)
    try:
        data = args.corpus.read_bytes()
    except OSError as exc:
        print(f"cannot read corpus file: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        engine = _engine(config)
        outcome = engine.ingest(data, args.format)
    except ParseFormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except StageUnavailableError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INGEST_EMBEDDER_DOWN
    except (CorruptIndexError, StorageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    from .service import ingest_response_from_outcome

    resp = ingest_response_from_outcome(outcome)
    if args.json:
        print(resp.model_dump_json(indent=2))
    else:
        print(f"inserted: {resp.inserted}")
        print(f"replaced: {resp.replaced}")
        print(f"embedded: {resp.embedded}")
        print(f"rejected: {resp.rejected}")
        for rej in resp.rejections:
            print(f"  entry {rej.position}: {rej.reason}")
        print(f"index entries: {resp.index_count}")
        print(f"corpus revision: {resp.revision}")
    return EXIT_OK


def cmd_query(args: argparse.Namespace) -> int:
    config = _configure(args)
    try:
        engine = _engine(config)
        outcome = engine.query(args.q, args.k, args.generate)
    except NoIndexError as exc:
        print(f"no index: {exc}", file=sys.stderr)
        return EXIT_NO_INDEX
    except StageUnavailableError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_LLM_DOWN if exc.stage == "llm" else EXIT_EMBEDDER_DOWN
    except (InvalidRequestError, BudgetExhaustedError) as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (CorruptIndexError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    from .report import write_query_report
    from .service import query_response_from_outcome

    resp = query_response_from_outcome(outcome)
    if args.json:
        print(resp.model_dump_json(indent=2, exclude_none=True))
    else:
        print(f"query: {resp.query}")
        print(f"{'rank':<5} {'score':<10} {'pmid':<10} title")
        for doc in resp.documents:
            print(f"{doc.rank:<5} {doc.score:<10.7f} {doc.pmid:<10} {doc.title}")
        if resp.collaborators:
            print("collaborators:")
            for pos, rec in enumerate(resp.collaborators, start=1):
                docs = ", ".join(s.pmid for s in rec.supporting)
                topics = ", ".join(rec.topic_terms)
                print(f"{pos:>3}. {rec.display_name}  score {rec.aggregate_score:.7f}  docs [{docs}]  topics [{topics}]")
        if resp.generation is not None:
            print("generation:")
            print(resp.generation.raw_text)
    if args.report_dir is not None:
        paths = write_query_report(outcome, args.report_dir)
        for p in paths:
            print(f"wrote {p}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    config = _configure(args)
    if args.host is not None:
        config.listen_host = args.host
    if args.port is not None:
        config.listen_port = args.port
    from .service import run_server

    run_server(_engine(config))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = _configure(args)
    try:
        engine = _engine(config)
    except (CorruptIndexError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.corpus is not None:
        try:
            data = args.corpus.read_bytes()
            engine.ingest(data, args.format)
        except OSError as exc:
            print(f"cannot read corpus file: {exc}", file=sys.stderr)
            return EXIT_ERROR
        except ParseFormatError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        except StageUnavailableError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_EMBEDDER_DOWN
    try:
        outcome = engine.evaluate()
    except NoIndexError as exc:
        print(f"no index: {exc}", file=sys.stderr)
        return EXIT_NO_INDEX
    except StageUnavailableError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_EMBEDDER_DOWN

    from .report import write_eval_report
    from .service import eval_response_from_outcome

    resp = eval_response_from_outcome(outcome)
    if args.json:
        print(resp.model_dump_json(indent=2, exclude_none=True))
    else:
        print(f"documents: {resp.doc_count}")
        print(f"embedding  top-1 rate {resp.embedding_top1_rate:.7f}  mrr {resp.embedding_mrr:.7f}")
        print(f"keyword    top-1 rate {resp.keyword_top1_rate:.7f}  mrr {resp.keyword_mrr:.7f}")
        print(f"note: {resp.note}")
    if args.report_dir is not None:
        paths = write_eval_report(outcome, args.report_dir)
        for p in paths:
            print(f"wrote {p}", file=sys.stderr)
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    config = _configure(args)
    index_path = args.index
    if index_path is None and config.index_path.exists():
        index_path = config.index_path
    results = run_selfcheck(index_path)
    passed = all(r.ok for r in results)
    if args.json:
        print(
            json.dumps(
                {
                    "passed": passed,
                    "checks": [{"name": r.name, "ok": r.ok, "detail": r.detail} for r in results],
                },
                indent=2,
            )
        )
    else:
        for r in results:
            print(r.line())
        print("selftest: ok" if passed else "selftest: FAILED")
    return EXIT_OK if passed else EXIT_ERROR


_HANDLERS = {
    "ingest": cmd_ingest,
    "query": cmd_query,
    "serve": cmd_serve,
    "eval": cmd_eval,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return _HANDLERS[args.subcommand](args)


if __name__ == "__main__":
    sys.exit(main())
