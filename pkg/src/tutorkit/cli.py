"""Command line for the training/evaluation harness and the demo server.

Exit code 0 means every requested check passed (training converged, or the
evaluated accuracy met the threshold, or the replay matched).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import layout as layout_mod
from .evalsim import (
    DEFAULT_EVAL_SEED,
    DEFAULT_TRAIN_SEED,
    DOMAINS,
    FRACTION_ADD_SAME_DENOM,
    FRACTION_MULTIPLY,
    evaluate,
    generate,
    scripted_teacher,
    train,
    train_fraction,
)
from .htn import KnowledgeBase
from .session import TranscriptDocument, replay

TRAINABLE = DOMAINS + ("fraction",)  # "fraction" = multiplication then addition


def _write_agent(path: str, kb: KnowledgeBase) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(kb.to_json())


def _load_agent(path: str) -> KnowledgeBase:
    with open(path, "r", encoding="utf-8") as fh:
        return KnowledgeBase.from_json(fh.read())


def _report(doc: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(doc, indent=2, sort_keys=True))
        return
    for key, value in doc.items():
        if key == "per_problem":
            for i, row in enumerate(value):
                status = "solved" if row["solved"] else f"failed ({row['first_divergence']})"
                print(f"  problem {i + 1}: {status}")
        else:
            print(f"{key}: {value}")


def cmd_train(args) -> int:
    if args.domain == "fraction":
        session, (rm, ra) = train_fraction(args.seed, stop_after_consecutive=args.stop_after)
        converged = rm.converged and ra.converged
        doc = {
            "domain": args.domain,
            "seed": args.seed,
            "problems_used": rm.problems_used + ra.problems_used,
            "demonstrations": [r.demonstrations for r in rm.runs + ra.runs],
            "validation_problems": rm.validation_problems + ra.validation_problems,
            "converged": converged,
        }
    else:
        bias = args.bias == "numerator-one"
        problems = generate(args.domain, args.problems, args.seed, numerator_one_bias=bias)
        policy = scripted_teacher(args.domain)
        session, report = train(policy, problems, stop_after_consecutive=args.stop_after)
        converged = report.converged
        doc = {
            "domain": args.domain,
            "seed": args.seed,
            "problems_used": report.problems_used,
            "demonstrations": [r.demonstrations for r in report.runs],
            "validation_problems": report.validation_problems,
            "converged": converged,
        }
    if args.agent_file:
        _write_agent(args.agent_file, session.kb)
        doc["agent_file"] = args.agent_file
    if args.transcript_file:
        with open(args.transcript_file, "w", encoding="utf-8") as fh:
            fh.write(session.transcript().to_jsonl())
        doc["transcript_file"] = args.transcript_file
    _report(doc, args.report)
    return 0 if converged else 1


def cmd_evaluate(args) -> int:
    kb = _load_agent(args.agent_file)
    if args.domain == "fraction":
        problems = generate(FRACTION_MULTIPLY, args.problems, args.seed) + generate(
            FRACTION_ADD_SAME_DENOM, args.problems, args.seed
        )
    else:
        problems = generate(args.domain, args.problems, args.seed)
    tree = layout_mod.from_doc(json.load(open(args.layout_file))) if args.layout_file else None
    report = evaluate(kb, problems, layout=tree)
    _report(report.to_doc(), args.report)
    return 0 if report.accuracy >= args.min_accuracy else 1


def cmd_replay(args) -> int:
    with open(args.transcript_file, "r", encoding="utf-8") as fh:
        doc = TranscriptDocument.from_jsonl(fh.read())
    session = replay(doc, verify_agent=not args.no_verify)
    rebuilt = session.kb.to_json()
    if args.agent_file:
        with open(args.agent_file, "w", encoding="utf-8") as fh:
            fh.write(rebuilt)
    if args.expect_agent:
        expected = open(args.expect_agent, "r", encoding="utf-8").read()
        if expected != rebuilt:
            print("replayed agent differs from the expected serialization")
            return 1
        print("replayed agent matches the expected serialization")
    else:
        print(f"replayed {len(doc.events)} events; agent has "
              f"{sum(len(b) for b in session.kb.tasks.values())} methods")
    return 0


def cmd_demo_server(args) -> int:
    import os

    from .service import DATA_DIR_ENV, main as serve

    if args.data_dir:
        os.environ[DATA_DIR_ENV] = args.data_dir
    serve()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tutorkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train an agent with the scripted teacher")
    p_train.add_argument("--domain", choices=TRAINABLE, required=True)
    p_train.add_argument("--seed", type=int, default=DEFAULT_TRAIN_SEED)
    p_train.add_argument("--problems", type=int, default=12)
    p_train.add_argument("--stop-after", type=int, default=2,
                         help="stop after this many consecutive fully-agent-solved problems")
    p_train.add_argument("--bias", choices=["numerator-one"], default=None)
    p_train.add_argument("--agent-file", default=None)
    p_train.add_argument("--transcript-file", default=None)
    p_train.add_argument("--report", choices=["text", "json"], default="text")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("evaluate", help="measure model correctness on generated problems")
    p_eval.add_argument("--domain", choices=TRAINABLE, required=True)
    p_eval.add_argument("--seed", type=int, default=DEFAULT_EVAL_SEED)
    p_eval.add_argument("--problems", type=int, default=10)
    p_eval.add_argument("--agent-file", required=True)
    p_eval.add_argument("--layout-file", default=None)
    p_eval.add_argument("--min-accuracy", type=float, default=1.0)
    p_eval.add_argument("--report", choices=["text", "json"], default="text")
    p_eval.set_defaults(fn=cmd_evaluate)

    p_replay = sub.add_parser("replay", help="rebuild an agent from a transcript")
    p_replay.add_argument("--transcript-file", required=True)
    p_replay.add_argument("--agent-file", default=None)
    p_replay.add_argument("--expect-agent", default=None)
    p_replay.add_argument("--no-verify", action="store_true",
                          help="skip checking recorded agent messages against recomputed ones")
    p_replay.set_defaults(fn=cmd_replay)

    p_server = sub.add_parser("demo-server", help="run the HTTP service")
    p_server.add_argument("--data-dir", default=None)
    p_server.set_defaults(fn=cmd_demo_server)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
