"""Command-line entry point.

Subcommands mirror the pipeline stages: ``stats`` summarizes a corpus,
``link`` produces predictions plus a candidate dump, ``eval`` scores a
prediction file, ``iaa`` computes annotator agreement, and ``popularity``
reports popularity analyses. Reports embed the run metadata (config hash,
package version, score normalization mode) and figures are rendered next to
the delimited outputs.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

from . import __version__
from .corpus import CorpusError, compute_stats, parse_conllu
from .dynamics import DynamicsConfig
from .evalrep import (AgreementInput, error_breakdown, krippendorff_alpha,
                      plausibility_score, popularity_histogram,
                      popularity_preference, score, spearman_test)
from .kbstore import KBError, load_kb, read_embeddings
from .linker import iter_mentions, link_corpus, load_sense_inventory
from .nilpred import NilRule
from .retrieval import Candidate, CandidateSet, PHI_D, PHI_T
from . import plots

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


@dataclass
class RunConfig:
    corpus_path: str = ""
    entities_path: str = ""
    embeddings_path: str = ""
    mention_embeddings_path: str = ""
    taxonomy_path: str | None = None
    sense_inventory_path: str | None = None
    constraints: list[str] = field(default_factory=list)
    linker: str = "eld"
    nil: str = "none"  # none | KIND[:TAU] | logistic:WEIGHTS_PATH
    nil_in_candidates: bool = False
    k: int = 10
    tol: float = 1e-6
    max_iter: int = 1000
    init: str = "uniform"
    edge_threshold: float = 0.25
    nil_kappa: float = 0.5
    seed: int = 0
    jobs: int = 1
    trace: bool = False
    output_dir: str = "out"

    def validate(self) -> list[str]:
        problems = []
        for name in ("corpus_path", "entities_path", "embeddings_path",
                     "mention_embeddings_path"):
            value = getattr(self, name)
            if not value:
                problems.append(f"{name} is required")
            elif not Path(value).exists():
                problems.append(f"{name}: no such file: {value}")
        for name in ("taxonomy_path", "sense_inventory_path"):
            value = getattr(self, name)
            if value and not Path(value).exists():
                problems.append(f"{name}: no such file: {value}")
        if self.k < 1:
            problems.append(f"k must be >= 1, got {self.k}")
        if self.linker not in ("eld", "eld_static"):
            problems.append(f"linker must be eld or eld_static, "
                            f"got {self.linker!r}")
        bad = set(self.constraints) - {PHI_D, PHI_T}
        if bad:
            problems.append(f"unknown constraints {sorted(bad)}")
        if self.jobs < 1:
            problems.append(f"jobs must be >= 1, got {self.jobs}")
        try:
            self.nil_rule()
        except (ValueError, OSError) as exc:
            problems.append(f"nil: {exc}")
        return problems

    def nil_rule(self) -> NilRule | None:
        if self.nil in ("", "none"):
            return None
        kind, _, arg = self.nil.partition(":")
        if kind == "logistic":
            if not arg:
                raise ValueError("logistic rule needs a weights file: "
                                 "logistic:PATH")
            return NilRule.from_json(Path(arg).read_text(encoding="utf-8"))
        return NilRule(kind=kind, tau=float(arg) if arg else 0.0)

    def dynamics(self) -> DynamicsConfig:
        return DynamicsConfig(tol=self.tol, max_iter=self.max_iter,
                              init=self.init,
                              edge_threshold=self.edge_threshold,
                              nil_kappa=self.nil_kappa,
                              nil_in_candidates=self.nil_in_candidates)

    def hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _metadata(config: RunConfig | None, normalization: str | None = None,
              ) -> dict:
    meta = {"tool": "helix-el", "version": __version__}
    if config is not None:
        meta["config_hash"] = config.hash()
        meta["config"] = asdict(config)
    if normalization is not None:
        meta["score_normalization"] = normalization
    return meta


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _read_corpus(path: str):
    return parse_conllu(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------- stats

def _stats_text(stats) -> str:
    rows = [
        ("documents", stats.n_docs),
        ("sentences", stats.n_sentences),
        ("tokens", stats.n_tokens),
        ("tokens/sentence (avg)", stats.avg_tokens_per_sentence),
        ("mentions (all)", stats.n_mentions_all),
        ("mentions (unique)", stats.n_mentions_unique),
        ("NIL share (all)", f"{stats.nil_share_all:.3f}"),
        ("NIL share (unique)", f"{stats.nil_share_unique:.3f}"),
        ("noisy share", f"{stats.noisy_share:.3f}"),
    ]
    width = max(len(k) for k, _ in rows)
    lines = [f"{k:<{width}}  {v}" for k, v in rows]
    lines.append("")
    lines.append("type histogram (top 10):")
    top = sorted(stats.type_histogram.items(), key=lambda kv: -kv[1])[:10]
    lines.extend(f"  {t:<24} {n}" for t, n in top)
    return "\n".join(lines) + "\n"


def cmd_stats(args) -> int:
    docs = _read_corpus(args.corpus)
    stats = compute_stats(docs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"stats": stats.to_dict(), "meta": _metadata(None)}
    _write_json(out / "stats.json", payload)
    text = _stats_text(stats)
    (out / "stats.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


# ----------------------------------------------------------------- link

def cmd_link(args) -> int:
    config = _load_run_config(args)
    problems = config.validate()
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return USAGE_ERROR

    docs = _read_corpus(config.corpus_path)
    kb = load_kb(config.entities_path, config.embeddings_path,
                 config.taxonomy_path)
    mention_embeddings = read_embeddings(config.mention_embeddings_path)
    senses = None
    if config.sense_inventory_path:
        senses = load_sense_inventory(config.sense_inventory_path,
                                      kb.embeddings)
    trace: list | None = [] if config.trace else None
    results = link_corpus(
        docs, kb, mention_embeddings, k=config.k,
        constraints=set(config.constraints), linker=config.linker,
        dynamics_config=config.dynamics(), nil_rule=config.nil_rule(),
        senses=senses, jobs=config.jobs, trace=trace)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    normalization = "none" if kb.embeddings.norm_mode == "unit" else "minmax"
    with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for r in results:
            d = r.decision
            fh.write(json.dumps({
                "mention_id": d.mention_id,
                "predicted": d.predicted,
                "score": round(d.score, 9),
                "heuristic": d.heuristic,
                "filtered_count": d.filtered_count,
            }, sort_keys=True) + "\n")
    with open(out / "candidates.jsonl", "w", encoding="utf-8") as fh:
        for r in results:
            cs = r.candidate_set
            fh.write(json.dumps({
                "mention_id": cs.mention.mention_id,
                "k": cs.k,
                "candidates": [
                    {"qid": c.qid, "score": round(c.score, 9),
                     "filtered_by": c.filtered_by}
                    for c in cs.candidates],
            }, sort_keys=True) + "\n")
    _write_json(out / "run.json", {"meta": _metadata(config, normalization),
                                   "n_mentions": len(results)})
    if trace is not None:
        with open(out / "trace.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["game", "iteration", "max_delta"])
            writer.writerows(trace)
        plots.render_dynamics_trace(trace, out / "trace.png")
    print(f"linked {len(results)} mentions -> {out / 'predictions.jsonl'}")
    return 0


def _load_run_config(args) -> RunConfig:
    config = RunConfig()
    if args.config:
        obj = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(obj) - set(asdict(config))
        if unknown:
            raise KBError(f"config file: unknown keys {sorted(unknown)}")
        for key, value in obj.items():
            setattr(config, key, value)
    overrides = {
        "corpus_path": args.corpus, "entities_path": args.entities,
        "embeddings_path": args.embeddings,
        "mention_embeddings_path": args.mention_embeddings,
        "taxonomy_path": args.taxonomy,
        "sense_inventory_path": args.senses,
        "linker": args.linker.replace("-", "_") if args.linker else None,
        "nil": args.nil, "k": args.k, "seed": args.seed, "jobs": args.jobs,
        "output_dir": args.out, "init": args.init,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    if args.constraints is not None:
        config.constraints = [c for c in args.constraints.split(",") if c]
    if args.nil_in_candidates:
        config.nil_in_candidates = True
    if args.trace:
        config.trace = True
    return config


# ----------------------------------------------------------------- eval

def _read_predictions(path: str) -> dict[str, str]:
    predictions = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                predictions[obj["mention_id"]] = obj["predicted"]
            except KeyError as exc:
                raise KBError(f"predictions line {lineno}: missing {exc}"
                              ) from None
    return predictions


def _read_candidate_dump(path: str, mentions) -> dict[str, CandidateSet]:
    by_id = {m.mention_id: m for m in mentions}
    sets = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            mention = by_id.get(obj["mention_id"])
            if mention is None:
                raise KBError(f"candidate dump: unknown mention id "
                              f"{obj['mention_id']!r}")
            sets[obj["mention_id"]] = CandidateSet(
                mention=mention,
                candidates=tuple(Candidate(qid=c["qid"], score=c["score"],
                                           filtered_by=c.get("filtered_by"))
                                 for c in obj["candidates"]),
                k=obj.get("k", len(obj["candidates"])))
    return sets


def _eval_text(payload: dict) -> str:
    result = payload["result"]
    lines = [
        "linking evaluation",
        f"  precision {result['precision']:.4f}  recall "
        f"{result['recall']:.4f}  F1 {result['f1']:.4f}",
        f"  correct {result['n_correct']} / {result['n_total']}"
        f"  (missing {result['n_missing']})",
    ]
    plaus = payload.get("plausibility")
    if plaus:
        lines.append(f"  year  acc {plaus['year_acc']:.4f}  "
                     f"F1 {plaus['year_f1']:.4f}")
        lines.append(f"  type  acc {plaus['type_acc']:.4f}  "
                     f"F1 {plaus['type_f1']:.4f}")
    rows = payload.get("error_breakdown") or []
    if rows:
        lines.append("  errors (target / in-top-k / predicted):")
        for r in rows:
            topk = {True: "yes", False: "no", None: "-"}[r["target_in_topk"]]
            lines.append(f"    {r['target']:<4} {topk:<4} "
                         f"{r['predicted']:<4} {r['share']:.3f} "
                         f"({r['count']})")
    return "\n".join(lines) + "\n"


def cmd_eval(args) -> int:
    docs = _read_corpus(args.corpus)
    mentions = iter_mentions(docs)
    predictions = _read_predictions(args.predictions)
    kb = load_kb(args.entities, args.embeddings, args.taxonomy)
    result = score(predictions, mentions)
    year_acc, year_f1, type_acc, type_f1 = plausibility_score(
        predictions, mentions, kb)
    payload = {
        "result": result.to_dict(),
        "plausibility": {"year_acc": year_acc, "year_f1": year_f1,
                         "type_acc": type_acc, "type_f1": type_f1},
        "meta": _metadata(None),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.candidates:
        sets = _read_candidate_dump(args.candidates, mentions)
        breakdown = error_breakdown(predictions, mentions, sets,
                                    nil_in_candidates=args.nil_in_candidates)
        payload["error_breakdown"] = breakdown.rows()
        plots.render_error_breakdown(breakdown.rows(),
                                     out / "error_breakdown.png")
    _write_json(out / "report.json", payload)
    text = _eval_text(payload)
    (out / "report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


# ------------------------------------------------------------------ iaa

def _token_labels(docs, mode: str) -> list[str]:
    labels = []
    for doc in docs:
        for sentence in doc.sentences:
            for token in sentence.tokens:
                if mode == "nec":
                    labels.append(token.iob_tag)
                else:
                    labels.append(token.link or "_")
    return labels


def cmd_iaa(args) -> int:
    docs_a = _read_corpus(args.annotations_a)
    docs_b = _read_corpus(args.annotations_b)
    labels_a = _token_labels(docs_a, args.mode)
    labels_b = _token_labels(docs_b, args.mode)
    if len(labels_a) != len(labels_b):
        raise KBError(f"annotation token counts differ: {len(labels_a)} vs "
                      f"{len(labels_b)}")
    alpha = krippendorff_alpha(AgreementInput.from_pairs(labels_a, labels_b))
    payload = {"alpha": alpha, "n_items": len(labels_a), "mode": args.mode,
               "meta": _metadata(None)}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "iaa.json", payload)
    print(f"krippendorff alpha ({args.mode}): {alpha:.4f} "
          f"over {len(labels_a)} items")
    return 0


# ----------------------------------------------------------- popularity

def cmd_popularity(args) -> int:
    docs = _read_corpus(args.corpus)
    mentions = iter_mentions(docs)
    kb = load_kb(args.entities, args.embeddings, args.taxonomy)
    gold_links = [m.gold_link for m in mentions if not m.is_nil]
    rows = popularity_histogram(kb, gold_links)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "histogram.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count"])
        writer.writerows(rows)
    plots.render_popularity_histogram(rows, out / "histogram.png")
    payload: dict = {"bins": [list(r) for r in rows], "meta": _metadata(None)}
    if args.predictions:
        predictions = _read_predictions(args.predictions)
        scored = [m for m in mentions if not m.is_nil
                  and m.mention_id in predictions]
        pops = [float(kb.entities[m.gold_link].popularity)
                if m.gold_link in kb.entities else 0.0 for m in scored]
        correct = [1.0 if predictions[m.mention_id] == m.gold_link else 0.0
                   for m in scored]
        rho, p = (None, None)
        if len(scored) >= 3:
            rho, p = spearman_test(pops, correct)
        payload["spearman"] = {"rho": rho, "p_value": p,
                               "significant": bool(p is not None and p < 0.01)}
        payload["more_popular_chosen"] = popularity_preference(
            predictions, mentions, kb)
    _write_json(out / "popularity.json", payload)
    print(f"histogram bins: {len(rows)} -> {out / 'histogram.csv'}")
    if "spearman" in payload:
        rho = payload["spearman"]["rho"]
        print(f"spearman rho: {rho if rho is None else round(rho, 4)}  "
              f"more-popular-chosen: {payload['more_popular_chosen']:.4f}")
    return 0


# ----------------------------------------------------------------- main

def _build_parser() -> _Parser:
    parser = _Parser(prog="helix", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="corpus statistics report")
    p.add_argument("corpus")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("link", help="run the linking pipeline")
    p.add_argument("--config", help="JSON run configuration; flags override")
    p.add_argument("--corpus")
    p.add_argument("--entities")
    p.add_argument("--embeddings")
    p.add_argument("--mention-embeddings", dest="mention_embeddings")
    p.add_argument("--taxonomy")
    p.add_argument("--senses")
    p.add_argument("--constraints", help="comma list: phi_d,phi_t")
    p.add_argument("--nil", help="none | KIND[:TAU] | logistic:WEIGHTS")
    p.add_argument("--nil-in-candidates", action="store_true", default=False)
    p.add_argument("--linker", choices=["eld", "eld-static", "eld_static"])
    p.add_argument("--init", choices=["uniform", "prior"])
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--trace", action="store_true", default=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("eval", help="score a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--entities", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--taxonomy")
    p.add_argument("--candidates", help="candidate dump for error analysis")
    p.add_argument("--nil-in-candidates", action="store_true", default=False)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("iaa", help="inter-annotator agreement")
    p.add_argument("annotations_a")
    p.add_argument("annotations_b")
    p.add_argument("--mode", choices=["nec", "link"], default="nec")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_iaa)

    p = sub.add_parser("popularity", help="popularity histogram and "
                                          "correlation report")
    p.add_argument("--corpus", required=True)
    p.add_argument("--entities", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--taxonomy")
    p.add_argument("--predictions")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_popularity)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, KBError, OSError, json.JSONDecodeError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
