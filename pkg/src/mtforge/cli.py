"""Command-line interface binding the pipeline stages.

Exit codes: 0 success, 1 data error, 2 configuration error. Progress and
statistics go to stderr as machine-parseable `key=value` lines; artifacts
go to files or stdout. Flags override `--config` values, which override
the built-in defaults. Stochastic stages require an explicit --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from mtforge import checkpoint as ckpt
from mtforge import config as cfg_mod
from mtforge import filtering, metrics, mining, moe, ngram_lm, postprocess, rerank, sharding, subword
from mtforge.errors import ConfigError, DataError, MtforgeError
from mtforge.records import SentenceRecord, read_pairs, write_pairs
from mtforge.selection import (
    MODE_IN_DOMAIN,
    MODE_LITERAL,
    SelectionConfig,
    SelectionStats,
    select,
)


def _log(**kv: Any) -> None:
    print(" ".join(f"{k}={v}" for k, v in kv.items()), file=sys.stderr)


def _open_in(path: Optional[str]):
    return open(path, encoding="utf-8") if path else sys.stdin


def _open_out(path: Optional[str]):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _closing(fp, path: Optional[str]):
    if path:
        fp.close()


def _pick(flag: Any, cfg: Dict[str, Dict[str, Any]], section: str, key: str) -> Any:
    """Flag value if given, else (possibly config-file-overridden) default."""
    if flag is not None:
        return flag
    value = cfg[section][key]
    if value is None:
        raise ConfigError("missing_config_value", f"{section}.{key} must be set")
    return value


# --- stages -----------------------------------------------------------------


def cmd_config_dump(args, cfg) -> int:
    sys.stdout.write(cfg_mod.dump_config(cfg))
    return 0


def cmd_filter(args, cfg) -> int:
    max_len = int(_pick(args.max_len, cfg, "filter", "max_len"))
    max_ratio = float(_pick(args.max_ratio, cfg, "filter", "max_ratio"))
    no_lid = set(args.no_lid or [])
    model = filtering.load_lid(args.lid_model) if args.lid_model else None
    check_src = args.expected_src not in no_lid and model is not None
    check_tgt = args.expected_tgt not in no_lid and model is not None
    for expected, enabled in ((args.expected_src, check_src), (args.expected_tgt, check_tgt)):
        if enabled and expected not in model.log_priors:
            raise ConfigError("unknown_lid_class", f"{expected!r} not in LID model classes")

    kept = total = 0
    fin = _open_in(args.pairs)
    fout = _open_out(args.out)
    try:
        def normalized():
            for pair in read_pairs(fin, args.expected_src, args.expected_tgt):
                yield type(pair)(
                    src=SentenceRecord(
                        filtering.normalize_punct(pair.src.text),
                        pair.src.lang, pair.src.origin, pair.src.line_no,
                    ),
                    tgt=SentenceRecord(
                        filtering.normalize_punct(pair.tgt.text),
                        pair.tgt.lang, pair.tgt.origin, pair.tgt.line_no,
                    ),
                    score=pair.score,
                )

        def lid_pass(pairs):
            nonlocal total
            for pair in pairs:
                total += 1
                if check_src and filtering.lid_predict(model, pair.src.text) != args.expected_src:
                    continue
                if check_tgt and filtering.lid_predict(model, pair.tgt.text) != args.expected_tgt:
                    continue
                yield pair

        survivors = filtering.length_ratio_filter(lid_pass(normalized()), max_len, max_ratio)
        kept = write_pairs(fout, survivors)
    finally:
        _closing(fin, args.pairs)
        _closing(fout, args.out)
    _log(stage="filter", total=total, kept=kept)
    return 0


def cmd_lid_train(args, cfg) -> int:
    alpha = float(_pick(args.alpha, cfg, "filter", "lid_alpha"))
    records = []
    fin = _open_in(args.infile)
    try:
        for i, line in enumerate(fin):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise DataError("bad_tsv_row", f"line {i + 1}: expected `text<TAB>lang`")
            records.append(SentenceRecord(text=parts[0], lang=parts[1], line_no=i))
    finally:
        _closing(fin, args.infile)
    model = filtering.lid_train(records, alpha=alpha)
    filtering.save_lid(model, args.out)
    _log(stage="lid-train", classes=len(model.log_priors), records=len(records))
    return 0


def cmd_lm_train(args, cfg) -> int:
    order = int(_pick(args.order, cfg, "lm", "order"))
    discount = float(_pick(args.discount, cfg, "lm", "discount"))
    fin = _open_in(args.infile)
    try:
        records = (
            SentenceRecord(text=line.rstrip("\n"), lang=args.lang, line_no=i)
            for i, line in enumerate(fin)
        )
        model = ngram_lm.lm_train(records, order=order, discount=discount)
    finally:
        _closing(fin, args.infile)
    ngram_lm.save_lm(model, args.out)
    _log(stage="lm-train", order=order, vocab=len(model.vocab))
    return 0


def cmd_select(args, cfg) -> int:
    threshold = float(_pick(args.threshold, cfg, "select", "threshold"))
    literal = args.literal_paper_inequality or cfg["select"]["literal_paper_inequality"]
    selection = SelectionConfig(
        in_domain_lm=ngram_lm.load_lm(args.news_lm),
        general_lm=ngram_lm.load_lm(args.gen_lm),
        threshold=threshold,
        mode=MODE_LITERAL if literal else MODE_IN_DOMAIN,
    )
    stats = SelectionStats()
    fin = _open_in(args.infile)
    fout = _open_out(args.out)
    try:
        lines = (line.rstrip("\n") for line in fin)
        for line in select(selection, lines, stats=stats):
            fout.write(line + "\n")
    finally:
        _closing(fin, args.infile)
        _closing(fout, args.out)
    if stats.total == 0:
        raise DataError("empty_corpus", "selection input is empty")
    _log(selected=stats.selected, total=stats.total, frac=f"{stats.frac:.6f}")
    return 0


def cmd_spm_train(args, cfg) -> int:
    temperature = float(_pick(args.temperature, cfg, "subword", "temperature"))
    vocab_size = int(_pick(args.vocab, cfg, "subword", "vocab_size"))
    marker = cfg["subword"]["marker"]
    with open(args.sizes, encoding="utf-8") as fp:
        paths = json.load(fp)
    if not isinstance(paths, dict) or not all(isinstance(v, str) for v in paths.values()):
        raise ConfigError("bad_sizes_file", "expected {lang: corpus path}")
    corpora = {}
    sizes = {}
    for lang, path in sorted(paths.items()):
        with open(path, encoding="utf-8") as fp:
            corpora[lang] = [line.rstrip("\n") for line in fp]
        sizes[lang] = len(corpora[lang])
        if sizes[lang] == 0:
            raise DataError("empty_language_corpus", f"{lang}: {path} is empty")
    plan = subword.SamplingPlan(sizes=sizes, temperature=temperature)
    sample = subword.sample_corpus(corpora, plan, budget=args.budget, seed=args.seed)
    model = subword.bpe_learn(sample, vocab_size=vocab_size, marker=marker)
    subword.save_subword(model, args.out)
    _log(stage="spm-train", merges=len(model.merges), vocab=len(model.vocab))
    return 0


def cmd_spm_encode(args, cfg) -> int:
    model = subword.load_subword(args.model)
    fin = _open_in(args.infile)
    fout = _open_out(args.out)
    try:
        for line in fin:
            ids = subword.encode(model, line.rstrip("\n"))
            fout.write(" ".join(str(i) for i in ids) + "\n")
    finally:
        _closing(fin, args.infile)
        _closing(fout, args.out)
    return 0


def cmd_spm_decode(args, cfg) -> int:
    model = subword.load_subword(args.model)
    fin = _open_in(args.infile)
    fout = _open_out(args.out)
    try:
        for line in fin:
            ids = [int(tok) for tok in line.split()]
            fout.write(subword.decode(model, ids) + "\n")
    finally:
        _closing(fin, args.infile)
        _closing(fout, args.out)
    return 0


def cmd_mine(args, cfg) -> int:
    k = int(_pick(args.k, cfg, "mine", "k"))
    threshold = float(_pick(args.threshold, cfg, "mine", "threshold"))
    src = mining.load_embeddings(args.src, normalize=args.normalize)
    tgt = mining.load_embeddings(args.tgt, normalize=args.normalize)
    pairs = mining.mine_pairs(src, tgt, k=k, threshold=threshold, workers=args.workers)
    fout = _open_out(args.out)
    try:
        for p in pairs:
            fout.write(f"{p.src_id}\t{p.tgt_id}\t{p.margin!r}\n")
    finally:
        _closing(fout, args.out)
    _log(stage="mine", candidates_src=src.n, candidates_tgt=tgt.n, mined=len(pairs))
    return 0


def cmd_shard_plan(args, cfg) -> int:
    with open(args.sizes, encoding="utf-8") as fp:
        sizes = json.load(fp)
    if not isinstance(sizes, dict) or not all(isinstance(v, int) for v in sizes.values()):
        raise ConfigError("bad_sizes_file", "expected {corpus: line count}")
    base = _pick(args.base, cfg, "shard", "base")
    plan = sharding.plan_shards(sizes, base_corpus=base)
    if args.out:
        sharding.save_plan(plan, args.out)
    else:
        doc = {name: {"lines": cs.lines, "shards": cs.shards} for name, cs in plan.corpora.items()}
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _log(stage="shard-plan", corpora=len(plan.corpora))
    return 0


def cmd_shard_write(args, cfg) -> int:
    if args.plan:
        plan = sharding.load_plan(args.plan)
        if args.name not in plan.corpora:
            raise ConfigError("unknown_corpus", f"{args.name!r} not in plan")
        s = plan.corpora[args.name].shards
    else:
        if args.shards is None:
            raise ConfigError("missing_shards", "need --shards or --plan")
        s = args.shards
    fin = _open_in(args.infile)
    try:
        paths = sharding.write_shards(fin, s, args.out_dir, args.name)
    finally:
        _closing(fin, args.infile)
    _log(stage="shard-write", shards=len(paths))
    return 0


def cmd_epoch_manifest(args, cfg) -> int:
    plan = sharding.load_plan(args.plan)
    manifest = sharding.epoch_manifest(plan, args.epoch)
    sys.stdout.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_moe_route(args, cfg) -> int:
    num_experts = int(_pick(args.experts, cfg, "moe", "num_experts"))
    capacity_factor = float(_pick(args.capacity_factor, cfg, "moe", "capacity_factor"))
    gate_loss_weight = float(_pick(args.gate_loss_weight, cfg, "moe", "gate_loss_weight"))
    router = moe.RouterConfig(
        num_experts=num_experts,
        capacity_factor=capacity_factor,
        gate_loss_weight=gate_loss_weight,
    )
    fin = _open_in(args.logits)
    try:
        rows = [[float(x) for x in line.split()] for line in fin if line.strip()]
    finally:
        _closing(fin, args.logits)
    if not rows:
        raise DataError("empty_logits", "no logit rows")
    result = moe.route(np.asarray(rows, dtype=np.float64), router)
    fout = _open_out(args.out)
    try:
        for t, chosen in enumerate(result.assignments):
            if not chosen:
                fout.write(f"{t}\t-1\t0.0\n")
            for e, w in chosen:
                fout.write(f"{t}\t{e}\t{w!r}\n")
    finally:
        _closing(fout, args.out)
    _log(
        stage="moe-route",
        tokens=len(result.assignments),
        capacity=result.capacity,
        dropped=int(result.dropped.sum()),
        aux_loss=f"{result.aux_loss!r}",
        weighted_aux_loss=f"{gate_loss_weight * result.aux_loss!r}",
    )
    return 0


def cmd_ckpt_avg(args, cfg) -> int:
    last = int(_pick(args.last, cfg, "ckpt", "avg_last"))
    selected = ckpt.last_k(args.checkpoints, last)
    bundles = [ckpt.load_bundle(p) for p in selected]
    ckpt.save_bundle(ckpt.average(bundles), args.out)
    _log(stage="ckpt-avg", averaged=len(bundles), out=args.out)
    return 0


def cmd_rerank(args, cfg) -> int:
    with open(args.weights, encoding="utf-8") as fp:
        doc = json.load(fp)
    try:
        weights = rerank.RerankWeights(
            lambda1=float(doc["lambda1"]),
            lambda2=float(doc["lambda2"]),
            length_penalty=float(doc["length_penalty"]),
        )
    except (KeyError, TypeError, ValueError):
        raise ConfigError("bad_weights_file", "expected {lambda1, lambda2, length_penalty}")
    fin = _open_in(args.nbest)
    try:
        nbest = rerank.read_nbest(fin)
    finally:
        _closing(fin, args.nbest)
    fout = _open_out(args.out)
    try:
        for text in rerank.rerank(nbest, weights):
            fout.write(text + "\n")
    finally:
        _closing(fout, args.out)
    _log(stage="rerank", segments=len(nbest.segments))
    return 0


def cmd_rerank_tune(args, cfg) -> int:
    trials = int(_pick(args.trials, cfg, "rerank", "tune_trials"))
    if args.bounds is not None:
        try:
            lo, hi = (float(x) for x in args.bounds.split(":"))
        except ValueError:
            raise ConfigError("bad_bounds", "expected --bounds lo:hi")
    else:
        lo, hi = (float(x) for x in cfg["rerank"]["tune_bounds"])
    fin = _open_in(args.nbest)
    try:
        nbest = rerank.read_nbest(fin)
    finally:
        _closing(fin, args.nbest)
    with open(args.refs, encoding="utf-8") as fp:
        refs = [line.rstrip("\n") for line in fp]
    weights, bleu = rerank.tune(
        nbest, refs, trials=trials, bounds=(lo, hi), seed=args.seed, workers=args.workers
    )
    doc = {
        "lambda1": weights.lambda1,
        "lambda2": weights.lambda2,
        "length_penalty": weights.length_penalty,
    }
    out = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out_weights:
        with open(args.out_weights, "w", encoding="utf-8") as fp:
            fp.write(out)
    else:
        sys.stdout.write(out)
    _log(
        stage="rerank-tune",
        trials=trials,
        bleu=f"{bleu:.4f}",
        lambda1=f"{weights.lambda1!r}",
        lambda2=f"{weights.lambda2!r}",
        length_penalty=f"{weights.length_penalty!r}",
    )
    return 0


def cmd_bleu(args, cfg) -> int:
    scheme = _pick(args.tokenize, cfg, "bleu", "tokenize")
    with open(args.hyp, encoding="utf-8") as fp:
        hyps = [line.rstrip("\n") for line in fp]
    with open(args.ref, encoding="utf-8") as fp:
        refs = [line.rstrip("\n") for line in fp]
    if len(hyps) != len(refs):
        raise DataError("length_mismatch", "hypothesis/reference line counts differ")
    if not hyps:
        raise DataError("empty_corpus", "no segments to score")
    value = metrics.corpus_bleu_from_texts(hyps, refs, scheme=scheme)
    sys.stdout.write(f"BLEU = {value:.2f}\n")
    return 0


def cmd_postprocess(args, cfg) -> int:
    lang = _pick(args.lang, cfg, "postprocess", "lang")
    if args.print_table:
        for src, dst in postprocess.dump_table(lang):
            sys.stdout.write(f"{src}\t{dst}\n")
        return 0
    fin = _open_in(args.infile)
    fout = _open_out(args.out)
    try:
        for line in fin:
            fout.write(postprocess.postprocess(line.rstrip("\n"), lang) + "\n")
    finally:
        _closing(fin, args.infile)
        _closing(fout, args.out)
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtforge", description=__doc__)
    parser.add_argument("--config", help="pipeline config JSON; flags override it")
    parser.add_argument("--workers", type=int, default=1, help="parallel workers (output-invariant)")
    sub = parser.add_subparsers(dest="stage", required=True)

    p = sub.add_parser("config-dump", help="print the effective configuration")
    p.set_defaults(func=cmd_config_dump)

    p = sub.add_parser("filter", help="normalize and filter parallel data")
    p.add_argument("--pairs", help="input TSV (default stdin)")
    p.add_argument("--out", help="output TSV (default stdout)")
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--max-ratio", type=float, dest="max_ratio")
    p.add_argument("--lid-model", dest="lid_model")
    p.add_argument("--expected-src", required=True, dest="expected_src")
    p.add_argument("--expected-tgt", required=True, dest="expected_tgt")
    p.add_argument("--no-lid", action="append", dest="no_lid", metavar="LANG",
                   help="bypass language ID for this language (repeatable)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("lid-train", help="train the character n-gram language identifier")
    p.add_argument("--in", dest="infile", help="labeled TSV: text<TAB>lang (default stdin)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lid_train)

    p = sub.add_parser("lm-train", help="train a Kneser-Ney n-gram language model")
    p.add_argument("--in", dest="infile", help="one sentence per line (default stdin)")
    p.add_argument("--lang", default="")
    p.add_argument("--order", type=int)
    p.add_argument("--discount", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lm_train)

    p = sub.add_parser("select", help="cross-entropy-difference data selection")
    p.add_argument("--in", dest="infile", help="general-domain text (default stdin)")
    p.add_argument("--out", help="selected text (default stdout)")
    p.add_argument("--news-lm", required=True, dest="news_lm")
    p.add_argument("--gen-lm", required=True, dest="gen_lm")
    p.add_argument("--threshold", type=float)
    p.add_argument("--literal-paper-inequality", action="store_true",
                   dest="literal_paper_inequality",
                   help="keep sentences with score > threshold instead of < -threshold")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("spm-train", help="learn a shared subword vocabulary")
    p.add_argument("--sizes", required=True, help="JSON {lang: corpus path}")
    p.add_argument("--T", type=float, dest="temperature")
    p.add_argument("--vocab", type=int)
    p.add_argument("--budget", type=int, required=True, help="sampled line count")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spm_train)

    p = sub.add_parser("spm-encode", help="encode text to subword ids")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spm_encode)

    p = sub.add_parser("spm-decode", help="decode subword ids to text")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.set_defaults(func=cmd_spm_decode)

    p = sub.add_parser("mine", help="margin-based bitext mining over embeddings")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--normalize", action="store_true", help="accept non-unit rows")
    p.add_argument("--out", help="pairs TSV (default stdout)")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("shard-plan", help="compute per-corpus shard counts")
    p.add_argument("--sizes", required=True, help="JSON {corpus: line count}")
    p.add_argument("--base")
    p.add_argument("--out", help="plan JSON (default stdout)")
    p.set_defaults(func=cmd_shard_plan)

    p = sub.add_parser("shard-write", help="split a corpus into round-robin shards")
    p.add_argument("--in", dest="infile")
    p.add_argument("--name", required=True, help="corpus name for shard files")
    p.add_argument("--shards", type=int)
    p.add_argument("--plan", help="take the shard count from this plan JSON")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.set_defaults(func=cmd_shard_write)

    p = sub.add_parser("epoch-manifest", help="shard index per corpus for an epoch")
    p.add_argument("--plan", required=True)
    p.add_argument("--epoch", type=int, required=True)
    p.set_defaults(func=cmd_epoch_manifest)

    p = sub.add_parser("moe-route", help="top-2 expert routing over a logits matrix")
    p.add_argument("--logits", help="whitespace TSV, one token per row (default stdin)")
    p.add_argument("--experts", type=int)
    p.add_argument("--capacity-factor", type=float, dest="capacity_factor")
    p.add_argument("--gate-loss-weight", type=float, dest="gate_loss_weight")
    p.add_argument("--out", help="assignment TSV: token, expert, weight (default stdout)")
    p.set_defaults(func=cmd_moe_route)

    p = sub.add_parser("ckpt-avg", help="average checkpoint tensors")
    p.add_argument("checkpoints", nargs="+")
    p.add_argument("--last", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ckpt_avg)

    p = sub.add_parser("rerank", help="pick the best hypothesis per segment")
    p.add_argument("--nbest", help="n-best file (default stdin)")
    p.add_argument("--weights", required=True, help="JSON weights file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("rerank-tune", help="random-search reranking weights")
    p.add_argument("--nbest", help="n-best file (default stdin)")
    p.add_argument("--refs", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--bounds", help="lo:hi (default from config)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-weights", dest="out_weights")
    p.set_defaults(func=cmd_rerank_tune)

    p = sub.add_parser("bleu", help="corpus BLEU of hypotheses against references")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--tokenize", choices=list(metrics.TOKENIZE_SCHEMES))
    p.set_defaults(func=cmd_bleu)

    p = sub.add_parser("postprocess", help="language-specific punctuation normalization")
    p.add_argument("--lang")
    p.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.add_argument("--print-table", action="store_true", dest="print_table")
    p.set_defaults(func=cmd_postprocess)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = cfg_mod.load_config(args.config) if args.config else cfg_mod.default_config()
        return args.func(args, cfg)
    except MtforgeError as exc:
        _log(error=exc.slug)
        if str(exc) != exc.slug:
            print(f"mtforge: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
