"""Command-line pipeline: build sub-vocabularies, trim models, decode,
evaluate output drift, benchmark, and print footprint tables.

All artifacts are files named by flags; every command also prints a
human-readable summary. Commands are deterministic given their inputs
and seed, wall-clock fields aside.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import bench as bench_mod
from . import bpe, metrics, subvocab, toylm
from .errors import VtError


def _read_prompts(path: str) -> list[tuple[int, str]]:
    """JSON Lines, one {"id": int, "text": str} per line."""
    prompts = []
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    prompts.append((int(record["id"]), str(record["text"])))
                except (KeyError, TypeError, ValueError) as e:
                    raise VtError(f"{path}:{lineno}: malformed prompt record: {e}") from e
    except FileNotFoundError:
        raise VtError(f"prompts file not found: {path}") from None
    return prompts


def _read_outputs(path: str) -> list[tuple[int, list[int], str]]:
    """JSON Lines, one {"id": int, "output_ids": [int], "text": str} per line."""
    outputs = []
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    outputs.append(
                        (
                            int(record["id"]),
                            [int(i) for i in record["output_ids"]],
                            str(record["text"]),
                        )
                    )
                except (KeyError, TypeError, ValueError) as e:
                    raise VtError(f"{path}:{lineno}: malformed output record: {e}") from e
    except FileNotFoundError:
        raise VtError(f"outputs file not found: {path}") from None
    return outputs


def _ids_to_text(ids: list[int], vocab: bpe.Vocabulary) -> str:
    # Random toy models can emit byte tokens that do not form valid UTF-8.
    # surrogateescape keeps the text field lossless (distinct byte
    # sequences stay distinct), so exact-match comparisons remain exact.
    return bpe.decode_bytes(ids, vocab).decode("utf-8", "surrogateescape")


def _encode_prompts(
    prompts: list[tuple[int, str]], vocab: bpe.Vocabulary, merges: bpe.Merges
) -> list[list[int]]:
    encoded = []
    for prompt_id, text in prompts:
        try:
            encoded.append(bpe.encode(text, vocab, merges))
        except VtError as e:
            raise VtError(f"prompt {prompt_id}: {e}") from e
    return encoded


def _int_list(raw: str) -> list[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise VtError(f"expected comma-separated integers, got {raw!r}") from None


def cmd_init_model(args: argparse.Namespace) -> int:
    config = toylm.ModelConfig(
        vocab_size=args.vocab_size,
        hidden=args.hidden,
        layers=args.layers,
        heads=args.heads,
        max_context=args.max_context,
        tied_embeddings=not args.untied,
    )
    model = toylm.init_random(config, args.seed)
    toylm.save_model(args.out, model)
    vocab_params, total_params = toylm.count_params(config)
    print(f"wrote {args.out}")
    print(f"params: {total_params} total, {vocab_params} in vocabulary matrices "
          f"({100.0 * vocab_params / total_params:.1f}%)")
    return 0


def cmd_build(args: argparse.Namespace) -> int:
    vocab, merges = bpe.load_vocab(args.vocab, args.merges)

    if args.method == "unicode":
        if args.script_spec:
            spec = subvocab.ScriptSpec.from_json_file(args.script_spec)
        elif args.lang:
            if args.lang not in subvocab.PRESETS:
                raise VtError(
                    f"no preset for language {args.lang!r}; "
                    f"available: {', '.join(sorted(subvocab.PRESETS))}"
                )
            spec = subvocab.PRESETS[args.lang]
        else:
            raise VtError("method 'unicode' needs --lang or --script-spec")
        sub = subvocab.script_filter(vocab, spec, base_k=args.base_k)
    elif args.method == "corpus":
        if not args.corpus:
            raise VtError("method 'corpus' needs --corpus")
        with open(args.corpus, encoding="utf-8") as f:
            sub = subvocab.corpus_select(vocab, merges, f, base_k=args.base_k)
    else:  # oracle
        if not args.outputs:
            raise VtError("method 'oracle' needs --outputs (a full-vocabulary decode)")
        records = _read_outputs(args.outputs)
        sub = subvocab.oracle_select(
            [ids for _, ids, _ in records], base_k=args.base_k, vocab_size=vocab.size
        )

    include_inputs = args.include_inputs
    if include_inputs is None:
        # Unicode/corpus runs fold prompt tokens in by default; the oracle
        # set stays outputs-only unless asked.
        include_inputs = args.method != "oracle" and args.prompts is not None
    if include_inputs:
        if not args.prompts:
            raise VtError("--include-inputs needs --prompts")
        prompt_ids = _encode_prompts(_read_prompts(args.prompts), vocab, merges)
        sub = subvocab.with_input_tokens(sub, prompt_ids)

    subvocab.save_subvocab(sub, args.out)
    reduction = 100.0 * (1.0 - sub.size / vocab.size) if vocab.size else 0.0
    print(f"|V|  = {vocab.size}")
    print(f"|V'| = {sub.size}")
    print(f"reduction = {reduction:.1f}%")
    print(f"wrote {args.out}")
    return 0


def cmd_trim(args: argparse.Namespace) -> int:
    model = toylm.load_model(args.model)
    sub = subvocab.load_subvocab(args.sub)
    trimmed = toylm.trim_model(model, sub)
    toylm.save_model(args.out, trimmed)
    print(f"trimmed |V| {model.config.vocab_size} -> {trimmed.config.vocab_size}")
    print(f"wrote {args.out}")
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    vocab, merges = bpe.load_vocab(args.vocab, args.merges)
    model = toylm.load_model(args.model)
    sub = subvocab.load_subvocab(args.sub) if args.sub else None
    prompts = _read_prompts(args.prompts)
    encoded = _encode_prompts(prompts, vocab, merges)
    with open(args.out, "w", encoding="utf-8") as f:
        for (prompt_id, _), prompt_ids in zip(prompts, encoded):
            try:
                result = toylm.greedy_decode(
                    model, prompt_ids, args.max_new, args.eos, sub=sub
                )
            except VtError as e:
                raise VtError(f"prompt {prompt_id}: {e}") from e
            generated = result.ids[len(prompt_ids):]
            record = {
                "id": prompt_id,
                "output_ids": generated,
                "text": _ids_to_text(generated, vocab),
            }
            f.write(json.dumps(record) + "\n")
    print(f"decoded {len(prompts)} prompts -> {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    full = _read_outputs(args.full)
    vt = _read_outputs(args.vt)
    if len(full) != len(vt):
        raise VtError(f"output files differ in length: {len(full)} vs {len(vt)}")
    for (fid, _, _), (vid, _, _) in zip(full, vt):
        if fid != vid:
            raise VtError(f"misaligned ids: {fid} vs {vid}")
    full_texts = [text for _, _, text in full]
    vt_texts = [text for _, _, text in vt]

    subvocab_size = None
    memory_gib = None
    if args.sub:
        sub = subvocab.load_subvocab(args.sub)
        subvocab_size = sub.size
        if args.hidden:
            memory_gib = metrics.memory_footprint(sub.size, args.hidden, args.bytes_per_param)

    report = metrics.EvalReport(
        n_prompts=len(full),
        miss=metrics.miss_count(full_texts, vt_texts),
        o_bleu=metrics.o_bleu(vt_texts, full_texts, lang=args.lang),
        o_chrf=metrics.o_chrf(vt_texts, full_texts),
        wall_time_seconds=args.wall_time,
        subvocab_size=subvocab_size,
        memory_gib=memory_gib,
        model_id=args.model_id,
        language=args.lang,
        method=args.method,
        seed=args.seed,
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(report.to_json())
        print(f"wrote {args.out}")
    print(f"n_prompts = {report.n_prompts}")
    print(f"miss      = {report.miss}")
    print(f"o-BLEU    = {report.o_bleu:.2f}")
    print(f"o-chrF    = {report.o_chrf:.2f}")
    if subvocab_size is not None:
        print(f"|V'|      = {subvocab_size}")
    if memory_gib is not None:
        print(f"memory    = {metrics.format_gib(memory_gib)} GiB")
    return 0


def _bench_scaling(args: argparse.Namespace) -> int:
    if not args.sizes:
        raise VtError("--scaling needs --sizes")
    results = bench_mod.output_layer_scaling(
        args.hidden, _int_list(args.sizes), trials=args.trials, seed=args.seed
    )
    print(f"{'|V|':>10}  {'s/projection':>14}")
    for vocab_size, seconds in results:
        print(f"{vocab_size:>10}  {seconds:>14.6f}")
    if args.out:
        payload = [{"vocab_size": v, "seconds": s} for v, s in results]
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
        print(f"wrote {args.out}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    if args.scaling:
        return _bench_scaling(args)
    for flag, value in (("--model", args.model), ("--vocab", args.vocab),
                        ("--merges", args.merges), ("--prompts", args.prompts)):
        if not value:
            raise VtError(f"end-to-end bench needs {flag}")
    vocab, merges = bpe.load_vocab(args.vocab, args.merges)
    prompts = _read_prompts(args.prompts)
    encoded = _encode_prompts(prompts, vocab, merges)

    rows = []
    baseline_texts: list[str] | None = None
    subs = [None] + [subvocab.load_subvocab(path) for path in args.sub or []]
    labels = ["full"] + [
        os.path.basename(path).removesuffix(".json") for path in args.sub or []
    ]
    for label, sub in zip(labels, subs):
        result, outputs = bench_mod.time_end_to_end(
            args.model, sub, encoded, args.max_new, repeats=args.repeats, eos=args.eos
        )
        texts = [
            _ids_to_text(seq[len(prompt):], vocab)
            for seq, prompt in zip(outputs, encoded)
        ]
        if baseline_texts is None:
            baseline_texts = texts
        rows.append(
            {
                "label": label,
                "vocab_size": result.vocab_size_used,
                "end_to_end_seconds": result.end_to_end_seconds,
                "load_seconds": result.load_seconds,
                "slice_seconds": result.slice_seconds,
                "decode_seconds": result.decode_seconds,
                "tokens_generated": result.tokens_generated,
                "repeats": result.repeats,
                "miss": metrics.miss_count(baseline_texts, texts),
            }
        )

    vocab_col = "|V'|"
    header = (f"{'label':<20} {vocab_col:>9} {'e2e(s)':>10} {'load(s)':>9} "
              f"{'slice(s)':>9} {'decode(s)':>10} {'tokens':>7} {'miss':>5}")
    print(header)
    for row in rows:
        print(
            f"{row['label']:<20} {row['vocab_size']:>9} {row['end_to_end_seconds']:>10.4f} "
            f"{row['load_seconds']:>9.4f} {row['slice_seconds']:>9.4f} "
            f"{row['decode_seconds']:>10.4f} {row['tokens_generated']:>7} {row['miss']:>5}"
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=2)
            f.write("\n")
        print(f"wrote {args.out}")
    return 0


def cmd_memory(args: argparse.Namespace) -> int:
    vocab_sizes = _int_list(args.vocab_sizes)
    hidden_sizes = _int_list(args.hidden_sizes)
    if not vocab_sizes or not hidden_sizes:
        raise VtError("need at least one vocab size and one hidden size")
    width = max(10, *(len(str(h)) + 2 for h in hidden_sizes))
    print(f"{'|V|':>10} " + " ".join(f"{'H=' + str(h):>{width}}" for h in hidden_sizes))
    for vocab_size in vocab_sizes:
        cells = [
            metrics.format_gib(
                metrics.memory_footprint(vocab_size, h, args.bytes_per_param)
            )
            for h in hidden_sizes
        ]
        print(f"{vocab_size:>10} " + " ".join(f"{c:>{width}}" for c in cells))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vtrim",
        description="Build language-targeted sub-vocabularies, trim model "
        "embeddings, and measure the speed/memory/quality trade-offs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-model", help="create a random seeded toy model file")
    p.add_argument("--out", required=True)
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--hidden", type=int, required=True)
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--heads", type=int, required=True)
    p.add_argument("--max-context", type=int, default=512)
    p.add_argument("--untied", action="store_true",
                   help="separate output matrix instead of reusing the embedding")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init_model)

    p = sub.add_parser("build", help="build a sub-vocabulary file")
    p.add_argument("--method", choices=("unicode", "corpus", "oracle"), required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--merges", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lang", help="preset name for --method unicode")
    p.add_argument("--script-spec", help="custom ScriptSpec JSON for --method unicode")
    p.add_argument("--corpus", help="text corpus, one line per document")
    p.add_argument("--outputs", help="full-vocabulary decode output file (oracle)")
    p.add_argument("--prompts", help="prompt batch whose token ids get folded in")
    p.add_argument("--include-inputs", action=argparse.BooleanOptionalAction,
                   default=None,
                   help="force prompt-token inclusion on or off "
                        "(default: on for unicode/corpus when --prompts is given, off for oracle)")
    p.add_argument("--base-k", type=int, default=300)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("trim", help="slice a model's vocabulary matrices")
    p.add_argument("--model", required=True)
    p.add_argument("--sub", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trim)

    p = sub.add_parser("decode", help="greedy-decode a prompt file")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--merges", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sub", help="sub-vocabulary the model was trimmed with")
    p.add_argument("--max-new", type=int, default=128)
    p.add_argument("--eos", type=int, default=2)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score a trimmed decode against the full one")
    p.add_argument("--full", required=True)
    p.add_argument("--vt", required=True)
    p.add_argument("--out")
    p.add_argument("--lang", default="en")
    p.add_argument("--sub")
    p.add_argument("--hidden", type=int)
    p.add_argument("--bytes-per-param", type=int, default=4)
    p.add_argument("--wall-time", type=float)
    p.add_argument("--model-id")
    p.add_argument("--method")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time end-to-end decoding, or projection scaling")
    p.add_argument("--model")
    p.add_argument("--vocab")
    p.add_argument("--merges")
    p.add_argument("--prompts")
    p.add_argument("--sub", action="append",
                   help="sub-vocabulary to bench against the full baseline (repeatable)")
    p.add_argument("--max-new", type=int, default=16)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--eos", type=int, default=2)
    p.add_argument("--out")
    p.add_argument("--scaling", action="store_true",
                   help="run the output-projection scaling microbenchmark instead")
    p.add_argument("--hidden", type=int, default=1024)
    p.add_argument("--sizes", help="comma-separated vocab sizes for --scaling")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("memory", help="print the theoretical footprint table")
    p.add_argument("--vocab-sizes", required=True, help="comma-separated")
    p.add_argument("--hidden-sizes", required=True, help="comma-separated")
    p.add_argument("--bytes-per-param", type=int, default=4)
    p.set_defaults(func=cmd_memory)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VtError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
