"""Command-line entry point. Every subcommand is a thin adapter over the
library operations; identical argv + inputs + seed give byte-identical
outputs at any thread count."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, foon, ftdata, gmm, taxonomy

_STOCHASTIC_ERROR = "a --seed is required for stochastic subcommands"


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(args, payload: dict, text_lines: list[str]) -> None:
    if args.json:
        sys.stdout.write(_json_dump(payload))
    else:
        for line in text_lines:
            print(line)


def _load_lexicon(args) -> taxonomy.MotionLexicon:
    path = getattr(args, "lexicon", None)
    return taxonomy.load_lexicon(path, variant=args.lexicon_variant)


_ENCODE_TOKENS = {
    "contact": ("contact", 1),
    "non-contact": ("contact", 0),
    "rigid": ("engagement", 0),
    "soft": ("engagement", 1),
    "stationary": ("subclass", 0b00),
    "moving": ("subclass", 0b11),
    "admitting": ("subclass", 0b00),
    "penetrative": ("subclass", 0b00),
    "manipulator-deforming": ("subclass", 0b10),
    "manipulatee-deforming": ("subclass", 0b11),
    "prismatic": ("prismatic", 1),
    "revolute": ("revolute", 1),
    "discontinuous": ("duration", 0),
    "continuous": ("duration", 1),
    "unimanual": ("manual", 0),
    "bimanual": ("manual", 1),
}


def cmd_encode(args, parser) -> int:
    fields: dict[str, int] = {}
    for token in args.attributes:
        key = token.strip().casefold()
        if key not in _ENCODE_TOKENS:
            parser.error(f"unknown attribute token {token!r}; known: {', '.join(sorted(_ENCODE_TOKENS))}")
        name, value = _ENCODE_TOKENS[key]
        if name in fields and fields[name] != value:
            parser.error(f"attribute token {token!r} conflicts with an earlier token")
        fields[name] = value
    code = taxonomy.MotionCode(**fields)
    result = taxonomy.validate(code)
    rendered = taxonomy.render_code(code)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not result.ok:
        for v in result.violations:
            print(f"violation: {v}", file=sys.stderr)
        return 1
    _emit(args, {"code": rendered}, [rendered])
    return 0


def cmd_decode(args, parser) -> int:
    code = taxonomy.parse_code(args.code)
    desc = taxonomy.describe_code(code)
    lines = [f"code {taxonomy.render_code(code)}"]
    lines += [f"  {name}: {value}" for name, value in desc.items()]
    _emit(args, {"code": taxonomy.render_code(code), "attributes": desc}, lines)
    return 0


def cmd_validate(args, parser) -> int:
    code = taxonomy.parse_code(args.code)
    result = taxonomy.validate(code)
    payload = {
        "code": taxonomy.render_code(code),
        "ok": result.ok,
        "violations": list(result.violations),
        "warnings": list(result.warnings),
    }
    lines = ["ok" if result.ok else "invalid"]
    lines += [f"violation: {v}" for v in result.violations]
    lines += [f"warning: {w}" for w in result.warnings]
    _emit(args, payload, lines)
    return 0 if result.ok else 1


def cmd_dist(args, parser) -> int:
    a = taxonomy.parse_code(args.code_a)
    b = taxonomy.parse_code(args.code_b)
    weights = None
    if args.weights:
        parts = [float(v) for v in args.weights.split(",")]
        weights = taxonomy.CodeDistanceWeights(tuple(parts))
    value = taxonomy.code_distance(a, b, weights)
    _emit(args, {"distance": value}, [format(value, "g")])
    return 0


def cmd_consolidate(args, parser) -> int:
    labels = [
        line.strip()
        for line in Path(args.labels_file).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    lex = _load_lexicon(args)
    result = taxonomy.consolidate(labels, lex)
    lines = [f"{code}: {', '.join(group)}" for code, group in result.groups.items()]
    if result.unknowns:
        lines.append("unknown: " + ", ".join(result.unknowns))
    _emit(args, result.to_json(), lines)
    return 0


def cmd_foon_stats(args, parser) -> int:
    text = Path(args.file).read_text(encoding="utf-8")
    graph = foon.parse_foon(text)
    counts = foon.node_counts(graph)
    codes: dict[str, str] = {}
    unknowns: list[str] = []
    if args.annotate is not False:
        lex = taxonomy.load_lexicon(args.annotate, variant=args.lexicon_variant)
        graph, unknowns = foon.annotate_motions(graph, lex)
        for unit in graph.units:
            if unit.motion.code is not None:
                codes[unit.motion.label] = taxonomy.render_code(unit.motion.code)
    report = foon.motion_frequency(graph) if graph.units else None
    rows = report.rows[: args.top] if report else ()

    lines = [f"nodes: {counts.objects} object + {counts.motions} motion = {counts.total} total"]
    for row in rows:
        line = f"{row.label}: {row.count} ({format(row.share, '.9g')})"
        if codes:
            line += f" code={codes.get(row.label, 'unknown')}"
        lines.append(line)
    if report:
        lines.append(
            f"top-{min(args.top, len(report.rows))} coverage: "
            f"{format(foon.top_k_coverage(report, args.top), '.9g')}"
        )
    if unknowns:
        lines.append("unknown motion labels: " + ", ".join(unknowns))

    payload = {
        "nodes": {"objects": counts.objects, "motions": counts.motions, "total": counts.total},
        "rows": [
            {"label": r.label, "count": r.count, "share": r.share}
            | ({"code": codes.get(r.label)} if codes or unknowns else {})
            for r in rows
        ],
        "unknown_motion_labels": unknowns,
    }
    _emit(args, payload, lines)

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            header = "label,count,share" + (",code" if args.annotate is not False else "")
            fh.write(header + "\n")
            for r in (report.rows if report else ()):
                line = f"{r.label},{r.count},{format(r.share, '.9g')}"
                if args.annotate is not False:
                    line += f",{codes.get(r.label, '')}"
                fh.write(line + "\n")
    return 0


def cmd_synth(args, parser) -> int:
    if args.seed is None:
        parser.error(_STOCHASTIC_ERROR)
    mixture = gmm.load_mixture(args.spec)
    matrix = ftdata.synth_generate(mixture, args.n, args.seed)
    ftdata.write_samples_csv(matrix, args.out)
    print(f"wrote {len(matrix)} samples x {matrix.dims} channels to {args.out}", file=sys.stderr)
    return 0


def cmd_fit(args, parser) -> int:
    if args.seed is None:
        parser.error(_STOCHASTIC_ERROR)
    channels = args.channels.split(",") if args.channels else None
    matrix = ftdata.load_sample_csv(args.input, channels)
    cfg = gmm.EmConfig(k=args.k, init=args.init, seed=args.seed)
    if args.bic:
        mixture, report, table = gmm.fit_best_bic(matrix, cfg)
        print("bic sweep: " + ", ".join(f"k={k}: {format(b, '.9g')}" for k, b in table), file=sys.stderr)
    else:
        mixture, report = gmm.fit_em(matrix, cfg)
    gmm.save_mixture(mixture, args.out)
    if args.report:
        payload = {
            "iterations": report.iterations,
            "final_log_likelihood": report.final_log_likelihood,
            "log_likelihoods": list(report.log_likelihoods),
            "converged": report.converged,
            "degenerate": report.degenerate,
            "floored": report.floored,
            "k": len(mixture),
            "dims": mixture.dims,
        }
        Path(args.report).write_text(_json_dump(payload), encoding="utf-8")
    print(
        f"fit k={len(mixture)} on {len(matrix)}x{matrix.dims} samples: "
        f"ll={format(report.final_log_likelihood, '.9g')} after {report.iterations} iterations",
        file=sys.stderr,
    )
    return 0


def cmd_kl(args, parser) -> int:
    f = gmm.load_mixture(args.f)
    g = gmm.load_mixture(args.g)
    fg, fg_clamped = gmm.variational_kl_flagged(f, g)
    gf, gf_clamped = gmm.variational_kl_flagged(g, f)
    sym = 0.5 * (fg + gf)
    payload = {
        "variational_kl_fg": fg,
        "variational_kl_gf": gf,
        "symmetric_divergence": sym,
        "clamped": fg_clamped or gf_clamped,
    }
    lines = [
        f"variational_kl f->g: {format(fg, '.9g')}",
        f"variational_kl g->f: {format(gf, '.9g')}",
        f"symmetric_divergence: {format(sym, '.9g')}",
    ]
    if fg_clamped or gf_clamped:
        lines.append("note: a negative raw value was clamped to 0")
    if args.mc:
        if args.seed is None:
            parser.error(_STOCHASTIC_ERROR)
        est = gmm.mc_kl(f, g, args.mc, args.seed)
        payload["mc_kl_fg"] = {"estimate": est.estimate, "std_error": est.std_error}
        lines.append(
            f"mc_kl f->g ({args.mc} draws): {format(est.estimate, '.9g')} "
            f"(se {format(est.std_error, '.3g')})"
        )
    _emit(args, payload, lines)
    return 0


def cmd_matrix(args, parser) -> int:
    model_dir = Path(args.models)
    files = sorted(model_dir.glob("*.json"))
    if not files:
        raise ValueError(f"no model JSON files under {model_dir}")
    models: dict[str, list[gmm.GaussianMixture]] = {}
    for path in files:
        stem = path.stem
        label = stem.rpartition("_")[0] if "_" in stem else stem
        models.setdefault(label, []).append(gmm.load_mixture(path))
    matrix = analysis.divergence_matrix(models, threads=args.threads)
    analysis.export_matrix_csv(matrix, args.out)
    if args.heatmap:
        analysis.export_heatmap(matrix, args.heatmap)
    print(
        f"{len(matrix)} labels, {sum(len(v) for v in models.values())} models -> {args.out}",
        file=sys.stderr,
    )
    return 0


def cmd_eval(args, parser) -> int:
    matrix = analysis.import_matrix_csv(args.matrix)
    lex = _load_lexicon(args)
    codes = {label: taxonomy.lookup(label, lex) for label in matrix.labels}
    report = analysis.cluster_consistency(matrix, codes)
    payload = report.to_json()
    Path(args.out).write_text(_json_dump(payload), encoding="utf-8")
    lines = [
        f"intra_mean: {report.intra_mean}",
        f"inter_mean: {report.inter_mean}",
        f"ratio: {report.ratio}",
        f"nn_agreement: {format(report.nn_agreement, '.9g')}",
        f"rank_correlation: {report.rank_correlation}",
    ]
    _emit(args, payload, lines)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable stdout")
    common.add_argument("--seed", type=int, default=None, help="seed for stochastic steps")
    common.add_argument("--threads", type=int, default=1, help="worker threads where supported")
    common.add_argument(
        "--lexicon-variant",
        choices=taxonomy.LEXICON_VARIANTS,
        default="verbatim",
        help="reading of the two non-contact lexicon rows",
    )

    parser = argparse.ArgumentParser(prog="motiontax", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", parents=[common], help="build a code from attribute tokens")
    p.add_argument("attributes", nargs="+", metavar="ATTRIBUTE")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", parents=[common], help="describe each attribute of a code")
    p.add_argument("code")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("validate", parents=[common], help="check a code against the attribute rules")
    p.add_argument("code")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dist", parents=[common], help="weighted Hamming distance between two codes")
    p.add_argument("code_a")
    p.add_argument("code_b")
    p.add_argument("--weights", help="8 comma-separated nonnegative weights")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("consolidate", parents=[common], help="group labels by their code")
    p.add_argument("labels_file")
    p.add_argument("--lexicon", help="lexicon JSON (default: bundled seed)")
    p.set_defaults(func=cmd_consolidate)

    p = sub.add_parser("foon-stats", parents=[common], help="node counts and motion frequency")
    p.add_argument("file")
    p.add_argument("--top", type=int, default=20, help="rows to display (default 20)")
    p.add_argument(
        "--annotate",
        nargs="?",
        const=None,
        default=False,
        metavar="LEXICON",
        help="attach codes from a lexicon JSON (default: bundled seed)",
    )
    p.add_argument("--out", help="write the full frequency table as CSV")
    p.set_defaults(func=cmd_foon_stats)

    p = sub.add_parser("synth", parents=[common], help="draw samples from a mixture JSON")
    p.add_argument("--spec", required=True, help="mixture JSON file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", parents=[common], help="fit a mixture to samples by EM")
    p.add_argument("--in", dest="input", required=True, help="samples CSV")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--init", choices=("kmeans", "random"), default="kmeans")
    p.add_argument("--channels", help="comma-separated channel subset")
    p.add_argument("--bic", action="store_true", help="sweep k in 1..5 and keep the lowest BIC")
    p.add_argument("--out", required=True, help="mixture JSON output")
    p.add_argument("--report", help="fit report JSON output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("kl", parents=[common], help="divergences between two mixture JSONs")
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--mc", type=int, help="add a Monte Carlo estimate with this many draws")
    p.set_defaults(func=cmd_kl)

    p = sub.add_parser("matrix", parents=[common], help="pairwise divergence matrix from model files")
    p.add_argument("--models", required=True, help="directory of <label>_<variant>.json mixtures")
    p.add_argument("--out", required=True, help="matrix CSV output")
    p.add_argument("--heatmap", help="PGM heatmap output")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("eval", parents=[common], help="cluster-consistency report for a matrix")
    p.add_argument("--matrix", required=True, help="matrix CSV")
    p.add_argument("--lexicon", help="lexicon JSON (default: bundled seed)")
    p.add_argument("--out", required=True, help="report JSON output")
    p.set_defaults(func=cmd_eval)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


def main(argv=None) -> int:
    try:
        return dispatch(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:  # argparse usage errors (exit 2) and --help (exit 0)
        code = exc.code
        return code if isinstance(code, int) else 2
    except (ValueError, LookupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
