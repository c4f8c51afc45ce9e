"""Command-line surface: gradient checks, training runs, analysis, evaluation.

Options come from flags, optionally backed by a JSON config file
(``--config``); flags override the file. Machine-readable output is JSON or
CSV; every run is deterministic given its flags and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .containers import EmbeddingBatch, ProxySet
from .data import (
    FORMAT_VERSION,
    BatchPlan,
    MixtureConfig,
    generate_mixture,
    load_embeddings,
    save_embeddings,
)
from .errors import AntiCollapseError
from .gradcheck import DEFAULT_TOLERANCE, FAMILIES, run_suite
from .losses import AntiCollapseConfig, ProxyAnchorParams
from .metrics import _density_raw, evaluate, proxy_similarity_heat
from .rates import RateParams, coding_rate, intra_class_rate
from .training import TrainConfig, train


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_manifest(out_dir: Path, command: str, options: dict, outputs: list[str], started: str) -> None:
    manifest = {
        "command": command,
        "options": options,
        "seed": options.get("seed"),
        "started_at": started,
        "finished_at": _utc_now(),
        "outputs": sorted(outputs),
        "versions": {"anticollapse": __version__, "embedding_format": FORMAT_VERSION},
    }
    _write_atomic(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _resolve(args: argparse.Namespace, schema: dict) -> dict:
    """Merge flag values over config-file values over schema defaults."""
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = json.loads(Path(args.config).read_text())
    resolved = {}
    for key, default in schema.items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in file_cfg:
            resolved[key] = file_cfg[key]
        else:
            resolved[key] = default
    return resolved


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="run seed (default 0)")
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--out-dir", help="directory for artifacts")
    parser.add_argument("--epsilon", type=float, help="coding-rate precision (default 0.5)")
    parser.add_argument("--nu", type=float, help="base-loss weight in the composite loss (default 0.0035)")
    parser.add_argument("--alpha", type=float, help="proxy-anchor scaling (default 32)")
    parser.add_argument("--delta", type=float, help="proxy-anchor margin (default 0.1)")
    parser.add_argument("--variant", choices=["all-class", "mini-batch"], help="proxy selection for the rate term")


COMMON_SCHEMA = {
    "seed": 0,
    "epsilon": 0.5,
    "nu": 0.0035,
    "alpha": 32.0,
    "delta": 0.1,
    "variant": "mini-batch",
}


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

def cmd_gradcheck(args: argparse.Namespace) -> int:
    schema = dict(COMMON_SCHEMA, loss="all", cases=20, step=1e-5, tolerance=DEFAULT_TOLERANCE)
    opts = _resolve(args, schema)
    families = FAMILIES if opts["loss"] == "all" else (opts["loss"],)
    results = run_suite(
        families=families,
        cases=opts["cases"],
        seed=opts["seed"],
        step=opts["step"],
        negate_analytic=args.inject_sign_error,
    )
    ok = True
    for family, error in results.items():
        passed = error < opts["tolerance"]
        ok = ok and passed
        print(f"{family:24s} max_rel_err={error:.3e}  {'PASS' if passed else 'FAIL'}")
    print(f"gradcheck: {'all gradients verified' if ok else 'FAILURES detected'}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _parse_synthetic(tokens: list[str], seed: int) -> MixtureConfig:
    params = {"classes": 16, "per-class": 20, "dim": 32, "noise": 0.25, "orthonormal": True}
    for token in tokens:
        key, _, value = token.partition("=")
        if key not in params:
            raise AntiCollapseError(f"unknown synthetic parameter {key!r} (have {sorted(params)})")
        try:
            params[key] = (
                value.lower() in ("1", "true", "yes")
                if key == "orthonormal"
                else type(params[key])(value)
            )
        except ValueError as exc:
            raise AntiCollapseError(f"bad synthetic parameter {token!r}: {exc}") from exc
    return MixtureConfig(
        num_classes=int(params["classes"]),
        samples_per_class=int(params["per-class"]),
        dim=int(params["dim"]),
        noise_sigma=float(params["noise"]),
        seed=seed,
        orthonormal_means=bool(params["orthonormal"]),
    )


def _load_input(args: argparse.Namespace, opts: dict) -> EmbeddingBatch:
    if args.input is not None:
        path = Path(args.input)
        if not path.exists():
            raise AntiCollapseError(f"input file not found: {path}")
        return load_embeddings(path, renormalize=bool(args.renormalize))
    tokens = args.synthetic if args.synthetic is not None else []
    return generate_mixture(_parse_synthetic(tokens, opts["seed"]))


def _train_config(opts: dict) -> TrainConfig:
    rate = RateParams(opts["epsilon"])
    anchor = ProxyAnchorParams(alpha=opts["alpha"], delta=opts["delta"])
    return TrainConfig(
        loss=opts["loss"],
        antico=AntiCollapseConfig(
            nu=opts["nu"], rate=rate, variant=opts["variant"], base=opts["base"], anchor=anchor
        ),
        anchor=anchor,
        rate=rate,
        lr=opts["lr"],
        proxy_lr_multiplier=opts["proxy_lr_mult"],
        epochs=opts["epochs"],
        plan=BatchPlan(opts["classes_per_batch"], opts["samples_per_class"]),
        eval_every=opts["eval_every"],
        seed=opts["seed"],
        with_replacement=bool(opts["with_replacement"]),
    )


def cmd_train(args: argparse.Namespace) -> int:
    schema = dict(
        COMMON_SCHEMA,
        loss="antico",
        base="proxy-anchor",
        lr=1e-2,
        proxy_lr_mult=100.0,
        epochs=100,
        eval_every=10,
        classes_per_batch=None,
        samples_per_class=None,
        with_replacement=False,
        out_dir="anticollapse-run",
    )
    opts = _resolve(args, schema)
    data = _load_input(args, opts)  # resolve inputs before touching the out dir

    # PK plan defaults adapt to the data (30 x 3 capped by what it can support)
    classes, counts = np.unique(data.labels, return_counts=True)
    if opts["classes_per_batch"] is None:
        opts["classes_per_batch"] = min(30, int(classes.size))
    if opts["samples_per_class"] is None:
        opts["samples_per_class"] = min(3, int(counts.min()))
    config = _train_config(opts)

    started = _utc_now()
    state, trace = train(config, data)

    out_dir = Path(opts["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_atomic(out_dir / "trace.csv", trace.to_csv())
    _write_atomic(out_dir / "trace.jsonl", trace.to_jsonl())
    save_embeddings(state.embeddings, out_dir / "embeddings.acem")
    save_embeddings(
        EmbeddingBatch(state.proxies.proxies, state.proxies.class_ids), out_dir / "proxies.acem"
    )
    outputs = ["trace.csv", "trace.jsonl", "embeddings.acem", "proxies.acem"]
    _write_manifest(out_dir, "train", opts, outputs, started)

    last = trace.records[-1] if trace.records else None
    print(f"trained {config.epochs} epochs with loss={config.loss!r}; artifacts in {out_dir}")
    if last is not None:
        print(
            f"final eval: loss={last.loss:.6f} r_global={last.r_global:.4f} "
            f"r_intra={last.r_intra:.4f} r_proxy={last.r_proxy:.4f} recall1={last.recall1:.2f}"
        )
    return 0


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _similarity_histogram(batch: EmbeddingBatch, bins: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    sims = batch.features @ batch.features.T
    upper = np.triu_indices(batch.n, k=1)
    same = batch.labels[upper[0]] == batch.labels[upper[1]]
    values = sims[upper]
    edges = np.linspace(-1.0, 1.0, bins + 1)
    # cosine rounding can leave values a hair outside [-1, 1]
    clipped = np.clip(values, -1.0, 1.0)
    pos_counts, _ = np.histogram(clipped[same], bins=edges)
    neg_counts, _ = np.histogram(clipped[~same], bins=edges)
    return edges, pos_counts, neg_counts


def cmd_analyze(args: argparse.Namespace) -> int:
    schema = dict(COMMON_SCHEMA, bins=40, out_dir=None)
    opts = _resolve(args, schema)
    path = Path(args.input)
    if not path.exists():
        raise AntiCollapseError(f"input file not found: {path}")
    batch = load_embeddings(path, renormalize=bool(args.renormalize))
    params = RateParams(opts["epsilon"])

    proxies = None
    if args.proxies is not None:
        proxy_path = Path(args.proxies)
        if not proxy_path.exists():
            raise AntiCollapseError(f"proxy file not found: {proxy_path}")
        loaded = load_embeddings(proxy_path)
        proxies = ProxySet(loaded.features, loaded.labels)

    report = {
        "r_global": coding_rate(batch.features, params),
        "r_intra": intra_class_rate(batch.features, batch.labels, params),
        "r_proxy": coding_rate(proxies.proxies, params) if proxies is not None else None,
        "density": _density_raw(batch.features, batch.labels),
    }
    if proxies is not None:
        heat = proxy_similarity_heat(proxies)
        off = heat[~np.eye(heat.shape[0], dtype=bool)]
        report["proxy_offdiag_max_abs"] = float(np.max(np.abs(off))) if off.size else 0.0
        report["proxy_offdiag_mean"] = float(np.mean(off)) if off.size else 0.0
    print(json.dumps(report, indent=2, sort_keys=True))

    if opts["out_dir"] is not None:
        out_dir = Path(opts["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        started = _utc_now()
        edges, pos_counts, neg_counts = _similarity_histogram(batch, opts["bins"])
        lines = ["bin_left,bin_right,positive_pairs,negative_pairs"]
        for i in range(len(pos_counts)):
            lines.append(f"{edges[i]!r},{edges[i + 1]!r},{pos_counts[i]},{neg_counts[i]}")
        _write_atomic(out_dir / "similarity_hist.csv", "\n".join(lines) + "\n")
        outputs = ["similarity_hist.csv"]
        if proxies is not None:
            heat = proxy_similarity_heat(proxies)
            rows = [",".join(repr(v) for v in row) for row in heat]
            _write_atomic(out_dir / "proxy_similarity.csv", "\n".join(rows) + "\n")
            outputs.append("proxy_similarity.csv")
        _write_atomic(out_dir / "rate_report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
        outputs.append("rate_report.json")
        _write_manifest(out_dir, "analyze", opts, outputs, started)
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args: argparse.Namespace) -> int:
    schema = dict(COMMON_SCHEMA, ks="1,2,4,8", map_cutoff=1000)
    opts = _resolve(args, schema)
    path = Path(args.input)
    if not path.exists():
        raise AntiCollapseError(f"input file not found: {path}")
    batch = load_embeddings(path, renormalize=bool(args.renormalize))
    ks = [int(k) for k in str(opts["ks"]).split(",") if k]
    report = evaluate(batch, ks=ks, map_cutoff=opts["map_cutoff"], seed=opts["seed"])
    payload = {
        "recall_at": {str(k): v for k, v in report.recall_at.items()},
        "nmi": report.nmi,
        "f1": report.f1,
        "map_at": {str(k): v for k, v in report.map_at.items()},
        "density": report.density,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anticollapse",
        description="Coding-rate anti-collapse losses: gradient checks, training, analysis, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    _add_common(p)
    p.add_argument("--loss", choices=list(FAMILIES) + ["all"], help="loss family to check (default all)")
    p.add_argument("--cases", type=int, help="seeded instances per family (default 20)")
    p.add_argument("--step", type=float, help="finite-difference step (default 1e-5)")
    p.add_argument("--tolerance", type=float, help="max allowed relative error (default 1e-5)")
    p.add_argument("--inject-sign-error", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("train", help="run a training experiment and write trace artifacts")
    _add_common(p)
    p.add_argument("--input", help="embedding file to optimize (binary or CSV)")
    p.add_argument(
        "--synthetic",
        nargs="*",
        metavar="KEY=VAL",
        help="generate a mixture instead of loading (classes=, per-class=, dim=, noise=, orthonormal=)",
    )
    p.add_argument("--renormalize", action="store_true", help="renormalize off-sphere input rows")
    p.add_argument("--loss", choices=["pa", "pnca", "pair", "antico"], help="training objective")
    p.add_argument("--base", choices=["proxy-anchor", "proxy-nca"], help="base loss of the composite objective")
    p.add_argument("--lr", type=float, help="embedding learning rate (default 1e-2)")
    p.add_argument("--proxy-lr-mult", type=float, dest="proxy_lr_mult", help="proxy lr multiplier (default 100)")
    p.add_argument("--epochs", type=int, help="training epochs (default 100)")
    p.add_argument("--eval-every", type=int, dest="eval_every", help="epochs between trace records (default 10)")
    p.add_argument("--classes-per-batch", type=int, dest="classes_per_batch", help="P in the PK sampler")
    p.add_argument("--samples-per-class", type=int, dest="samples_per_class", help="K in the PK sampler")
    p.add_argument(
        "--with-replacement",
        action=argparse.BooleanOptionalAction,
        dest="with_replacement",
        help="sample class rows with replacement",
    )
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("analyze", help="structural metrics, similarity histograms, proxy heat data")
    _add_common(p)
    p.add_argument("--input", required=True, help="embedding file")
    p.add_argument("--proxies", help="proxy file (embedding format, one row per class)")
    p.add_argument("--renormalize", action="store_true", help="renormalize off-sphere input rows")
    p.add_argument("--bins", type=int, help="similarity histogram bins (default 40)")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("eval", help="retrieval/clustering metrics for an embedding file")
    _add_common(p)
    p.add_argument("--input", required=True, help="embedding file")
    p.add_argument("--renormalize", action="store_true", help="renormalize off-sphere input rows")
    p.add_argument("--ks", help="comma-separated recall cutoffs (default 1,2,4,8)")
    p.add_argument("--map-cutoff", type=int, dest="map_cutoff", help="ranking cutoff for mAP (default 1000)")
    p.set_defaults(handler=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except AntiCollapseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
