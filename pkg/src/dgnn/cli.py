"""Command-line entry point: ``dgnn <command> [options]``.

Settings resolve in the order defaults, ``--profile``, ``--config`` file,
explicit flags. The config file is flat ``key = value`` text; unknown keys
are rejected. Exit codes: 0 success, 1 runtime failure, 2 validation
mismatch or bad configuration.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datasets
from .gradcheck import check_instance
from .model import DEFAULT_MEM_BUDGET, DgnnHyperparams, ablation_config
from .params_io import save_params
from .train import (
    BETA_GRID,
    EPSILON_GRID,
    LAM_ALPHA_GRID,
    TrainConfig,
    TrainReport,
    embed,
    make_split,
    prepare,
    run_trials,
    sweep,
    train,
)

log = logging.getLogger("dgnn")

EXIT_OK, EXIT_RUNTIME, EXIT_MISMATCH = 0, 1, 2

# key -> (parser, default); keys double as --flag names with '_' -> '-'
SETTINGS = {
    "dataset": (str, None),
    "profile": (str, None),
    "lambda": (float, 1.0),
    "alpha": (float, 1.0),
    "beta": (float, 0.01),
    "epsilon": (float, 0.5),
    "layers": (int, 2),
    "k": (int, 5),
    "mode": (str, "network"),
    "lr": (float, 0.01),
    "dropout": (float, 0.0),
    "epochs": (int, 500),
    "patience": (int, 100),
    "weight_decay": (float, 5e-4),
    "normalize_features": (lambda s: str(s).lower() in ("1", "true", "yes"), True),
    "seeds": (str, "10"),
    "ablation": (str, "none"),
    "jobs": (int, 1),
    "out": (str, "runs"),
    "mem_budget": (int, DEFAULT_MEM_BUDGET),
}
# written to the resolved config; ablation is folded into the hyperparameters
RESOLVED_KEYS = [k for k in SETTINGS if k not in ("ablation", "jobs", "out", "profile")]


class ConfigError(ValueError):
    pass


def parse_config_file(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in body.split("=", 1))
            key = key.replace("-", "_")
            if key not in SETTINGS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def parse_seeds(text):
    """``"N"`` means seeds ``0..N-1``; ``"3,7"`` or ``"[3]"`` is an explicit list."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    text = str(text).strip()
    if "," in text or text.startswith("["):
        return [int(s) for s in text.strip("[]").split(",") if s.strip()]
    return list(range(int(text)))


def resolve(args):
    """Merge defaults, profile, config file and flags into one settings dict."""
    cfg = {k: default for k, (_, default) in SETTINGS.items()}
    file_cfg = parse_config_file(args.config) if getattr(args, "config", None) else {}
    profile = getattr(args, "profile", None) or file_cfg.get("profile")
    if profile:
        if profile not in datasets.PROFILES:
            raise ConfigError(f"unknown profile {profile!r}; known: {', '.join(datasets.PROFILES)}")
        p = datasets.PROFILES[profile]
        cfg.update(profile=profile, dataset=str(datasets.find_dataset(profile)),
                   lr=p.lr, dropout=p.dropout, layers=p.layers, beta=p.beta, alpha=p.alpha)
        cfg["lambda"] = p.lam
    for key, value in file_cfg.items():
        cfg[key] = value
    for key in SETTINGS:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            cfg[key] = value
    try:
        for key, (conv, _) in SETTINGS.items():
            if cfg[key] is not None:
                cfg[key] = conv(cfg[key])
        cfg["seeds"] = parse_seeds(cfg["seeds"])
    except ValueError as e:
        raise ConfigError(str(e)) from None

    if cfg["ablation"] != "none":
        hp = ablation_config(cfg["ablation"], hyperparams(cfg))
        cfg.update(alpha=hp.alpha, beta=hp.beta, epsilon=hp.epsilon)
        cfg["lambda"] = hp.lam
    return cfg


def hyperparams(cfg):
    return DgnnHyperparams(
        lam=float(cfg["lambda"]), alpha=float(cfg["alpha"]), beta=float(cfg["beta"]),
        epsilon=float(cfg["epsilon"]), layers=int(cfg["layers"]), k=int(cfg["k"]),
        mode=cfg["mode"],
    )


def train_config(cfg):
    return TrainConfig(
        lr=cfg["lr"], dropout=cfg["dropout"], epochs=cfg["epochs"], patience=cfg["patience"],
        weight_decay=cfg["weight_decay"], normalize_features=cfg["normalize_features"],
        mem_budget=cfg["mem_budget"],
    )


def write_resolved(cfg, out_dir):
    path = Path(out_dir) / "config.txt"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in RESOLVED_KEYS:
            value = cfg[key]
            if key == "seeds":
                value = "[" + ",".join(str(s) for s in value) + "]"
            fh.write(f"{key} = {value}\n")
    return path


def _display_name(cfg):
    name = cfg.get("profile") or Path(cfg["dataset"]).name
    return name.capitalize()


def _load(cfg):
    if not cfg["dataset"]:
        raise ConfigError("no dataset given (use --dataset or --profile)")
    return datasets.load_dataset(cfg["dataset"])


def _out_dir(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args):
    g = datasets.load_dataset(args.dataset)
    stats = datasets.dataset_stats(g)
    print(
        f"{g.name}: n={stats['nodes']} D={stats['features']} c={stats['classes']} "
        f"edges={stats['edges']} (unique {stats['unique_edges']}) "
        f"homophily {stats['homophily']:.3f}"
    )
    if not args.profile:
        return EXIT_OK
    if args.profile not in datasets.PROFILES:
        raise ConfigError(f"unknown profile {args.profile!r}")
    mismatches = datasets.compare_to_profile(stats, datasets.PROFILES[args.profile])
    for field, expected, found in mismatches:
        print(f"mismatch {field}: expected {expected}, found {found}")
    return EXIT_MISMATCH if mismatches else EXIT_OK


def _write_trials(out, name, summary):
    with open(out / "report.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TrainReport.CSV_HEADER + "\n")
        for rep in summary.reports:
            fh.writelines(row + "\n" for row in rep.csv_rows())
    with open(out / "report.md", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("| Dataset | Accuracy (%) |\n|---|---|\n")
        fh.write(f"| {name} | {summary.formatted()} |\n\n")
        fh.write("| Seed | Best epoch | Val acc | Test acc | Wall time (s) |\n|---|---|---|---|---|\n")
        for rep in summary.reports:
            fh.write(f"| {rep.seed} | {rep.best_epoch} | {rep.val_acc:.4f} | "
                     f"{rep.test_acc:.4f} | {rep.wall_time:.1f} |\n")
    for seed, params in zip(summary.seeds, summary.params):
        save_params(out / f"params_seed{seed}.bin", params)


def cmd_train(args):
    cfg = resolve(args)
    g = _load(cfg)
    out = _out_dir(cfg)
    write_resolved(cfg, out)
    summary = run_trials(g, hyperparams(cfg), train_config(cfg), cfg["seeds"], jobs=cfg["jobs"])
    name = _display_name(cfg)
    _write_trials(out, name, summary)
    print(f"| {name} | {summary.formatted()} |")
    return EXIT_OK


def cmd_ablate(args):
    cfg = resolve(args)
    if cfg["ablation"] != "none":
        raise ConfigError("ablate runs every variant; drop --ablation")
    g = _load(cfg)
    out = _out_dir(cfg)
    write_resolved(cfg, out)
    base, tc, seeds = hyperparams(cfg), train_config(cfg), cfg["seeds"]
    prep = prepare(g, base.k, tc.normalize_features)
    rows = []
    for variant in ("full", "A1", "A2", "A3"):
        hp = base if variant == "full" else ablation_config(variant, base)
        s = run_trials(prep, hp, tc, seeds, jobs=cfg["jobs"])
        rows.append((variant, hp, s))
    with open(out / "ablation.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("variant,lambda,alpha,beta,epsilon,mean,std\n")
        for variant, hp, s in rows:
            fh.write(f"{variant},{hp.lam},{hp.alpha},{hp.beta},{hp.epsilon},{s.mean:.9g},{s.std:.9g}\n")
    header = "| Dataset | " + " | ".join(v for v, _, _ in rows) + " |"
    line = f"| {_display_name(cfg)} | " + " | ".join(s.formatted() for _, _, s in rows) + " |"
    table = header + "\n|" + "---|" * (len(rows) + 1) + "\n" + line + "\n"
    (out / "ablation.md").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def _grid(text, default):
    if text is None:
        return list(default)
    return [float(v) for v in text.split(",")]


def cmd_sweep(args):
    cfg = resolve(args)
    g = _load(cfg)
    out = _out_dir(cfg)
    write_resolved(cfg, out)
    hp, tc, seeds = hyperparams(cfg), train_config(cfg), cfg["seeds"]
    if args.axis == "epsilon":
        rows = sweep(g, hp, tc, "epsilon", _grid(args.values, EPSILON_GRID), seeds, cfg["jobs"])
        path = out / "sweep_epsilon.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("epsilon,mean,std\n")
            for r in rows:
                fh.write(f"{r['epsilon']},{r['mean']:.9g},{r['std']:.9g}\n")
        print(path)
    else:
        grid = {
            "lam": _grid(args.lam_values, LAM_ALPHA_GRID),
            "alpha": _grid(args.alpha_values, LAM_ALPHA_GRID),
            "beta": _grid(args.beta_values, BETA_GRID),
        }
        rows = sweep(g, hp, tc, "lam_alpha", grid, seeds, cfg["jobs"])
        for beta in grid["beta"]:
            path = out / f"sweep_beta{beta:g}.csv"
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("lambda,alpha,mean,std\n")
                for r in rows:
                    if r["beta"] == beta:
                        fh.write(f"{r['lam']},{r['alpha']},{r['mean']:.9g},{r['std']:.9g}\n")
            print(path)
    return EXIT_OK


def cmd_gradcheck(args):
    worst, ok = 0.0, True
    for seed in range(args.instances):
        res = check_instance(seed, n=args.nodes, d=args.dim, layers=args.layers)
        worst = max(worst, res.worst)
        ok = ok and res.passed(args.tol)
    print(f"{'PASS' if ok else 'FAIL'} rel_err={worst:.3e} "
          f"(N={args.nodes}, D={args.dim}, L={args.layers}, {args.instances} instances)")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_export(args):
    cfg = resolve(args)
    g = _load(cfg)
    out = _out_dir(cfg)
    write_resolved(cfg, out)
    hp, tc = hyperparams(cfg), train_config(cfg)
    if not cfg["seeds"]:
        raise ConfigError("export needs at least one seed")
    seed = cfg["seeds"][0]
    tc = replace(tc, seed=seed)
    factor, _, _ = train(g, hp, tc, make_split(g.n, seed))
    state = embed(g, factor, hp, tc)
    path = datasets.export_embeddings(state, g.labels, out / "embeddings.csv")
    print(path)
    return EXIT_OK


def _add_run_flags(p):
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--profile", choices=sorted(datasets.PROFILES))
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--layers", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--mode", choices=["network", "analytic"])
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--seeds", help="count N (seeds 0..N-1) or comma list")
    p.add_argument("--ablation", choices=["none", "A1", "A2", "A3"])
    p.add_argument("--jobs", type=int)
    p.add_argument("--out")
    p.add_argument("--mem-budget", dest="mem_budget", type=int, help="bytes")


def build_parser():
    parser = argparse.ArgumentParser(prog="dgnn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load a dataset and print its statistics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--profile", help="compare against published statistics")
    p.set_defaults(func=cmd_validate)

    for name, func, text in [
        ("train", cmd_train, "multi-seed training run"),
        ("ablate", cmd_ablate, "full model against A1/A2/A3"),
        ("sweep", cmd_sweep, "epsilon or lambda/alpha grid"),
        ("export", cmd_export, "train one seed and export embeddings"),
    ]:
        p = sub.add_parser(name, help=text)
        _add_run_flags(p)
        p.set_defaults(func=func)
        if name == "sweep":
            p.add_argument("--axis", choices=["epsilon", "lam_alpha"], default="epsilon")
            p.add_argument("--values", help="comma list of epsilon values")
            p.add_argument("--lam-values", dest="lam_values")
            p.add_argument("--alpha-values", dest="alpha_values")
            p.add_argument("--beta-values", dest="beta_values")

    p = sub.add_parser("gradcheck", help="backward pass against finite differences")
    p.add_argument("--nodes", type=int, default=8)
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    except Exception as e:  # surfaced verbatim, including the failing seed
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
