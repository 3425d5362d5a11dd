"""Command-line interface.

Exit codes: 0 success, 1 input or environment error, 2 internal invariant
violation (including a failed gradient check).

Options resolve as command-line flag > ``--config`` JSON file > built-in
default.  Commands that write an output directory also write the resolved
options there as ``run_config.json``.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .autodiff import load_params, save_params
from .errors import InvariantError, SchemaViolation, ShapeMismatch
from .eval import (
    AblationConfig,
    evaluate,
    load_dataset_dir,
    results_json,
    results_table,
    run_ablation,
    standard_benchmark,
    train,
)
from .model import (
    DEFAULT_CONFIG,
    ModelConfig,
    PromptFlags,
    full_model_grad_check,
    init_params,
    params_from_arrays,
)
from .prompts import PromptSet, deserialize_prompts, generate_prompt_set, serialize_prompts
from .raster import BinaryMask, load_mask, save_gray, save_mask
from .synthgen import generate_vessel_tree, indexed_spec, truth_to_json
from .topology import build_graph, graph_to_dot, graph_to_json

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2

# overlay gray levels
_OVERLAY_MASK, _OVERLAY_SKELETON, _OVERLAY_PROMPT = 85, 170, 255


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage mistakes are input errors (exit 1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _json_bytes(doc) -> bytes:
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _resolve(args, defaults: dict) -> dict:
    """Merge flags over the --config file over ``defaults``."""
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(file_cfg, dict):
            raise SchemaViolation("--config must hold a JSON object")
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise SchemaViolation(f"unknown --config keys: {sorted(unknown)}")
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else file_cfg.get(key, default)
    return out


def _model_config(cfg: dict, image_size: int):
    overrides = dict(cfg.get("model") or {})
    unknown = set(overrides) - set(ModelConfig.__dataclass_fields__)
    if unknown:
        raise SchemaViolation(f"unknown model config keys: {sorted(unknown)}")
    overrides.setdefault("image_size", image_size)
    return ModelConfig.from_dict(overrides)


def _flags(text: str):
    names = [n for n in text.split(",") if n]
    return PromptFlags.from_names(names)


def _write_run_config(out_dir: Path, cfg: dict, command: str):
    (out_dir / "run_config.json").write_bytes(_json_bytes({"command": command, **cfg}))


# --- prompts / graph -------------------------------------------------------


def overlay(mask: BinaryMask, ps: PromptSet) -> np.ndarray:
    """Gray-level picture: mask, skeleton on top, prompt points brightest."""
    img = np.where(mask.array, _OVERLAY_MASK, 0).astype(np.uint8)
    img[ps.skeleton.array] = _OVERLAY_SKELETON
    for p in list(ps.bifurcations) + [m.point for m in ps.midpoints]:
        img[p.y, p.x] = _OVERLAY_PROMPT
    return img


def _extract_one(mask_path, out_path, skeleton_path=None, overlay_path=None):
    mask = load_mask(Path(mask_path).read_bytes())
    ps = generate_prompt_set(mask)
    Path(out_path).write_bytes(serialize_prompts(ps))
    if skeleton_path:
        Path(skeleton_path).write_bytes(save_mask(ps.skeleton))
    if overlay_path:
        Path(overlay_path).write_bytes(save_gray(overlay(mask, ps)))
    return ps


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def cmd_prompts_extract(args) -> int:
    src = Path(args.mask)
    if not src.is_dir():
        ps = _extract_one(src, args.out, args.skeleton_out, args.overlay_out)
        print(f"{len(ps.bifurcations)} bifurcations, {len(ps.midpoints)} midpoints -> {args.out}")
        return EXIT_OK
    # directory mode: every *.pgm / *.png in --mask; outputs are directories
    out_dirs = [Path(p) if p else None for p in (args.out, args.skeleton_out, args.overlay_out)]
    for d in out_dirs:
        if d is not None:
            d.mkdir(parents=True, exist_ok=True)
    jobs = []
    for f in sorted(src.iterdir()):
        if f.suffix.lower() in (".pgm", ".png"):
            out, skel, over = (None if d is None else d / name for d, name in
                               zip(out_dirs, (f.stem + ".json", f.stem + "_skeleton.pgm", f.stem + "_overlay.pgm")))
            jobs.append((f, out, skel, over))
    _map(_extract_one, jobs, args.workers)
    print(f"{len(jobs)} masks -> {args.out}")
    return EXIT_OK


def cmd_graph_build(args) -> int:
    ps = deserialize_prompts(Path(args.prompts).read_bytes())
    g = build_graph(ps)
    Path(args.out).write_bytes(graph_to_json(g))
    if args.dot:
        Path(args.dot).write_text(graph_to_dot(g), encoding="utf-8")
    print(f"{g.n} nodes, {len(g.edges)} edges -> {args.out}")
    return EXIT_OK


# --- synth ----------------------------------------------------------------

SYNTH_DEFAULTS = {"seed": 0, "n": 10, "size": 64, "branches": 2, "out_dir": None, "workers": 1}


def _synth_one(out_dir: Path, seed: int, index: int, size: int, branches: int):
    mask, truth = generate_vessel_tree(indexed_spec(seed, index, size, branches))
    (out_dir / f"{index:04d}_mask.pgm").write_bytes(save_mask(mask))
    (out_dir / f"{index:04d}_truth.json").write_text(truth_to_json(truth), encoding="utf-8")


def cmd_synth(args) -> int:
    cfg = _resolve(args, SYNTH_DEFAULTS)
    if cfg["out_dir"] is None:
        raise UsageError("synth: --out-dir is required")
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(out, cfg["seed"], i, cfg["size"], cfg["branches"]) for i in range(cfg["n"])]
    _map(_synth_one, jobs, cfg["workers"])
    _write_run_config(out, cfg, "synth")
    print(f"{cfg['n']} samples -> {out}")
    return EXIT_OK


# --- training, evaluation, ablation ---------------------------------------

TRAIN_DEFAULTS = {
    "data": None, "seed": 0, "n": 8, "size": 64, "epochs": 5, "lr": 1e-3,
    "max_steps": None, "prompt_types": "bif,mid,skel", "out_dir": None, "model": None,
}


def _dataset(cfg: dict, n: int):
    if cfg["data"]:
        return load_dataset_dir(cfg["data"])
    return standard_benchmark(cfg["seed"], n, 0, cfg["size"])


def cmd_train_toy(args) -> int:
    cfg = _resolve(args, TRAIN_DEFAULTS)
    if cfg["out_dir"] is None:
        raise UsageError("train-toy: --out-dir is required")
    config = _model_config(cfg, cfg["size"])
    dataset = _dataset(cfg, cfg["n"])
    params = init_params(config)
    result = train(params, dataset, config, _flags(cfg["prompt_types"]), epochs=cfg["epochs"],
                   lr=cfg["lr"], seed=cfg["seed"], max_steps=cfg["max_steps"])

    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "params.bin").write_bytes(save_params(params))
    (out / "config.json").write_text(config.to_json(), encoding="utf-8")
    lines = ["step,loss"] + [f"{i},{v!r}" for i, v in enumerate(result.step_losses)]
    (out / "loss.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_run_config(out, cfg, "train-toy")
    print(f"{len(result.step_losses)} steps, final epoch loss {result.epoch_losses[-1]:.4f} -> {out}")
    return EXIT_OK


def load_checkpoint(path):
    """(params, config) from a train-toy output directory."""

    root = Path(path)
    config = ModelConfig.from_json((root / "config.json").read_text(encoding="utf-8"))
    arrays = load_params((root / "params.bin").read_bytes())
    expected = init_params(config)
    if set(arrays) != set(expected) or any(arrays[k].shape != expected[k].shape for k in arrays):
        raise SchemaViolation("checkpoint parameters do not match its config")
    return params_from_arrays(arrays), config


EVAL_DEFAULTS = {"checkpoint": None, "data": None, "prompt_types": "bif,mid,skel", "out": None}


def cmd_eval(args) -> int:
    cfg = _resolve(args, EVAL_DEFAULTS)
    if cfg["checkpoint"] is None or cfg["data"] is None:
        raise UsageError("eval: --checkpoint and --data are required")
    params, config = load_checkpoint(cfg["checkpoint"])
    dataset = load_dataset_dir(cfg["data"])
    for s in dataset:
        if s.image.shape != (config.image_size, config.image_size):
            raise ShapeMismatch(
                f"dataset image {s.image.shape} does not match checkpoint image_size {config.image_size}"
            )
    rows = evaluate(params, dataset, config, _flags(cfg["prompt_types"]))
    report = {
        "dice": float(np.mean([r["dice"] for r in rows])),
        "iou": float(np.mean([r["iou"] for r in rows])),
        "n": len(rows),
        "per_image": rows,
    }
    if cfg["out"]:
        Path(cfg["out"]).write_bytes(_json_bytes(report))
    print(f"dice {report['dice']:.4f}  iou {report['iou']:.4f}  n {report['n']}")
    return EXIT_OK


ABLATE_DEFAULTS = {
    "data": None, "seed": 42, "n_train": 200, "n_test": 50, "size": 64, "epochs": 30,
    "lr": 1e-3, "out_dir": None, "model": None,
}


def cmd_ablate(args) -> int:
    cfg = _resolve(args, ABLATE_DEFAULTS)
    if cfg["out_dir"] is None:
        raise UsageError("ablate: --out-dir is required")
    config = _model_config(cfg, cfg["size"])
    dataset = _dataset(cfg, cfg["n_train"] + cfg["n_test"])
    ac = AblationConfig(seed=cfg["seed"], epochs=cfg["epochs"], lr=cfg["lr"], n_test=cfg["n_test"], model=config)
    rows = run_ablation(ac, dataset, progress=lambda r: print(f"  {r.flags}: dice {r.dice:.4f}", file=sys.stderr))
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    table = results_table(rows)
    (out / "ablation.json").write_text(results_json(rows), encoding="utf-8")
    (out / "ablation.txt").write_text(table, encoding="utf-8")
    _write_run_config(out, cfg, "ablate")
    sys.stdout.write(table)
    return EXIT_OK


GRADCHECK_DEFAULTS = {"seed": 0, "coords": 4, "tol": 1e-4, "out": None, "model": None}


def cmd_gradcheck(args) -> int:
    cfg = _resolve(args, GRADCHECK_DEFAULTS)
    config = _model_config(cfg, DEFAULT_CONFIG.image_size)
    report = full_model_grad_check(config, seed=cfg["seed"], coords_per_param=cfg["coords"], tol=cfg["tol"])
    doc = {
        "max_rel_err": report.max_rel_err,
        "passed": report.passed,
        "worst_param": report.worst_param,
        "params": {k: r.max_rel_err for k, r in sorted(report.per_param.items())},
    }
    if cfg["out"]:
        Path(cfg["out"]).write_bytes(_json_bytes(doc))
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} max_rel_err {report.max_rel_err:.3e} (worst {report.worst_param}, "
          f"{len(report.per_param)} tensors, tol {cfg['tol']:g})")
    return EXIT_OK if report.passed else EXIT_INVARIANT


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vessam", description="Vessel prompt extraction and toy multi-prompt segmentation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    prompts = sub.add_parser("prompts", help="prompt extraction")
    psub = prompts.add_subparsers(dest="action", required=True, parser_class=_Parser)
    ex = psub.add_parser("extract", help="mask -> PromptSet JSON (a directory of masks is also accepted)")
    ex.add_argument("--mask", required=True, help="PGM/PNG mask file, or a directory of them")
    ex.add_argument("--out", required=True, help="PromptSet JSON path (a directory in directory mode)")
    ex.add_argument("--skeleton-out", help="skeleton PGM path")
    ex.add_argument("--overlay-out", help="overlay PGM path: mask gray, skeleton lighter, prompts white")
    ex.add_argument("--workers", type=int, default=1, help="processes for directory mode")
    ex.set_defaults(func=cmd_prompts_extract)

    graph = sub.add_parser("graph", help="vessel graph construction")
    gsub = graph.add_subparsers(dest="action", required=True, parser_class=_Parser)
    gb = gsub.add_parser("build", help="PromptSet JSON -> graph JSON")
    gb.add_argument("--prompts", required=True)
    gb.add_argument("--out", required=True)
    gb.add_argument("--dot", help="also write Graphviz DOT")
    gb.set_defaults(func=cmd_graph_build)

    def common(sp):
        sp.add_argument("--config", help="JSON file of option defaults (flags override it)")

    sy = sub.add_parser("synth", help="write synthetic masks and ground-truth branch points")
    sy.add_argument("--seed", type=int)
    sy.add_argument("--n", type=int)
    sy.add_argument("--size", type=int)
    sy.add_argument("--branches", type=int)
    sy.add_argument("--out-dir")
    sy.add_argument("--workers", type=int)
    common(sy)
    sy.set_defaults(func=cmd_synth)

    tr = sub.add_parser("train-toy", help="train on a synthetic or on-disk dataset")
    tr.add_argument("--data", help="dataset directory (default: synthetic)")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--n", type=int, help="synthetic sample count")
    tr.add_argument("--size", type=int, help="synthetic image size and model image_size")
    tr.add_argument("--epochs", type=int)
    tr.add_argument("--lr", type=float)
    tr.add_argument("--max-steps", type=int)
    tr.add_argument("--prompt-types", help="comma list from bif,mid,skel")
    tr.add_argument("--out-dir")
    common(tr)
    tr.set_defaults(func=cmd_train_toy)

    ab = sub.add_parser("ablate", help="six-configuration prompt ablation")
    ab.add_argument("--data", help="dataset directory (default: standard synthetic benchmark)")
    ab.add_argument("--seed", type=int)
    ab.add_argument("--n-train", type=int)
    ab.add_argument("--n-test", type=int)
    ab.add_argument("--size", type=int)
    ab.add_argument("--epochs", type=int)
    ab.add_argument("--lr", type=float)
    ab.add_argument("--out-dir")
    common(ab)
    ab.set_defaults(func=cmd_ablate)

    ev = sub.add_parser("eval", help="score a train-toy checkpoint on a dataset directory")
    ev.add_argument("--checkpoint", help="train-toy output directory")
    ev.add_argument("--data", help="dataset directory")
    ev.add_argument("--prompt-types")
    ev.add_argument("--out", help="JSON report path")
    common(ev)
    ev.set_defaults(func=cmd_eval)

    gc = sub.add_parser("gradcheck", help="full-model finite-difference gradient check")
    gc.add_argument("--seed", type=int)
    gc.add_argument("--coords", type=int, help="coordinates per parameter tensor")
    gc.add_argument("--tol", type=float)
    gc.add_argument("--out", help="JSON report path")
    common(gc)
    gc.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InvariantError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, OSError) as exc:
        # InputError subclasses ValueError; JSON decode errors do too
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
