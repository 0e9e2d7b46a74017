"""Command-line surface: gen, train, restore, eval, verify, schedule-dump.

Configuration is a flat key=value text file; the same key=value tokens can
be passed on the command line and take precedence. Unknown keys are
errors. All randomness flows from the root ``seed`` key.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import config as _cfg
from . import degradations, imageio, info, metrics, schedules
from .gradcheck import model_gradcheck
from .model import ModelConfig, build, load_checkpoint, save_checkpoint
from .sampler import SampleConfig, restore, restore_batch, trajectory
from .trainer import TrainConfig, train, batch_loss


class ConfigError(ValueError):
    pass


def _in_range(lo=None, hi=None):
    def check(v):
        if lo is not None and v < lo:
            return False
        if hi is not None and v > hi:
            return False
        return True
    return check


REGISTRY = {
    "seed": (int, None),
    "precision": (str, lambda v: v in ("f32", "f64")),
    "data.n": (int, _in_range(1)),
    "data.kind": (str, lambda v: v in degradations.KINDS),
    "data.size": (int, _in_range(8)),
    "data.channels": (int, lambda v: v in (1, 3)),
    "data.pattern": (str, lambda v: v in degradations.PATTERNS),
    "data.sigma": (float, _in_range(0.0)),
    "data.density": (float, _in_range(0.0, 1.0)),
    "data.radius": (float, _in_range(1e-9)),
    "data.airlight": (float, _in_range(0.0, 1.0)),
    "data.alpha": (float, _in_range(0.0, 1.0)),
    "data.levels": (int, _in_range(2)),
    "model.width": (int, _in_range(1)),
    "model.levels": (int, _in_range(1)),
    "model.time_dim": (int, lambda v: v >= 2 and v % 2 == 0),
    "model.injection": (str, lambda v: v in ("adapter", "add", "concat")),
    "model.adapter_blocks": (int, _in_range(1)),
    "train.iterations": (int, _in_range(1)),
    "train.batch_size": (int, _in_range(1)),
    "train.lr_init": (float, _in_range(0.0)),
    "train.lr_final": (float, _in_range(0.0)),
    "train.beta": (float, _in_range(1e-9)),
    "train.gamma": (float, _in_range(1e-9)),
    "train.y_variant": (str, lambda v: v in schedules.Y_VARIANTS),
    "train.checkpoint_every": (int, _in_range(0)),
    "sample.steps": (int, _in_range(1)),
    "sample.y_seed": (int, None),
    "sample.clamp": (bool, None),
    "eval.window": (int, _in_range(2)),
    "eval.max_val": (float, _in_range(1e-9)),
}

DEFAULTS = {
    "seed": 0,
    "data.n": 8,
    "data.kind": "blur",
    "data.size": 16,
    "data.channels": 1,
    "model.width": 16,
    "model.levels": 2,
    "model.time_dim": 16,
    "model.injection": "adapter",
    "model.adapter_blocks": 1,
    "train.iterations": 100,
    "train.batch_size": 8,
    "train.lr_init": 1e-4,
    "train.lr_final": 1e-6,
    "train.beta": 10.0,
    "train.gamma": 1.75,
    "train.y_variant": "entropy_preserving",
    "train.checkpoint_every": 0,
    "sample.steps": 4,
    "sample.y_seed": 0,
    "sample.clamp": True,
    "eval.window": 8,
    "eval.max_val": 2.0,
}


def _parse_value(key: str, raw: str):
    if key not in REGISTRY:
        raise ConfigError(f"unknown config key {key!r}")
    typ, check = REGISTRY[key]
    try:
        if typ is bool:
            if raw.lower() in ("1", "true", "yes"):
                value = True
            elif raw.lower() in ("0", "false", "no"):
                value = False
            else:
                raise ValueError(raw)
        else:
            value = typ(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {typ.__name__}")
    if check is not None and not check(value):
        raise ConfigError(f"config key {key!r}: value {value!r} out of range")
    return value


def load_config(path: str | None, overrides) -> dict:
    cfg = dict(DEFAULTS)
    lines = []
    if path:
        with open(path) as f:
            lines = [ln.strip() for ln in f]
    for ln in list(lines) + list(overrides or []):
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise ConfigError(f"malformed config line {ln!r}; expected key=value")
        key, raw = ln.split("=", 1)
        cfg[key.strip()] = _parse_value(key.strip(), raw.strip())
    if "precision" in cfg:
        _cfg.set_precision(cfg["precision"])
    return cfg


def _data_params(cfg: dict) -> dict:
    out = {}
    for key in ("sigma", "density", "radius", "airlight", "alpha", "levels"):
        if f"data.{key}" in cfg:
            out[key] = cfg[f"data.{key}"]
    return out


def _spec_family(cfg: dict) -> dict:
    fam = {"kind": cfg["data.kind"], "size": cfg["data.size"],
           "channels": cfg["data.channels"], **_data_params(cfg)}
    if "data.pattern" in cfg:
        fam["pattern"] = cfg["data.pattern"]
    return fam


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(cfg: dict, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    samples = degradations.make_dataset(cfg["data.n"], _spec_family(cfg), cfg["seed"])
    ext = "pgm" if cfg["data.channels"] == 1 else "ppm"
    rows = []
    for i, s in enumerate(samples):
        hq = f"hq_{i:04d}.{ext}"
        lq = f"lq_{i:04d}.{ext}"
        imageio.write_image(os.path.join(out_dir, hq), s.x0)
        imageio.write_image(os.path.join(out_dir, lq), s.x1)
        params = ";".join(f"{k}={v}" for k, v in sorted(s.spec.params.items()))
        rows.append([hq, lq, s.spec.kind, params, s.spec.seed])
    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["path_hq", "path_lq", "kind", "params", "seed"])
        writer.writerows(rows)
    print(f"RESULT gen ok n={len(samples)} dir={out_dir}")
    return 0


def _load_dataset(data_dir: str) -> list:
    manifest = os.path.join(data_dir, "manifest.csv")
    if not os.path.exists(manifest):
        raise FileNotFoundError(f"no manifest.csv in {data_dir}")
    samples = []
    with open(manifest, newline="") as f:
        for row in csv.DictReader(f):
            x0 = imageio.read_image(os.path.join(data_dir, row["path_hq"]))
            x1 = imageio.read_image(os.path.join(data_dir, row["path_lq"]))
            params = {}
            if row["params"]:
                for item in row["params"].split(";"):
                    k, v = item.split("=", 1)
                    params[k] = int(v) if k == "levels" else float(v)
            spec = degradations.DegradationSpec(row["kind"], params, int(row["seed"]))
            samples.append(degradations.PairedSample(x0=x0, x1=x1, spec=spec))
    return samples


def cmd_train(cfg: dict, data_dir: str, out_dir: str, resume: str | None = None) -> int:
    dataset = _load_dataset(data_dir)
    start_step = 0
    if resume:
        model, start_step = load_checkpoint(resume)
    else:
        model = build(ModelConfig(
            in_channels=dataset[0].x0.shape[0], width=cfg["model.width"],
            levels=cfg["model.levels"], time_dim=cfg["model.time_dim"],
            injection_mode=cfg["model.injection"],
            adapter_blocks=cfg["model.adapter_blocks"], seed=cfg["seed"]))
    tcfg = TrainConfig(
        iterations=cfg["train.iterations"], batch_size=cfg["train.batch_size"],
        lr_init=cfg["train.lr_init"], lr_final=cfg["train.lr_final"],
        beta=cfg["train.beta"], gamma=cfg["train.gamma"], seed=cfg["seed"],
        y_variant=cfg["train.y_variant"],
        checkpoint_every=cfg["train.checkpoint_every"], out_dir=out_dir)
    result = train(model, dataset, tcfg, start_step=start_step)
    print(f"RESULT train ok steps={len(result.losses)} "
          f"final_loss={result.losses[-1]:.6e} ckpt={result.checkpoint_path}")
    return 0


def cmd_restore(cfg: dict, ckpt: str, lq_paths, out_dir: str,
                want_trajectory: bool = False) -> int:
    model, _ = load_checkpoint(ckpt)
    os.makedirs(out_dir, exist_ok=True)
    scfg = SampleConfig(steps=cfg["sample.steps"], y_seed=cfg["sample.y_seed"],
                        beta=cfg["train.beta"], gamma=cfg["train.gamma"],
                        y_variant=cfg["train.y_variant"],
                        clamp_output=cfg["sample.clamp"])
    images = [imageio.read_image(p) for p in lq_paths]
    restored = restore_batch(model, images, scfg)
    for src, img in zip(lq_paths, restored):
        name = os.path.basename(src).replace("lq_", "restored_")
        imageio.write_image(os.path.join(out_dir, name), img)
        if want_trajectory:
            x1 = imageio.read_image(src)
            states = trajectory(model, x1, scfg)
            csv_path = os.path.join(out_dir, os.path.splitext(name)[0] + "_trajectory.csv")
            with open(csv_path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["t", "mean", "min", "max"])
                for t, x in states:
                    writer.writerow([f"{t:.6f}", f"{x.mean():.8f}",
                                     f"{x.min():.8f}", f"{x.max():.8f}"])
    print(f"RESULT restore ok n={len(restored)} steps={scfg.steps} dir={out_dir}")
    return 0


def cmd_eval(cfg: dict, restored_dir: str, reference_dir: str,
             out_path: str | None = None) -> int:
    r_files = sorted(f for f in os.listdir(restored_dir) if f.endswith((".pgm", ".ppm")))
    g_files = sorted(f for f in os.listdir(reference_dir) if f.endswith((".pgm", ".ppm")))
    if len(r_files) != len(g_files):
        raise ValueError(f"image count mismatch: {len(r_files)} restored "
                         f"vs {len(g_files)} reference")
    restored = [imageio.read_image(os.path.join(restored_dir, f)) for f in r_files]
    reference = [imageio.read_image(os.path.join(reference_dir, f)) for f in g_files]
    report = metrics.evaluate_pairs(restored, reference, ids=r_files,
                                    max_val=cfg["eval.max_val"], window=cfg["eval.window"])
    rows = report.rows()
    out = out_path or os.path.join(restored_dir, "metrics.csv")
    with open(out, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["image_id", "psnr", "ssim", "mae"])
        for rid, p, s, m in rows:
            writer.writerow([rid, f"{p:.6f}", f"{s:.6f}", f"{m:.8f}"])
    print(f"RESULT eval ok n={len(r_files)} mean_psnr={report.mean_psnr:.4f} "
          f"mean_ssim={report.mean_ssim:.4f} mean_mae={report.mean_mae:.6f} out={out}")
    return 0


def cmd_schedule_dump(cfg: dict, out_path: str, resolution: int = 101) -> int:
    sched = schedules.DegradationSchedule(y_variant=cfg["train.y_variant"],
                                          beta=cfg["train.beta"], gamma=cfg["train.gamma"])
    rows = schedules.schedule_table(sched, resolution)
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "alpha_x", "sigma_x", "sigma_y", "dsigma_y", "lambda"])
        for row in rows:
            writer.writerow([f"{v:.12g}" for v in row])
    print(f"RESULT schedule-dump ok rows={len(rows)} out={out_path}")
    return 0


# ---------------------------------------------------------------------------
# verification suites


def _verify_schedule(cfg: dict) -> bool:
    sched = schedules.DegradationSchedule(beta=cfg["train.beta"], gamma=cfg["train.gamma"])
    ok = True
    ax0, sx0, _, _ = schedules.eval_x(0.0)
    ax1, sx1, _, _ = schedules.eval_x(1.0)
    ok &= ax0 == 1.0 and sx0 == 0.0 and ax1 == 0.0 and sx1 == 1.0
    ok &= schedules.loss_weight(0.0, cfg["train.gamma"]) == 0.0
    ok &= schedules.loss_weight(1.0, cfg["train.gamma"]) == 1.0
    ts = np.linspace(0.0, 1.0, 101)
    lam = np.asarray([schedules.loss_weight(float(t), cfg["train.gamma"]) for t in ts])
    ok &= bool(np.all(np.diff(lam) >= -1e-15))
    sy = np.asarray([schedules.eval_y(float(t), sched)[1] for t in ts])
    ok &= bool(np.all(np.diff(sy) > 0))
    print(f"schedule: boundaries ok={bool(ok)} lambda(0)={lam[0]} lambda(1)={lam[-1]} "
          f"sigma_y range=[{sy[0]:.6f}, {sy[-1]:.6f}]")
    return bool(ok)


def _verify_entropy(cfg: dict) -> bool:
    beta = cfg["train.beta"]
    ref = schedules.entropy_z(0.5, d=1, beta=beta, exact=True)
    ts = np.arange(0.01, 1.0, 0.01)
    dev = max(abs(schedules.entropy_z(float(t), 1, beta, exact=True) - ref) for t in ts)
    reg0 = schedules.entropy_z(0.0, 1, beta)
    reg9 = schedules.entropy_z(0.9, 1, beta)
    ok = dev <= 1e-12 and abs(reg0 - reg9) > 1e-6
    print(f"entropy: constant H={ref:.5f} max_dev={dev:.3e} "
          f"regularized H(0)={reg0:.5f} H(0.9)={reg9:.5f}")
    return ok


def _verify_mi(cfg: dict) -> bool:
    rng = np.random.default_rng(cfg["seed"])
    worst = 0.0
    for _ in range(200):
        n, m = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        j = info.random_joint(n, m, rng)
        pushed = info.push_bijection(j, rng.permutation(n), rng.permutation(m))
        worst = max(worst, abs(info.mutual_info(j) - info.mutual_info(pushed)))
    rep = info.flow_mi_invariance(dim=2, seed=cfg["seed"])
    ok = worst <= 1e-12 and rep.passed
    print(f"mi: 200 bijections max_dev={worst:.3e} flow_report_passed={rep.passed} "
          f"collapse {rep.mi_collapse:.6f} < {rep.mi_reference:.6f}")
    return ok


def _verify_dpi(cfg: dict) -> bool:
    rng = np.random.default_rng(cfg["seed"])
    violations = 0
    for _ in range(500):
        n = int(rng.integers(2, 6))
        px = rng.random(n)
        px /= px.sum()
        a = info.random_stochastic(n, int(rng.integers(2, 6)), rng)
        b = info.random_stochastic(a.shape[1], int(rng.integers(2, 6)), rng)
        mi_xy, mi_xz = info.dpi_chain(px, a, b)
        if mi_xz > mi_xy + 1e-12:
            violations += 1
    print(f"dpi: 500 chains violations={violations}")
    return violations == 0


def _verify_gradcheck(cfg: dict) -> bool:
    with _cfg.precision("f64"):
        model = build(ModelConfig(in_channels=1, width=2, levels=1, time_dim=4,
                                  injection_mode="adapter", seed=cfg["seed"]))
        rng = np.random.default_rng(cfg["seed"])
        x0 = rng.uniform(-1, 1, (2, 1, 8, 8))
        x1 = rng.uniform(-1, 1, (2, 1, 8, 8))
        y1 = rng.standard_normal((2, 1, 8, 8))
        ts = rng.uniform(0.1, 0.9, 2)
        tcfg = TrainConfig(iterations=1, beta=cfg["train.beta"], gamma=cfg["train.gamma"])
        err = model_gradcheck(model, lambda: batch_loss(model, x0, x1, y1, ts, tcfg))
    print(f"gradcheck: params={model.param_count()} max_rel_err={err:.3e}")
    return err <= 1e-4


VERIFY_SUITES = {
    "schedule": _verify_schedule,
    "entropy": _verify_entropy,
    "mi": _verify_mi,
    "dpi": _verify_dpi,
    "gradcheck": _verify_gradcheck,
}


def cmd_verify(cfg: dict, suite: str) -> int:
    suites = list(VERIFY_SUITES) if suite == "all" else [suite]
    ok = True
    for name in suites:
        passed = VERIFY_SUITES[name](cfg)
        print(f"RESULT verify {name} {'ok' if passed else 'FAIL'}")
        ok &= passed
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resflow",
                                     description="degradation-flow restoration engine")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="config override; repeatable")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic paired dataset")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a velocity model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", help="checkpoint to resume from")

    p = sub.add_parser("restore", help="restore degraded images")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, help="override sample.steps (default 4)")
    p.add_argument("--trajectory", action="store_true",
                   help="also emit per-step trajectory CSVs")
    p.add_argument("images", nargs="+")

    p = sub.add_parser("eval", help="compute metrics for restored vs reference")
    p.add_argument("--restored", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out")

    p = sub.add_parser("verify", help="run theory verification suites")
    p.add_argument("suite", choices=list(VERIFY_SUITES) + ["all"])

    p = sub.add_parser("schedule-dump", help="dump schedule coefficients as CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int, default=101)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.command == "gen":
            return cmd_gen(cfg, args.out)
        if args.command == "train":
            return cmd_train(cfg, args.data, args.out, args.resume)
        if args.command == "restore":
            if args.steps is not None:
                cfg["sample.steps"] = _parse_value("sample.steps", str(args.steps))
            return cmd_restore(cfg, args.ckpt, args.images, args.out, args.trajectory)
        if args.command == "eval":
            return cmd_eval(cfg, args.restored, args.reference, args.out)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
        if args.command == "schedule-dump":
            return cmd_schedule_dump(cfg, args.out, args.resolution)
        raise RuntimeError(f"unhandled command {args.command}")
    except (ConfigError, ValueError, FileNotFoundError, FloatingPointError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
