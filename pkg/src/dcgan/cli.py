"""Command-line interface.

Every command writes its fully resolved settings to ``<out>/config.txt``;
passing that file back with ``--config`` reproduces the run byte for byte.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

from dcgan import io as dio
from dcgan import metrics
from dcgan.datasets import FhnParams, OpinionParams, simulate_fhn, simulate_opinion
from dcgan.model import TrainConfig, branch, decorrelate, load_generator, make_baseline, save_generator, train_sigwgan

log = logging.getLogger("dcgan")

_SIM_DEFAULTS = {"dataset": "opinion", "particles": 0, "input": "", "window": 24, "stride": 1, "seed": 0}
_SAMPLE_DEFAULTS = {"generator": "", "data": "", "q": 10, "chains": 1, "shuffle": False, "seed": 0}
_EVAL_DEFAULTS = {"data": "", "fake": "", "label": "model", "depth": 4, "seed": 0, "skip": ""}


def _train_defaults() -> dict:
    d = {f.name: f.default for f in fields(TrainConfig)}
    d.update({"data": "", "baseline": False, "time_channel": "auto", "clip_norm": 0.0})
    return d


def _resolve(command: str, defaults: dict, args: argparse.Namespace) -> dict:
    """defaults <- config file section <- explicit flags."""
    out = dict(defaults)
    if args.config:
        section = dio.read_kv(args.config).get(command, {})
        for k, v in section.items():
            if k not in out:
                raise dio.FormatError(f"{args.config}: unknown key {k!r} in [{command}]")
            out[k] = dio.coerce(v, defaults[k]) if defaults[k] is not None else v
    for k in defaults:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(path):
    """Path CSV plus the manifest written next to it, if any."""
    p = Path(path)
    if p.is_dir():
        p = p / "data.csv"
    meta = {}
    man = p.parent / "manifest.txt"
    if man.exists():
        meta = dio.read_kv(man).get("dataset", {})
    return dio.read_paths(p, meta)


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    cfg = _resolve("simulate-data", _SIM_DEFAULTS, args)
    out = _out_dir(args)
    ds = cfg["dataset"]
    if ds == "opinion":
        kw = {"seed": cfg["seed"]}
        if cfg["particles"]:
            kw["n_particles"] = cfg["particles"]
        params = OpinionParams(**kw)
        batch = simulate_opinion(params)
        manifest = {"name": "opinion", "init_family": "uniform", **asdict(params)}
    elif ds == "fhn":
        kw = {"seed": cfg["seed"]}
        if cfg["particles"]:
            kw["n_particles"] = cfg["particles"]
        params = FhnParams(**kw)
        batch = simulate_fhn(params)
        manifest = {"name": "fhn", "init_family": "gaussian", **asdict(params)}
    elif ds == "csv":
        if not cfg["input"]:
            raise ValueError("--dataset csv needs --input FILE")
        raw = dio.read_table(cfg["input"])
        batch, (lo, hi) = dio.ingest_windows(raw, cfg["window"], cfg["stride"])
        manifest = {
            "name": "csv", "init_family": "gaussian", "source": cfg["input"],
            "window": cfg["window"], "stride": cfg["stride"],
            "scale_min": [float(v) for v in lo], "scale_max": [float(v) for v in hi],
        }
    else:
        raise ValueError(f"unknown dataset {ds!r}")
    dio.write_paths(batch, out / "data.csv")
    dio.write_kv(out / "manifest.txt", {"dataset": manifest})
    dio.write_kv(out / "config.txt", {"simulate-data": cfg})
    print(f"wrote {len(batch)} paths to {out / 'data.csv'}")
    return 0


def cmd_train(args) -> int:
    defaults = _train_defaults()
    cfg = _resolve("train", defaults, args)
    out = _out_dir(args)
    data = _load_data(cfg["data"])
    tc = {"auto": None, "true": True, "false": False}[str(cfg["time_channel"]).lower()]
    tcfg = TrainConfig(**{
        **{k: cfg[k] for k in defaults if k in {f.name for f in fields(TrainConfig)}},
        "hidden": tuple(cfg["hidden"]),
        "time_channel": tc,
        "clip_norm": cfg["clip_norm"] or None,
        "init_family": data.meta.get("init_family", cfg["init_family"]),
    })
    gen = make_baseline(data, tcfg) if cfg["baseline"] else None
    res = train_sigwgan(data, tcfg, generator=gen)
    save_generator(res.generator, out / "generator")
    with open(out / "loss.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,loss\n")
        for i, v in enumerate(res.losses):
            fh.write(f"{i},{v!r}\n")
    dio.write_kv(out / "config.txt", {"train": cfg})
    final = f"{res.losses[-1]:.5f}" if res.losses else "n/a"
    print(f"trained {len(res.losses)} steps, final loss {final}")
    return 0


def cmd_sample(args) -> int:
    cfg = _resolve("sample", _SAMPLE_DEFAULTS, args)
    out = _out_dir(args)
    gdir = Path(cfg["generator"])
    if (gdir / "generator").is_dir():
        gdir = gdir / "generator"
    if not (gdir / "generator.json").exists():
        raise FileNotFoundError(f"no generator in {cfg['generator']}")
    gen = load_generator(gdir)
    data = _load_data(cfg["data"])
    if cfg["shuffle"]:
        chains = [decorrelate(data, gen, cfg["q"], cfg["seed"], chain=c, shuffle=True) for c in range(cfg["chains"])]
    else:
        chains = branch(data, gen, cfg["q"], cfg["chains"], cfg["seed"])
    for c, b in enumerate(chains):
        dio.write_paths(b, out / f"chain{c}.csv")
    dio.write_kv(out / "config.txt", {"sample": cfg})
    print(f"wrote {len(chains)} chain(s) of {len(data)} paths to {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve("evaluate", _EVAL_DEFAULTS, args)
    out = _out_dir(args)
    real = _load_data(cfg["data"])
    fake = dio.read_paths(cfg["fake"])
    skip = {s.strip() for s in str(cfg["skip"]).split(",") if s.strip()}
    t0 = float(real.times[0])
    ts = tuple(t0 + t for t in metrics.default_timestamps(float(real.times[-1]) - t0))
    rep = metrics.MetricReport(
        label=cfg["label"],
        sig_mmd=None if "sig_mmd" in skip else metrics.sig_mmd_score(real, fake, cfg["depth"]),
        independence=None if "independence" in skip or len(real) != len(fake) else metrics.independence_score(real, fake, ts),
        discriminative=None if "discriminative" in skip else metrics.discriminative_score(real, fake, cfg["seed"]),
        predictive=None if "predictive" in skip else metrics.predictive_score(real, fake, cfg["seed"]),
        timestamps=ts,
        seed=cfg["seed"],
    )
    (out / "report.csv").write_text(metrics.reports_to_csv([rep]), encoding="utf-8")
    dio.write_kv(out / "config.txt", {"evaluate": cfg})
    print(metrics.reports_to_markdown([rep]), end="")
    return 0


def cmd_report(args) -> int:
    reports = []
    for p in args.reports:
        if not Path(p).exists():
            raise FileNotFoundError(f"no such report: {p}")
        reports += metrics.reports_from_csv(Path(p).read_text(encoding="utf-8"))
    md = metrics.reports_to_markdown(reports)
    if args.out:
        out = _out_dir(args)
        (out / "report.md").write_text(md, encoding="utf-8")
        (out / "reports.csv").write_text(metrics.reports_to_csv(reports), encoding="utf-8")
    print(md, end="")
    return 0


# --------------------------------------------------------------------------


def _bool(text: str) -> bool:
    return dio.coerce(text, False)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcgan", description="Directed chain GAN for time series.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="flat key = value file with a section per command")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=out_required, help="output directory")

    s = sub.add_parser("simulate-data", help="simulate a synthetic dataset or ingest a CSV")
    common(s)
    s.add_argument("--dataset", choices=["opinion", "fhn", "csv"])
    s.add_argument("--particles", type=int)
    s.add_argument("--input", help="raw CSV for --dataset csv")
    s.add_argument("--window", type=int)
    s.add_argument("--stride", type=int)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="train a generator with the signature loss")
    common(t)
    t.add_argument("--data", help="path CSV or directory holding data.csv")
    t.add_argument("--depth", type=int)
    t.add_argument("--steps", type=int)
    t.add_argument("--batch", dest="batch_size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--baseline", type=_bool, help="true: neighbor-masked generator")
    t.set_defaults(func=cmd_train)

    sm = sub.add_parser("sample", help="decorrelating walk / branching from data")
    common(sm)
    sm.add_argument("--generator", help="directory written by train")
    sm.add_argument("--data")
    sm.add_argument("--q", type=int)
    sm.add_argument("--chains", type=int)
    sm.add_argument("--shuffle", type=_bool)
    sm.set_defaults(func=cmd_sample)

    e = sub.add_parser("evaluate", help="score generated paths against data")
    common(e)
    e.add_argument("--data")
    e.add_argument("--fake")
    e.add_argument("--label")
    e.add_argument("--depth", type=int)
    e.add_argument("--skip", help="comma-separated scores to skip")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="aggregate report.csv files into a markdown table")
    r.add_argument("reports", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"dcgan: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as e:
        print(f"dcgan: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
