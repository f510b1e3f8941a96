"""``disttest`` command line: single tests, power sweeps and sampling."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dist_core import (
    MultiPmf,
    Pmf,
    SiirvSpec,
    convolve_exact,
    convolve_exact_pmd,
    empirical_sampler,
    sampler_for,
    spec_from_dict,
    spec_to_dict,
)
from .errors import ConfigError, DistTestError
from .framework import get_plugin, test_class
from .ledger import Ledger, load_ledger
from .logconcave import test_logconcave
from .pmd import hard_instance, test_pmd
from .siirv import test_siirv

EXIT_ACCEPT, EXIT_REJECT, EXIT_USAGE = 0, 1, 2
CLASSES = ("pbd", "siirv", "pmd", "logconcave")


@dataclass(frozen=True)
class RunConfig:
    cls: str
    n: int | None
    k: int | None
    epsilon: float
    seed: int
    ledger: Ledger


def run_tester(sampler, cfg: RunConfig):
    cls = cfg.cls
    if cls == "pbd":
        if cfg.k not in (None, 2):
            raise ConfigError("class pbd fixes k = 2")
        return test_siirv(sampler, _need(cfg.n, "n"), 2, cfg.epsilon, cfg.seed, cfg.ledger)
    if cls == "siirv":
        return test_siirv(sampler, _need(cfg.n, "n"), _need(cfg.k, "k"), cfg.epsilon, cfg.seed, cfg.ledger)
    if cls == "pmd":
        return test_pmd(sampler, _need(cfg.n, "n"), _need(cfg.k, "k"), cfg.epsilon, cfg.seed, cfg.ledger)
    if cls == "logconcave":
        return test_logconcave(sampler, cfg.n or 0, cfg.epsilon, cfg.seed, cfg.ledger)
    if cls.startswith("plugin:"):
        plugin = get_plugin(cls.split(":", 1)[1], cfg.n, cfg.k, cfg.ledger)
        return test_class(sampler, plugin, cfg.epsilon, cfg.seed, cfg.ledger)
    raise ConfigError(f"unknown class {cls!r}")


def _need(v, name):
    if v is None:
        raise ConfigError(f"--{name} is required for this class")
    return v


def _class_arg(value: str) -> str:
    if value in CLASSES or (value.startswith("plugin:") and len(value) > 7):
        return value
    raise argparse.ArgumentTypeError(f"class must be one of {', '.join(CLASSES)} or plugin:<name>")


def _seed_arg(value: str) -> int:
    s = int(value)
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return s


# ---------------------------------------------------------------- I/O


def read_spec(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read spec file {path}: {exc}") from exc
    return spec_from_dict(obj, errors=ConfigError)


def spec_hash(spec) -> str:
    blob = json.dumps(spec_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def read_samples(path: str) -> np.ndarray:
    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    rows.append([int(t) for t in line.split()])
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: not an integer sample") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read sample file {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"sample file {path} holds no samples")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigError(f"sample file {path} mixes dimensions")
    arr = np.array(rows, dtype=np.int64)
    return arr[:, 0] if arr.shape[1] == 1 else arr


def write_samples(fh, spec, count: int, seed: int) -> None:
    fh.write(f"# disttest samples spec_sha256={spec_hash(spec)} seed={seed} count={count}\n")
    if count == 0:
        return
    x = sampler_for(spec).draw_many(np.random.Generator(np.random.Philox(seed)), count)
    if x.ndim == 1:
        fh.write("\n".join(str(int(v)) for v in x) + "\n")
    else:
        fh.write("\n".join(" ".join(str(int(v)) for v in row) for row in x) + "\n")


# ---------------------------------------------------------------- power


def planted(cls: str, instance: str, n: int, k: int | None):
    """Built-in instances for power sweeps; returns ``(spec, exact_l2_sq or None)``."""
    if cls in ("pbd", "siirv") or cls.startswith("plugin:siirv"):
        k = 2 if cls == "pbd" else (k or 2)
        if instance == "binomial":
            spec = SiirvSpec.iid(n, np.full(k, 1.0 / k)) if k > 2 else SiirvSpec.binomial(n, 0.5)
        elif instance == "uniform":
            spec = Pmf(0, np.full(4 * n + 1, 1.0 / (4 * n + 1)))
        else:
            raise ConfigError(f"unknown instance {instance!r} for {cls}")
        law = convolve_exact(spec) if isinstance(spec, SiirvSpec) else spec
        return spec, float(np.sum(law.weights**2))
    if cls == "pmd":
        k = k or 2
        if instance in ("iid", "hard"):
            spec = hard_instance(n, k)
        elif instance == "composition-uniform":
            if k != 2:
                raise ConfigError("composition-uniform is defined for k = 2")
            pts = np.array([[a, n - a] for a in range(n + 1)])
            return MultiPmf(pts, np.full(n + 1, 1.0 / (n + 1))), 1.0 / (n + 1)
        else:
            raise ConfigError(f"unknown instance {instance!r} for pmd")
        return spec, float(np.sum(convolve_exact_pmd(spec).probs ** 2))
    if cls == "logconcave":
        if instance == "binomial":
            spec = convolve_exact(SiirvSpec.binomial(n, 0.5))
        elif instance == "two-spike":
            w = np.zeros(n + 1)
            w[0] = w[-1] = 0.5
            spec = Pmf(0, w)
        else:
            raise ConfigError(f"unknown instance {instance!r} for logconcave")
        return spec, float(np.sum(spec.weights**2))
    if cls == "plugin:uniform-interval":
        L_min = k or max(1, n // 2)
        if instance == "uniform":
            spec = Pmf(0, np.full(L_min, 1.0 / L_min))
        elif instance == "two-block":
            b = max(1, n // 4)
            w = np.zeros(n)
            w[:b] = w[-b:] = 0.5 / b
            spec = Pmf(0, w)
        else:
            raise ConfigError(f"unknown instance {instance!r} for {cls}")
        return spec, float(np.sum(spec.weights**2))
    raise ConfigError(f"no planted instances for {cls}")


def _trial(args):
    spec, cfg = args
    t0 = time.perf_counter()
    rep = run_tester(sampler_for(spec), cfg)
    return rep.verdict, rep.stage, rep.samples, (time.perf_counter() - t0) * 1000


POWER_COLUMNS = [
    "class", "instance", "n", "k", "epsilon", "trials", "m_total_mean",
    "accept_rate", "reject_stage_histogram", "wall_ms", "l2_norm_sq",
]


def power_rows(cls, instances, ns, k, epss, trials, seed, ledger, workers=1):
    rows = []
    for instance in instances:
        for n in ns:
            spec, l2 = planted(cls, instance, n, k)
            for eps in epss:
                cfgs = [(spec, RunConfig(cls, n, k, eps, (seed + t) % 2**64, ledger)) for t in range(trials)]
                t0 = time.perf_counter()
                if workers > 1:
                    with ProcessPoolExecutor(workers) as pool:
                        res = list(pool.map(_trial, cfgs))
                else:
                    res = [_trial(c) for c in cfgs]
                hist = Counter(stage for verdict, stage, _, _ in res if verdict == "reject")
                rows.append({
                    "class": cls,
                    "instance": instance,
                    "n": n,
                    "k": 2 if cls == "pbd" else k,
                    "epsilon": eps,
                    "trials": trials,
                    "m_total_mean": float(np.mean([r[2] for r in res])),
                    "accept_rate": sum(r[0] == "accept" for r in res) / trials,
                    "reject_stage_histogram": json.dumps(dict(sorted(hist.items())), separators=(",", ":")),
                    "wall_ms": round((time.perf_counter() - t0) * 1000, 3),
                    "l2_norm_sq": repr(l2) if l2 is not None else "",
                })
    return rows


# ---------------------------------------------------------------- commands


def _ints(s):
    return [int(t) for t in s.split(",") if t]


def _floats(s):
    return [float(t) for t in s.split(",") if t]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="disttest", description="Fourier-sparsity membership testers.")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run one tester")
    t.add_argument("--class", dest="cls", required=True, type=_class_arg)
    t.add_argument("--n", type=int)
    t.add_argument("--k", type=int)
    t.add_argument("--eps", type=float, required=True)
    t.add_argument("--seed", type=_seed_arg, default=0)
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="DistSpec JSON file")
    src.add_argument("--samples", help="sample file; the tester resamples it")
    t.add_argument("--out", help="report path (default stdout)")
    t.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")

    p = sub.add_parser("power", help="Monte-Carlo power sweep to CSV")
    p.add_argument("--class", dest="cls", required=True, type=_class_arg)
    p.add_argument("--instance", required=True, help="comma-separated planted instance names")
    p.add_argument("--grid-n", required=True, type=_ints)
    p.add_argument("--k", type=int)
    p.add_argument("--grid-eps", required=True, type=_floats)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=_seed_arg, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV path (default stdout)")

    s = sub.add_parser("sample", help="draw samples from a DistSpec")
    s.add_argument("--spec", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=_seed_arg, default=0)
    s.add_argument("--out")
    return ap


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="") if path else sys.stdout


def cmd_test(args, ledger) -> int:
    if args.spec:
        sampler = sampler_for(read_spec(args.spec))
    else:
        sampler = empirical_sampler(read_samples(args.samples))
    cfg = RunConfig(args.cls, args.n, args.k, args.eps, args.seed, ledger)
    rep = run_tester(sampler, cfg)
    text = rep.to_json(include_timings=args.timings)
    fh = _open_out(args.out)
    try:
        fh.write(text + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_ACCEPT if rep.verdict == "accept" else EXIT_REJECT


def cmd_power(args, ledger) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    rows = power_rows(
        args.cls, args.instance.split(","), args.grid_n, args.k, args.grid_eps,
        args.trials, args.seed, ledger, args.workers,
    )
    fh = _open_out(args.out)
    try:
        w = csv.DictWriter(fh, POWER_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_sample(args, ledger) -> int:
    if args.count < 0:
        raise ConfigError("--count must be nonnegative")
    spec = read_spec(args.spec)
    fh = _open_out(args.out)
    try:
        write_samples(fh, spec, args.count, args.seed)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ledger = load_ledger()
        handler = {"test": cmd_test, "power": cmd_power, "sample": cmd_sample}[args.command]
        return handler(args, ledger)
    except (DistTestError, ValueError) as exc:
        print(f"disttest: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
