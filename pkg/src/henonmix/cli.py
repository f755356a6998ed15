"""Command-line experiment runner.

    henonmix green     --config cfg.toml --out out/
    henonmix sample-mu --config cfg.toml --out out/
    henonmix mixing    --config cfg.toml --out out/
    henonmix clt       --config cfg.toml --out out/
    henonmix verify    --config cfg.toml

Exit codes: 0 success, 1 validation error, 2 verification failure,
3 I/O error.  Re-running with identical config and seeds reproduces the
numeric outputs byte for byte (report.json carries wall-clock timings and
is the one file exempt from that guarantee).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import clt as clt_mod
from . import green as green_mod
from . import mixing as mixing_mod
from . import sampler as sampler_mod
from .config import ConfigError, dump_toml, load_config
from .kernels import BACKEND
from .util import atomic_write_bytes, atomic_write_text

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFY = 2
EXIT_IO = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="henonmix",
        description="Mixing, Green-function and CLT experiments for Henon maps",
    )
    p.add_argument(
        "subcommand",
        choices=["green", "sample-mu", "mixing", "clt", "verify"],
    )
    p.add_argument("--config", required=True, help="TOML experiment config")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument(
        "--threads", type=int, default=1,
        help="worker threads for grid rendering (speed only; outputs identical)",
    )
    p.add_argument(
        "--seed", type=int, default=None,
        help="override sampler.rng_seed from the config",
    )
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.raw.setdefault("sampler", {})["rng_seed"] = int(args.seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"i/o error: cannot create {out}: {exc}", file=sys.stderr)
        return EXIT_IO

    t0 = time.time()
    files: list[str] = []
    try:
        if args.subcommand == "verify":
            return _run_verify(cfg)
        if args.subcommand == "green":
            files = _run_green(cfg, out, args.threads)
        elif args.subcommand == "sample-mu":
            files = _run_sample(cfg, out)
        elif args.subcommand == "mixing":
            files = _run_mixing(cfg, out)
        elif args.subcommand == "clt":
            files = _run_clt(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    echo_path = out / "config_echo.toml"
    atomic_write_text(echo_path, dump_toml(cfg.raw))
    files.append(echo_path.name)
    bundle = {
        "subcommand": args.subcommand,
        "config_fingerprint": cfg.fingerprint(),
        "backend": BACKEND,
        "files": sorted(files),
        "wall_clock_seconds": time.time() - t0,
    }
    atomic_write_text(out / "report.json", json.dumps(bundle, indent=2) + "\n")
    print(f"{args.subcommand}: wrote {len(files)} files to {out}")
    return EXIT_OK


def _run_green(cfg, out: Path, threads: int) -> list[str]:
    g = cfg.green
    window = tuple(g.get("window", [-3.0, 3.0, -3.0, 3.0]))
    resolution = tuple(g.get("resolution", [64, 64]))
    max_iter = int(g.get("max_iter", 100))
    files = []
    for which in ("plus", "minus"):
        render = green_mod.render_green_slice(
            cfg.map, window, resolution, which, max_iter, threads
        )
        stem = f"green_{which}"
        atomic_write_bytes(out / f"{stem}.ppm", green_mod.slice_ppm_bytes(render))
        atomic_write_text(out / f"{stem}.txt", green_mod.slice_sidecar_text(render))
        atomic_write_text(out / f"{stem}.csv", green_mod.slice_csv(render))
        files += [f"{stem}.ppm", f"{stem}.txt", f"{stem}.csv"]
    return files


def _sampler_args(cfg):
    s = cfg.sampler
    if not s:
        raise ConfigError("sampler: section required for this subcommand")
    return dict(
        n=int(s.get("period", 10)),
        budget=int(s.get("budget", 6000)),
        rng_seed=int(s.get("rng_seed", 0)),
        box=s.get("box"),
        tol=float(s.get("tol", 1e-11)),
    )


def _run_sample(cfg, out: Path) -> list[str]:
    kw = _sampler_args(cfg)
    sample = sampler_mod.sample_mu(cfg.map, **kw)
    atomic_write_text(out / "sample.csv", sampler_mod.sample_to_csv(sample))
    atomic_write_text(out / "sample.json", sampler_mod.sample_header_json(sample))
    return ["sample.csv", "sample.json"]


def _load_sample(cfg, out: Path, section: dict):
    name = section.get("sample", "sample.csv")
    csv_path = out / name
    json_path = csv_path.with_suffix(".json")
    if not csv_path.exists() or not json_path.exists():
        raise FileNotFoundError(
            f"sample files {csv_path} / {json_path} not found; produce them "
            f"first with: henonmix sample-mu --config <config> --out {out}"
        )
    sample = sampler_mod.load_sample(
        csv_path.read_text(), json_path.read_text()
    )
    if sample.map_fingerprint != cfg.map.fingerprint():
        raise ConfigError(
            "sample was built for a different map (fingerprint mismatch); "
            "re-run sample-mu with this config"
        )
    return sample


def _run_mixing(cfg, out: Path) -> list[str]:
    m = cfg.mixing
    if not m:
        raise ConfigError("mixing: section required for this subcommand")
    kappa = int(m["kappa"])
    gaps = list(m["gaps"])
    gamma = float(m.get("gamma", 2.0))
    gs = [cfg.observables[nm] for nm in m["observables"]]
    sample = _load_sample(cfg, out, m)
    fit = mixing_mod.decay_curve(sample, cfg.map, gs, kappa, gaps, gamma)
    reports = [
        mixing_mod.multi_correlation(
            sample,
            cfg.map,
            mixing_mod.CorrelationQuery(
                observables=tuple(gs),
                times=tuple(j * gap for j in range(kappa + 1)),
                gamma=gamma,
            ),
        )
        for gap in gaps
    ]
    atomic_write_text(out / "mixing.csv", mixing_mod.correlation_csv(reports, gaps))
    rows = [
        {
            "kappa": rep.kappa,
            "gap": gap,
            "n_times": list(rep.times),
            "estimate": rep.estimate,
            "stderr": rep.stderr,
            "sample_size": rep.sample_size,
            "theoretical_rate": rep.theoretical_rate,
        }
        for rep, gap in zip(reports, gaps)
    ]
    atomic_write_text(out / "mixing.json", json.dumps(rows, indent=2) + "\n")
    def _finite(x):
        import math

        return None if (isinstance(x, float) and not math.isfinite(x)) else x

    payload = {
        "kappa": kappa,
        "gamma": gamma,
        "gaps": list(fit.gaps),
        "estimates": list(fit.estimates),
        "stderrs": list(fit.stderrs),
        "log_abs_correlations": [_finite(v) for v in fit.log_abs_correlations],
        "aliased": list(fit.aliased),
        "used": list(fit.used),
        "slope": _finite(fit.slope),
        "intercept": _finite(fit.intercept),
        "noise_floor": fit.noise_floor,
        "theoretical_rate": mixing_mod.theoretical_rate(kappa, gamma, cfg.map.degree),
        "all_below_noise": fit.all_below_noise,
    }
    atomic_write_text(out / "decay_fit.json", json.dumps(payload, indent=2) + "\n")
    return ["mixing.csv", "mixing.json", "decay_fit.json"]


def _run_clt(cfg, out: Path) -> list[str]:
    c = cfg.clt
    if not c:
        raise ConfigError("clt: section required for this subcommand")
    u = cfg.observables[c["observable"]]
    window = int(c.get("window", 200))
    truncation = int(c.get("truncation", 32))
    sample = _load_sample(cfg, out, c)
    report = clt_mod.clt_test(sample, cfg.map, u, window, truncation)
    payload = {
        "observable": c["observable"],
        "sigma2_green_kubo": report.sigma2_green_kubo,
        "sigma2_batch": report.sigma2_batch,
        "truncation": report.truncation,
        "ks_distance": report.ks_distance,
        "window": report.window,
        "segments": report.segments,
        "degenerate": report.degenerate,
        "max_abs_normalized": report.max_abs_normalized,
        "sample_size": report.sample_size,
    }
    atomic_write_text(out / "clt.json", json.dumps(payload, indent=2) + "\n")
    sums = clt_mod.normalized_sums(sample, u, window)
    atomic_write_text(
        out / "histogram.csv", clt_mod.histogram_csv(sums, report.sigma2_batch)
    )
    from .util import format_float as ff

    atomic_write_text(
        out / "normalized_sums.csv",
        "normalized_sum\n" + "\n".join(ff(v) for v in sums) + "\n",
    )
    return ["clt.json", "histogram.csv", "normalized_sums.csv"]


def _run_verify(cfg) -> int:
    from .verify import run_all

    results, ok = run_all(cfg)
    width = max(len(name) for name, _, _ in results)
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        print(f"{name:<{width}}  {status}{suffix}")
    print(f"verify: {'all checks passed' if ok else 'FAILURES detected'}")
    return EXIT_OK if ok else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
