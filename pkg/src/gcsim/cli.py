"""Command-line front end.

Subcommands::

    gcsim simulate  --config C [--seed S] --out run.ptag
    gcsim correlate run.ptag --out hist.csv [--config C] [binning options]
    gcsim fit data.csv --model lifetime --out fit.json
    gcsim budget [--config C] --out budget.json
    gcsim diffuse --config C --out profile.csv
    gcsim report --config C --out DIR

Exit codes: 0 success, 2 configuration or usage error, 3 I/O or file
format error, 4 numerical failure.
"""

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import formats as fmt
from . import pipelines as pl
from .analysis import deconvolve_lorentzian, efficiency_budget, fit_curve, fit_hom, model_names
from .analysis.peaks import fit_peak_amplitudes, peak_sum
from .config import TAG_KINDS, CorrelateOptions, default_config, load_config
from .correlator import cross_correlate, multiscale_g2, normalize_g2, peak_areas
from .diffusion import diffusivity, run_anneal, uniformity_metric
from .errors import (
    ConfigError,
    DataError,
    FitError,
    FormatError,
    NormalizationError,
    ParameterError,
)
from .rng import PS_PER_S

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
GENERATED_BY = f"gcsim {__version__}"
FORMAT_VERSIONS = {
    "config": 1,
    "tagfile": fmt.TAG_VERSION,
    "histogram_csv": fmt.HISTOGRAM_CSV_VERSION,
    "profile_csv": fmt.PROFILE_CSV_VERSION,
}
PULSED_KINDS = ("hom", "pulsed_g2")


class UsageError(ConfigError):
    pass


# ---------------------------------------------------------------------------
# helpers


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _dump_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"
    with fmt.atomic_open(path, "w") as f:
        f.write(text)


def _meta(cfg=None, **extra):
    m = {"generated-by": GENERATED_BY}
    if cfg is not None:
        m["config-hash"] = cfg.hash
        m["kind"] = cfg.kind
        if cfg.seed is not None:
            m["seed"] = cfg.seed
    m.update({k: v for k, v in extra.items() if v is not None})
    return m


def write_manifest(path, cfg, outputs, info=None):
    manifest = {
        "generated_by": GENERATED_BY,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "config_hash": cfg.hash,
        "resolved": cfg.resolved(),
        "formats": FORMAT_VERSIONS,
        "outputs": {k: {"path": os.path.basename(p), "sha256": _sha256_file(p)} for k, p in sorted(outputs.items())},
        "info": info or {},
    }
    _dump_json(path, manifest)
    return manifest


def _out_path(args, cfg, key, default):
    if getattr(args, "out", None):
        return args.out
    if cfg is not None and key in cfg.output:
        return cfg.output[key]
    return default


def _load(args, kind=None):
    if getattr(args, "config", None):
        cfg = load_config(args.config, getattr(args, "seed", None))
        if kind is not None and cfg.kind not in kind:
            raise ConfigError(f"expected kind {' or '.join(kind)}, got {cfg.kind!r}", "kind")
        return cfg
    return None


# ---------------------------------------------------------------------------
# operations


def run_simulation(cfg):
    """Run the stochastic pipeline of ``cfg``. Returns ``(kind_of_output, payload, info)``."""
    k, s = cfg.kind, cfg.seed
    if k == "hom":
        r = pl.simulate_hom(cfg.emitter, cfg.pulse, cfg.mzi, cfg.detector, s, cfg.hom)
        return "tags", r.tags, r.info
    if k == "pulsed_g2":
        r = pl.simulate_pulsed_g2(cfg.emitter, cfg.pulse, cfg.detector, s, cfg.hbt)
        return "tags", r.tags, r.info
    if k == "cw_g2":
        r = pl.simulate_cw_g2(cfg.emitter, cfg.detector, s, cfg.cw)
        return "tags", r.tags, r.info
    if k == "spectrum_scan":
        det, counts = pl.simulate_spectrum_scan(cfg.emitter, cfg.fp, cfg.detector, s, cfg.scan)
        cols = {"detuning_hz": det / (2 * math.pi), "counts": counts, "sigma": np.sqrt(np.maximum(counts, 1))}
        return "data", cols, {"steps": len(counts)}
    if k == "saturation":
        P, rate, sig = pl.simulate_saturation(s, cfg.saturation)
        return "data", {"power_w": P, "rate_cps": rate, "sigma": sig}, {"points": len(P)}
    raise ConfigError(f"kind {k!r} has no simulation; use the budget or diffuse command", "kind")


def write_tags(path, tags, cfg):
    fmt.write_tagfile(path, tags, seed=cfg.seed or 0, config_hash=cfg.hash, channel_count=2)


def correlate_tags(tags, opts: CorrelateOptions, kind=None, threads=1):
    a, b = (tags.on(c) for c in opts.channels)
    if opts.log_decades is not None:
        h = multiscale_g2(a, b, opts.log_decades, opts.points_per_decade, threads, opts.channels)
    else:
        h = cross_correlate(a, b, opts.bin_width_ps, opts.max_delay_ps, threads, opts.channels)
    mode = opts.normalization
    if mode == "auto":
        mode = "pulsed" if kind in PULSED_KINDS else ("cw" if kind is not None else "none")
    if mode == "pulsed":
        if opts.log_decades is not None:
            raise ConfigError("pulsed normalization needs linear bins", "correlate.normalization")
        h = normalize_g2(h, "pulsed", opts.period_ps, opts.half_window_ps)
    elif mode == "cw":
        h = normalize_g2(h, "cw")
    return h


def compute_budget(cfg):
    c = cfg.budget
    T1 = cfg.emitter.lifetime_T1
    out = efficiency_budget(c, T1)
    out.update({"T1": T1, "chain": dataclasses.asdict(c)})
    return out


def run_diffusion(cfg):
    p0, p1 = run_anneal(cfg.implant, cfg.anneal)
    info = {
        "diffusivity_cm2_s": diffusivity(cfg.anneal.temperature),
        "uniformity_initial": uniformity_metric(p0),
        "uniformity": uniformity_metric(p1),
        "dose_relative_drift": p1.integral() / p0.integral() - 1.0 if p0.integral() else 0.0,
    }
    return p0, p1, info


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    cfg = _load(args)
    if cfg is None:
        raise UsageError("simulate needs --config", "--config")
    if cfg.kind == "budget":
        return cmd_budget(args)
    if cfg.kind == "diffusion":
        return cmd_diffuse(args)
    what, payload, info = run_simulation(cfg)
    if what == "tags":
        out = _out_path(args, cfg, "tags", f"{cfg.kind}.ptag")
        write_tags(out, payload, cfg)
        info = {**info, "records": len(payload)}
    else:
        out = _out_path(args, cfg, "data", f"{cfg.kind}.csv")
        fmt.write_data_csv(out, payload, _meta(cfg))
    manifest = cfg.output.get("manifest", out + ".manifest.json")
    write_manifest(manifest, cfg, {what: out}, info)
    print(f"wrote {out} and {manifest}")
    return EXIT_OK


def _correlate_options(args, cfg):
    base = cfg.correlate if cfg is not None and "correlate" in cfg.blocks else CorrelateOptions()
    kw = {}
    for name in ("bin_width_ps", "max_delay_ps", "period_ps", "half_window_ps", "points_per_decade"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    if args.normalize is not None:
        kw["normalization"] = args.normalize
    if args.log is not None:
        kw["log_decades"] = tuple(args.log)
    if args.channels is not None:
        kw["channels"] = tuple(args.channels)
    try:
        return dataclasses.replace(base, **kw)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def cmd_correlate(args):
    cfg = _load(args)
    opts = _correlate_options(args, cfg)
    tags, header = fmt.read_tagfile(args.tagfile)
    h = correlate_tags(tags, opts, cfg.kind if cfg else None, args.threads)
    out = _out_path(args, None, "histogram", "histogram.csv")
    meta = {"generated-by": GENERATED_BY, "config-hash": header["config_hash"], "seed": header["seed"],
            "source": os.path.basename(args.tagfile)}
    fmt.write_histogram_csv(out, h, meta)
    print(f"wrote {out} ({h.n_bins} bins, {int(h.counts.sum())} coincidences)")
    return EXIT_OK


def _parse_fixed(items):
    fixed = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--fix expects name=value, got {item!r}", "--fix")
        k, v = item.split("=", 1)
        try:
            fixed[k.strip()] = float(v)
        except ValueError:
            raise UsageError(f"--fix value for {k!r} is not a number", "--fix") from None
    return fixed


def _pick_columns(cols, args):
    names = list(cols)
    x = args.x or names[0]
    if args.y:
        y = args.y
    elif "g2" in cols and np.all(np.isfinite(cols["g2"])):
        y = "g2"
    elif "counts" in cols:
        y = "counts"
    else:
        y = names[1]
    if args.sigma:
        s = args.sigma
    elif y == "g2" and "g2_sigma" in cols:
        s = "g2_sigma"
    elif y == "counts":
        s = None
    elif "sigma" in cols:
        s = "sigma"
    else:
        s = None
    for c in (x, y, s):
        if c is not None and c not in cols:
            raise UsageError(f"column {c!r} not in {names}", "--x/--y/--sigma")
    return x, y, s


def cmd_fit(args):
    cols, meta = fmt.read_data_csv(args.data)
    xname, yname, sname = _pick_columns(cols, args)
    x_scale = args.x_scale if args.x_scale is not None else (1.0 / PS_PER_S if xname.endswith("_ps") else 1.0)
    x = cols[xname] * x_scale
    y = cols[yname]
    sigma = cols[sname] if sname else None
    keep = np.ones(len(x), bool)
    if args.xmin is not None:
        keep &= x >= args.xmin
    if args.xmax is not None:
        keep &= x <= args.xmax
    x, y = x[keep], y[keep]
    sigma = None if sigma is None else sigma[keep]
    fixed = _parse_fixed(args.fix)
    if args.model == "hom":
        fixed.setdefault("T1", 4.6e-9)
        fixed.setdefault("jitter_sigma", 252e-12)
        r = fit_hom(x, y, sigma, T1=fixed.pop("T1"), jitter_sigma=fixed.pop("jitter_sigma"),
                    scale=fixed.pop("scale", None), fixed=fixed)
    else:
        r = fit_curve(args.model, x, y, sigma, fixed=fixed)
    out = _out_path(args, None, "fit", "fit.json")
    extra = {
        "generated_by": GENERATED_BY,
        "config_hash": meta.get("config-hash", ""),
        "source": os.path.basename(args.data),
        "columns": {"x": xname, "y": yname, "sigma": sname, "x_scale": x_scale},
    }
    with fmt.atomic_open(out, "w") as f:
        f.write(r.to_json(**extra) + "\n")
    print(f"wrote {out}: " + ", ".join(f"{k}={v:.6g}" for k, v in r.params.items()))
    return EXIT_OK if r.converged else EXIT_NUMERIC


def cmd_budget(args):
    cfg = _load(args, ("budget",)) or default_config("budget")
    out = _out_path(args, cfg, "budget", "budget.json")
    res = compute_budget(cfg)
    res.update({"generated_by": GENERATED_BY, "config_hash": cfg.hash})
    _dump_json(out, res)
    print(f"wrote {out}: eta_qe >= {res['eta_qe_bound']:.4g}, tau_r <= {res['tau_r_upper'] * 1e9:.4g} ns")
    return EXIT_OK


def cmd_diffuse(args):
    cfg = _load(args, ("diffusion",)) or default_config("diffusion")
    out = _out_path(args, cfg, "profile", "profile.csv")
    _, p1, info = run_diffusion(cfg)
    fmt.write_profile_csv(out, p1, _meta(cfg, **{k.replace("_", "-"): repr(v) for k, v in info.items()}))
    print(f"wrote {out}: uniformity {info['uniformity']:.4f}")
    return EXIT_OK


def _hom_summary(h, cfg, fit_half_window_ps=6000):
    """Fit the central interference peak of a pulsed-normalized histogram.

    Every other peak (including leak peaks at odd laser slots) is fitted
    with the distinguishable-photon template outside the central window and
    subtracted inside it. The coincidence jitter is that of two independent
    detectors, ``sqrt(2) * sigma``. The central scale is fitted: with
    imperfect extinction the central peak holds main-main and leak-leak
    pairs only, so it is not normalized like the far peaks.
    """
    T1 = cfg.emitter.lifetime_T1
    pj = math.sqrt(2) * cfg.detector.jitter_sigma
    slot = cfg.correlate.period_ps // 2
    hw = min(fit_half_window_ps, cfg.correlate.half_window_ps)
    outside = np.abs(h.bin_centers) > hw
    ks, a, _, _, _ = fit_peak_amplitudes(h, slot, T1, pj, mask=outside, all_peaks=True)
    others = peak_sum(h.bin_edges, ks[ks != 0], a[ks != 0], slot, T1, pj)
    keep = ~outside
    F = float(h.meta["far_peak_area"])
    w = h.bin_widths[keep] / PS_PER_S
    y = (h.counts[keep] - others[keep]) / F / w
    s = np.sqrt(np.maximum(h.counts[keep], 1)) / F / w
    r = fit_hom(h.bin_centers[keep] / PS_PER_S, y, s, T1=T1, jitter_sigma=pj, scale=None)
    areas = dict(peak_areas(h, cfg.correlate.period_ps, cfg.correlate.half_window_ps))
    return {
        "central_area": areas.get(0),
        "adjacent_areas": [areas.get(-1), areas.get(1)],
        "fit": r.params,
        "fit_sigmas": r.sigmas,
        "tau_hom_ns": 1e9 / r.params["gamma_hom"],
    }


def _pulsed_summary(h, cfg):
    ks, a, s, bg, bgs = fit_peak_amplitudes(
        h, cfg.correlate.period_ps // 2, cfg.emitter.lifetime_T1, math.sqrt(2) * cfg.detector.jitter_sigma
    )
    even = {int(k): (float(x), float(e)) for k, x, e in zip(ks, a, s) if k % 2 == 0}
    odd = {int(k): (float(x), float(e)) for k, x, e in zip(ks, a, s) if k % 2}
    far = [v[0] for k, v in even.items() if abs(k) > 4]
    ref = float(np.mean(far)) if far else float("nan")
    return {
        "g2_0": even.get(0, (float("nan"),))[0] / ref,
        "odd_over_even": float(np.mean([v[0] for v in odd.values()])) / ref if odd else float("nan"),
        "background_per_bin": bg,
    }


def cmd_report(args):
    cfg = _load(args)
    if cfg is None:
        raise UsageError("report needs --config", "--config")
    outdir = args.out or cfg.output.get("dir", f"report-{cfg.kind}")
    os.makedirs(outdir, exist_ok=True)
    outputs, summary = {}, {}
    path = lambda name: os.path.join(outdir, name)  # noqa: E731
    if cfg.kind in TAG_KINDS:
        _, tags, info = run_simulation(cfg)
        write_tags(path("tags.ptag"), tags, cfg)
        outputs["tags"] = path("tags.ptag")
        h = correlate_tags(tags, cfg.correlate, cfg.kind, args.threads)
        fmt.write_histogram_csv(path("histogram.csv"), h, _meta(cfg))
        outputs["histogram"] = path("histogram.csv")
        summary.update(info)
        if cfg.kind == "hom":
            summary.update(_hom_summary(h, cfg))
        elif cfg.kind == "pulsed_g2":
            summary.update(_pulsed_summary(h, cfg))
        else:
            g = h.g2
            summary.update({"g2_mean": float(np.mean(g)), "g2_min": float(np.min(g)), "g2_max": float(np.max(g))})
    elif cfg.kind == "spectrum_scan":
        _, cols, info = run_simulation(cfg)
        fmt.write_data_csv(path("scan.csv"), cols, _meta(cfg))
        outputs["data"] = path("scan.csv")
        r = fit_curve("lorentzian", cols["detuning_hz"], cols["counts"])
        kappa_hz = cfg.fp.linewidth_kappa / (2 * math.pi)
        summary.update({"fit": r.params, "fit_sigmas": r.sigmas,
                        "emitter_fwhm_hz": deconvolve_lorentzian(r.params["fwhm"], kappa_hz)})
    elif cfg.kind == "saturation":
        _, cols, info = run_simulation(cfg)
        fmt.write_data_csv(path("saturation.csv"), cols, _meta(cfg))
        outputs["data"] = path("saturation.csv")
        r = fit_curve("saturation", cols["power_w"], cols["rate_cps"], cols["sigma"])
        summary.update({"fit": r.params, "fit_sigmas": r.sigmas})
    elif cfg.kind == "diffusion":
        p0, p1, info = run_diffusion(cfg)
        fmt.write_profile_csv(path("initial_profile.csv"), p0, _meta(cfg))
        fmt.write_profile_csv(path("profile.csv"), p1, _meta(cfg))
        outputs.update({"initial_profile": path("initial_profile.csv"), "profile": path("profile.csv")})
        summary.update(info)
    else:
        summary.update(compute_budget(cfg))
    summary.update({"generated_by": GENERATED_BY, "config_hash": cfg.hash})
    _dump_json(path("summary.json"), summary)
    outputs["summary"] = path("summary.json")
    write_manifest(path("manifest.json"), cfg, outputs)
    print(f"wrote report to {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output path (directory for report)")
    common.add_argument("--threads", type=int, default=1, help="correlator worker threads")

    p = argparse.ArgumentParser(prog="gcsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=GENERATED_BY)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="run a stochastic pipeline, write tags or data")

    c = sub.add_parser("correlate", parents=[common], help="histogram a tag file")
    c.add_argument("tagfile")
    c.add_argument("--bin-width-ps", dest="bin_width_ps", type=int)
    c.add_argument("--max-delay-ps", dest="max_delay_ps", type=int)
    c.add_argument("--channels", type=int, nargs=2)
    c.add_argument("--normalize", choices=["auto", "pulsed", "cw", "none"])
    c.add_argument("--period-ps", dest="period_ps", type=int)
    c.add_argument("--half-window-ps", dest="half_window_ps", type=int)
    c.add_argument("--log", type=float, nargs=2, metavar=("D0", "D1"), help="log bins from 10**D0 to 10**D1 s")
    c.add_argument("--points-per-decade", dest="points_per_decade", type=int)

    f = sub.add_parser("fit", parents=[common], help="fit a model to a CSV")
    f.add_argument("data")
    f.add_argument("--model", required=True, choices=model_names())
    f.add_argument("--x")
    f.add_argument("--y")
    f.add_argument("--sigma")
    f.add_argument("--x-scale", dest="x_scale", type=float, help="multiply x (default: ps columns to s)")
    f.add_argument("--xmin", type=float, help="lower x limit after scaling")
    f.add_argument("--xmax", type=float, help="upper x limit after scaling")
    f.add_argument("--fix", action="append", metavar="NAME=VALUE")

    sub.add_parser("budget", parents=[common], help="efficiency budget to JSON")
    sub.add_parser("diffuse", parents=[common], help="anneal an implant profile")
    sub.add_parser("report", parents=[common], help="run an experiment end to end")
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "correlate": cmd_correlate,
    "fit": cmd_fit,
    "budget": cmd_budget,
    "diffuse": cmd_diffuse,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1", "--threads")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"gcsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"gcsim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FitError, NormalizationError, ParameterError, DataError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"gcsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
