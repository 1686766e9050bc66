"""Command-line front end: sweeps, gap reports, and single-trial inspection.

Configuration comes from an optional flat ``key = value`` file plus flag
overrides (flags win). Every sweep CSV embeds the fully resolved config as
comment lines, so any output file documents how to reproduce itself.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from .channel import BUILTIN_PROFILES, build_profile
from .estimators import (
    ConventionalParams,
    conventional_cleaned_cir,
    conventional_estimate,
    multi_symbol_cleaned_cir,
    multi_symbol_estimate,
    multi_symbol_noise_var,
    stack_pilot_cir,
)
from .harness import (
    SimConfig,
    gap_report,
    read_csv,
    simulate_subframe,
    sweep,
    write_csv,
    write_gaps,
)
from .phy import GridConfig

_GRID_KEYS = ("n_subcarriers", "n_pilots", "n_symbols", "cp_len")
_CONFIG_KEYS = _GRID_KEYS + (
    "profile",
    "sample_rate_hz",
    "snr_db",
    "subframes",
    "estimators",
    "seed",
    "c",
    "th_perfect",
    "th_inaccurate",
    "fading",
)


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit 1 instead of argparse's 2."""

    def error(self, message):
        raise ValueError(message)


def _parse_snr_spec(text: str) -> tuple[float, ...]:
    """Either a comma list of dB values or an inclusive start:step:stop range."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"SNR range must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise ValueError(f"SNR range step must be positive, got {step}")
        if stop < start:
            raise ValueError(f"SNR range stop {stop} precedes start {start}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + i * step for i in range(count))
    return tuple(float(p) for p in text.split(","))


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_estimators(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def _load_key_values(path: Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file with ``#`` comments."""
    text = path.read_text()
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        if key in values:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        if key not in _CONFIG_KEYS:
            raise ValueError(
                f"{path}:{lineno}: unknown key {key!r}; known keys: {', '.join(_CONFIG_KEYS)}"
            )
        values[key] = value
    return values


def _build_config(args) -> SimConfig:
    """Merge config-file values and flag overrides into a SimConfig."""
    raw = _load_key_values(Path(args.config)) if getattr(args, "config", None) else {}

    def from_file(key, conv, default):
        if key not in raw:
            return default
        try:
            return conv(raw[key])
        except ValueError as exc:
            raise ValueError(f"config key {key!r}: {exc}") from None

    base = SimConfig()
    grid = GridConfig(
        n_subcarriers=from_file("n_subcarriers", int, base.grid.n_subcarriers),
        n_pilots=from_file("n_pilots", int, base.grid.n_pilots),
        n_symbols=from_file("n_symbols", int, base.grid.n_symbols),
        cp_len=from_file("cp_len", int, base.grid.cp_len),
    )

    def pick(flag_name, key, conv, default):
        flag = getattr(args, flag_name, None)
        if flag is not None:
            return conv(flag) if isinstance(flag, str) else flag
        return from_file(key, conv, default)

    return SimConfig(
        grid=grid,
        profile=pick("profile", "profile", str, base.profile),
        sample_rate_hz=from_file("sample_rate_hz", float, base.sample_rate_hz),
        snr_points_db=pick("snr", "snr_db", _parse_snr_spec, base.snr_points_db),
        subframes_per_point=pick("subframes", "subframes", int, base.subframes_per_point),
        estimators=pick("estimators", "estimators", _parse_estimators, base.estimators),
        master_seed=pick("seed", "seed", int, base.master_seed),
        c=pick("c", "c", float, base.c),
        th_perfect=pick("th_perfect", "th_perfect", int, base.th_perfect),
        th_inaccurate=pick("th_inaccurate", "th_inaccurate", int, base.th_inaccurate),
        fading=from_file("fading", _parse_bool, base.fading),
    )


def _effective_config_lines(config: SimConfig) -> list[str]:
    """The fully resolved configuration, one ``key = value`` line per entry."""
    return [
        f"ofdmce {__version__}",
        f"n_subcarriers = {config.grid.n_subcarriers}",
        f"n_pilots = {config.grid.n_pilots}",
        f"n_symbols = {config.grid.n_symbols}",
        f"cp_len = {config.grid.cp_len}",
        f"profile = {config.profile}",
        f"sample_rate_hz = {config.sample_rate_hz!r}",
        f"snr_db = {','.join(repr(s) for s in config.snr_points_db)}",
        f"subframes = {config.subframes_per_point}",
        f"estimators = {','.join(config.estimators)}",
        f"seed = {config.master_seed}",
        f"c = {config.c!r}",
        f"th_perfect = {config.th_perfect}",
        f"th_inaccurate = {config.th_inaccurate}",
        f"fading = {'true' if config.fading else 'false'}",
    ]


def _print_gap_summary(report) -> None:
    for target in report.targets:
        print(f"BER {target:g} crossings:")
        for estimator_id in report.estimator_ids:
            snr = report.crossings[target, estimator_id]
            text = "not reached" if snr is None else f"{snr:.2f} dB"
            print(f"  {estimator_id:16s} {text}")
        for a, b, gap in report.pairs(target):
            text = "n/a" if gap is None else f"{gap:+.2f} dB"
            print(f"  gap {a} vs {b}: {text}")


def _cmd_sweep(args) -> int:
    config = _build_config(args)
    records = sweep(config, workers=args.workers)
    write_csv(records, args.out, header_comments=_effective_config_lines(config))
    for r in records:
        sigma2 = "-" if r.mean_sigma2_hat is None else f"{r.mean_sigma2_hat:.3e}"
        print(
            f"{r.estimator_id:16s} {r.snr_db:6.2f} dB  ber {r.ber:.6e} "
            f"(+/- {r.ber_stderr:.1e})  errors {r.bit_errors}/{r.total_bits}  "
            f"mse {r.mean_mse:.3e}  sigma2_hat {sigma2}"
        )
    _print_gap_summary(gap_report(records, (1e-3,)))
    print(f"wrote {args.out}")
    return 0


def _cmd_gaps(args) -> int:
    records = read_csv(args.input)
    targets = tuple(float(t) for t in args.targets.split(","))
    report = gap_report(records, targets)
    _print_gap_summary(report)
    if args.out:
        write_gaps(report, args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    config = _build_config(args)
    grid = config.grid
    if not 0 <= args.symbol < grid.n_symbols:
        raise ValueError(f"symbol must lie in [0, {grid.n_symbols - 1}], got {args.symbol}")
    snr_db = float(args.snr) if args.snr is not None else math.inf
    state = simulate_subframe(config, snr_db, args.trial)
    fmt = "{:.12g}".format
    blocks: list[list[str]] = []

    header = [
        f"# subframe: trial = {state.trial_index}, snr_db = {fmt(state.snr_db)}, "
        f"profile = {config.profile}, estimator = {args.estimator}"
    ]
    blocks.append(header)

    block = [
        "# pilot-ls: least-squares channel at pilot subcarriers (row n, re/im per symbol)",
        "n," + ",".join(f"m{m}_re,m{m}_im" for m in range(grid.n_symbols)),
    ]
    for n in range(grid.n_pilots):
        cells = ",".join(
            f"{fmt(state.pilot_ls[n, m].real)},{fmt(state.pilot_ls[n, m].imag)}"
            for m in range(grid.n_symbols)
        )
        block.append(f"{n},{cells}")
    blocks.append(block)

    cir = stack_pilot_cir(state.pilot_ls)
    block = [
        "# stacked-cir: inverse transform of all pilot columns stacked symbol after"
        " symbol; i = n*M + v; columns v > 0 carry no channel energy",
        "i,n,v,re,im",
    ]
    for i, value in enumerate(cir.samples):
        n, v = divmod(i, grid.n_symbols)
        block.append(f"{i},{n},{v},{fmt(value.real)},{fmt(value.imag)}")
    blocks.append(block)

    noise = multi_symbol_noise_var(cir)
    block = [
        "# noise-variance: multi-symbol read-off vs per-symbol tail read-off",
        "scheme,symbol,sample_count,sigma2_hat",
        f"multi-symbol,all,{noise.sample_count},{fmt(noise.sigma2_hat)}",
    ]
    for th in (config.th_perfect, config.th_inaccurate):
        params = ConventionalParams(threshold=th, c=config.c)
        for m in range(grid.n_symbols):
            _, conv_noise = conventional_cleaned_cir(state.pilot_ls[:, m], params)
            block.append(
                f"conventional-th{th},{m},{conv_noise.sample_count},{fmt(conv_noise.sigma2_hat)}"
            )
    blocks.append(block)

    if args.estimator == "proposed":
        cleaned, _ = multi_symbol_cleaned_cir(state.pilot_ls)
        estimate = multi_symbol_estimate(state.pilot_ls, grid.n_subcarriers)
        origin = "multi-symbol block estimate"
    else:
        th = config.th_perfect if args.estimator == "conv-perfect" else config.th_inaccurate
        params = ConventionalParams(threshold=th, c=config.c)
        pilot_col = state.pilot_ls[:, args.symbol]
        cleaned, _ = conventional_cleaned_cir(pilot_col, params)
        estimate = conventional_estimate(pilot_col, params, grid.n_subcarriers)
        origin = f"threshold {th} on symbol {args.symbol}"

    block = [
        f"# post-threshold-cir: denoised impulse response before zero padding ({origin})",
        "l,re,im",
    ]
    for l, value in enumerate(cleaned):
        block.append(f"{l},{fmt(value.real)},{fmt(value.imag)}")
    blocks.append(block)

    truth = state.realization.freq_response
    block = [
        "# estimate-vs-truth: final frequency response next to the true channel",
        "k,est_re,est_im,true_re,true_im",
    ]
    for k in range(grid.n_subcarriers):
        est = estimate.freq_response[k]
        block.append(
            f"{k},{fmt(est.real)},{fmt(est.imag)},{fmt(truth[k].real)},{fmt(truth[k].imag)}"
        )
    blocks.append(block)

    print("\n\n".join("\n".join(block) for block in blocks))
    return 0


def _cmd_profiles(args) -> int:
    print(f"# built-in power delay profiles at sample_rate_hz = {args.sample_rate!r}")
    print("profile,tap,delay_samples,power")
    for name in BUILTIN_PROFILES:
        profile = build_profile(name, args.sample_rate)
        for tap, (delay, power) in enumerate(zip(profile.tap_delays, profile.tap_powers)):
            print(f"{name},{tap},{delay},{power:.12g}")
    return 0


def _add_config_flags(parser, *, estimator_list: bool, snr_help: str) -> None:
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--profile", help="builtin profile name or profile file path")
    parser.add_argument("--seed", type=int, help="master random seed")
    parser.add_argument("--snr", help=snr_help)
    parser.add_argument("--subframes", type=int, help="trials per SNR point")
    parser.add_argument("--c", type=float, help="denoising constant for the threshold schemes")
    parser.add_argument("--th-perfect", dest="th_perfect", type=int, help="delay-spread threshold, accurate case")
    parser.add_argument("--th-inaccurate", dest="th_inaccurate", type=int, help="delay-spread threshold, understated case")
    if estimator_list:
        parser.add_argument("--estimators", help="comma list of estimator ids to run")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ofdmce",
        description="OFDM link simulator and channel-estimation benchmark",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{sweep,gaps,inspect,profiles}")

    sweep_p = sub.add_parser("sweep", help="run a BER sweep and write a CSV of records")
    _add_config_flags(
        sweep_p, estimator_list=True, snr_help="SNR points: comma list or start:step:stop (dB)"
    )
    sweep_p.add_argument("--out", default="sweep.csv", help="output CSV path (default sweep.csv)")
    sweep_p.add_argument("--workers", type=int, help="process count (default: machine parallelism)")
    sweep_p.set_defaults(func=_cmd_sweep)

    gaps_p = sub.add_parser("gaps", help="locate BER target crossings in an existing sweep CSV")
    gaps_p.add_argument("--in", dest="input", required=True, help="sweep CSV to analyze")
    gaps_p.add_argument("--targets", default="1e-3", help="comma list of target BER levels")
    gaps_p.add_argument("--out", help="optional CSV path for the gap table")
    gaps_p.set_defaults(func=_cmd_gaps)

    inspect_p = sub.add_parser("inspect", help="dump one trial's intermediate arrays as labeled CSV blocks")
    _add_config_flags(
        inspect_p,
        estimator_list=False,
        snr_help="SNR in dB for this trial (default inf = noiseless)",
    )
    inspect_p.add_argument("--trial", type=int, default=0, help="trial index to reproduce")
    inspect_p.add_argument(
        "--estimator",
        choices=("proposed", "conv-perfect", "conv-inaccurate"),
        default="proposed",
        help="which denoising pipeline to show in detail",
    )
    inspect_p.add_argument("--symbol", type=int, default=0, help="OFDM symbol for the per-symbol scheme")
    inspect_p.set_defaults(func=_cmd_inspect)

    profiles_p = sub.add_parser("profiles", help="list built-in power delay profiles")
    profiles_p.add_argument("--sample-rate", dest="sample_rate", type=float, default=7.68e6, help="sample rate in Hz")
    profiles_p.set_defaults(func=_cmd_profiles)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
