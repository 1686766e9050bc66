"""Monte Carlo BER harness with paired random streams.

Every trial (subframe) owns three random substreams derived from
``(master_seed, trial_index, purpose)`` with purposes bits / channel /
noise. Estimator choice never touches the streams, so all estimators see
identical channels and noise (paired comparison), and results do not
depend on how trials are scheduled across workers: trials are processed in
fixed-size chunks whose boundaries depend only on the trial count, partial
sums are reduced in chunk order, and the noise stream is drawn once per
trial at unit variance and scaled per SNR point. Repeated runs of the same
configuration therefore produce byte-identical CSV files at any worker
count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import (
    ChannelRealization,
    NoiseSpec,
    PowerDelayProfile,
    apply_channel,
    build_profile,
    complex_normal,
    load_profile,
)
from .estimators import (
    ESTIMATOR_IDS,
    ConventionalParams,
    conventional_estimate,
    equalize,
    estimator_mse,
    ideal_estimate,
    ls_nearest_estimate,
    multi_symbol_estimate,
)
from .phy import (
    GridConfig,
    build_grid,
    extract_pilot_ls,
    generate_pilots,
    ofdm_demodulate,
    ofdm_modulate,
    qpsk_demodulate,
    qpsk_modulate,
)

__all__ = [
    "SimConfig",
    "TrialResult",
    "SubframeState",
    "BerRecord",
    "GapReport",
    "CSV_HEADER",
    "awgn_qpsk_ber",
    "resolve_profile",
    "simulate_subframe",
    "run_trial",
    "sweep",
    "gap_report",
    "write_csv",
    "read_csv",
    "write_gaps",
]

# Stream purposes; part of the reproducibility contract.
_BITS, _CHANNEL, _NOISE = 0, 1, 2

# Trials per processing chunk. Fixed so that chunk boundaries, and with
# them all floating-point reduction orders, are independent of the worker
# count. Changing this constant changes nothing statistically but shifts
# results in the last ulp, so treat it as part of the output contract.
_CHUNK = 256

_DEFAULT_SNRS = tuple(float(s) for s in np.linspace(0.0, 30.0, 13))


@dataclass(frozen=True)
class SimConfig:
    """Fully resolved sweep description; everything a run needs."""

    grid: GridConfig = GridConfig()
    profile: str = "etu"
    sample_rate_hz: float = 7.68e6
    snr_points_db: tuple[float, ...] = _DEFAULT_SNRS
    subframes_per_point: int = 10_000
    estimators: tuple[str, ...] = ("ideal", "conv-perfect", "conv-inaccurate", "proposed")
    master_seed: int = 12345
    c: float = 2.0
    th_perfect: int = 39
    th_inaccurate: int = 19
    fading: bool = True

    def __post_init__(self) -> None:
        if not self.snr_points_db:
            raise ValueError("need at least one SNR point")
        if any(b <= a for a, b in zip(self.snr_points_db, self.snr_points_db[1:])):
            raise ValueError("SNR points must be strictly increasing")
        if self.subframes_per_point < 1:
            raise ValueError("subframes_per_point must be positive")
        if not self.estimators:
            raise ValueError("need at least one estimator")
        unknown = [e for e in self.estimators if e not in ESTIMATOR_IDS]
        if unknown:
            raise ValueError(f"unknown estimators {unknown}; known ids are {ESTIMATOR_IDS}")
        if len(set(self.estimators)) != len(self.estimators):
            raise ValueError("estimator list contains duplicates")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        if "proposed" in self.estimators and self.grid.n_symbols < 2:
            raise ValueError("the proposed estimator needs at least 2 symbols per block")
        for th in (self.th_perfect, self.th_inaccurate):
            if not 0 <= th <= self.grid.n_pilots - 1:
                raise ValueError(f"threshold {th} outside [0, {self.grid.n_pilots - 1}]")
        if self.c <= 0:
            raise ValueError("c must be positive")


@dataclass(eq=False)
class TrialResult:
    """Outcome of one estimator on one subframe at one SNR point."""

    estimator_id: str
    snr_db: float
    trial_index: int
    bit_errors: int
    total_bits: int
    mse: float
    sigma2_hat: float | None


@dataclass(eq=False)
class SubframeState:
    """Everything observable about one simulated subframe (for inspection)."""

    trial_index: int
    snr_db: float
    bits: np.ndarray
    pilots: np.ndarray
    tx_grid: np.ndarray
    tx_samples: np.ndarray
    rx_samples: np.ndarray
    rx_grid: np.ndarray
    pilot_ls: np.ndarray
    realization: ChannelRealization
    noise: NoiseSpec


def resolve_profile(config: SimConfig) -> PowerDelayProfile:
    """Map the config's profile string to a builtin name or a file path."""
    from .channel import BUILTIN_PROFILES

    if config.profile.lower() in BUILTIN_PROFILES:
        return build_profile(config.profile, config.sample_rate_hz)
    return load_profile(config.profile, config.sample_rate_hz)


def awgn_qpsk_ber(snr_db: float) -> float:
    """Closed-form uncoded QPSK bit error rate over AWGN.

    ``snr_db`` is the per-sample SNR; unit-power QPSK puts half of it per
    bit, so this is Q(sqrt(2 Eb/N0)) with Eb/N0 = SNR/2.
    """
    eb_n0 = 10.0 ** (float(snr_db) / 10.0) / 2.0
    return 0.5 * math.erfc(math.sqrt(eb_n0))


# ---------------------------------------------------------------------------
# Chunked simulation engine
# ---------------------------------------------------------------------------


def _trial_rng(seed: int, trial: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng((seed, int(trial), purpose))


@dataclass(eq=False)
class _ChunkState:
    trials: np.ndarray
    bits: np.ndarray
    tx_grid: np.ndarray
    tx_samples: np.ndarray
    clean_samples: np.ndarray
    unit_noise: np.ndarray
    realization: ChannelRealization


def _draw_chunk(
    config: SimConfig, profile: PowerDelayProfile, pilots: np.ndarray, trials: np.ndarray
) -> _ChunkState:
    """Draw bits, channel, and unit-variance noise for a block of trials."""
    grid = config.grid
    n_trials = len(trials)
    n_taps = len(profile.tap_delays)
    amplitudes = np.sqrt(np.array(profile.tap_powers))
    bits = np.empty((n_trials, grid.data_bits_per_block), dtype=np.int64)
    unit_noise = np.empty((n_trials, grid.samples_per_block), dtype=np.complex128)
    gains = np.empty((n_trials, n_taps), dtype=np.complex128)
    for j, trial in enumerate(trials):
        bits[j] = _trial_rng(config.master_seed, trial, _BITS).integers(
            0, 2, grid.data_bits_per_block
        )
        if config.fading:
            rng = _trial_rng(config.master_seed, trial, _CHANNEL)
            gains[j] = amplitudes * complex_normal(rng, n_taps, 1.0)
        unit_noise[j] = complex_normal(
            _trial_rng(config.master_seed, trial, _NOISE), grid.samples_per_block, 1.0
        )
    if not config.fading:
        gains[:] = amplitudes
    realization = ChannelRealization.from_taps(
        np.array(profile.tap_delays), gains, grid.n_subcarriers
    )
    tx_grid = build_grid(qpsk_modulate(bits), pilots, grid)
    tx_samples = ofdm_modulate(tx_grid, grid)
    clean = apply_channel(tx_samples, realization, grid.cp_len)
    return _ChunkState(trials, bits, tx_grid, tx_samples, clean, unit_noise, realization)


def _receive(state: _ChunkState, noise: NoiseSpec, grid: GridConfig, pilots: np.ndarray):
    rx_samples = state.clean_samples + np.sqrt(noise.sigma2) * state.unit_noise
    rx_grid = ofdm_demodulate(rx_samples, grid)
    pilot_ls = extract_pilot_ls(rx_grid, pilots, grid)
    return rx_samples, rx_grid, pilot_ls


def _evaluate(
    estimator_id: str,
    config: SimConfig,
    state: _ChunkState,
    rx_grid: np.ndarray,
    pilot_ls: np.ndarray,
):
    """Per-trial bit errors, estimator MSE, and noise estimate for one id."""
    grid = config.grid
    n = grid.n_subcarriers
    if estimator_id == "ideal":
        estimate = ideal_estimate(state.realization)
        eq = equalize(rx_grid, estimate, grid)
        mse = np.zeros(len(state.trials))
        sigma2 = None
    elif estimator_id == "proposed":
        estimate = multi_symbol_estimate(pilot_ls, n)
        eq = equalize(rx_grid, estimate, grid)
        mse = estimator_mse(estimate, state.realization)
        sigma2 = np.asarray(estimate.noise.sigma2_hat)
    elif estimator_id in ("conv-perfect", "conv-inaccurate"):
        th = config.th_perfect if estimator_id == "conv-perfect" else config.th_inaccurate
        params = ConventionalParams(threshold=th, c=config.c)
        parts, mses, sigs = [], [], []
        for m in range(grid.n_symbols):
            estimate = conventional_estimate(pilot_ls[..., m], params, n)
            parts.append(equalize(rx_grid[..., m : m + 1], estimate, grid))
            mses.append(estimator_mse(estimate, state.realization))
            sigs.append(np.asarray(estimate.noise.sigma2_hat))
        eq = np.concatenate(parts, axis=-1)
        mse = np.mean(mses, axis=0)
        sigma2 = np.mean(sigs, axis=0)
    elif estimator_id == "ls-only":
        parts = []
        mses = []
        for m in range(grid.n_symbols):
            estimate = ls_nearest_estimate(pilot_ls[..., m], n)
            parts.append(equalize(rx_grid[..., m : m + 1], estimate, grid))
            mses.append(estimator_mse(estimate, state.realization))
        eq = np.concatenate(parts, axis=-1)
        mse = np.mean(mses, axis=0)
        sigma2 = None
    else:
        raise ValueError(f"unknown estimator id {estimator_id!r}")
    errors = np.count_nonzero(qpsk_demodulate(eq) != state.bits, axis=-1)
    return errors, np.atleast_1d(mse), sigma2


def _chunk_bounds(n_trials: int) -> list[tuple[int, int]]:
    return [(start, min(start + _CHUNK, n_trials)) for start in range(0, n_trials, _CHUNK)]


def _sweep_chunk(args):
    """Worker body: evaluate one trial chunk at every SNR point."""
    config, profile, pilots, start, stop = args
    state = _draw_chunk(config, profile, pilots, np.arange(start, stop))
    partial = {}
    for snr_idx, snr_db in enumerate(config.snr_points_db):
        noise = NoiseSpec.from_snr_db(snr_db)
        _, rx_grid, pilot_ls = _receive(state, noise, config.grid, pilots)
        for estimator_id in config.estimators:
            errors, mse, sigma2 = _evaluate(estimator_id, config, state, rx_grid, pilot_ls)
            partial[snr_idx, estimator_id] = (
                int(errors.sum()),
                float(mse.sum()),
                None if sigma2 is None else float(sigma2.sum()),
            )
    return partial


def simulate_subframe(config: SimConfig, snr_db: float, trial_index: int) -> SubframeState:
    """Run one subframe end to end and keep every intermediate product."""
    profile = resolve_profile(config)
    pilots = generate_pilots(config.master_seed, config.grid)
    state = _draw_chunk(config, profile, pilots, np.array([trial_index]))
    noise = NoiseSpec.from_snr_db(snr_db)
    rx_samples, rx_grid, pilot_ls = _receive(state, noise, config.grid, pilots)
    single = ChannelRealization(
        state.realization.tap_delays,
        state.realization.gains[0],
        state.realization.freq_response[0],
    )
    return SubframeState(
        trial_index=trial_index,
        snr_db=float(snr_db),
        bits=state.bits[0],
        pilots=pilots,
        tx_grid=state.tx_grid[0],
        tx_samples=state.tx_samples[0],
        rx_samples=rx_samples[0],
        rx_grid=rx_grid[0],
        pilot_ls=pilot_ls[0],
        realization=single,
        noise=noise,
    )


def run_trial(
    config: SimConfig, snr_db: float, trial_index: int, estimator_id: str
) -> TrialResult:
    """Evaluate one estimator on one subframe at one SNR point.

    The subframe's random draws depend only on ``(master_seed,
    trial_index)``, never on the estimator, so results pair across
    estimator ids.
    """
    if estimator_id not in ESTIMATOR_IDS:
        raise ValueError(f"unknown estimator id {estimator_id!r}")
    profile = resolve_profile(config)
    pilots = generate_pilots(config.master_seed, config.grid)
    state = _draw_chunk(config, profile, pilots, np.array([trial_index]))
    noise = NoiseSpec.from_snr_db(snr_db)
    _, rx_grid, pilot_ls = _receive(state, noise, config.grid, pilots)
    errors, mse, sigma2 = _evaluate(estimator_id, config, state, rx_grid, pilot_ls)
    return TrialResult(
        estimator_id=estimator_id,
        snr_db=float(snr_db),
        trial_index=trial_index,
        bit_errors=int(errors[0]),
        total_bits=config.grid.data_bits_per_block,
        mse=float(mse[0]),
        sigma2_hat=None if sigma2 is None else float(sigma2[0]),
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BerRecord:
    """Aggregated performance of one estimator at one SNR point."""

    estimator_id: str
    snr_db: float
    total_bits: int
    bit_errors: int
    ber: float
    mean_mse: float
    mean_sigma2_hat: float | None

    @property
    def ber_stderr(self) -> float:
        """Binomial standard error of the measured BER."""
        return math.sqrt(self.ber * (1.0 - self.ber) / self.total_bits)


def sweep(config: SimConfig, *, workers: int | None = None, progress=None) -> list[BerRecord]:
    """Run the full (estimator x SNR) matrix of ``config``.

    ``workers`` caps process parallelism (default: machine parallelism);
    the output is byte-for-byte independent of it. ``progress`` is an
    optional callable receiving one line per completed chunk.
    """
    if workers is not None and workers < 1:
        raise ValueError("workers must be positive")
    n_workers = workers if workers is not None else (os.cpu_count() or 1)
    profile = resolve_profile(config)
    pilots = generate_pilots(config.master_seed, config.grid)
    bounds = _chunk_bounds(config.subframes_per_point)
    tasks = [(config, profile, pilots, start, stop) for start, stop in bounds]
    partials = []
    if n_workers == 1 or len(tasks) == 1:
        for i, task in enumerate(tasks):
            partials.append(_sweep_chunk(task))
            if progress is not None:
                progress(f"chunk {i + 1}/{len(tasks)} done")
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for i, partial in enumerate(pool.map(_sweep_chunk, tasks)):
                partials.append(partial)
                if progress is not None:
                    progress(f"chunk {i + 1}/{len(tasks)} done")

    n_trials = config.subframes_per_point
    total_bits = n_trials * config.grid.data_bits_per_block
    records = []
    for estimator_id in config.estimators:
        for snr_idx, snr_db in enumerate(config.snr_points_db):
            cells = [p[snr_idx, estimator_id] for p in partials]
            errors = sum(c[0] for c in cells)
            mean_mse = math.fsum(c[1] for c in cells) / n_trials
            if cells[0][2] is None:
                mean_sigma2 = None
            else:
                mean_sigma2 = math.fsum(c[2] for c in cells) / n_trials
            records.append(
                BerRecord(
                    estimator_id=estimator_id,
                    snr_db=float(snr_db),
                    total_bits=total_bits,
                    bit_errors=errors,
                    ber=errors / total_bits,
                    mean_mse=mean_mse,
                    mean_sigma2_hat=mean_sigma2,
                )
            )
    return records


# ---------------------------------------------------------------------------
# Gap reports
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class GapReport:
    """SNR positions of BER target crossings, per estimator and pairwise."""

    targets: tuple[float, ...]
    estimator_ids: tuple[str, ...]
    crossings: dict[tuple[float, str], float | None]

    def gap_db(self, target: float, a: str, b: str) -> float | None:
        """SNR(a) - SNR(b) at the target BER; None if either never crosses."""
        snr_a = self.crossings[target, a]
        snr_b = self.crossings[target, b]
        if snr_a is None or snr_b is None:
            return None
        return snr_a - snr_b

    def pairs(self, target: float):
        """All ordered pairs (a, b, gap_db) in configured estimator order."""
        out = []
        for i, a in enumerate(self.estimator_ids):
            for b in self.estimator_ids[i + 1 :]:
                out.append((a, b, self.gap_db(target, a, b)))
        return out


def _crossing_snr(snrs, bers, bit_totals, target: float) -> float | None:
    """First downward crossing of ``target``, interpolated in log10(BER).

    A zero-BER bracket endpoint is floored at half an error in its bit
    count so the interpolation stays finite; curves that never reach the
    target give None.
    """
    for i, ber in enumerate(bers):
        if ber == target:
            return snrs[i]
    for i in range(len(snrs) - 1):
        upper, lower = bers[i], bers[i + 1]
        if upper > target > lower and upper > 0:
            floor = 0.5 / bit_totals[i + 1]
            span = math.log10(max(lower, floor)) - math.log10(upper)
            frac = (math.log10(target) - math.log10(upper)) / span
            return snrs[i] + (snrs[i + 1] - snrs[i]) * frac
    return None


def gap_report(records: list[BerRecord], target_bers=(1e-3,)) -> GapReport:
    """Locate BER target crossings for every estimator curve in ``records``."""
    order: list[str] = []
    for record in records:
        if record.estimator_id not in order:
            order.append(record.estimator_id)
    crossings: dict[tuple[float, str], float | None] = {}
    for estimator_id in order:
        curve = sorted(
            (r for r in records if r.estimator_id == estimator_id), key=lambda r: r.snr_db
        )
        snrs = [r.snr_db for r in curve]
        bers = [r.ber for r in curve]
        totals = [r.total_bits for r in curve]
        for target in target_bers:
            if target <= 0:
                raise ValueError("target BER must be positive")
            crossings[target, estimator_id] = _crossing_snr(snrs, bers, totals, target)
    return GapReport(tuple(target_bers), tuple(order), crossings)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

CSV_HEADER = "estimator,snr_db,total_bits,bit_errors,ber,mean_mse,mean_sigma2_hat"


def _fmt(value: float | None) -> str:
    """Shortest decimal that round-trips the float exactly; None prints nan."""
    if value is None:
        return "nan"
    return repr(float(value))


def write_csv(records: list[BerRecord], path: str | Path, header_comments=()) -> None:
    """Write sweep records, one row per (estimator, SNR) in record order."""
    lines = [f"# {comment}" for comment in header_comments]
    lines.append(CSV_HEADER)
    for r in records:
        lines.append(
            f"{r.estimator_id},{_fmt(r.snr_db)},{r.total_bits},{r.bit_errors},"
            f"{_fmt(r.ber)},{_fmt(r.mean_mse)},{_fmt(r.mean_sigma2_hat)}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> list[BerRecord]:
    """Parse a file written by :func:`write_csv` back into records."""
    records = []
    lines = Path(path).read_text().splitlines()
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body or body[0] != CSV_HEADER:
        raise ValueError(f"{path}: missing expected header {CSV_HEADER!r}")
    for ln in body[1:]:
        fields = ln.split(",")
        if len(fields) != 7:
            raise ValueError(f"{path}: malformed row {ln!r}")
        sigma2 = float(fields[6])
        records.append(
            BerRecord(
                estimator_id=fields[0],
                snr_db=float(fields[1]),
                total_bits=int(fields[2]),
                bit_errors=int(fields[3]),
                ber=float(fields[4]),
                mean_mse=float(fields[5]),
                mean_sigma2_hat=None if math.isnan(sigma2) else sigma2,
            )
        )
    return records


def write_gaps(report: GapReport, path: str | Path) -> None:
    """Write crossings and pairwise gaps; empty value means not reached."""
    lines = ["target_ber,kind,estimator_a,estimator_b,value_db"]
    for target in report.targets:
        for estimator_id in report.estimator_ids:
            snr = report.crossings[target, estimator_id]
            lines.append(f"{_fmt(target)},crossing,{estimator_id},,{'' if snr is None else _fmt(snr)}")
        for a, b, gap in report.pairs(target):
            lines.append(f"{_fmt(target)},gap,{a},{b},{'' if gap is None else _fmt(gap)}")
    Path(path).write_text("\n".join(lines) + "\n")
