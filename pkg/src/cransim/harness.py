"""Monte Carlo sweeps over SNR, bit depth and receiver, with result files.

A trial is one channel drop.  Its bits and unit-power noise are drawn once
and reused at every grid point, so all receivers, SNRs and bit depths are
compared on matched samples.  Trials are the unit of parallel work and are
aggregated in trial order, which keeps the output independent of the worker
count.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelRealization, draw_channel
from .detection import ModulationScheme, prepare_receiver
from .scenario import FR_BITS, ConfigError, Modulation, SystemConfig, trial_seed
from .sumrate import sum_rate

log = logging.getLogger(__name__)

MODES = ("ber", "sumrate", "both")
CSV_HEADER = ("snr_db", "bits", "receiver", "modulation", "ber", "ber_stderr",
              "sumrate", "sumrate_stderr", "bits_counted", "trials")


def noise_variance(snr_db: float) -> float:
    """sigma_n^2 for unit-power symbols."""
    return 10.0 ** (-snr_db / 10.0)


def grid_points(cfg: SystemConfig):
    """(snr_db, receiver, bits) in report order.  Full-resolution receivers
    appear once, at 16 bits."""
    for snr in cfg.snr_db_list:
        for rec in cfg.sweep_receivers:
            for b in ((FR_BITS,) if rec.full_resolution else sorted(cfg.sweep_bits)):
                yield snr, rec, b


def rate_form(chain) -> str:
    """Sum-rate denominator matching the chain's own distortion model."""
    return "level_aware" if chain.level_aware else "paper"


def zero_channel(channel: ChannelRealization) -> ChannelRealization:
    """Debug hook: the same realization with every coefficient zeroed."""
    return ChannelRealization(H_tilde=np.zeros_like(channel.H_tilde), beta=channel.beta,
                              H_small=channel.H_small, L=channel.L, K=channel.K,
                              N_T=channel.N_T, N_R=channel.N_R)


STAGE_HEADER = ("trial", "snr_db", "bits", "receiver", "stage", "stream", "upsilon",
                "gamma", "rate")


def run_trial(cfg: SystemConfig, trial: int, mode: str = "ber", channel_hook=None,
              stage_log=None) -> dict:
    """Errors, bit counts and sum rates of one trial at every grid point.

    Returns a dict keyed by ``(snr_db, receiver, bits)`` with values
    ``(bit_errors, bits_counted, sum_rate)``; entries not computed in this
    mode are None.  If ``stage_log`` is a list, one row per SIC stage (see
    ``STAGE_HEADER``) is appended to it.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    do_ber = mode in ("ber", "both")
    do_rate = mode in ("sumrate", "both")
    rng = np.random.default_rng(trial_seed(cfg, trial))
    channel = draw_channel(cfg, rng)
    if channel_hook is not None:
        channel = channel_hook(channel)
    n_sym = cfg.packets * cfg.symbols_per_packet
    scheme = ModulationScheme.from_name(cfg.modulation) if do_ber else None
    if do_ber:
        tx_bits = rng.integers(0, 2, size=(cfg.n_streams, n_sym * scheme.bits_per_symbol))
        x = scheme.modulate(tx_bits)
        noise = (rng.standard_normal((cfg.n_antennas, n_sym))
                 + 1j * rng.standard_normal((cfg.n_antennas, n_sym))) / np.sqrt(2)
        clean = channel.H_tilde @ x
    out = {}
    for snr, rec, b in grid_points(cfg):
        s2 = noise_variance(snr)
        chain = prepare_receiver(rec, channel, s2, b, cfg.alt_iterations)
        errors = counted = rate = None
        if do_ber:
            x_hat = chain.detect(clean + np.sqrt(s2) * noise, scheme)
            rx_bits = scheme.demodulate(x_hat)
            errors = int(np.count_nonzero(rx_bits != tx_bits))
            counted = int(tx_bits.size)
        if do_rate and rec.sic:
            breakdown = sum_rate(chain, channel.stream_cells, rate_form(chain))
            rate = breakdown.total
            stages = list(zip(breakdown.streams, breakdown.upsilon, breakdown.gamma,
                              breakdown.rates))
            for a, (s, u, g, r) in enumerate(stages, 1):
                log.debug("trial %d snr %g %s b=%d stage %d stream %d rate %.4g",
                          trial, snr, rec.value, b, a, s, r)
                if stage_log is not None:
                    stage_log.append((trial, float(snr), int(b), rec.value, a, s, u, g, r))
        out[(snr, rec, b)] = (errors, counted, rate)
    return out


@dataclass
class ResultRow:
    snr_db: float
    bits: int
    receiver: str
    modulation: str
    ber: float | None
    ber_stderr: float | None
    sumrate: float | None
    sumrate_stderr: float | None
    bits_counted: int
    trials: int
    config_hash: str = ""

    def csv_fields(self):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)
        return [fmt(getattr(self, k)) for k in CSV_HEADER]


@dataclass
class SimulationReport:
    rows: list
    config: SystemConfig
    mode: str
    completed_trials: list = field(default_factory=list)
    partial: bool = False
    wall_time: float = 0.0
    stage_rows: list = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    def lookup(self, snr_db, receiver, bits) -> ResultRow:
        for row in self.rows:
            if row.snr_db == snr_db and row.receiver == str(getattr(receiver, "value", receiver)) \
                    and row.bits == bits:
                return row
        raise KeyError((snr_db, receiver, bits))


def aggregate(cfg: SystemConfig, mode: str, per_trial: dict) -> list:
    """Fold per-trial results (dict trial -> run_trial output) into rows in
    grid order, summing over trials in ascending trial order."""
    trials = sorted(per_trial)
    rows = []
    modulation = Modulation(cfg.modulation).value
    digest = cfg.config_hash()
    for key in grid_points(cfg):
        snr, rec, b = key
        errors = counted = 0
        rates = []
        for t in trials:
            e, c, r = per_trial[t][key]
            if e is not None:
                errors += e
                counted += c
            if r is not None:
                rates.append(r)
        ber = se = None
        if counted:
            ber = errors / counted
            se = math.sqrt(ber * (1 - ber) / counted)
        rate = rate_se = None
        if rates:
            rate = math.fsum(rates) / len(rates)
            if len(rates) > 1:
                var = math.fsum((r - rate) ** 2 for r in rates) / (len(rates) - 1)
                rate_se = math.sqrt(var / len(rates))
        rows.append(ResultRow(snr_db=float(snr), bits=int(b), receiver=rec.value,
                              modulation=modulation, ber=ber, ber_stderr=se, sumrate=rate,
                              sumrate_stderr=rate_se, bits_counted=counted,
                              trials=len(trials), config_hash=digest))
    return rows


def _trial_job(args):
    cfg, trial, mode, hook, keep_stages = args
    stages = [] if keep_stages else None
    return trial, run_trial(cfg, trial, mode, hook, stages), stages


def run_sweep(cfg: SystemConfig, mode: str = "ber", workers: int = 1,
              channel_hook=None, keep_stages=False) -> SimulationReport:
    """Run every trial of ``cfg`` and aggregate.

    An interrupt stops the sweep and returns a report over the trials that
    finished, flagged ``partial``.  With ``keep_stages`` the report also
    carries the per-stage rate rows of every SIC grid point.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode != "sumrate" and Modulation(cfg.modulation) is Modulation.GAUSSIAN:
        raise ConfigError("BER sweeps need a finite constellation (QPSK or QAM16)",
                          key="modulation")
    if workers < 1:
        raise ValueError("workers must be at least 1")
    start = time.perf_counter()
    done = {}
    stage_rows = []
    partial = False
    jobs = [(cfg, t, mode, channel_hook, keep_stages) for t in range(cfg.trials)]

    def collect(t, res, stages):
        done[t] = res
        stage_rows.extend(stages or ())
        log.info("trial %d/%d done", t + 1, cfg.trials)

    try:
        if workers == 1:
            for job in jobs:
                collect(*_trial_job(job))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                try:
                    for out in pool.map(_trial_job, jobs):
                        collect(*out)
                except KeyboardInterrupt:
                    pool.shutdown(wait=False, cancel_futures=True)
                    raise
    except KeyboardInterrupt:
        partial = True
        log.warning("interrupted after %d of %d trials", len(done), cfg.trials)
    rows = aggregate(cfg, mode, done)
    return SimulationReport(rows=rows, config=cfg, mode=mode, completed_trials=sorted(done),
                            partial=partial, wall_time=time.perf_counter() - start,
                            stage_rows=stage_rows)


def run_ber_sweep(cfg: SystemConfig, workers: int = 1, channel_hook=None) -> SimulationReport:
    return run_sweep(cfg, "ber", workers, channel_hook)


def run_sumrate_sweep(cfg: SystemConfig, workers: int = 1,
                      channel_hook=None) -> SimulationReport:
    return run_sweep(cfg, "sumrate", workers, channel_hook)


def write_csv(rows, path):
    path = Path(path)
    try:
        with path.open("w", newline="") as f:
            out = csv.writer(f, lineterminator="\n")
            out.writerow(CSV_HEADER)
            for row in rows:
                out.writerow(row.csv_fields())
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path) -> list:
    """Parse a results CSV back into :class:`ResultRow` objects."""
    def num(text, kind):
        return None if text == "" else kind(text)
    rows = []
    with Path(path).open(newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for rec in reader:
            rows.append(ResultRow(
                snr_db=float(rec["snr_db"]), bits=int(rec["bits"]), receiver=rec["receiver"],
                modulation=rec["modulation"], ber=num(rec["ber"], float),
                ber_stderr=num(rec["ber_stderr"], float), sumrate=num(rec["sumrate"], float),
                sumrate_stderr=num(rec["sumrate_stderr"], float),
                bits_counted=int(rec["bits_counted"]), trials=int(rec["trials"])))
    return rows


def metadata(report: SimulationReport) -> dict:
    cfg = report.config
    return {
        "config": cfg.to_dict(),
        "config_hash": report.config_hash,
        "master_seed": cfg.master_seed,
        "mode": report.mode,
        "version": __version__,
        "partial": report.partial,
        "completed_trials": len(report.completed_trials),
        "wall_time_s": report.wall_time,
    }


def write_stage_csv(rows, path):
    path = Path(path)
    try:
        with path.open("w", newline="") as f:
            out = csv.writer(f, lineterminator="\n")
            out.writerow(STAGE_HEADER)
            for row in rows:
                out.writerow([repr(v) if isinstance(v, float) else v for v in row])
    except OSError as exc:
        raise OSError(f"cannot write stage rates to {path}: {exc}") from exc


def emit_results(report: SimulationReport, out_dir) -> tuple:
    """Write ``results.csv`` and the ``results.json`` metadata sidecar, plus
    ``stage_rates.csv`` when the report carries per-stage rows.

    The CSV depends only on the report's rows, so it is byte-identical for
    equal reports; timing goes to the sidecar only.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    csv_path = out_dir / "results.csv"
    json_path = out_dir / "results.json"
    write_csv(report.rows, csv_path)
    if report.stage_rows:
        write_stage_csv(report.stage_rows, out_dir / "stage_rates.csv")
    try:
        json_path.write_text(json.dumps(metadata(report), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write metadata to {json_path}: {exc}") from exc
    return csv_path, json_path
