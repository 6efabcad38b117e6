"""Experiment orchestration: profile -> synthesis -> estimation -> decimation -> scores.

An experiment run scores every configured algorithm at the full internal
rate, under adaptive decimation, and under fixed-divisor baselines, on a
common dense evaluation grid, then writes comparison tables and plot data.
All steps are deterministic: two runs with the same configuration produce
byte-identical artifacts.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .decimator import DecisionRecord, Thresholds, decimate_stream, reconstruct
from .errors import ConfigError, InvalidInputError, ProfileError
from .estimators import (
    EstimatorConfig,
    EstimatorKind,
    MeasurementTriplet,
    run_estimator,
)
from .metrics import TRE_FORMULAS, TrackingReport, throughput_stats, tracking_indices
from .waveform import AnchorSeries, GroundTruth, eval_reference, synth_three_phase

KNOWN_ALGORITHMS = ("p_iec", "i_ipdft")
AMPLITUDE_QUANTITY = "amplitude_V"
FREQUENCY_QUANTITY = "frequency_Hz"
PROFILE_HEADER = ("quantity", "t_s", "value")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run needs; defaults follow the test setup."""

    profile_path: str
    f0: float = 50.0
    fs: float = 10_000.0
    rr_in: float = 100.0
    phase0: float = 0.0
    algorithms: tuple[str, ...] = ("p_iec", "i_ipdft")
    thresholds: Thresholds = field(default_factory=Thresholds)
    fixed_baselines: tuple[int, ...] = (2,)
    tre_formula: str = "rms"
    output_dir: str = "results"
    ipdft_iterations: int = 3
    emit_decisions: bool = False
    emit_traces: bool = False

    def __post_init__(self):
        if not self.algorithms:
            raise ConfigError("need at least one algorithm")
        for name in self.algorithms:
            if name not in KNOWN_ALGORITHMS:
                raise ConfigError(f"unknown algorithm {name!r}")
        if self.tre_formula not in TRE_FORMULAS:
            raise ConfigError(f"tre_formula must be one of {TRE_FORMULAS}")
        m = self.fs / self.f0
        if abs(m - round(m)) > 1e-9:
            raise ConfigError("fs must be an integer multiple of f0")
        r = self.fs / self.rr_in
        if abs(r - round(r)) > 1e-9:
            raise ConfigError("rr_in must divide fs evenly")
        for d in self.fixed_baselines:
            if int(d) != d or d < 1:
                raise ConfigError("fixed baselines must be positive integer divisors")

    @property
    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(f0=self.f0, fs=self.fs, internal_rate=self.rr_in)

    def kind(self, algorithm: str) -> EstimatorKind:
        return EstimatorKind(algorithm, ipdft_iterations=self.ipdft_iterations)


def bundled_profile_dir():
    return resources.files("pmustream") / "profiles"


def list_profiles() -> list[str]:
    """Names of the profiles shipped with the package."""
    return sorted(p.name[:-4] for p in bundled_profile_dir().iterdir()
                  if p.name.endswith(".csv"))


def resolve_profile(name_or_path: str) -> Path:
    """Accept a filesystem path or the name of a bundled profile."""
    path = Path(name_or_path)
    if path.exists():
        return path
    stem = name_or_path[:-4] if name_or_path.endswith(".csv") else name_or_path
    candidate = bundled_profile_dir() / f"{stem}.csv"
    if candidate.is_file():
        return Path(str(candidate))
    raise ProfileError(f"profile {name_or_path!r} is neither a file nor a bundled profile")


def parse_profile(path: str | Path) -> tuple[AnchorSeries, AnchorSeries]:
    """Read a two-quantity anchor CSV into (amplitude, frequency) series.

    Rows are ``quantity,t_s,value`` with quantity in {amplitude_V,
    frequency_Hz}; ``#`` starts a comment line.  Errors cite the 1-based line
    number in the file.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ProfileError(f"cannot read profile {path}: {exc}") from exc

    columns: dict[str, list[tuple[float, float]]] = {
        AMPLITUDE_QUANTITY: [],
        FREQUENCY_QUANTITY: [],
    }
    header_seen = False
    for row_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if not header_seen:
            if tuple(cells) != PROFILE_HEADER:
                raise ProfileError(
                    f"expected header {','.join(PROFILE_HEADER)!r}, got {line!r}", row=row_no)
            header_seen = True
            continue
        if len(cells) != 3:
            raise ProfileError(f"expected 3 columns, got {len(cells)}", row=row_no)
        quantity, t_text, v_text = cells
        if quantity not in columns:
            raise ProfileError(f"unknown quantity {quantity!r}", row=row_no)
        try:
            t, v = float(t_text), float(v_text)
        except ValueError:
            raise ProfileError(f"non-numeric cell in {line!r}", row=row_no) from None
        if not (math.isfinite(t) and math.isfinite(v)):
            raise ProfileError("time and value must be finite", row=row_no)
        series = columns[quantity]
        if series and t <= series[-1][0]:
            raise ProfileError(
                f"{quantity} time {t} does not increase past {series[-1][0]}", row=row_no)
        series.append((t, v))

    if not header_seen:
        raise ProfileError("profile file has no header row")
    for quantity, rows in columns.items():
        if len(rows) < 2:
            raise ProfileError(f"profile needs at least 2 {quantity} rows")
    amplitude = AnchorSeries.from_points(columns[AMPLITUDE_QUANTITY])
    frequency = AnchorSeries.from_points(columns[FREQUENCY_QUANTITY])
    lo = max(amplitude.domain[0], frequency.domain[0])
    hi = min(amplitude.domain[1], frequency.domain[1])
    if hi <= lo:
        raise ProfileError("amplitude and frequency sections share no common time span")
    return amplitude, frequency


def _mode_label(config: ExperimentConfig, divisor: int | None) -> str:
    if divisor is None:
        return "adaptive"
    rate = config.rr_in / divisor
    return f"{rate:g}fps"


def evaluation_window(config: ExperimentConfig, gt: GroundTruth) -> tuple[int, int, int, int]:
    """Common reporting/evaluation geometry for all configured algorithms.

    Returns (first report index, last report index, left margin, right margin)
    in samples on the fs grid.  The first report is placed past the largest
    estimator warm-up and aligned to the internal reporting interval.
    """
    est = config.estimator_config
    left = max(config.kind(a).left_margin(est) for a in config.algorithms)
    right = max(config.kind(a).right_margin(est) for a in config.algorithms)
    lo, hi = gt.domain
    n_lo = math.ceil(lo * config.fs - 1e-9)
    n_hi = math.floor(hi * config.fs + 1e-9)
    r = est.r
    n_first = math.ceil((n_lo + left) / r) * r
    n_last = n_first + ((n_hi - right - n_first) // r) * r
    if n_last < n_first:
        raise ConfigError("profile span too short for the estimator windows")
    return n_first, n_last, left, right


def run_experiment(config: ExperimentConfig) -> dict[tuple[str, str], TrackingReport]:
    """Execute one experiment and write its artifacts under ``output_dir``."""
    profile = resolve_profile(config.profile_path)
    amplitude, frequency = parse_profile(profile)
    gt = GroundTruth.from_anchors(amplitude, frequency, f0=config.f0,
                                  fs=config.fs, phase0=config.phase0)
    est = config.estimator_config
    n_first, n_last, left, right = evaluation_window(config, gt)
    fs = config.fs
    block = synth_three_phase(gt, (n_first - left) / fs, n_last - n_first + left + right + 1)
    grid = np.arange(n_first, n_last + 1) / fs

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    reports: dict[tuple[str, str], TrackingReport] = {}
    for name in config.algorithms:
        kind = config.kind(name)
        triplets = run_estimator(kind, block, est, n_first / fs, n_last / fs)
        total = len(triplets)

        kept_sets: list[tuple[str, list[MeasurementTriplet], list[DecisionRecord] | None]] = []
        full_label = _mode_label(config, 1)
        kept_sets.append((full_label, list(triplets), None))
        for d in sorted(set(config.fixed_baselines)):
            if d == 1:
                continue
            kept_sets.append((_mode_label(config, d), list(triplets[::d]), None))
        adaptive_kept, records = decimate_stream(triplets, config.thresholds, config.f0)
        kept_sets.append(("adaptive", adaptive_kept, records))

        for mode, kept, records_for_mode in kept_sets:
            series = reconstruct(kept, grid, config.f0, est.ts)
            tre_tve, tre_fe, tre_rfe = tracking_indices(series, gt, config.tre_formula)
            inst_rr: list[tuple[float, float]] = []
            if records_for_mode is not None:
                _, inst_rr = throughput_stats(records_for_mode)
            reports[(name, mode)] = TrackingReport(
                algorithm=name,
                rr_mode=mode,
                tre_tve=tre_tve,
                tre_fe=tre_fe,
                tre_rfe=tre_rfe,
                kept_count=len(kept),
                total_count=total,
                instantaneous_rr=inst_rr,
            )
            if config.emit_traces:
                _write_trace(out_dir / f"trace_{name}_{mode}.csv", series, gt,
                             np.array([m.t for m in kept]), est.ts)

        _write_kept_jsonl(out_dir / f"kept_{name}_adaptive.jsonl", adaptive_kept, records)
        _write_instantaneous_rr(
            out_dir / f"instantaneous_rr_{name}_adaptive.csv",
            reports[(name, "adaptive")].instantaneous_rr,
        )
        if config.emit_decisions:
            _write_decision_log(out_dir / f"decisions_{name}_adaptive.jsonl", triplets, records)

    csv_text, human_text = emit_table(list(reports.values()), config)
    (out_dir / "table.csv").write_text(csv_text, encoding="utf-8")
    (out_dir / "table.txt").write_text(human_text, encoding="utf-8")
    (out_dir / "summary.json").write_text(_summary_json(config, reports), encoding="utf-8")
    return reports


def _mode_order(config: ExperimentConfig) -> list[str]:
    modes = [_mode_label(config, 1)]
    modes += [_mode_label(config, d) for d in sorted(set(config.fixed_baselines)) if d != 1]
    modes.append("adaptive")
    return modes


def emit_table(reports: Sequence[TrackingReport], config: ExperimentConfig) -> tuple[str, str]:
    """Long-format CSV plus human-readable table, in deterministic order."""
    if not reports:
        raise InvalidInputError("nothing to tabulate")
    by_key = {(r.algorithm, r.rr_mode): r for r in reports}
    algorithms = [a for a in config.algorithms if any(k[0] == a for k in by_key)]
    modes = [m for m in _mode_order(config) if any(k[1] == m for k in by_key)]

    index_rows = [
        ("TrE_TVE [%]", lambda r: r.tre_tve),
        ("TrE_FE [mHz]", lambda r: r.tre_fe),
        ("TrE_RFE [Hz/s]", lambda r: r.tre_rfe),
    ]
    csv_lines = ["index,rr_mode,algorithm,value"]
    for label, getter in index_rows:
        for mode in modes:
            for algo in algorithms:
                report = by_key.get((algo, mode))
                if report is not None:
                    csv_lines.append(f"{label},{mode},{algo},{getter(report)!r}")
    for algo in algorithms:
        report = by_key.get((algo, "adaptive")) or by_key[(algo, modes[0])]
        csv_lines.append(f"compression_ratio,adaptive,{algo},{report.compression_ratio!r}")

    width = 14
    header = f"{'Index':<16}{'RR':<12}" + "".join(f"{a:>{width}}" for a in algorithms)
    sep = "-" * len(header)
    human = [header, sep]
    for label, getter in index_rows:
        for mode in modes:
            cells = []
            for algo in algorithms:
                report = by_key.get((algo, mode))
                cells.append(f"{getter(report):>{width}.4g}" if report else " " * width)
            human.append(f"{label:<16}{mode:<12}" + "".join(cells))
        human.append(sep)
    ratio_cells = "".join(
        f"{(by_key.get((a, 'adaptive')) or by_key[(a, modes[0])]).compression_ratio:>{width}.4g}"
        for a in algorithms
    )
    human.append(f"{'Compression':<16}{'adaptive':<12}" + ratio_cells)
    return "\n".join(csv_lines) + "\n", "\n".join(human) + "\n"


def _summary_json(config: ExperimentConfig,
                  reports: dict[tuple[str, str], TrackingReport]) -> str:
    payload = {
        "profile": str(config.profile_path),
        "f0": config.f0,
        "fs": config.fs,
        "rr_in": config.rr_in,
        "thresholds": {
            "delta_tve": config.thresholds.delta_tve,
            "delta_fe": config.thresholds.delta_fe,
            "delta_rfe": config.thresholds.delta_rfe,
        },
        "tre_formula": config.tre_formula,
        "reports": {
            f"{algo}/{mode}": {
                "tre_tve_percent": r.tre_tve,
                "tre_fe_mhz": r.tre_fe,
                "tre_rfe_hz_per_s": r.tre_rfe,
                "kept_count": r.kept_count,
                "total_count": r.total_count,
                "compression_ratio": r.compression_ratio,
            }
            for (algo, mode), r in sorted(reports.items())
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite_or_none(value: float) -> float | None:
    return float(value) if math.isfinite(value) else None


def _kept_payload(m: MeasurementTriplet, binding: str) -> dict:
    return {
        "t": m.t,
        "re": m.phasor.real,
        "im": m.phasor.imag,
        "f": m.frequency,
        "rocof": m.rocof,
        "binding": binding,
    }


def _write_kept_jsonl(path: Path, kept: Sequence[MeasurementTriplet],
                      records: Sequence[DecisionRecord]) -> None:
    bindings = {rec.t: rec.binding_quantity for rec in records if rec.kept}
    lines = [json.dumps(_kept_payload(m, bindings[m.t]), allow_nan=False) for m in kept]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_decision_log(path: Path, triplets: Sequence[MeasurementTriplet],
                        records: Sequence[DecisionRecord]) -> None:
    lines = []
    for m, rec in zip(triplets, records):
        payload = _kept_payload(m, rec.binding_quantity)
        payload["kept"] = rec.kept
        payload["eps"] = (None if rec.epsilon is None
                          else [_finite_or_none(e) for e in rec.epsilon])
        lines.append(json.dumps(payload, allow_nan=False))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_instantaneous_rr(path: Path, series: Sequence[tuple[float, float]]) -> None:
    lines = ["t_s,rr_fps"] + [f"{t!r},{rr!r}" for t, rr in series]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_trace(path: Path, series, gt: GroundTruth,
                 kept_times: np.ndarray, ts: float) -> None:
    ref_phasor, ref_freq, ref_rocof = eval_reference(gt, series.t)
    idx = np.searchsorted(kept_times, series.t + ts / 2.0, side="right") - 1
    kept_flag = np.zeros(series.t.size, dtype=int)
    valid = idx >= 0
    kept_flag[valid] = np.abs(series.t[valid] - kept_times[idx[valid]]) <= ts / 2.0
    columns = (series.t, ref_phasor.real, ref_phasor.imag, np.asarray(ref_freq),
               np.asarray(ref_rocof), series.phasor.real, series.phasor.imag,
               series.frequency, series.rocof)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("t_s,ref_re,ref_im,ref_f,ref_rocof,recon_re,recon_im,recon_f,recon_rocof,kept\n")
        for i in range(series.t.size):
            cells = ",".join(repr(float(col[i])) for col in columns)
            fh.write(f"{cells},{kept_flag[i]}\n")


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    """Read an INI-style experiment file; keyword overrides win over file keys."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc

    exp = parser["experiment"] if parser.has_section("experiment") else {}
    thr = parser["thresholds"] if parser.has_section("thresholds") else {}

    def _split(text: str) -> list[str]:
        return [item.strip() for item in text.split(",") if item.strip()]

    values: dict = {}
    try:
        if "profile" in exp:
            values["profile_path"] = exp["profile"]
        for key, cast in (("f0", float), ("fs", float), ("rr_in", float),
                          ("phase0", float), ("ipdft_iterations", int)):
            if key in exp:
                values[key] = cast(exp[key])
        if "algorithms" in exp:
            values["algorithms"] = tuple(_split(exp["algorithms"]))
        if "fixed_baselines" in exp:
            values["fixed_baselines"] = tuple(int(d) for d in _split(exp["fixed_baselines"]))
        if "tre_formula" in exp:
            values["tre_formula"] = exp["tre_formula"]
        if "out_dir" in exp:
            values["output_dir"] = exp["out_dir"]
        thresholds = Thresholds(
            delta_tve=float(thr.get("delta_tve", Thresholds.delta_tve)),
            delta_fe=float(thr.get("delta_fe", Thresholds.delta_fe)),
            delta_rfe=float(thr.get("delta_rfe", Thresholds.delta_rfe)),
        )
    except (ValueError, InvalidInputError) as exc:
        raise ConfigError(f"bad value in config {path}: {exc}") from exc
    overrides = {k: v for k, v in overrides.items() if v is not None}
    threshold_overrides = {
        k: overrides.pop(k) for k in ("delta_tve", "delta_fe", "delta_rfe")
        if k in overrides
    }
    if threshold_overrides:
        thresholds = replace(thresholds, **threshold_overrides)
    values["thresholds"] = thresholds
    values.update(overrides)
    if "profile_path" not in values:
        raise ConfigError("no profile given (config key 'profile' or --profile)")
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc
