"""Experiment harness: dataset generation, training, BER and complexity sweeps.

Sweeps are paired Monte Carlo runs: every detector sees the identical
channel, symbols, and noise for a given (seed, SNR, trial), so BER and
op-count comparisons are paired rather than independent.  All accumulation
is in exact integers and per-trial generators are derived from the triple
(seed, SNR key, trial index), which makes results byte-identical across
worker counts, checkpoint interruptions, and block sizes.
"""

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import Constellation, bits_diff, constellation_by_name, draw_channel_instance
from .dpp import (DetectorConfig, NoSchedule, baseline_config, default_lambda_schedule,
                  dpp_detect, lambda_lookup)
from .predictor import (DivergedToNonFinite, TrainerConfig, examples_from_streams,
                        load_dataset, load_model, save_dataset, save_model, train)


class SpecError(Exception):
    """Invalid experiment description; message starts with the field name."""


class SweepInterrupted(Exception):
    """A sweep stopped early; progress is in the checkpoint sidecar."""


# detector id -> (nn radius, nn ordering, early termination)
DETECTOR_FLAGS = {
    "se-sd": (False, False, False),
    "dpp-sd": (True, True, True),
    "dpp-sd-radius": (True, False, False),
    "dpp-sd-ordering": (False, True, False),
    "dpp-sd-ordering-et": (False, True, True),
}


@dataclass
class ExperimentSpec:
    """Everything one sweep (or dataset build) needs, mirroring the config keys.

    `lambda1`/`lambda2` override the built-in schedule when both are given;
    `schedule_n_t` borrows the tuned values of another antenna count for
    desk-scale runs.  `noiseless` zeroes the noise vector while keeping its
    draw (and the nominal variance used for the radius), so noisy and
    noiseless runs stay stream-for-stream comparable.
    """

    n_t: int = 8
    n_r: int = 8
    constellation: str = "qpsk"
    snr_grid_db: list = field(default_factory=lambda: [5.0, 7.0, 9.0, 11.0])
    trials_per_point: int = 1000
    detectors: list = field(default_factory=lambda: ["se-sd", "dpp-sd"])
    model_path: str | None = None
    lambda1: float | None = None
    lambda2: float | None = None
    seed: int | None = None
    output: str | None = None
    epsilon_complement: float = 0.999
    schedule_n_t: int | None = None
    checkpoint_every: int = 1000
    workers: int = 1
    noiseless: bool = False
    sample_count: int | None = None
    snr_range_db: tuple = (4.0, 14.0)


_SPEC_FIELDS = {f.name for f in dataclasses.fields(ExperimentSpec)}


def spec_from_dict(doc: dict) -> ExperimentSpec:
    if not isinstance(doc, dict):
        raise SpecError("config: expected a JSON object")
    unknown = set(doc) - _SPEC_FIELDS
    if unknown:
        raise SpecError(f"{sorted(unknown)[0]}: unknown field")
    if "snr_range_db" in doc and doc["snr_range_db"] is not None:
        doc = dict(doc)
        doc["snr_range_db"] = tuple(doc["snr_range_db"])
    return ExperimentSpec(**doc)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise SpecError(message)


def validate_spec(spec: ExperimentSpec, sweep: bool = True) -> None:
    """Field-level checks; raises SpecError naming the offending field."""
    _require(isinstance(spec.seed, int), "seed: required (pass --seed)")
    _require(isinstance(spec.n_t, int) and spec.n_t >= 1,
             f"n_t: expected positive integer, got {spec.n_t!r}")
    _require(isinstance(spec.n_r, int) and spec.n_r >= spec.n_t,
             f"n_r: must be an integer >= n_t, got {spec.n_r!r}")
    try:
        constellation_by_name(spec.constellation)
    except (KeyError, ValueError, TypeError):
        raise SpecError(f"constellation: unknown name {spec.constellation!r}") from None
    _require(0.0 < spec.epsilon_complement < 1.0,
             f"epsilon_complement: must be in (0, 1), got {spec.epsilon_complement}")
    _require(isinstance(spec.workers, int) and spec.workers >= 1,
             f"workers: must be >= 1, got {spec.workers!r}")
    _require(isinstance(spec.checkpoint_every, int) and spec.checkpoint_every >= 1,
             f"checkpoint_every: must be >= 1, got {spec.checkpoint_every!r}")
    if (spec.lambda1 is None) != (spec.lambda2 is None):
        raise SpecError("lambda2: give both lambda overrides or neither")
    if spec.lambda1 is not None:
        _require(spec.lambda1 >= 1.0, f"lambda1: must be >= 1, got {spec.lambda1}")
        _require(spec.lambda2 >= 1.0, f"lambda2: must be >= 1, got {spec.lambda2}")
    if not sweep:
        return
    _require(bool(spec.snr_grid_db), "snr_grid_db: must be nonempty")
    for s in spec.snr_grid_db:
        _require(math.isfinite(float(s)), f"snr_grid_db: non-finite entry {s!r}")
    _require(isinstance(spec.trials_per_point, int) and spec.trials_per_point >= 1,
             f"trials_per_point: must be >= 1, got {spec.trials_per_point!r}")
    _require(bool(spec.detectors), "detectors: must be nonempty")
    for det in spec.detectors:
        _require(det in DETECTOR_FLAGS,
                 f"detectors: unknown id {det!r} (known: {sorted(DETECTOR_FLAGS)})")
    _require(len(set(spec.detectors)) == len(spec.detectors),
             "detectors: duplicate entries")
    if any(DETECTOR_FLAGS[d] != (False, False, False) for d in spec.detectors):
        _require(spec.model_path is not None,
                 "model_path: required when a dpp detector is selected")


@dataclass(frozen=True)
class ResultRow:
    snr_db: float
    detector: str
    bit_errors: int
    bits_simulated: int
    ber: float
    avg_tree_mults: float
    avg_tree_adds: float
    avg_nn_mults: float
    avg_nn_adds: float
    avg_subtrees_searched: float
    early_termination_rate: float
    fallback_rate: float


@dataclass(frozen=True)
class RatioRow:
    """Per-SNR complexity of one detector relative to the se-sd baseline."""

    snr_db: float
    detector: str
    tree_ratio: float
    total_ratio: float


CSV_COLUMNS = ("snr_db", "detector", "bit_errors", "bits_simulated", "ber",
               "avg_tree_mults", "avg_tree_adds", "avg_nn_mults", "avg_nn_adds",
               "avg_subtrees_searched", "early_termination_rate", "fallback_rate")

RATIO_CSV_COLUMNS = ("snr_db", "detector", "tree_ratio", "total_ratio")

_INT_COLUMNS = {"bit_errors", "bits_simulated"}


def _cell(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def rows_to_csv(rows: list) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_cell(getattr(row, c)) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def csv_to_rows(text: str) -> list:
    lines = text.strip().split("\n")
    if lines[0] != ",".join(CSV_COLUMNS):
        raise SpecError("csv: unexpected header")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        kwargs = {}
        for name, raw in zip(CSV_COLUMNS, parts):
            if name == "detector":
                kwargs[name] = raw
            elif name in _INT_COLUMNS:
                kwargs[name] = int(raw)
            else:
                kwargs[name] = float(raw)
        rows.append(ResultRow(**kwargs))
    return rows


def ratios_to_csv(rows: list) -> str:
    lines = [",".join(RATIO_CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_cell(getattr(row, c)) for c in RATIO_CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def rows_to_json(rows: list) -> str:
    return json.dumps([dataclasses.asdict(r) for r in rows], indent=1) + "\n"


def _snr_key(snr_db: float) -> int:
    return int(round(float(snr_db) * 1000.0))


def trial_rng(seed: int, snr_db: float, trial: int) -> np.random.Generator:
    """The per-trial generator; shared by every detector in the pair."""
    return np.random.default_rng(np.random.SeedSequence((seed, _snr_key(snr_db), trial)))


# accumulator layout per (snr, detector) cell; all entries exact integers
_ACC_FIELDS = ("trials", "bit_errors", "bits", "tree_mults", "tree_adds",
               "nn_mults", "nn_adds", "subtrees", "early_terminations", "fallbacks")


def _resolve_lambdas(spec: ExperimentSpec, snr_db: float) -> tuple:
    if spec.lambda1 is not None:
        return spec.lambda1, spec.lambda2
    nt_key = spec.schedule_n_t if spec.schedule_n_t is not None else spec.n_t
    try:
        return lambda_lookup(default_lambda_schedule(), nt_key, snr_db)
    except NoSchedule:
        raise SpecError(
            f"lambda1: no tuned values for n_t = {nt_key}; pass lambda1/lambda2 "
            "overrides or schedule_n_t") from None


def _sweep_block(spec: ExperimentSpec, snr_db: float, start: int, stop: int,
                 model) -> dict:
    """Run trials [start, stop) at one SNR; returns per-detector integer sums."""
    constellation = constellation_by_name(spec.constellation)
    bits_per_vector = spec.n_t * constellation.bits_per_symbol
    needs_model = any(DETECTOR_FLAGS[d] != (False, False, False)
                      for d in spec.detectors)
    lam1 = lam2 = math.inf
    if needs_model:
        lam1, lam2 = _resolve_lambdas(spec, snr_db)
    configs = {}
    for det in spec.detectors:
        radius, ordering, et = DETECTOR_FLAGS[det]
        if not (radius or ordering or et):
            configs[det] = baseline_config(spec.epsilon_complement)
        else:
            configs[det] = DetectorConfig(
                lambda1=lam1, lambda2=lam2,
                epsilon_complement=spec.epsilon_complement,
                enable_nn_radius=radius, enable_nn_ordering=ordering,
                enable_early_termination=et)
    acc = {det: [0] * len(_ACC_FIELDS) for det in spec.detectors}
    for trial in range(start, stop):
        rng = trial_rng(spec.seed, snr_db, trial)
        inst = draw_channel_instance(spec.n_t, spec.n_r, constellation, snr_db, rng)
        y = inst.h @ inst.x_true if spec.noiseless else inst.y
        for det in spec.detectors:
            config = configs[det]
            result = dpp_detect(y, inst.h, inst.noise_variance,
                                model if config.needs_model else None,
                                config, constellation)
            errors = bits_diff(result.solution, inst.x_true, constellation)
            cell = acc[det]
            cell[0] += 1
            cell[1] += errors
            cell[2] += bits_per_vector
            cell[3] += result.tree_ops.mults
            cell[4] += result.tree_ops.adds
            cell[5] += result.nn_ops.mults
            cell[6] += result.nn_ops.adds
            cell[7] += result.subtrees_searched
            cell[8] += int(result.terminated_early)
            cell[9] += int(result.used_fallback)
    return acc


def _merge(acc: dict, part: dict) -> None:
    for det, values in part.items():
        cell = acc[det]
        for i, v in enumerate(values):
            cell[i] += v


def _checkpoint_path(spec: ExperimentSpec) -> str | None:
    return spec.output + ".checkpoint.json" if spec.output else None


def _spec_digest(spec: ExperimentSpec) -> str:
    relevant = {k: getattr(spec, k) for k in
                ("seed", "n_t", "n_r", "constellation", "snr_grid_db",
                 "trials_per_point", "detectors", "model_path", "lambda1",
                 "lambda2", "epsilon_complement", "schedule_n_t", "noiseless")}
    return json.dumps(relevant, sort_keys=True, default=list)


def _load_checkpoint(spec: ExperimentSpec) -> dict | None:
    path = _checkpoint_path(spec)
    if path is None or not os.path.exists(path):
        return None
    with open(path) as fh:
        state = json.load(fh)
    if state.get("digest") != _spec_digest(spec):
        return None
    return state


def _save_checkpoint(spec: ExperimentSpec, state: dict) -> None:
    path = _checkpoint_path(spec)
    if path is None:
        return
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(state, fh)
    os.replace(tmp, path)


def _run_sweep(spec: ExperimentSpec, stop_after_trials: int | None = None) -> list:
    """Shared engine behind the ber and complexity commands.

    Accumulates integer tallies per (SNR, detector) cell in blocks of
    checkpoint_every trials, persisting a sidecar after each block when an
    output path is set.  `stop_after_trials` bounds the trials executed in
    this call (test hook for interruption); the checkpoint then lets a later
    call finish the sweep with identical results.
    """
    validate_spec(spec)
    model = None
    if any(DETECTOR_FLAGS[d] != (False, False, False) for d in spec.detectors):
        model = load_model(spec.model_path)
        if model.n_t != spec.n_t:
            raise SpecError(f"model_path: model is for n_t = {model.n_t}, "
                            f"spec has n_t = {spec.n_t}")
        size = constellation_by_name(spec.constellation).size
        if model.constellation_size != size:
            raise SpecError(f"model_path: model is for |S| = {model.constellation_size}, "
                            f"spec constellation has {size}")
        for snr in spec.snr_grid_db:
            _resolve_lambdas(spec, snr)    # fail fast before any work

    state = _load_checkpoint(spec)
    if state is None:
        state = {"digest": _spec_digest(spec), "done": {}, "acc": {}}
    budget = stop_after_trials
    pool = ProcessPoolExecutor(max_workers=spec.workers) if spec.workers > 1 else None
    try:
        for snr in spec.snr_grid_db:
            key = str(_snr_key(snr))
            done = state["done"].get(key, 0)
            while done < spec.trials_per_point:
                if budget is not None and budget <= 0:
                    _save_checkpoint(spec, state)
                    raise SweepInterrupted(
                        f"stopped after the requested trial budget at snr {snr}")
                block = min(spec.checkpoint_every, spec.trials_per_point - done)
                if budget is not None:
                    block = min(block, budget)
                acc = {det: [0] * len(_ACC_FIELDS) for det in spec.detectors}
                if pool is None:
                    _merge(acc, _sweep_block(spec, snr, done, done + block, model))
                else:
                    bounds = np.linspace(done, done + block,
                                         spec.workers + 1).astype(int)
                    futures = [pool.submit(_sweep_block, spec, snr, int(a), int(b), model)
                               for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
                    for fut in futures:
                        _merge(acc, fut.result())
                for det in spec.detectors:
                    cell_key = f"{key}:{det}"
                    stored = state["acc"].get(cell_key, [0] * len(_ACC_FIELDS))
                    state["acc"][cell_key] = [a + b for a, b in zip(stored, acc[det])]
                done += block
                state["done"][key] = done
                if budget is not None:
                    budget -= block
                _save_checkpoint(spec, state)
    finally:
        if pool is not None:
            pool.shutdown()

    rows = []
    for snr in spec.snr_grid_db:
        key = str(_snr_key(snr))
        for det in spec.detectors:
            c = dict(zip(_ACC_FIELDS, state["acc"][f"{key}:{det}"]))
            trials = c["trials"]
            rows.append(ResultRow(
                snr_db=float(snr), detector=det,
                bit_errors=c["bit_errors"], bits_simulated=c["bits"],
                ber=c["bit_errors"] / c["bits"],
                avg_tree_mults=c["tree_mults"] / trials,
                avg_tree_adds=c["tree_adds"] / trials,
                avg_nn_mults=c["nn_mults"] / trials,
                avg_nn_adds=c["nn_adds"] / trials,
                avg_subtrees_searched=c["subtrees"] / trials,
                early_termination_rate=c["early_terminations"] / trials,
                fallback_rate=c["fallbacks"] / trials))
    path = _checkpoint_path(spec)
    if path is not None and os.path.exists(path):
        os.remove(path)
    return rows


def _write_outputs(spec: ExperimentSpec, rows: list, ratios: list | None = None) -> list:
    written = []
    if spec.output is None:
        return written
    csv_path = spec.output + ".csv"
    with open(csv_path, "w") as fh:
        fh.write(rows_to_csv(rows))
    written.append(csv_path)
    json_path = spec.output + ".json"
    with open(json_path, "w") as fh:
        fh.write(rows_to_json(rows))
    written.append(json_path)
    if ratios is not None:
        ratio_csv = spec.output + "_ratios.csv"
        with open(ratio_csv, "w") as fh:
            fh.write(ratios_to_csv(ratios))
        written.append(ratio_csv)
        ratio_json = spec.output + "_ratios.json"
        with open(ratio_json, "w") as fh:
            fh.write(json.dumps([dataclasses.asdict(r) for r in ratios], indent=1) + "\n")
        written.append(ratio_json)
    return written


def cmd_ber(spec: ExperimentSpec, stop_after_trials: int | None = None) -> list:
    """BER sweep over the SNR grid; returns the rows and writes CSV + JSON."""
    started = time.perf_counter()
    rows = _run_sweep(spec, stop_after_trials)
    written = _write_outputs(spec, rows)
    elapsed = time.perf_counter() - started
    print(f"ber sweep: {len(rows)} rows in {elapsed:.1f} s"
          + (f"; wrote {', '.join(written)}" if written else ""))
    return rows


def complexity_ratios(rows: list) -> list:
    """Per-SNR op ratios of each detector against se-sd on the same rows."""
    baseline = {row.snr_db: row for row in rows if row.detector == "se-sd"}
    ratios = []
    for row in rows:
        if row.detector == "se-sd":
            continue
        base = baseline[row.snr_db]
        base_tree = base.avg_tree_mults + base.avg_tree_adds
        base_total = base_tree + base.avg_nn_mults + base.avg_nn_adds
        tree = row.avg_tree_mults + row.avg_tree_adds
        total = tree + row.avg_nn_mults + row.avg_nn_adds
        ratios.append(RatioRow(snr_db=row.snr_db, detector=row.detector,
                               tree_ratio=tree / base_tree,
                               total_ratio=total / base_total))
    return ratios


def cmd_complexity(spec: ExperimentSpec, stop_after_trials: int | None = None):
    """Paired complexity sweep; adds the se-sd baseline if absent and emits
    per-SNR DPP/SE ratios (tree-only and tree+NN) next to the row files."""
    if "se-sd" not in spec.detectors:
        spec = dataclasses.replace(spec, detectors=["se-sd"] + list(spec.detectors))
    started = time.perf_counter()
    rows = _run_sweep(spec, stop_after_trials)
    ratios = complexity_ratios(rows)
    written = _write_outputs(spec, rows, ratios)
    elapsed = time.perf_counter() - started
    print(f"complexity sweep: {len(rows)} rows in {elapsed:.1f} s"
          + (f"; wrote {', '.join(written)}" if written else ""))
    for r in ratios:
        print(f"  snr {r.snr_db:g} dB {r.detector}: tree {r.tree_ratio:.3f}, "
              f"tree+nn {r.total_ratio:.3f}")
    return rows, ratios


def _gen_block(streams, spec: ExperimentSpec):
    constellation = constellation_by_name(spec.constellation)
    return examples_from_streams(streams, spec.n_t, spec.n_r, constellation,
                                 tuple(spec.snr_range_db))


def cmd_gen_dataset(spec: ExperimentSpec) -> str:
    """Build and save a training set; prints target summary statistics."""
    validate_spec(spec, sweep=False)
    _require(isinstance(spec.sample_count, int) and spec.sample_count >= 1,
             f"sample_count: must be >= 1, got {spec.sample_count!r}")
    _require(spec.output is not None, "output: required for gen-dataset")
    lo, hi = spec.snr_range_db
    _require(lo <= hi, f"snr_range_db: inverted range {spec.snr_range_db}")
    started = time.perf_counter()
    streams = np.random.default_rng(spec.seed).spawn(spec.sample_count)
    if spec.workers > 1:
        bounds = np.linspace(0, spec.sample_count, spec.workers + 1).astype(int)
        examples = []
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_gen_block, streams[a:b], spec)
                       for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
            for fut in futures:
                examples.extend(fut.result())
    else:
        examples = _gen_block(streams, spec)
    save_dataset(spec.output, examples)
    targets = np.stack([ex.targets for ex in examples])
    elapsed = time.perf_counter() - started
    print(f"wrote {len(examples)} samples to {spec.output} in {elapsed:.1f} s "
          f"(targets mean={targets.mean():.4f} min={targets.min():.4f} "
          f"max={targets.max():.4f})")
    return spec.output


def cmd_train(dataset_path: str, model_out: str, config: TrainerConfig,
              report_out: str | None = None):
    """Fit a model to a saved dataset; writes the model and a JSON report."""
    dataset = load_dataset(dataset_path)
    started = time.perf_counter()
    model, report = train(dataset, config)
    elapsed = time.perf_counter() - started
    save_model(model, model_out)
    report_doc = {"epochs_run": report.epochs_run, "final_mse": report.final_mse,
                  "mse_history": report.mse_history}
    if report_out is None:
        report_out = model_out + ".report.json"
    with open(report_out, "w") as fh:
        json.dump(report_doc, fh)
        fh.write("\n")
    print(f"trained on {len(dataset)} samples: {report.epochs_run} epochs, "
          f"final mse {report.final_mse:.6g}, {elapsed:.1f} s; "
          f"wrote {model_out}, {report_out}")
    return model, report


_CLI_FIELDS = (
    ("--n-t", "n_t", int, "transmit antennas"),
    ("--n-r", "n_r", int, "receive antennas"),
    ("--constellation", "constellation", str, "constellation name (qpsk, 16qam, 64qam)"),
    ("--trials", "trials_per_point", int, "Monte Carlo trials per SNR point"),
    ("--model", "model_path", str, "trained model file"),
    ("--lambda1", "lambda1", float, "initial-radius margin override"),
    ("--lambda2", "lambda2", float, "early-termination margin override"),
    ("--seed", "seed", int, "experiment seed (required)"),
    ("--output", "output", str, "output stem; writes <stem>.csv and <stem>.json"),
    ("--epsilon-complement", "epsilon_complement", float,
     "radius coverage probability (default 0.999)"),
    ("--schedule-n-t", "schedule_n_t", int,
     "borrow the tuned lambda schedule of this antenna count"),
    ("--checkpoint-every", "checkpoint_every", int, "trials per checkpoint block"),
    ("--workers", "workers", int, "parallel worker processes"),
    ("--sample-count", "sample_count", int, "dataset samples (gen-dataset)"),
)


def _add_spec_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with ExperimentSpec fields")
    for flag, dest, typ, help_text in _CLI_FIELDS:
        parser.add_argument(flag, dest=dest, type=typ, default=None, help=help_text)
    parser.add_argument("--snr-grid", dest="snr_grid_db", default=None,
                        help="comma-separated SNR points in dB, e.g. 5,7,9,11")
    parser.add_argument("--detectors", dest="detectors", default=None,
                        help="comma-separated ids: " + ",".join(sorted(DETECTOR_FLAGS)))
    parser.add_argument("--snr-range", dest="snr_range_db", default=None,
                        help="dataset SNR range in dB as lo,hi (gen-dataset)")
    parser.add_argument("--noiseless", dest="noiseless", action="store_const",
                        const=True, default=None,
                        help="zero the noise vector (BER sanity runs)")


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    doc = {}
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"config: {args.config} is not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise SpecError("config: expected a JSON object")
    for _, dest, _, _ in _CLI_FIELDS:
        value = getattr(args, dest)
        if value is not None:
            doc[dest] = value
    if args.snr_grid_db is not None:
        doc["snr_grid_db"] = [float(s) for s in args.snr_grid_db.split(",")]
    if args.detectors is not None:
        doc["detectors"] = args.detectors.split(",")
    if args.snr_range_db is not None:
        parts = args.snr_range_db.split(",")
        if len(parts) != 2:
            raise SpecError(f"snr_range_db: expected lo,hi, got {args.snr_range_db!r}")
        doc["snr_range_db"] = (float(parts[0]), float(parts[1]))
    if args.noiseless is not None:
        doc["noiseless"] = args.noiseless
    return spec_from_dict(doc)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mimosd",
        description="Sphere-decoder benchmarks: datasets, training, BER and "
                    "complexity sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen-dataset", help="generate a training dataset")
    _add_spec_arguments(p_gen)

    p_train = sub.add_parser("train", help="train a predictor on a dataset")
    p_train.add_argument("--dataset", required=True, help="dataset file from gen-dataset")
    p_train.add_argument("--model-out", required=True, help="model file to write")
    p_train.add_argument("--report-out", default=None,
                         help="training report JSON (default <model>.report.json)")
    p_train.add_argument("--method", default="scg", choices=("scg", "gd"))
    p_train.add_argument("--max-epochs", type=int, default=2000)
    p_train.add_argument("--seed", type=int, default=0, help="weight init seed")
    p_train.add_argument("--gd-step", type=float, default=1e-4)

    p_ber = sub.add_parser("ber", help="paired BER sweep over an SNR grid")
    _add_spec_arguments(p_ber)

    p_cpx = sub.add_parser("complexity", help="paired op-count sweep and DPP/SE ratios")
    _add_spec_arguments(p_cpx)

    args = parser.parse_args(argv)
    try:
        if args.command == "gen-dataset":
            cmd_gen_dataset(_spec_from_args(args))
        elif args.command == "train":
            config = TrainerConfig(method=args.method, max_epochs=args.max_epochs,
                                   seed=args.seed, gd_step=args.gd_step)
            cmd_train(args.dataset, args.model_out, config, args.report_out)
        elif args.command == "ber":
            cmd_ber(_spec_from_args(args))
        else:
            cmd_complexity(_spec_from_args(args))
    except (SpecError, DivergedToNonFinite) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
