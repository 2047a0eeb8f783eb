"""Monte-Carlo experiments: sweep a parameter, repeat, attack, score.

An experiment file is INI-style with a single ``[experiment]`` section::

    [experiment]
    schema = 1
    n_users = 100
    threshold = 10
    rounds = 20000
    sweep = M
    values = 10, 25, 50, 100
    attacks = sda0, sda1, sda2, lsda
    repetitions = 10
    seed = 1

Every key except ``schema`` has a default (see ``DEFAULTS``); ``friends``
defaults to ``min(10, n_users)``.  Sweepable parameters are ``M`` (friends
per user), ``rho`` (rounds), ``t`` (threshold), ``N`` (users) and ``skew``
(sender-frequency skew; see :func:`disclosure.traffic.skewed_frequencies`).
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import formats
from .attacks import AttackKind, SingularSystemError, run_attack
from .core import MixConfig, SenderFrequencies, SenderProfiles
from .metrics import EmptyReportError, box_stats, mse_summary
from .theory import theory_report
from .traffic import ring_profiles, simulate, skewed_frequencies

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SWEEPS = {"M": "friends", "rho": "rounds", "t": "threshold", "N": "n_users", "skew": "skew"}
FREQUENCY_FAMILY = "f_i proportional to exp(-skew * i / (N - 1)), i = 0..N-1; skew = 0 is uniform"

DEFAULTS = {
    "n_users": "100",
    "threshold": "10",
    "rounds": "20000",
    "friends": "",
    "skew": "0",
    "sweep": "M",
    "values": "",
    "attacks": "sda0, sda1, sda2, lsda",
    "repetitions": "1",
    "seed": "0",
    "profiles": "ring",
    "self_send": "true",
    "output": "experiment.csv",
}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    base: MixConfig
    sweep: str
    values: tuple
    attacks: tuple
    repetitions: int = 1
    friends: int = 10
    skew: float = 0.0
    profiles: str = "ring"
    self_send: bool = True
    output: str = "experiment.csv"

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise SpecError(f"sweep must be one of {', '.join(SWEEPS)}, got {self.sweep!r}")
        if not self.values:
            raise SpecError("values must list at least one sweep value")
        if not self.attacks:
            raise SpecError("attacks must list at least one attack")
        if self.repetitions < 1:
            raise SpecError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.profiles != "ring" and self.sweep in ("M", "N"):
            raise SpecError(f"cannot sweep {self.sweep} with a fixed profile matrix")

    @property
    def base_seed(self) -> int:
        return self.base.seed

    def echo(self) -> dict:
        d = asdict(self)
        d["attacks"] = [a.value for a in self.attacks]
        d["values"] = list(self.values)
        d["schema"] = SCHEMA_VERSION
        return d


def _key(section, key, where):
    try:
        return section[key]
    except KeyError:
        raise SpecError(f"{where}: missing key {key!r}") from None


def parse_spec(text: str, where="<spec>") -> ExperimentSpec:
    parser = configparser.ConfigParser(defaults=DEFAULTS, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=where)
    except configparser.Error as exc:
        raise SpecError(f"{where}: {exc}") from None
    if not parser.has_section("experiment"):
        raise SpecError(f"{where}: missing [experiment] section")
    sec = parser["experiment"]
    unknown = set(sec) - set(DEFAULTS) - {"schema"}
    if unknown:
        raise SpecError(f"{where}: unknown keys {sorted(unknown)}")
    schema = _key(sec, "schema", where)
    if schema.strip() != str(SCHEMA_VERSION):
        raise SpecError(f"{where}: unsupported schema {schema!r}, expected {SCHEMA_VERSION}")

    def get(key, conv):
        raw = sec[key]
        try:
            return conv(raw)
        except ValueError:
            raise SpecError(f"{where}: bad value for {key}: {raw!r}") from None

    sweep = sec["sweep"].strip()
    if sweep not in SWEEPS:
        raise SpecError(f"{where}: sweep must be one of {', '.join(SWEEPS)}, got {sweep!r}")
    conv = float if sweep == "skew" else int
    try:
        values = tuple(conv(v) for v in sec["values"].split(",") if v.strip())
    except ValueError:
        raise SpecError(f"{where}: bad value for values: {sec['values']!r}") from None
    try:
        attacks = tuple(AttackKind.parse(a) for a in sec["attacks"].split(",") if a.strip())
        base = MixConfig(get("n_users", int), get("threshold", int), get("rounds", int), get("seed", int))
        friends = get("friends", int) if sec["friends"].strip() else min(10, base.n_users)
        skew = get("skew", float)
        if not values:
            current = {"M": friends, "skew": skew, "N": base.n_users, "t": base.threshold, "rho": base.rounds}
            values = (current[sweep],)
        return ExperimentSpec(
            base=base,
            sweep=sweep,
            values=values,
            attacks=attacks,
            repetitions=get("repetitions", int),
            friends=friends,
            skew=skew,
            profiles=sec["profiles"].strip(),
            self_send=sec.getboolean("self_send"),
            output=sec["output"].strip(),
        )
    except SpecError as exc:
        raise SpecError(f"{where}: {exc}") from None
    except ValueError as exc:
        raise SpecError(f"{where}: {exc}") from None


def load_spec(path) -> ExperimentSpec:
    return parse_spec(formats.read_text(path), where=str(path))


@dataclass(frozen=True)
class Cell:
    """Parameters of one sweep point."""

    config: MixConfig
    friends: int
    skew: float


def cell_for(spec: ExperimentSpec, value) -> Cell:
    cfg = spec.base
    friends, skew = spec.friends, spec.skew
    if spec.sweep == "M":
        friends = value
    elif spec.sweep == "skew":
        skew = value
    else:
        cfg = replace(cfg, **{SWEEPS[spec.sweep]: value})
    return Cell(cfg, friends, skew)


def ground_truth(spec: ExperimentSpec, cell: Cell):
    n = cell.config.n_users
    if spec.profiles == "ring":
        profiles = ring_profiles(n, cell.friends, self_send=spec.self_send)
    else:
        profiles = formats.load_profiles(spec.profiles)
        if profiles.n_users != n:
            raise SpecError(f"{spec.profiles}: matrix has {profiles.n_users} users, experiment has {n}")
    return skewed_frequencies(n, cell.skew), profiles


def repetition_seed(base_seed: int, value_index: int, repetition: int) -> int:
    """Independent 64-bit seed for one (sweep value, repetition) pair."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(value_index, repetition))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class RepetitionResult:
    value_index: int
    repetition: int
    seed: int
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def run_repetition(spec: ExperimentSpec, value_index: int, repetition: int,
                   truth=None) -> RepetitionResult:
    value = spec.values[value_index]
    cell = cell_for(spec, value)
    seed = repetition_seed(spec.base_seed, value_index, repetition)
    config = replace(cell.config, seed=seed)
    freqs, profiles = truth if truth is not None else ground_truth(spec, cell)
    obs = simulate(config, freqs, profiles)
    out = RepetitionResult(value_index, repetition, seed)
    for kind in spec.attacks:
        try:
            est = run_attack(kind, obs, config)
            report = mse_summary(profiles, est)
        except (SingularSystemError, EmptyReportError) as exc:
            out.rows.append((kind.value, value, repetition, seed, math.nan, 0))
            out.failures.append({"attack": kind.value, spec.sweep: value, "repetition": repetition,
                                 "seed": seed, "error": str(exc)})
            continue
        out.rows.append((kind.value, value, repetition, seed, report.average, report.n_defined))
        if report.excluded_users:
            out.failures.append({"attack": kind.value, spec.sweep: value, "repetition": repetition,
                                 "seed": seed, "excluded_users": sorted(report.excluded_users)})
    return out


def _run_task(args):
    spec, vi, rep = args
    return run_repetition(spec, vi, rep)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list
    cells: list
    failures: list

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["attack", self.spec.sweep, "repetition", "seed", "average_mse", "n_defined"])
        for attack, value, rep, seed, avg, n_def in self.rows:
            w.writerow([attack, value, rep, seed, repr(float(avg)), n_def])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "spec": self.spec.echo(),
            "frequency_family": FREQUENCY_FAMILY,
            "cells": self.cells,
            "failures": self.failures,
        }

    def json_text(self) -> str:
        return json.dumps(self.summary(), indent=2, allow_nan=False) + "\n"

    def mean_mse(self, attack: str, value) -> float:
        for c in self.cells:
            if c["attack"] == attack and c["value"] == value:
                return c["box"]["mean"] if c["box"] else math.nan
        raise KeyError((attack, value))

    def theory(self, value) -> dict:
        for c in self.cells:
            if c["value"] == value:
                return c["theory"]
        raise KeyError(value)


def run_experiment(spec: ExperimentSpec, jobs: int = 1, write: bool = True) -> ExperimentResult:
    """Run every (sweep value, repetition) pair and aggregate.

    Output order is fixed by (value, repetition, attack) no matter how many
    worker processes run.
    """
    tasks = [(spec, vi, rep) for vi in range(len(spec.values)) for rep in range(spec.repetitions)]
    # fail fast on bad ground truth before spawning workers
    truths = [ground_truth(spec, cell_for(spec, v)) for v in spec.values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [run_repetition(spec, vi, rep, truths[vi]) for _, vi, rep in tasks]

    rows, failures = [], []
    for r in results:
        rows.extend(r.rows)
        failures.extend(r.failures)

    cells = []
    for vi, value in enumerate(spec.values):
        cell = cell_for(spec, value)
        freqs, profiles = truths[vi]
        theory = _overlay(profiles, freqs, cell.config)
        for kind in spec.attacks:
            samples = [row[4] for row in rows
                       if row[0] == kind.value and row[1] == value and not math.isnan(row[4])]
            cells.append({
                "attack": kind.value,
                "value": value,
                "box": box_stats(samples).as_dict() if samples else None,
                "n_repetitions": len(samples),
                "theory": theory,
            })
    result = ExperimentResult(spec, rows, cells, failures)
    if write:
        write_result(result, spec.output)
    return result


def _overlay(profiles: SenderProfiles, freqs: SenderFrequencies, config: MixConfig) -> dict:
    rep = theory_report(profiles, freqs, config.threshold, config.rounds)
    return {"lsda": rep.average("lsda"), "sda2": rep.average("sda2")}


def write_result(result: ExperimentResult, output) -> tuple[Path, Path]:
    csv_path = Path(output)
    if csv_path.suffix.lower() != ".csv":
        csv_path = csv_path.with_name(csv_path.name + ".csv")
    json_path = csv_path.with_suffix(".json")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(result.csv_text(), encoding="utf-8")
    json_path.write_text(result.json_text(), encoding="utf-8")
    log.info("wrote %s and %s", csv_path, json_path)
    return csv_path, json_path
