"""Trial batches and the on-disk output tree.

Layout under the output directory::

    trial_{seed}/metrics.csv     per-step MetricRecord rows
    trial_{seed}/final.atnm      final attention stack
    trial_{seed}/summary.json    {"seed", "success", "formed", "steps"}
    trial_{seed}/stack_t{k}.atnm snapshot stacks, when configured
    analysis/...                 written by :mod:`attnurse.analysis`
"""
from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable

from . import atnm
from .diffusion import ToyConfig, TrialRecord, run_trial
from .errors import FormatError
from .metrics import read_csv, write_csv
from .nursing import NurseConfig

_TRIAL_DIR = re.compile(r"^trial_(\d+)$")


def run_batch(toy: ToyConfig, seeds: Iterable[int], nurse: NurseConfig | None = None, workers: int = 1) -> list[TrialRecord]:
    """Run one trial per seed; results come back in seed order whatever ``workers`` is."""
    seeds = list(seeds)
    if workers <= 1:
        return [run_trial(toy, s, nurse) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_trial(toy, s, nurse), seeds))


def trial_dir(root, seed: int) -> Path:
    return Path(root) / f"trial_{seed}"


def write_trial(root, rec: TrialRecord) -> Path:
    d = trial_dir(root, rec.seed)
    d.mkdir(parents=True, exist_ok=True)
    write_csv(d / "metrics.csv", rec.metrics)
    atnm.save(d / "final.atnm", rec.final)
    with open(d / "summary.json", "w") as fh:
        json.dump(rec.summary(), fh)
        fh.write("\n")
    for step, stack in sorted(rec.snapshots.items()):
        atnm.save(d / f"stack_t{step}.atnm", stack)
    return d


def run_experiment(toy: ToyConfig, seeds: Iterable[int], out_dir, nurse: NurseConfig | None = None, workers: int = 1) -> list[TrialRecord]:
    """Run a batch and write each trial's directory; each worker owns its trial's files."""
    os.makedirs(out_dir, exist_ok=True)
    seeds = list(seeds)

    def job(seed):
        rec = run_trial(toy, seed, nurse)
        write_trial(out_dir, rec)
        return rec

    if workers <= 1:
        return [job(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, seeds))


def read_trial(path) -> TrialRecord:
    d = Path(path)
    try:
        with open(d / "summary.json") as fh:
            summary = json.load(fh)
        metrics = read_csv(d / "metrics.csv")
        final = atnm.load(d / "final.atnm")
    except (OSError, ValueError, KeyError) as exc:
        raise FormatError(f"{d}: {exc}") from None
    snapshots = {}
    for f in d.glob("stack_t*.atnm"):
        snapshots[int(f.stem[len("stack_t"):])] = atnm.load(f)
    rec = TrialRecord(int(summary["seed"]), metrics, final, tuple(bool(v) for v in summary["formed"]), snapshots)
    if rec.success != bool(summary["success"]):
        raise FormatError(f"{d}: summary success flag disagrees with formed list")
    return rec


def list_trials(root) -> list[Path]:
    """Trial directories under ``root`` sorted by seed."""
    found = []
    for entry in Path(root).iterdir():
        m = _TRIAL_DIR.match(entry.name)
        if m and entry.is_dir():
            found.append((int(m.group(1)), entry))
    return [p for _, p in sorted(found)]


def read_experiment(root) -> list[TrialRecord]:
    return [read_trial(p) for p in list_trials(root)]
