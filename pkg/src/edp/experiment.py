"""Paired MEC runs with and without the deployed predictor.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from edp.config import MecConfig, SimConfig
from edp.errors import ConfigError
from edp.evaluation import ci95
from edp.mec import MecState, RunResult, run
from edp.predictor import DeployedPredictor, Prewarmer
from edp.streams import build_stream
from edp.tracegen import generate_trace

logger = logging.getLogger(__name__)

SCENARIOS = ("baseline", "predicted")
OFFLOADING_METRICS = {
    "request": "OffloadingRequest",
    "success": "OffloadingSuccess",
    "failure": "OffloadingFailure",
}
MIGRATION_METRICS = {
    "triggered": "Migration",
    "success": "MigrationSuccess",
    "failure": "MigrationFailure",
    "aborted": "MigrationAborted",
}


def run_counts(result: RunResult) -> dict:
    """Offloading and migration counts of one run."""
    counts = result.summary["counts"]
    return {
        "offloading": {name: counts[kind] for name, kind in OFFLOADING_METRICS.items()},
        "migration": {
            **{name: counts[kind] for name, kind in MIGRATION_METRICS.items()},
            "ongoing": result.summary["ongoing_migrations"],
        },
    }


def _success_rate(counts: dict) -> float:
    requests = counts["offloading"]["request"]
    return counts["offloading"]["success"] / requests if requests else 0.0


@dataclass
class ComparisonReport:
    """Per-run counts of both scenarios and their aggregates.

    Attributes
    ----------
    runs : list[dict]
        One entry per run pair: `service_seed`, `baseline` and `predicted`
        counts.
    mobility_seed : int
    base_seed : int
    """

    mobility_seed: int
    base_seed: int
    runs: list = field(default_factory=list)

    def values(self, scenario: str, group: str, metric: str) -> list:
        return [entry[scenario][group][metric] for entry in self.runs]

    def aggregate(self) -> dict:
        """{scenario: {group: {metric: {mean, ci95}}}}."""
        result = {}
        for scenario in SCENARIOS:
            result[scenario] = {}
            for group, metrics in (
                ("offloading", list(OFFLOADING_METRICS)),
                ("migration", [*MIGRATION_METRICS, "ongoing"]),
            ):
                result[scenario][group] = {
                    metric: {
                        "mean": float(np.mean(self.values(scenario, group, metric))),
                        "ci95": ci95(self.values(scenario, group, metric)),
                    }
                    for metric in metrics
                }
        return result

    def success_rates(self, scenario: str) -> list[float]:
        return [_success_rate(entry[scenario]) for entry in self.runs]

    def deltas(self) -> dict:
        """Offloading success-rate difference and MigrationSuccess gain."""
        baseline = float(np.mean(self.success_rates("baseline")))
        predicted = float(np.mean(self.success_rates("predicted")))
        base_migrations = float(np.mean(self.values("baseline", "migration", "success")))
        pred_migrations = float(np.mean(self.values("predicted", "migration", "success")))
        ratio = pred_migrations / base_migrations if base_migrations else None
        return {
            "baseline_success_rate": baseline,
            "predicted_success_rate": predicted,
            "success_rate_delta_pp": 100.0 * (predicted - baseline),
            "migration_success_ratio": ratio,
            "migration_success_gain_pct": None if ratio is None else 100.0 * (ratio - 1.0),
        }

    def to_dict(self) -> dict:
        return {
            "kind": "comparison",
            "mobility_seed": self.mobility_seed,
            "base_seed": self.base_seed,
            "n_runs": len(self.runs),
            **self.aggregate(),
            "deltas": self.deltas(),
            "runs": self.runs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComparisonReport":
        return cls(data["mobility_seed"], data["base_seed"], list(data["runs"]))


def paired_run(
    cfg: SimConfig,
    mec_cfg: MecConfig,
    predictor: Union[DeployedPredictor, None],
    service_seed: int,
) -> tuple[RunResult, RunResult]:
    """Baseline and predicted runs over one shared trigger stream."""
    run_cfg = dataclasses.replace(cfg, service_seed=service_seed)
    records, sessions, topology = generate_trace(run_cfg)
    stream = build_stream(records, sessions, cfg.sim_duration_s)
    baseline = run(
        MecState(topology, mec_cfg, seed=service_seed),
        stream, until_s=cfg.sim_duration_s,
    )
    if predictor is None:
        share_cap, ttl, observer = 0, 300.0, None
    else:
        share_cap, ttl = predictor.share_cap, predictor.prewarm_ttl_s
        observer = Prewarmer(predictor)
    predicted = run(
        MecState(topology, mec_cfg, seed=service_seed, share_cap=share_cap, prewarm_ttl_s=ttl),
        stream, until_s=cfg.sim_duration_s, observer=observer,
    )
    return baseline, predicted


def compare_experiment(
    cfg: SimConfig,
    mec_cfg: MecConfig,
    predictor: Union[DeployedPredictor, None],
    n_runs: int = 10,
    base_seed: int = 0,
) -> ComparisonReport:
    """Run `n_runs` paired simulations on one mobility pattern.

    Mobility and topology come from `cfg.seed` in every run; run i draws its
    sessions from service seed `base_seed + i`. Both scenarios of a run see
    the same trigger stream. None as predictor runs the predicted scenario
    without prewarming.
    """
    if not isinstance(n_runs, int) or n_runs < 2:
        raise ConfigError("runs", f"must be an integer >= 2, got {n_runs!r}")
    cfg.validate()
    mec_cfg.validate()
    report = ComparisonReport(cfg.seed, base_seed)
    for i in range(n_runs):
        service_seed = base_seed + i
        baseline, predicted = paired_run(cfg, mec_cfg, predictor, service_seed)
        report.runs.append(
            {
                "service_seed": service_seed,
                "baseline": run_counts(baseline),
                "predicted": run_counts(predicted),
            }
        )
        logger.info(
            "run %d/%d (service seed %d): success rate %.3f -> %.3f",
            i + 1, n_runs, service_seed,
            _success_rate(report.runs[-1]["baseline"]),
            _success_rate(report.runs[-1]["predicted"]),
        )
    return report
