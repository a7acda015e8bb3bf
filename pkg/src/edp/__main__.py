"""edgeplanner main function.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import logging
import sys
from pathlib import Path
from typing import Union

from edp import __version__
from edp.classifiers import DEFAULT_HYPERPARAMS, model_from_dict, train
from edp.codecs import (
    RunManifest, atomic_write_text, read_json, read_sessions, read_topology, read_trace,
    read_zones, write_events, write_iot_readings, write_json, write_sessions,
    write_topology, write_trace, write_zones,
)
from edp.config import config_to_dict, parse_config
from edp.dense_area import DbscanParams, dbscan, label_trace, snapshot_positions
from edp.errors import ArtifactIOError, ConfigError, EdgePlannerError
from edp.evaluation import BenchReport, benchmark, evaluate
from edp.experiment import ComparisonReport, compare_experiment
from edp.features import encode
from edp.mec import MecState, run
from edp.predictor import BUNDLE_FORMAT, DeployedPredictor, Prewarmer, train_pipeline
from edp.report import bench_csv, emit_report
from edp.streams import build_stream
from edp.tracegen import generate_trace, iot_readings
from edp.user_input import UserInput, parse_command_line_input

logger = logging.getLogger("edp")

BUNDLE_SETTINGS = (
    "eps_km", "min_pts", "snapshot_s", "share_cap", "prewarm_ttl_s", "lead_policy",
)


def _configs(user_input: UserInput, **sim_overrides):
    mec_overrides = {"policy": user_input.options.get("policy")}
    sim, mec = parse_config(
        user_input.config,
        {"seed": user_input.seed, **sim_overrides},
        mec_overrides,
    )
    if user_input.mec_config is not None:
        _, mec = parse_config(user_input.mec_config, mec_overrides=mec_overrides)
    return sim, mec


def _manifest(user_input: UserInput, **config) -> RunManifest:
    return RunManifest(
        command=user_input.command,
        version=__version__,
        argv=user_input.argv,
        config={key: config_to_dict(value) for key, value in config.items()},
    )


def _finish(manifest: RunManifest, out_dir: Path, inputs, outputs) -> None:
    for path in inputs:
        if path is not None:
            manifest.add_input(path)
    for path in outputs:
        manifest.add_output(path)
    manifest.write(out_dir)


def _dbscan_params(user_input: UserInput) -> DbscanParams:
    try:
        return DbscanParams(user_input.eps_km, user_input.min_pts)
    except ValueError as error:
        raise ConfigError("dbscan", str(error)) from None


def _read_labeled_trace(user_input: UserInput):
    records = read_trace(user_input.trace)
    if user_input.options.get("zones"):
        zones, params, _ = read_zones(user_input.zones)
        records = label_trace(records, zones, params.eps_km)
    return records


def run_generate(user_input: UserInput) -> None:
    sim, _ = _configs(
        user_input,
        service_seed=user_input.service_seed,
        num_ues=user_input.num_ues,
        sim_duration_s=user_input.duration,
    )
    manifest = _manifest(user_input, simulation=sim)
    manifest.seeds = {"seed": sim.seed, "service_seed": sim.effective_service_seed}
    records, sessions, topology = generate_trace(sim)
    out_dir = user_input.out_dir
    outputs = [
        write_topology(out_dir / "topology.json", topology),
        write_trace(out_dir / "trace.csv", records),
        write_sessions(out_dir / "sessions.csv", sessions),
        write_iot_readings(out_dir / "iot_readings.csv", iot_readings(topology, sim)),
    ]
    _finish(manifest, out_dir, [user_input.config], outputs)


def run_cluster(user_input: UserInput) -> None:
    params = _dbscan_params(user_input)
    records = read_trace(user_input.trace)
    snapshot_s = user_input.snapshot
    if snapshot_s is None:
        snapshot_s = max((record.time_s for record in records), default=0)
    _, points = snapshot_positions(records, snapshot_s)
    result = dbscan(points, params)
    labeled = label_trace(records, result.zones, params.eps_km)
    out_dir = user_input.out_dir
    manifest = _manifest(user_input)
    manifest.config = {"eps_km": params.eps_km, "min_pts": params.min_pts,
                       "snapshot_s": snapshot_s}
    outputs = [
        write_zones(out_dir / user_input.out, result.zones, params, user_input.snapshot),
        write_trace(out_dir / user_input.labeled_out, labeled),
    ]
    _finish(manifest, out_dir, [user_input.trace], outputs)


def run_train(user_input: UserInput) -> None:
    sim, _ = _configs(user_input)
    hyperparams = {"k": user_input.k} if user_input.k is not None else None
    records = _read_labeled_trace(user_input)
    manifest = _manifest(user_input)
    manifest.seeds = {"seed": sim.seed}
    if user_input.bundle:
        predictor = train_pipeline(
            records,
            _dbscan_params(user_input),
            user_input.algo,
            hyperparams,
            seed=sim.seed,
            snapshot_s=user_input.snapshot,
            share_cap=user_input.share_cap,
            prewarm_ttl_s=user_input.prewarm_ttl,
            include_ue_id=user_input.include_ue_id,
        )
        document = predictor.to_dict()
        model_document = document["model"]
    else:
        dataset = encode(records, include_ue_id=user_input.include_ue_id)
        document = model_document = train(user_input.algo, dataset, hyperparams).to_dict()
    manifest.config = {
        "algorithm": model_document["algorithm"],
        "hyperparams": model_document["hyperparams"],
        "include_ue_id": user_input.include_ue_id,
        "bundle": user_input.bundle,
    }
    if user_input.bundle:
        manifest.config.update({key: document[key] for key in BUNDLE_SETTINGS})
    out_dir = user_input.out_dir
    output = write_json(out_dir / user_input.out, document)
    _finish(manifest, out_dir, [user_input.trace, user_input.zones], [output])


def _load_predictor(path, zones_path=None) -> DeployedPredictor:
    data = read_json(path)
    if data.get("format") == BUNDLE_FORMAT:
        return DeployedPredictor.from_dict(data)
    if zones_path is None:
        raise ConfigError("zones", "a bare model needs `--zones` to be deployed")
    zones, params, snapshot_s = read_zones(zones_path)
    return DeployedPredictor(zones, params, model_from_dict(data), snapshot_s=snapshot_s)


def run_evaluate(user_input: UserInput) -> None:
    data = read_json(user_input.model)
    records = _read_labeled_trace(user_input)
    is_bundle = data.get("format") == BUNDLE_FORMAT
    if is_bundle:
        predictor = DeployedPredictor.from_dict(data)
        model = predictor.model
        if not user_input.options.get("zones"):
            records = label_trace(records, predictor.zones, predictor.eps_km)
    else:
        model = model_from_dict(data)
    report = evaluate(model, encode(records, schema=model.schema))
    logger.info("hold-out accuracy of %s: %.4f", model.algorithm, report.accuracy)
    out_dir = user_input.out_dir
    output = write_json(out_dir / user_input.out, report.to_dict())
    manifest = _manifest(user_input)
    manifest.config = {
        "algorithm": model.algorithm,
        "hyperparams": model.hyperparams,
        "bundle": is_bundle,
        "zones_from": (
            "zones" if user_input.options.get("zones") else "bundle" if is_bundle else None
        ),
    }
    _finish(manifest, out_dir, [user_input.model, user_input.trace, user_input.zones], [output])


def run_bench(user_input: UserInput) -> None:
    sim, _ = _configs(user_input)
    records = _read_labeled_trace(user_input)
    dataset = encode(records, include_ue_id=user_input.include_ue_id)
    report = benchmark(
        user_input.algos, dataset, user_input.reps, sim.seed, user_input.folds
    )
    out_dir = user_input.out_dir
    csv_path = out_dir / user_input.out
    outputs = [
        atomic_write_text(csv_path, bench_csv(report)),
        write_json(csv_path.with_suffix(".json"), report.to_dict()),
    ]
    manifest = _manifest(user_input)
    manifest.config = {
        "algorithms": [row.algorithm for row in report.rows],
        "hyperparams": {
            row.algorithm: DEFAULT_HYPERPARAMS[row.algorithm] for row in report.rows
        },
        "reps": user_input.reps,
        "folds": user_input.folds,
        "include_ue_id": user_input.include_ue_id,
    }
    manifest.seeds = {"seed": sim.seed}
    _finish(manifest, out_dir, [user_input.trace, user_input.zones], outputs)


def run_simulate(user_input: UserInput) -> None:
    sim, mec = _configs(user_input)
    records = read_trace(user_input.trace)
    sessions = read_sessions(user_input.sessions)
    topology = read_topology(user_input.topology)
    until_s = user_input.until
    if until_s is None:
        until_s = max((record.time_s for record in records), default=0)
    predictor = None
    if user_input.predictor is not None:
        predictor = _load_predictor(user_input.predictor, user_input.options.get("zones"))
    state = MecState(
        topology,
        mec,
        seed=sim.seed,
        share_cap=predictor.share_cap if predictor else 0,
        prewarm_ttl_s=predictor.prewarm_ttl_s if predictor else 300.0,
    )
    result = run(
        state,
        build_stream(records, sessions, until_s),
        until_s=until_s,
        check_invariants=user_input.check_invariants,
        observer=Prewarmer(predictor) if predictor else None,
    )
    out_dir = user_input.out_dir
    summary = {
        **result.summary,
        "ongoing": [
            {"ue": m.ue_id, "service": m.service, "ec": m.source_ec,
             "target_ec": m.target_ec, "finish_s": m.finish_s}
            for m in result.ongoing
        ],
    }
    outputs = [
        write_events(out_dir / "events.jsonl", result.events),
        write_json(out_dir / "summary.json", summary),
    ]
    manifest = _manifest(user_input, mec=mec)
    manifest.config.update({
        "until_s": until_s,
        "check_invariants": user_input.check_invariants,
        "share_cap": state.share_cap,
        "prewarm_ttl_s": state.prewarm_ttl_s,
    })
    manifest.seeds = {"seed": sim.seed}
    _finish(
        manifest, out_dir,
        [user_input.trace, user_input.sessions, user_input.topology,
         user_input.predictor, user_input.options.get("zones")],
        outputs,
    )


def run_compare(user_input: UserInput) -> None:
    sim, mec = _configs(
        user_input, num_ues=user_input.num_ues, sim_duration_s=user_input.duration
    )
    predictor = _load_predictor(user_input.predictor)
    # Session seeds of the runs start after the mobility seed.
    base_seed = sim.seed + 1
    report = compare_experiment(sim, mec, predictor, user_input.runs, base_seed)
    deltas = report.deltas()
    logger.info(
        "offloading success %.1f%% -> %.1f%%",
        100 * deltas["baseline_success_rate"], 100 * deltas["predicted_success_rate"],
    )
    out_dir = user_input.out_dir
    output = write_json(out_dir / user_input.out, report.to_dict())
    manifest = _manifest(user_input, simulation=sim, mec=mec)
    manifest.config.update({
        "runs": user_input.runs,
        "share_cap": predictor.share_cap,
        "prewarm_ttl_s": predictor.prewarm_ttl_s,
    })
    manifest.seeds = {"mobility_seed": sim.seed, "base_seed": base_seed}
    _finish(manifest, out_dir, [user_input.config, user_input.predictor], [output])


def run_report(user_input: UserInput) -> None:
    bench = comparison = None
    if user_input.bench is not None:
        bench = BenchReport.from_dict(read_json(user_input.bench))
    if user_input.comparison is not None:
        comparison = ComparisonReport.from_dict(read_json(user_input.comparison))
    if bench is None and comparison is None:
        raise ConfigError("report", "provide `--bench` and/or `--comparison`")
    out_dir = user_input.out_dir
    outputs = emit_report(out_dir, bench, comparison, user_input.figures, user_input.dpi)
    manifest = _manifest(user_input)
    manifest.config = {"figures": user_input.figures, "dpi": user_input.dpi}
    _finish(manifest, out_dir, [user_input.bench, user_input.comparison], outputs)


COMMAND_HANDLERS = {
    "generate": run_generate,
    "cluster": run_cluster,
    "train": run_train,
    "evaluate": run_evaluate,
    "bench": run_bench,
    "simulate": run_simulate,
    "compare": run_compare,
    "report": run_report,
}


def main(argv: Union[None, list[str]] = None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        user_input = parse_command_line_input(argv)
        logging.basicConfig(
            level=user_input.verbosity,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        COMMAND_HANDLERS[user_input.command](user_input)
    except EdgePlannerError as error:
        print(f"Error: {error}", file=sys.stderr)
        sys.exit(error.exit_code)
    except OSError as error:
        print(f"Error: {error}", file=sys.stderr)
        sys.exit(ArtifactIOError.exit_code)


if __name__ == "__main__":
    main()
