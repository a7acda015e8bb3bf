"""Train the service predictor and deploy it inside the MEC simulation.

The predictor pairs dense zones with a classifier trained on the zone
labeled trace. Deployed in a MEC run, it watches every trace record: when a
UE enters a dense zone, the service it is expected to use is predicted and a
shared instance of that service is placed in the serving edge cloud.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from edp.classifiers import Model, model_from_dict, predict, train
from edp.dense_area import (
    DbscanParams, DenseZone, assign_zone, dbscan, label_trace,
    snapshot_positions, zone_label,
)
from edp.errors import ConfigError, NoDenseAreasError, TraceFormatError
from edp.features import encode, record_features
from edp.mec import MecState
from edp.tracegen import TraceRecord

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = "edgeplanner-predictor"
BUNDLE_VERSION = 1
LEAD_POLICIES = ("on-zone-entry",)


@dataclass
class DeployedPredictor:
    """Dense zones, a trained model and the prewarm parameters.

    Attributes
    ----------
    zones : list[DenseZone]
    dbscan : DbscanParams
        Parameters the zones were found with; `eps_km` is also the slack of
        zone assignment.
    model : Model
        Trained on the zone labeled trace; its schema has a `zone` feature.
    share_cap : int
        Seats of a shared instance.
    prewarm_ttl_s : float
        Lifetime of an unattached shared instance.
    lead_policy : str
    snapshot_s : int or None
        Time of the position snapshot that was clustered.
    """

    zones: list
    dbscan: DbscanParams
    model: Model
    share_cap: int = 10
    prewarm_ttl_s: float = 300.0
    lead_policy: str = "on-zone-entry"
    snapshot_s: Union[int, None] = None

    def __post_init__(self):
        if "zone" not in self.model.schema.names:
            raise ConfigError("model", "schema has no `zone` feature")
        if not isinstance(self.share_cap, int) or self.share_cap < 0:
            raise ConfigError("share_cap", f"must be an integer >= 0, got {self.share_cap!r}")
        if not self.prewarm_ttl_s > 0:
            raise ConfigError("prewarm_ttl_s", f"must be > 0, got {self.prewarm_ttl_s!r}")
        if self.lead_policy not in LEAD_POLICIES:
            raise ConfigError("lead_policy", f"unknown lead policy `{self.lead_policy}`")

    @property
    def eps_km(self) -> float:
        return self.dbscan.eps_km

    def zone_of(self, record: TraceRecord) -> Union[int, None]:
        return assign_zone(self.zones, record.point, self.eps_km)

    def to_dict(self) -> dict:
        return {
            "format": BUNDLE_FORMAT,
            "version": BUNDLE_VERSION,
            "zones": [zone.to_dict() for zone in self.zones],
            "eps_km": self.dbscan.eps_km,
            "min_pts": self.dbscan.min_pts,
            "snapshot_s": self.snapshot_s,
            "share_cap": self.share_cap,
            "prewarm_ttl_s": self.prewarm_ttl_s,
            "lead_policy": self.lead_policy,
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DeployedPredictor":
        if data.get("format") != BUNDLE_FORMAT:
            raise TraceFormatError("<bundle>", 0, "not an edgeplanner predictor bundle")
        return cls(
            zones=[DenseZone.from_dict(zone) for zone in data["zones"]],
            dbscan=DbscanParams(float(data["eps_km"]), int(data["min_pts"])),
            model=model_from_dict(data["model"]),
            share_cap=int(data["share_cap"]),
            prewarm_ttl_s=float(data["prewarm_ttl_s"]),
            lead_policy=data["lead_policy"],
            snapshot_s=data.get("snapshot_s"),
        )

    def with_deployment(self, share_cap=None, prewarm_ttl_s=None) -> "DeployedPredictor":
        changes = {}
        if share_cap is not None:
            changes["share_cap"] = share_cap
        if prewarm_ttl_s is not None:
            changes["prewarm_ttl_s"] = prewarm_ttl_s
        return dataclasses.replace(self, **changes)


def train_pipeline(
    trace: Sequence[TraceRecord],
    dbscan_params: DbscanParams,
    alg: str = "knn",
    hyperparams: Union[dict, None] = None,
    seed: int = 0,
    snapshot_s: Union[int, None] = None,
    share_cap: int = 10,
    prewarm_ttl_s: float = 300.0,
    include_ue_id: bool = False,
) -> DeployedPredictor:
    """Cluster a position snapshot, label the trace, encode and train.

    Raises
    ------
    NoDenseAreasError
        The snapshot has no dense area.
    EmptyDatasetError
        The trace has no labeled record.
    """
    _, points = snapshot_positions(trace, snapshot_s)
    clustering = dbscan(points, dbscan_params)
    if not clustering.zones:
        raise NoDenseAreasError(
            f"no dense areas among {len(points)} UEs "
            f"(eps {dbscan_params.eps_km} km, min_pts {dbscan_params.min_pts})"
        )
    labeled = label_trace(trace, clustering.zones, dbscan_params.eps_km)
    dataset = encode(labeled, include_ue_id=include_ue_id)
    model = train(alg, dataset, hyperparams, np.random.default_rng(seed))
    logger.info(
        "predictor: %d zones, %s over %d instances and %d classes",
        len(clustering.zones), model.algorithm, len(dataset), len(model.classes),
    )
    return DeployedPredictor(
        clustering.zones, dbscan_params, model, share_cap, prewarm_ttl_s,
        snapshot_s=snapshot_s,
    )


@dataclass(frozen=True)
class PrewarmAction:
    ue_id: int
    ec_id: int
    service: str
    placed: bool


def prewarm(
    state: MecState, predictor: DeployedPredictor, record: TraceRecord, t: float
) -> PrewarmAction:
    """Predict the service of the UE seen in `record` and prewarm it.

    `record` carries the UE's current position and eNB, its zone label and
    its last observed datarates. A shared instance is placed in the serving
    EC unless one for the predicted service already exists; failures are
    silent.
    """
    label, _ = predict(predictor.model, record_features(record, predictor.model.schema))
    ec_id = state.topology.ec_of_enb(record.enodeb_id)
    placed = state.place_shared(ec_id, label, t)
    if placed:
        logger.debug("prewarmed %s in EC %d for UE %d", label, ec_id, record.ue_id)
    return PrewarmAction(record.ue_id, ec_id, label, placed)


class Prewarmer:
    """MEC run observer that prewarms on dense-zone entries.

    A UE enters a zone when its previous record was outside every zone (or
    it had no previous record) and the current one is inside a zone.
    """

    def __init__(self, predictor: DeployedPredictor):
        self.predictor = predictor
        self.zone_of_ue: dict[int, Union[int, None]] = {}
        self.last_rates: dict[int, tuple[int, int]] = {}
        self.actions: list[PrewarmAction] = []

    def on_record(self, state: MecState, record: TraceRecord) -> None:
        if record.datarate_uplink_kbps or record.datarate_downlink_kbps:
            self.last_rates[record.ue_id] = (
                record.datarate_uplink_kbps, record.datarate_downlink_kbps
            )
        zone = self.predictor.zone_of(record)
        previous = self.zone_of_ue.get(record.ue_id)
        self.zone_of_ue[record.ue_id] = zone
        if zone is None or previous is not None:
            return
        uplink, downlink = self.last_rates.get(record.ue_id, (0, 0))
        features = dataclasses.replace(
            record,
            datarate_uplink_kbps=uplink,
            datarate_downlink_kbps=downlink,
            zone=zone_label(zone),
        )
        self.actions.append(prewarm(state, self.predictor, features, record.time_s))
