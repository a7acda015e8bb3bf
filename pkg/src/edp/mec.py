"""Event-driven model of the MEC infrastructure.

Every edge cloud (EC) owns a fixed set of VMs. A session start asks for an
application in the EC serving the UE; when the UE hands over to an eNB of
another EC, the application follows it (make-before-break migration: the
source placement is kept while the target is reserved). Eight event kinds
make up the ledger:

    OffloadingRequest, OffloadingSuccess, OffloadingFailure, Migration,
    MigrationSuccess, MigrationFailure, MigrationAborted, Release

Shared instances are applications placed ahead of demand for one
(EC, service) pair. UEs attach to them instead of allocating resources; an
unattached shared instance is removed `prewarm_ttl_s` after its last
detachment.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import dataclasses
import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum, StrEnum
from typing import Iterable, Union

import numpy as np

from edp.config import MecConfig, Resources, ZERO_RESOURCES
from edp.errors import InvariantError, StreamOrderError
from edp.streams import Trigger, TriggerKind
from edp.tracegen import Topology

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9


class EventKind(StrEnum):
    OFFLOADING_REQUEST = "OffloadingRequest"
    OFFLOADING_SUCCESS = "OffloadingSuccess"
    OFFLOADING_FAILURE = "OffloadingFailure"
    MIGRATION = "Migration"
    MIGRATION_SUCCESS = "MigrationSuccess"
    MIGRATION_FAILURE = "MigrationFailure"
    MIGRATION_ABORTED = "MigrationAborted"
    RELEASE = "Release"


class AppState(Enum):
    ACTIVE = "Active"
    MIGRATING = "Migrating"


class SessionMode(Enum):
    EDGE = "edge"
    SHARED = "shared"
    CLOUD = "cloud"


@dataclass(frozen=True)
class MecEvent:
    time_s: float
    kind: EventKind
    ue_id: int
    service: str
    ec_id: Union[int, None]
    target_ec: Union[int, None] = None
    cause: str = ""

    def to_dict(self) -> dict:
        return {
            "t": self.time_s,
            "kind": str(self.kind),
            "ue": self.ue_id,
            "service": self.service,
            "ec": self.ec_id,
            "target_ec": self.target_ec,
            "cause": self.cause,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MecEvent":
        return cls(
            float(data["t"]), EventKind(data["kind"]), data["ue"],
            data["service"], data["ec"], data.get("target_ec"),
            data.get("cause", ""),
        )


class Vm:
    """One virtual machine of an edge cloud.

    `hosted` maps the ids of the apps running on the VM to their
    requirements; `reservations` holds the resources reserved by incoming
    migrations. `allocated` is their total.
    """

    def __init__(self, vm_id: int, capacity: Resources):
        self.vm_id = vm_id
        self.capacity = capacity
        self.allocated = ZERO_RESOURCES
        self.hosted: dict[int, Resources] = {}
        self.reservations: dict[int, Resources] = {}

    @property
    def hosted_apps(self) -> set[int]:
        return set(self.hosted)

    @property
    def free(self) -> Resources:
        return self.capacity - self.allocated

    def fits(self, requirements: Resources) -> bool:
        return requirements.fits_in(self.free)

    def host(self, app_id: int, requirements: Resources) -> None:
        self.hosted[app_id] = requirements
        self.allocated = self.allocated + requirements

    def evict(self, app_id: int) -> None:
        self.allocated = self.allocated - self.hosted.pop(app_id)

    def reserve(self, app_id: int, requirements: Resources) -> None:
        self.reservations[app_id] = requirements
        self.allocated = self.allocated + requirements

    def cancel_reservation(self, app_id: int) -> None:
        self.allocated = self.allocated - self.reservations.pop(app_id)

    def commit_reservation(self, app_id: int) -> None:
        self.hosted[app_id] = self.reservations.pop(app_id)


@dataclass
class EdgeCloud:
    ec_id: int
    vms: list
    # service -> app id of the shared instance
    shared: dict = field(default_factory=dict)


@dataclass
class AppInstance:
    """Application placed in one VM.

    Dedicated apps serve one session (`ue_id`); shared apps serve the sessions
    in `attached`, keyed by (ue_id, start_s), plus the migrations holding a
    seat in `reserved_seats`.
    """

    app_id: int
    ue_id: Union[int, None]
    service: str
    ec_id: int
    vm_id: int
    requirements: Resources
    state: AppState = AppState.ACTIVE
    shared: bool = False
    attached: set = field(default_factory=set)
    reserved_seats: set = field(default_factory=set)
    expires_at: Union[float, None] = None

    @property
    def seats_taken(self) -> int:
        return len(self.attached) + len(self.reserved_seats)


@dataclass
class MigrationInProgress:
    """Transfer of an app to another EC.

    `target_vm` is None when the migration lands in the shared instance
    `target_app` instead of a VM. `source_app` is set when the session
    leaves a seat of that shared instance; `app_id` then names the
    dedicated copy reserved in the target VM.
    """

    app_id: int
    ue_id: int
    service: str
    source_ec: int
    source_vm: int
    target_ec: int
    target_vm: Union[int, None]
    start_s: float
    finish_s: float
    target_app: Union[int, None] = None
    source_app: Union[int, None] = None


@dataclass
class OffloadedSession:
    ue_id: int
    start_s: float
    service: str
    mode: SessionMode
    app_id: Union[int, None] = None
    # key of the migration leaving a shared seat
    migration: Union[int, None] = None


def place(policy: str, ec: EdgeCloud, requirements: Resources, rng) -> Union[int, None]:
    """Choose a VM of `ec` with room for `requirements`.

    FirstFit takes the lowest feasible vm_id. BestFit minimizes the leftover
    score sum((free - req) / capacity) over the three dimensions, ties to
    the lowest vm_id. Random draws uniformly among the feasible VMs.
    """
    feasible = [vm for vm in ec.vms if vm.fits(requirements)]
    if not feasible:
        return None
    if policy == "FirstFit":
        return feasible[0].vm_id
    if policy == "BestFit":
        best = None
        best_score = math.inf
        for vm in feasible:
            score = sum(
                (free - req) / capacity
                for free, req, capacity in zip(
                    vm.free.as_tuple(), requirements.as_tuple(), vm.capacity.as_tuple()
                )
            )
            if score < best_score - TOLERANCE:
                best = vm
                best_score = score
        return best.vm_id
    if policy == "Random":
        return feasible[int(rng.integers(len(feasible)))].vm_id
    raise ValueError(f"unknown placement policy `{policy}`")


class MecState:
    """Mutable state of one MEC run.

    Parameters
    ----------
    topology : Topology
        Provides the eNB -> EC mapping and the EC ids.
    cfg : MecConfig
    seed : int
        Seed of the Random placement policy.
    share_cap : int
        Seats of a shared instance; 0 disables shared instances.
    prewarm_ttl_s : float
        Lifetime of an unattached shared instance.
    """

    def __init__(
        self,
        topology: Topology,
        cfg: MecConfig,
        seed: int = 0,
        share_cap: int = 0,
        prewarm_ttl_s: float = 300.0,
    ):
        cfg.validate()
        self.cfg = cfg
        self.topology = topology
        self.share_cap = share_cap
        self.prewarm_ttl_s = prewarm_ttl_s
        self.rng = np.random.default_rng([seed, 5])
        self.ecs = {
            site.ec_id: EdgeCloud(
                site.ec_id,
                [Vm(vm_id, cfg.vm_resources) for vm_id in range(cfg.vms_per_ec)],
            )
            for site in topology.ecs
        }
        self.apps: dict[int, AppInstance] = {}
        self.migrations: dict[int, MigrationInProgress] = {}
        self.sessions: dict[tuple[int, float], OffloadedSession] = {}
        self.ue_enb: dict[int, int] = {}
        self.prewarm_placements = 0
        self.shared_attachments = 0
        self._app_ids = itertools.count()
        self._seq = itertools.count()
        self._pending: list = []

    # -- helpers -----------------------------------------------------------

    def serving_ec(self, ue_id: int) -> int:
        try:
            return self.topology.ec_of_enb(self.ue_enb[ue_id])
        except KeyError:
            raise StreamOrderError(
                f"UE {ue_id} has no known eNB; its first trace record is missing"
            ) from None

    def schedule(self, time_s: float, kind: TriggerKind, ue_id: int, payload) -> None:
        trigger = Trigger(time_s, kind, ue_id, next(self._seq), payload)
        heapq.heappush(self._pending, trigger)

    def sessions_of(self, ue_id: int) -> list[OffloadedSession]:
        return [
            self.sessions[key] for key in sorted(self.sessions) if key[0] == ue_id
        ]

    def shared_with_seat(self, ec_id: int, service: str) -> Union[AppInstance, None]:
        app_id = self.ecs[ec_id].shared.get(service)
        if app_id is None:
            return None
        app = self.apps[app_id]
        return app if app.seats_taken < self.share_cap else None

    def _new_app(self, ue_id, service, ec_id, vm_id, shared=False) -> AppInstance:
        app = AppInstance(
            next(self._app_ids), ue_id, service, ec_id, vm_id,
            self.cfg.app_resources, shared=shared,
        )
        self.apps[app.app_id] = app
        self.ecs[ec_id].vms[vm_id].host(app.app_id, app.requirements)
        return app

    def _remove_app(self, app: AppInstance) -> None:
        self.ecs[app.ec_id].vms[app.vm_id].evict(app.app_id)
        del self.apps[app.app_id]
        if app.shared:
            del self.ecs[app.ec_id].shared[app.service]

    def _detach(self, app: AppInstance, key: tuple, t: float) -> None:
        app.attached.discard(key)
        if app.seats_taken == 0:
            app.expires_at = t + self.prewarm_ttl_s
            self.schedule(app.expires_at, TriggerKind.EXPIRY, -1, app.app_id)

    def _attach(self, app: AppInstance, key: tuple) -> None:
        app.attached.add(key)
        app.expires_at = None
        self.shared_attachments += 1

    # -- shared instances --------------------------------------------------

    def place_shared(self, ec_id: int, service: str, t: float) -> bool:
        """Place a shared instance of `service` in `ec_id` if it has none.

        Returns True when a new instance was allocated. Failures are silent.
        """
        ec = self.ecs[ec_id]
        if self.share_cap <= 0 or service in ec.shared:
            return False
        vm_id = place(self.cfg.policy, ec, self.cfg.app_resources, self.rng)
        if vm_id is None:
            logger.debug("prewarm of %s in EC %d failed: no capacity", service, ec_id)
            return False
        app = self._new_app(None, service, ec_id, vm_id, shared=True)
        ec.shared[service] = app.app_id
        app.expires_at = t + self.prewarm_ttl_s
        self.schedule(app.expires_at, TriggerKind.EXPIRY, -1, app.app_id)
        self.prewarm_placements += 1
        return True

    def on_expiry(self, app_id: int, t: float) -> None:
        app = self.apps.get(app_id)
        if app is None or app.seats_taken or app.expires_at != t:
            return
        logger.debug("shared %s instance in EC %d expired", app.service, app.ec_id)
        self._remove_app(app)

    # -- invariants --------------------------------------------------------

    def check_invariants(self) -> None:
        """Raise InvariantError if a VM breaks resource conservation."""
        for ec in self.ecs.values():
            for vm in ec.vms:
                expected = ZERO_RESOURCES
                for requirements in vm.hosted.values():
                    expected = expected + requirements
                for requirements in vm.reservations.values():
                    expected = expected + requirements
                for got, want, capacity in zip(
                    vm.allocated.as_tuple(), expected.as_tuple(), vm.capacity.as_tuple()
                ):
                    if abs(got - want) > TOLERANCE:
                        raise InvariantError(
                            f"EC {ec.ec_id} VM {vm.vm_id}: allocated "
                            f"{vm.allocated} != hosted + reserved {expected}"
                        )
                    if got < -TOLERANCE or got > capacity + TOLERANCE:
                        raise InvariantError(
                            f"EC {ec.ec_id} VM {vm.vm_id}: allocated "
                            f"{vm.allocated} outside capacity {vm.capacity}"
                        )
            for app_id in ec.shared.values():
                if self.apps[app_id].seats_taken > max(self.share_cap, 0):
                    raise InvariantError(
                        f"EC {ec.ec_id}: shared instance {app_id} over share_cap"
                    )

    def shared_footprint(self) -> dict[tuple[int, int], Resources]:
        """Resources held by shared instances, per (ec_id, vm_id)."""
        footprint = {}
        for app in self.apps.values():
            if app.shared:
                key = (app.ec_id, app.vm_id)
                footprint[key] = footprint.get(key, ZERO_RESOURCES) + app.requirements
        return footprint


def on_session_start(
    state: MecState, ue: int, service: str, t: float, start_s: Union[float, None] = None
) -> list[MecEvent]:
    """Offload a new session to the EC serving the UE."""
    start_s = t if start_s is None else start_s
    ec_id = state.serving_ec(ue)
    events = [
        MecEvent(t, EventKind.OFFLOADING_REQUEST, ue, service, ec_id, cause="session-start")
    ]
    key = (ue, start_s)
    shared = state.shared_with_seat(ec_id, service)
    if shared is not None:
        state._attach(shared, key)
        state.sessions[key] = OffloadedSession(
            ue, start_s, service, SessionMode.SHARED, shared.app_id
        )
        events.append(
            MecEvent(t, EventKind.OFFLOADING_SUCCESS, ue, service, ec_id, cause="shared")
        )
        return events
    vm_id = place(state.cfg.policy, state.ecs[ec_id], state.cfg.app_resources, state.rng)
    if vm_id is None:
        state.sessions[key] = OffloadedSession(ue, start_s, service, SessionMode.CLOUD)
        events.append(
            MecEvent(t, EventKind.OFFLOADING_FAILURE, ue, service, ec_id, cause="no-capacity")
        )
        return events
    app = state._new_app(ue, service, ec_id, vm_id)
    state.sessions[key] = OffloadedSession(
        ue, start_s, service, SessionMode.EDGE, app.app_id
    )
    events.append(
        MecEvent(t, EventKind.OFFLOADING_SUCCESS, ue, service, ec_id, cause="placed")
    )
    return events


def _abort_migration(state: MecState, mig_id: int, t: float, cause: str) -> MecEvent:
    mig = state.migrations.pop(mig_id)
    if mig.target_app is not None:
        target = state.apps[mig.target_app]
        target.reserved_seats.discard(mig_id)
        if target.seats_taken == 0:
            target.expires_at = t + state.prewarm_ttl_s
            state.schedule(target.expires_at, TriggerKind.EXPIRY, -1, target.app_id)
    else:
        state.ecs[mig.target_ec].vms[mig.target_vm].cancel_reservation(mig_id)
    if mig.source_app is None:
        state.apps[mig_id].state = AppState.ACTIVE
    return MecEvent(
        t, EventKind.MIGRATION_ABORTED, mig.ue_id, mig.service, mig.source_ec,
        mig.target_ec, cause,
    )


def _start_migration(
    state: MecState, app: AppInstance, target_ec: int, t: float
) -> list[MecEvent]:
    events = [
        MecEvent(
            t, EventKind.MIGRATION, app.ue_id, app.service, app.ec_id, target_ec,
            cause="handover",
        )
    ]
    finish_s = t + state.cfg.migration_duration_s
    shared = state.shared_with_seat(target_ec, app.service)
    if shared is not None:
        shared.reserved_seats.add(app.app_id)
        shared.expires_at = None
        target_vm = None
        target_app = shared.app_id
    else:
        target_vm = place(
            state.cfg.policy, state.ecs[target_ec], app.requirements, state.rng
        )
        target_app = None
        if target_vm is None:
            events.append(
                MecEvent(
                    t, EventKind.MIGRATION_FAILURE, app.ue_id, app.service,
                    app.ec_id, target_ec, cause="no-capacity",
                )
            )
            return events
        state.ecs[target_ec].vms[target_vm].reserve(app.app_id, app.requirements)
    mig = MigrationInProgress(
        app.app_id, app.ue_id, app.service, app.ec_id, app.vm_id, target_ec,
        target_vm, t, finish_s, target_app,
    )
    state.migrations[app.app_id] = mig
    app.state = AppState.MIGRATING
    state.schedule(finish_s, TriggerKind.MIGRATION_FINISH, app.ue_id, mig)
    return events


def _move_shared(
    state: MecState, session: OffloadedSession, new_ec: int, t: float
) -> list[MecEvent]:
    """Migrate a session riding a shared instance.

    A free seat in a shared instance of the new EC is taken at once.
    Otherwise a dedicated copy is reserved in the new EC and the session
    keeps its old seat until the copy is ready.
    """
    events = []
    current = state.apps[session.app_id]
    if session.migration is not None:
        if state.migrations[session.migration].target_ec == new_ec:
            return events
        events.append(_abort_migration(state, session.migration, t, cause="handover"))
        session.migration = None
    if current.ec_id == new_ec:
        return events
    ue, service = session.ue_id, session.service
    events.append(
        MecEvent(t, EventKind.MIGRATION, ue, service, current.ec_id, new_ec, cause="handover")
    )
    candidate = state.shared_with_seat(new_ec, service)
    if candidate is not None:
        key = (ue, session.start_s)
        state._detach(current, key, t)
        state._attach(candidate, key)
        session.app_id = candidate.app_id
        events.append(
            MecEvent(
                t, EventKind.MIGRATION_SUCCESS, ue, service, current.ec_id, new_ec,
                cause="shared",
            )
        )
        return events
    requirements = state.cfg.app_resources
    target_vm = place(state.cfg.policy, state.ecs[new_ec], requirements, state.rng)
    if target_vm is None:
        events.append(
            MecEvent(
                t, EventKind.MIGRATION_FAILURE, ue, service, current.ec_id, new_ec,
                cause="no-capacity",
            )
        )
        return events
    mig_id = next(state._app_ids)
    state.ecs[new_ec].vms[target_vm].reserve(mig_id, requirements)
    finish_s = t + state.cfg.migration_duration_s
    mig = MigrationInProgress(
        mig_id, ue, service, current.ec_id, current.vm_id, new_ec, target_vm,
        t, finish_s, source_app=current.app_id,
    )
    state.migrations[mig_id] = mig
    session.migration = mig_id
    state.schedule(finish_s, TriggerKind.MIGRATION_FINISH, ue, mig)
    return events


def on_ue_moved(state: MecState, ue: int, new_enb: int, t: float) -> list[MecEvent]:
    """Follow the UE into the region of another EC.

    Every offloaded session migrates; a migration heading to an EC the UE
    is no longer served by is aborted first. Sessions on a shared instance
    hop to a free seat of the new EC or fall back to a dedicated copy.
    """
    state.ue_enb[ue] = new_enb
    new_ec = state.topology.ec_of_enb(new_enb)
    events = []
    for session in state.sessions_of(ue):
        if session.mode is SessionMode.SHARED:
            events.extend(_move_shared(state, session, new_ec, t))
            continue
        if session.mode is not SessionMode.EDGE:
            continue
        app = state.apps[session.app_id]
        if app.state is AppState.MIGRATING:
            if state.migrations[app.app_id].target_ec == new_ec:
                continue
            events.append(_abort_migration(state, app.app_id, t, cause="handover"))
        if app.ec_id != new_ec:
            events.extend(_start_migration(state, app, new_ec, t))
    return events


def on_migration_finish(
    state: MecState, mig: MigrationInProgress, t: float
) -> list[MecEvent]:
    """Complete a migration; stale (aborted) migrations produce nothing."""
    if state.migrations.get(mig.app_id) is not mig:
        return []
    del state.migrations[mig.app_id]
    event = MecEvent(
        t, EventKind.MIGRATION_SUCCESS, mig.ue_id, mig.service, mig.source_ec,
        mig.target_ec, cause="completed",
    )
    if mig.source_app is not None:
        vm = state.ecs[mig.target_ec].vms[mig.target_vm]
        vm.commit_reservation(mig.app_id)
        state.apps[mig.app_id] = AppInstance(
            mig.app_id, mig.ue_id, mig.service, mig.target_ec, mig.target_vm,
            vm.hosted[mig.app_id],
        )
        source = state.apps[mig.source_app]
        for session in state.sessions_of(mig.ue_id):
            if session.migration == mig.app_id:
                state._detach(source, (session.ue_id, session.start_s), t)
                session.mode = SessionMode.EDGE
                session.app_id = mig.app_id
                session.migration = None
        return [event]
    app = state.apps[mig.app_id]
    if mig.target_app is not None:
        target = state.apps[mig.target_app]
        target.reserved_seats.discard(app.app_id)
        state._remove_app(app)
        for session in state.sessions_of(mig.ue_id):
            if session.mode is SessionMode.EDGE and session.app_id == app.app_id:
                session.mode = SessionMode.SHARED
                session.app_id = target.app_id
                state._attach(target, (session.ue_id, session.start_s))
        return [dataclasses.replace(event, cause="shared")]
    state.ecs[mig.source_ec].vms[mig.source_vm].evict(app.app_id)
    state.ecs[mig.target_ec].vms[mig.target_vm].commit_reservation(app.app_id)
    app.ec_id = mig.target_ec
    app.vm_id = mig.target_vm
    app.state = AppState.ACTIVE
    return [event]


def on_session_end(
    state: MecState, ue: int, t: float, start_s: Union[float, None] = None
) -> list[MecEvent]:
    """End the UE's session started at `start_s` (None: its oldest one)."""
    sessions = state.sessions_of(ue)
    if start_s is not None:
        sessions = [s for s in sessions if s.start_s == start_s]
    if not sessions:
        return []
    session = sessions[0]
    del state.sessions[(session.ue_id, session.start_s)]
    if session.mode is SessionMode.CLOUD:
        return []
    app = state.apps[session.app_id]
    events = []
    if session.mode is SessionMode.SHARED:
        if session.migration is not None:
            events.append(
                _abort_migration(state, session.migration, t, cause="session-end")
            )
        state._detach(app, (session.ue_id, session.start_s), t)
        return events
    if app.state is AppState.MIGRATING:
        events.append(_abort_migration(state, app.app_id, t, cause="session-end"))
    state._remove_app(app)
    events.append(
        MecEvent(t, EventKind.RELEASE, ue, app.service, app.ec_id, cause="session-end")
    )
    return events


@dataclass
class RunResult:
    events: list
    summary: dict
    ongoing: list


def summarize(state: MecState, events: Iterable[MecEvent]) -> dict:
    """Per-kind counts, ongoing migrations and success rates."""
    counts = {str(kind): 0 for kind in EventKind}
    for event in events:
        counts[str(event.kind)] += 1
    requests = counts[EventKind.OFFLOADING_REQUEST]
    migrations = counts[EventKind.MIGRATION]
    return {
        "counts": counts,
        "ongoing_migrations": len(state.migrations),
        "offloading_success_rate": (
            counts[EventKind.OFFLOADING_SUCCESS] / requests if requests else 0.0
        ),
        "migration_success_rate": (
            counts[EventKind.MIGRATION_SUCCESS] / migrations if migrations else 0.0
        ),
        "prewarm_placements": state.prewarm_placements,
        "shared_attachments": state.shared_attachments,
    }


def _check_ledger(summary: dict) -> None:
    counts = summary["counts"]
    if counts["OffloadingRequest"] != counts["OffloadingSuccess"] + counts["OffloadingFailure"]:
        raise InvariantError(f"offloading ledger does not balance: {counts}")
    resolved = (
        counts["MigrationSuccess"] + counts["MigrationFailure"]
        + counts["MigrationAborted"] + summary["ongoing_migrations"]
    )
    if counts["Migration"] != resolved:
        raise InvariantError(f"migration ledger does not balance: {counts}")
    if counts["Release"] > counts["OffloadingSuccess"]:
        raise InvariantError(f"more releases than offloads: {counts}")


def _dispatch(state: MecState, trigger: Trigger, observer) -> list[MecEvent]:
    kind = trigger.kind
    t = trigger.time_s
    if kind is TriggerKind.MOVE:
        record = trigger.payload
        if observer is not None:
            observer.on_record(state, record)
        previous = state.ue_enb.get(trigger.ue_id)
        if previous is None or previous == record.enodeb_id:
            state.ue_enb[trigger.ue_id] = record.enodeb_id
            return []
        return on_ue_moved(state, trigger.ue_id, record.enodeb_id, t)
    if kind is TriggerKind.SESSION_START:
        service, start_s = trigger.payload
        return on_session_start(state, trigger.ue_id, service, t, start_s)
    if kind is TriggerKind.SESSION_END:
        return on_session_end(state, trigger.ue_id, t, trigger.payload)
    if kind is TriggerKind.MIGRATION_FINISH:
        return on_migration_finish(state, trigger.payload, t)
    state.on_expiry(trigger.payload, t)
    return []


def run(
    state: MecState,
    stream: Iterable[Trigger],
    until_s: Union[float, None] = None,
    check_invariants: bool = False,
    observer=None,
) -> RunResult:
    """Process a time-ordered trigger stream.

    Triggers sharing a timestamp are handled in the order movement, session
    start, session end, migration finish, expiry, then by ue_id. Internal
    triggers later than `until_s` are not processed; migrations still in
    flight at the end are reported as ongoing.

    Parameters
    ----------
    state : MecState
    stream : iterable of Trigger
        Movement and session triggers with non-decreasing `time_s`.
    until_s : float or None
        End of the simulated horizon. None means the time of the last
        stream trigger.
    check_invariants : bool
        Verify resource conservation after every trigger.
    observer : object or None
        Its `on_record(state, record)` sees every trace record before the
        MEC reacts to it.
    """
    events = []
    last_t = -math.inf
    horizon = math.inf if until_s is None else until_s

    def process(trigger):
        events.extend(_dispatch(state, trigger, observer))
        if check_invariants:
            state.check_invariants()

    def drain(limit, inclusive):
        pending = state._pending
        while pending and (
            pending[0].time_s <= limit if inclusive else pending[0].time_s < limit
        ):
            process(heapq.heappop(pending))

    for time_s, batch in itertools.groupby(stream, key=lambda trigger: trigger.time_s):
        if time_s < last_t:
            raise StreamOrderError(
                f"trigger at t={time_s} follows a trigger at t={last_t}"
            )
        last_t = time_s
        if time_s > horizon:
            break
        drain(time_s, inclusive=False)
        for trigger in sorted(batch):
            process(trigger)
    if until_s is None:
        horizon = last_t if last_t > -math.inf else 0.0
    drain(horizon, inclusive=True)
    summary = summarize(state, events)
    _check_ledger(summary)
    ongoing = sorted(state.migrations.values(), key=lambda m: (m.finish_s, m.app_id))
    logger.info(
        "MEC run: %d events, %d requests (%.1f%% offloaded), %d migrations, %d ongoing",
        len(events), summary["counts"]["OffloadingRequest"],
        100 * summary["offloading_success_rate"], summary["counts"]["Migration"],
        len(ongoing),
    )
    return RunResult(events, summary, ongoing)
