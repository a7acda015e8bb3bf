"""Turn a trace and its sessions into the MEC trigger stream.

License
-------
This file is part of edgeplanner
BSD 3-Clause License
"""
import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Sequence, Union

from edp.tracegen import ServiceSession, TraceRecord

logger = logging.getLogger(__name__)


class TriggerKind(IntEnum):
    """Trigger kinds; the value is the rank among same-time triggers."""

    MOVE = 0
    SESSION_START = 1
    SESSION_END = 2
    MIGRATION_FINISH = 3
    EXPIRY = 4


@dataclass(order=True, frozen=True)
class Trigger:
    """One input of the MEC state machine.

    Payloads: MOVE carries the TraceRecord, SESSION_START a
    (service, start_s) pair, SESSION_END the session start time,
    MIGRATION_FINISH the migration and EXPIRY the shared app id.
    """

    time_s: float
    kind: TriggerKind
    ue_id: int
    seq: int
    payload: Any = field(default=None, compare=False)


def build_stream(
    records: Sequence[TraceRecord],
    sessions: Sequence[ServiceSession],
    until_s: Union[float, None] = None,
) -> list[Trigger]:
    """Movement and session triggers ordered by (time, kind, ue_id).

    Every trace record becomes a MOVE trigger. Sessions contribute a start
    and an end trigger; triggers after `until_s` are dropped, so sessions
    still running at the horizon never end.
    """
    horizon = float("inf") if until_s is None else until_s
    raw = []
    for record in records:
        if record.time_s <= horizon:
            raw.append((record.time_s, TriggerKind.MOVE, record.ue_id, record))
    for session in sessions:
        if session.start_s <= horizon:
            raw.append(
                (
                    session.start_s, TriggerKind.SESSION_START, session.ue_id,
                    (session.service, session.start_s),
                )
            )
        if session.end_s <= horizon:
            raw.append(
                (session.end_s, TriggerKind.SESSION_END, session.ue_id, session.start_s)
            )
    raw.sort(key=lambda item: item[:3])
    stream = [
        Trigger(time_s, kind, ue_id, seq, payload)
        for seq, (time_s, kind, ue_id, payload) in enumerate(raw)
    ]
    logger.debug(
        "stream: %d triggers from %d records and %d sessions",
        len(stream), len(records), len(sessions),
    )
    return stream
