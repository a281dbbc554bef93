"""Virtual-wheelchair target-reaching task.

Discrete control at the decoder rate: the avatar starts at the origin, a
square target appears forward, left or right, and the trial succeeds when the
avatar stays inside the target for the hold duration before the timeout.
Commands translate the avatar (a rotation/heading mode exists behind a config
switch but is not the default).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Iterable

import numpy as np

from .commands import Command

TARGET_DIRECTIONS = (Command.FORWARD, Command.LEFT, Command.RIGHT)

_DIRECTION_ANGLES_DEG = {
    Command.FORWARD: 90.0,
    Command.LEFT: 180.0,
    Command.RIGHT: 0.0,
}


class Phase(Enum):
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


class TrialStateError(RuntimeError):
    """A finished trial was stepped."""


@dataclass(frozen=True)
class TrialConfig:
    """Geometry and timing of one trial (distances in cm, times in seconds)."""

    decoder_hz: float = 10.0
    timeout_s: float = 13.0
    hold_s: float = 1.5
    target_side: float = 2.0
    target_distance: float = 10.0
    step_size: float = 1.0
    rotation_mode: bool = False

    def __post_init__(self):
        for name in ("decoder_hz", "timeout_s", "hold_s", "target_side", "target_distance", "step_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("timeout_s", "hold_s"):
            ticks = getattr(self, name) * self.decoder_hz
            if abs(ticks - round(ticks)) > 1e-9:
                raise ValueError(f"{name} must be an integer number of ticks")

    @property
    def max_ticks(self) -> int:
        return round(self.timeout_s * self.decoder_hz)

    @property
    def hold_ticks_required(self) -> int:
        return round(self.hold_s * self.decoder_hz)


@dataclass(frozen=True)
class ArenaState:
    """Immutable snapshot of one trial; step() returns a new value."""

    x: float
    y: float
    target_x: float
    target_y: float
    target_side: float
    direction: Command
    tick: int = 0
    hold_ticks: int = 0
    phase: Phase = Phase.RUNNING
    heading: int = 0  # quarter turns from +y; used only in rotation mode

    @property
    def inside_target(self) -> bool:
        half = self.target_side / 2.0
        return abs(self.x - self.target_x) <= half and abs(self.y - self.target_y) <= half


def spawn_trial(config: TrialConfig, rng: np.random.Generator) -> ArenaState:
    """New trial: avatar at the origin, target drawn equiprobably."""
    direction = TARGET_DIRECTIONS[int(rng.integers(0, len(TARGET_DIRECTIONS)))]
    return spawn_trial_for(config, direction)


def spawn_trial_for(config: TrialConfig, direction: Command) -> ArenaState:
    if direction not in TARGET_DIRECTIONS:
        raise ValueError(f"{direction} is not a target direction")
    angle = math.radians(_DIRECTION_ANGLES_DEG[direction])
    return ArenaState(
        x=0.0,
        y=0.0,
        target_x=round(config.target_distance * math.cos(angle), 12),
        target_y=round(config.target_distance * math.sin(angle), 12),
        target_side=config.target_side,
        direction=direction,
    )


_TRANSLATION = {
    Command.FORWARD: (0.0, 1.0),
    Command.RIGHT: (1.0, 0.0),
    Command.LEFT: (-1.0, 0.0),
    Command.STOP: (0.0, 0.0),
}

_HEADING_VECTORS = ((0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0))


def step(state: ArenaState, cmd: Command, config: TrialConfig) -> ArenaState:
    """Advance one tick: move, then update hold / timeout bookkeeping."""
    if state.phase is not Phase.RUNNING:
        raise TrialStateError(f"cannot step a trial in phase {state.phase.value}")
    heading = state.heading
    if config.rotation_mode:
        if cmd is Command.RIGHT:
            heading = (heading + 1) % 4
        elif cmd is Command.LEFT:
            heading = (heading - 1) % 4
        if cmd is Command.FORWARD:
            dx, dy = _HEADING_VECTORS[heading]
        else:
            dx, dy = 0.0, 0.0
    else:
        dx, dy = _TRANSLATION[cmd]
    new = replace(
        state,
        x=state.x + dx * config.step_size,
        y=state.y + dy * config.step_size,
        tick=state.tick + 1,
        heading=heading,
    )
    hold = new.hold_ticks + 1 if new.inside_target else 0
    phase = Phase.RUNNING
    if hold >= config.hold_ticks_required:
        phase = Phase.SUCCEEDED
    elif new.tick >= config.max_ticks:
        phase = Phase.FAILED
    return replace(new, hold_ticks=hold, phase=phase)


def oracle_policy(state: ArenaState, config: TrialConfig) -> Command:
    """Ground-truth command: stop inside the target, otherwise close the
    dominant displacement axis (forward for |dy| >= |dx|, else left/right)."""
    if state.phase is not Phase.RUNNING:
        raise TrialStateError("oracle_policy expects a running trial")
    if state.inside_target:
        return Command.STOP
    dx = state.target_x - state.x
    dy = state.target_y - state.y
    if abs(dy) >= abs(dx):
        return Command.FORWARD
    return Command.RIGHT if dx > 0 else Command.LEFT


@dataclass(frozen=True)
class TickEntry:
    """Provenance of one tick. Features ride along in memory only."""

    tick: int
    cmd_decoded: Command | None
    cmd_executed: Command
    cmd_oracle: Command
    x: float
    y: float
    features: np.ndarray | None = None


@dataclass
class TrialRecord:
    trial_id: int
    direction: Command
    entries: list[TickEntry] = field(default_factory=list)
    outcome: Phase = Phase.RUNNING

    @property
    def duration_ticks(self) -> int:
        return len(self.entries)

    @property
    def succeeded(self) -> bool:
        return self.outcome is Phase.SUCCEEDED

    def match_fraction(self) -> float:
        """Fraction of ticks whose decoded command equals the oracle command."""
        decided = [e for e in self.entries if e.cmd_decoded is not None]
        if not decided:
            return float("nan")
        return sum(e.cmd_decoded == e.cmd_oracle for e in decided) / len(decided)


def record_to_json(record: TrialRecord) -> dict:
    return {
        "id": record.trial_id,
        "dir": record.direction.wire_name,
        "ticks": [
            {
                "k": e.tick,
                "cmd_dec": None if e.cmd_decoded is None else e.cmd_decoded.wire_name,
                "cmd_exec": e.cmd_executed.wire_name,
                "cmd_oracle": e.cmd_oracle.wire_name,
                "x": e.x,
                "y": e.y,
            }
            for e in record.entries
        ],
        "outcome": record.outcome.value,
        "dur": record.duration_ticks,
    }


def record_from_json(doc: dict) -> TrialRecord:
    entries = [
        TickEntry(
            tick=int(t["k"]),
            cmd_decoded=None if t["cmd_dec"] is None else Command.from_wire(t["cmd_dec"]),
            cmd_executed=Command.from_wire(t["cmd_exec"]),
            cmd_oracle=Command.from_wire(t["cmd_oracle"]),
            x=float(t["x"]),
            y=float(t["y"]),
        )
        for t in doc["ticks"]
    ]
    record = TrialRecord(
        trial_id=int(doc["id"]),
        direction=Command.from_wire(doc["dir"]),
        entries=entries,
        outcome=Phase(doc["outcome"]),
    )
    if record.duration_ticks != int(doc["dur"]):
        raise ValueError("dur field disagrees with tick count")
    return record


def write_records_jsonl(records: Iterable[TrialRecord], fp: IO[str]) -> None:
    """One trial per line under the fixed log schema."""
    for record in records:
        fp.write(json.dumps(record_to_json(record)) + "\n")


def read_records_jsonl(fp: IO[str]) -> list[TrialRecord]:
    return [record_from_json(json.loads(line)) for line in fp if line.strip()]


def replay_record(record: TrialRecord, config: TrialConfig) -> ArenaState:
    """Re-run a record's executed commands; raises if the log is inconsistent."""
    state = spawn_trial_for(config, record.direction)
    for entry in record.entries:
        state = step(state, entry.cmd_executed, config)
        if (state.x, state.y) != (entry.x, entry.y) or state.tick != entry.tick:
            raise ValueError(f"replay diverged at tick {entry.tick}")
    if state.phase is not record.outcome:
        raise ValueError("replay outcome disagrees with record")
    return state
