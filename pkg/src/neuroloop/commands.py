"""The four-way discrete command vocabulary shared by every stage of the loop."""

from __future__ import annotations

from enum import IntEnum


class Command(IntEnum):
    """Discrete avatar command. Integer values are the decoder's class indices."""

    FORWARD = 0
    RIGHT = 1
    LEFT = 2
    STOP = 3

    @property
    def wire_name(self) -> str:
        """Capitalized name used in JSON logs and WebSocket frames."""
        return _WIRE_NAMES[self]

    @classmethod
    def from_wire(cls, name: str) -> "Command":
        try:
            return _FROM_WIRE[name]
        except KeyError:
            raise ValueError(f"unknown command name: {name!r}") from None


_WIRE_NAMES = {
    Command.FORWARD: "Forward",
    Command.RIGHT: "Right",
    Command.LEFT: "Left",
    Command.STOP: "Stop",
}
_FROM_WIRE = {v: k for k, v in _WIRE_NAMES.items()}

N_COMMANDS = len(Command)
