"""JSON-lines environment service for external learning agents.

One request object per line, one reply per line. Protocol:

  {"cmd": "reset", "seed": 7}
  {"cmd": "step", "actions": [{"device": 0, "slot": 3, "power": "17dbm"}, ...]}
  {"cmd": "close"}

Replies carry {"ok", "state", "reward", "frame", "done", "error"?}. Devices
are 0-based, slots 1-based. Each reset with the same seed advances to the
next realisation of that seed's stream (fresh traffic and fading); a new
seed restarts the episode counter. Rejected steps (malformed input, energy
or window violations) leave the episode state untouched.
"""

from __future__ import annotations

import json
import socket
import sys
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .scenario import Scenario, from_experiment, realization
from .sinr import Assignment, ConstraintViolation, count_delivered
from .units import dbm_to_mw, energy_cost_micro, mw_to_micro


class ProtocolError(ValueError):
    pass


def _power_token(level_dbm: float, off: bool) -> str:
    return "off" if off else f"{level_dbm:g}dbm"


@dataclass
class EnvSession:
    """Frame-stepped episode state for one client."""

    config: ExperimentConfig
    scenario: Scenario | None = None
    real: Scenario | None = None
    episode: int = 0
    frame: int = 1
    energies_micro: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    served: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __post_init__(self) -> None:
        net = self.config.network
        self._tokens: dict[str, int] = {}
        for k, p in enumerate(net.power_levels_dbm):
            off = dbm_to_mw(p) == 0.0
            self._tokens[_power_token(p, off)] = k
            if off:
                self._off_idx = k
        self._levels_mw = np.array([dbm_to_mw(p) for p in net.power_levels_dbm])
        self._costs = np.array(
            [energy_cost_micro(p) for p in net.power_levels_dbm], dtype=np.int64
        )

    # -- request handling ---------------------------------------------------

    def handle(self, request: dict) -> dict:
        try:
            cmd = request.get("cmd")
            if cmd == "reset":
                return self._reset(request)
            if cmd == "step":
                return self._step(request)
            if cmd == "close":
                return {"ok": True, "closed": True}
            raise ProtocolError(f"unknown cmd {cmd!r}")
        except (ProtocolError, ConstraintViolation, KeyError, TypeError, ValueError) as exc:
            return {"ok": False, "error": str(exc)}

    def _reset(self, request: dict) -> dict:
        seed = request.get("seed")
        if not isinstance(seed, int):
            raise ProtocolError("reset requires an integer seed")
        if self.scenario is None or self.scenario.seed != seed:
            self.scenario = from_experiment(self.config, seed)
            self.episode = 0
        self.episode += 1
        self.real = realization(self.scenario, self.episode)
        M = self.config.network.num_devices
        self.frame = 1
        self.energies_micro = np.full(
            M, mw_to_micro(self.config.network.energy_budget_mw), dtype=np.int64
        )
        self.served = np.zeros(M, dtype=bool)
        return {
            "ok": True,
            "state": self._state(),
            "reward": 0.0,
            "frame": self.frame,
            "done": False,
        }

    def _parse_actions(self, request: dict) -> tuple[np.ndarray, np.ndarray]:
        net = self.config.network
        M, N = net.num_devices, net.num_slots
        actions = request.get("actions")
        if not isinstance(actions, list):
            raise ProtocolError("step requires an actions list")
        slot_of = np.zeros(M, dtype=np.int64)
        level_of = np.full(M, self._off_idx, dtype=np.int64)
        seen: set[int] = set()
        for entry in actions:
            if not isinstance(entry, dict):
                raise ProtocolError("each action must be an object")
            dev = entry.get("device")
            if not isinstance(dev, int) or not 0 <= dev < M:
                raise ProtocolError(f"device must be in 0..{M - 1}, got {dev!r}")
            if dev in seen:
                raise ProtocolError(f"duplicate action for device {dev}")
            seen.add(dev)
            token = str(entry.get("power", "off")).lower()
            if token not in self._tokens:
                raise ProtocolError(
                    f"device {dev}: unknown power {token!r}; expected one of "
                    + ", ".join(sorted(self._tokens))
                )
            level = self._tokens[token]
            slot = entry.get("slot")
            if slot is not None and not (isinstance(slot, int) and 1 <= slot <= N):
                raise ProtocolError(f"device {dev}: slot must be null or 1..{N}")
            powered = level != self._off_idx
            if slot is None and powered:
                raise ConstraintViolation(dev, "power without slot", "choose a slot or power off")
            if not powered:
                slot = None  # an off power with a slot means "do not transmit"
            slot_of[dev] = 0 if slot is None else slot
            level_of[dev] = level
        if len(seen) != M:
            missing = sorted(set(range(M)) - seen)
            raise ProtocolError(f"missing actions for devices {missing}")
        return slot_of, level_of

    def _step(self, request: dict) -> dict:
        if self.real is None:
            raise ProtocolError("step before reset")
        if self.frame > self.real.num_frames:
            raise ProtocolError("episode finished; reset to continue")
        slot_of, level_of = self._parse_actions(request)
        t = self.frame - 1

        # Validate before mutating anything so a rejected step has no effect.
        for dev in range(len(slot_of)):
            j = int(slot_of[dev])
            if j == 0:
                continue
            a = int(self.real.arrivals[t, dev])
            d = int(self.real.deadlines[t, dev])
            if not a <= j <= d - 1:
                raise ConstraintViolation(
                    dev, "arrival/deadline window", f"slot {j} outside {{{a}..{d - 1}}}"
                )
            cost = int(self._costs[level_of[dev]])
            if cost > self.energies_micro[dev]:
                raise ConstraintViolation(
                    dev,
                    "energy budget",
                    f"cost {cost / 1e6:g} mW exceeds remaining "
                    f"{self.energies_micro[dev] / 1e6:g} mW",
                )

        T, M = self.real.num_frames, self.real.num_devices
        slots = np.zeros((T, M), dtype=np.int64)
        powers = np.zeros((T, M))
        slots[t] = slot_of
        powers[t] = np.where(slot_of > 0, self._levels_mw[level_of], 0.0)
        served_count, flags = count_delivered(Assignment(slots, powers), self.real, self.frame)

        transmitting = slot_of > 0
        self.energies_micro = self.energies_micro - np.where(
            transmitting, self._costs[level_of], 0
        )
        self.served = flags
        self.frame += 1
        done = self.frame > self.real.num_frames
        return {
            "ok": True,
            "state": self._state(),
            "reward": float(served_count),
            "frame": self.frame,
            "done": done,
        }

    def _state(self) -> list[dict]:
        assert self.real is not None
        M, N = self.real.num_devices, self.real.num_slots
        served = [bool(x) for x in self.served]
        out = []
        past_end = self.frame > self.real.num_frames
        t = self.frame - 1
        for i in range(M):
            gains = [0.0] * N if past_end else [float(x) for x in self.real.gains[t, i]]
            out.append(
                {
                    "gains": gains,
                    "served": served,
                    "energy": float(self.energies_micro[i] / 1e6),
                    "arrival": 0 if past_end else int(self.real.arrivals[t, i]),
                    "deadline": 0 if past_end else int(self.real.deadlines[t, i]),
                    "frame": self.frame,
                    "episode": self.episode,
                }
            )
        return out


def _serve_stream(session: EnvSession, lines, write) -> None:
    for raw in lines:
        raw = raw.strip()
        if not raw:
            continue
        try:
            request = json.loads(raw)
            if not isinstance(request, dict):
                raise ProtocolError("request must be a JSON object")
        except (json.JSONDecodeError, ProtocolError) as exc:
            write(json.dumps({"ok": False, "error": f"malformed request: {exc}"}) + "\n")
            continue
        reply = session.handle(request)
        write(json.dumps(reply) + "\n")
        if reply.get("closed"):
            return


def serve_env(
    config: ExperimentConfig,
    transport: str = "stdio",
    port: int = 0,
    host: str = "127.0.0.1",
    max_sessions: int | None = None,
    ready_callback=None,
) -> None:
    """Serve sessions until closed: stdio once, TCP one connection at a time."""
    if transport == "stdio":
        session = EnvSession(config)
        _serve_stream(session, sys.stdin, lambda s: (sys.stdout.write(s), sys.stdout.flush()))
        return
    if transport != "tcp":
        raise ValueError(f"unknown transport {transport!r}")

    server = socket.create_server((host, port))
    actual_port = server.getsockname()[1]
    print(f"listening on {host}:{actual_port}", file=sys.stderr, flush=True)
    if ready_callback is not None:
        ready_callback(actual_port)
    served = 0
    try:
        while max_sessions is None or served < max_sessions:
            conn, _ = server.accept()
            with conn, conn.makefile("r") as rfile, conn.makefile("w") as wfile:
                session = EnvSession(config)
                _serve_stream(session, rfile, lambda s: (wfile.write(s), wfile.flush()))
            served += 1
    finally:
        server.close()
