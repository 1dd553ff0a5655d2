"""Client side of the environment's JSON-lines protocol.

The benchmark talks to the arena strictly over this wire format: one JSON
object per line, stdio to a spawned server process or a TCP connection.
"""

from __future__ import annotations

import json
import shutil
import socket
import subprocess
import sys


class EnvError(RuntimeError):
    pass


class EnvClient:
    """Line-oriented request/reply client."""

    def __init__(self, read, write, close):
        self._read = read
        self._write = write
        self._close = close

    @classmethod
    def spawn_stdio(cls, config_path: str | None = None, command: list[str] | None = None):
        """Launch the arena's stdio server as a child process."""
        if command is None:
            exe = shutil.which("noma-arena")
            command = [exe] if exe else [sys.executable, "-m", "noma_arena.cli"]
            command += ["serve", "--transport", "stdio"]
            if config_path:
                command += ["--config", str(config_path)]
        proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

        def read() -> str:
            line = proc.stdout.readline()
            if not line:
                raise EnvError("environment process closed the stream")
            return line

        def write(line: str) -> None:
            proc.stdin.write(line)
            proc.stdin.flush()

        def close() -> None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            proc.wait(timeout=10)

        client = cls(read, write, close)
        client._proc = proc
        return client

    @classmethod
    def connect_tcp(cls, host: str, port: int):
        conn = socket.create_connection((host, port), timeout=30)
        rfile = conn.makefile("r")
        wfile = conn.makefile("w")

        def read() -> str:
            line = rfile.readline()
            if not line:
                raise EnvError("server closed the connection")
            return line

        def write(line: str) -> None:
            wfile.write(line)
            wfile.flush()

        return cls(read, write, conn.close)

    def request(self, payload: dict) -> dict:
        self._write(json.dumps(payload) + "\n")
        reply = json.loads(self._read())
        return reply

    def reset(self, seed: int) -> dict:
        reply = self.request({"cmd": "reset", "seed": seed})
        if not reply.get("ok"):
            raise EnvError(reply.get("error", "reset failed"))
        return reply

    def step(self, actions: list[dict]) -> dict:
        reply = self.request({"cmd": "step", "actions": actions})
        if not reply.get("ok"):
            raise EnvError(reply.get("error", "step failed"))
        return reply

    def close(self) -> None:
        try:
            self.request({"cmd": "close"})
        except Exception:
            pass
        self._close()
