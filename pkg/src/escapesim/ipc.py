"""External-policy protocol: newline-delimited JSON records.

The environment side always speaks first:

  env -> client   hello        protocol version, ray count, the 42-action
                               descriptor, dt, limits, footprint
  client -> env   hello_ack    version echo, optional curriculum_switch
  env -> client   episode      per-episode metadata (seed, stage, goal)
  env -> client   obs          scan + target tuple + validity mask
  client -> env   act          {"index": i} or {"omega": w, "v": v}
  env -> client   step         reward breakdown, terminal flag/cause, and
                               the executed command (with source tag, so
                               trainers can store guidance actions)
  env -> client   end          session summary

Version mismatch refuses the session; a malformed or out-of-range act, or
client silence past the timeout, terminates the episode as a failure
(cause "protocol_error") and the session moves on. Numbers are serialized
with full repr precision (>= 9 significant digits).
"""

import json
import selectors
import socket
import sys

import numpy as np

from .env import EpisodeConfig, EscapeEnv, STAGE_FIXED, STAGE_RANDOM, SOURCE_POLICY
from .kinematics import VelocityCommand

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 5.0


class ProtocolError(RuntimeError):
    pass


class SessionRefused(ProtocolError):
    pass


# ---------------------------------------------------------------------------
# line transports


class LineConn:
    """Length-unbounded NDJSON over a socket with per-read timeouts."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._buf = b""

    def send_raw(self, line: str) -> None:
        self.sock.sendall(line.encode() + b"\n")

    def send(self, record: dict) -> None:
        self.send_raw(json.dumps(record, separators=(",", ":")))

    def recv_raw(self, timeout: float = DEFAULT_TIMEOUT) -> str:
        self.sock.settimeout(timeout)
        while b"\n" not in self._buf:
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout:
                raise TimeoutError("peer silent past timeout")
            if not chunk:
                raise ProtocolError("connection closed")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode()

    def recv(self, timeout: float = DEFAULT_TIMEOUT) -> dict:
        line = self.recv_raw(timeout)
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"malformed record: {e}") from e
        if not isinstance(rec, dict) or "type" not in rec:
            raise ProtocolError("record is not an object with a 'type'")
        return rec

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class StdioConn:
    """Same framing over stdin/stdout (for spawned subprocess policies)."""

    def __init__(self, rfile=None, wfile=None):
        self.rfile = rfile if rfile is not None else sys.stdin.buffer
        self.wfile = wfile if wfile is not None else sys.stdout.buffer
        self._sel = selectors.DefaultSelector()
        try:
            self._sel.register(self.rfile, selectors.EVENT_READ)
            self._can_select = True
        except (ValueError, PermissionError):
            self._can_select = False
        self._buf = b""

    def send_raw(self, line: str) -> None:
        self.wfile.write(line.encode() + b"\n")
        self.wfile.flush()

    def send(self, record: dict) -> None:
        self.send_raw(json.dumps(record, separators=(",", ":")))

    def recv_raw(self, timeout: float = DEFAULT_TIMEOUT) -> str:
        while b"\n" not in self._buf:
            if self._can_select and not self._sel.select(timeout):
                raise TimeoutError("peer silent past timeout")
            chunk = self.rfile.read1(65536)
            if not chunk:
                raise ProtocolError("stream closed")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode()

    def recv(self, timeout: float = DEFAULT_TIMEOUT) -> dict:
        line = self.recv_raw(timeout)
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"malformed record: {e}") from e
        if not isinstance(rec, dict) or "type" not in rec:
            raise ProtocolError("record is not an object with a 'type'")
        return rec

    def close(self) -> None:
        pass


def parse_address(addr: str):
    """'tcp:HOST:PORT' or 'stdio'."""
    if addr == "stdio":
        return ("stdio",)
    if addr.startswith("tcp:"):
        _, host, port = addr.split(":")
        return ("tcp", host, int(port))
    raise ValueError(f"unknown IPC address {addr!r}")


def dial(addr: str) -> LineConn:
    kind = parse_address(addr)
    if kind[0] != "tcp":
        raise ValueError("dial requires a tcp address")
    s = socket.create_connection((kind[1], kind[2]), timeout=DEFAULT_TIMEOUT)
    return LineConn(s)


def listen_one(addr: str, timeout: float = 60.0) -> LineConn:
    """Accept a single peer on a tcp address (port 0 picks a free port)."""
    kind = parse_address(addr)
    if kind[0] != "tcp":
        raise ValueError("listen requires a tcp address")
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((kind[1], kind[2]))
    srv.listen(1)
    srv.settimeout(timeout)
    conn, _ = srv.accept()
    srv.close()
    return LineConn(conn)


# ---------------------------------------------------------------------------
# record builders


def hello_record(env: EscapeEnv) -> dict:
    return {
        "type": "hello",
        "version": PROTOCOL_VERSION,
        "ray_count": env.lidar_spec.ray_count,
        "dt": env.limits.dt,
        "limits": {
            "omega_max": env.limits.omega_max,
            "v_max": env.limits.v_max,
            "dt": env.limits.dt,
        },
        "footprint": [env.footprint.half_length, env.footprint.half_width],
        "success_iou": env.config.success_iou,
        "actions": [
            {
                "index": a.index,
                "omega": a.command.omega,
                "v": a.command.v,
                "radius": a.radius,
                "kind": a.kind,
            }
            for a in env.action_set.actions
        ],
    }


def obs_record(episode: int, step: int, obs) -> dict:
    return {
        "type": "obs",
        "episode": episode,
        "step": step,
        "scan": obs.scan.tolist(),
        "target": obs.target.tolist(),
        "mask": [int(b) for b in obs.mask],
    }


def nearest_action_index(action_set, cmd: VelocityCommand) -> int:
    arr = action_set.command_array()
    lim = action_set.limits
    dw = (arr[:, 0] - cmd.omega) / lim.omega_max
    dv = (arr[:, 1] - cmd.v) / lim.v_max
    return int(np.argmin(np.hypot(dw, dv)))


def step_record(episode, step, result, executed_cmd, executed_index, source) -> dict:
    return {
        "type": "step",
        "episode": episode,
        "step": step,
        "reward": {
            "iou": result.reward.iou_term,
            "distance": result.reward.distance_term,
            "time": result.reward.time_term,
            "total": result.reward.total,
        },
        "terminal": result.terminal,
        "cause": result.cause,
        "executed": {
            "omega": executed_cmd.omega,
            "v": executed_cmd.v,
            "index": executed_index,
            "source": source,
        },
    }


def parse_act(rec: dict, action_set) -> VelocityCommand:
    """Resolve an act record; raises ProtocolError for malformed/out-of-range."""
    if rec.get("type") != "act":
        raise ProtocolError(f"expected act record, got {rec.get('type')!r}")
    if "index" in rec:
        idx = rec["index"]
        if not isinstance(idx, int) or not (0 <= idx < len(action_set)):
            raise ProtocolError(f"action index {idx!r} out of range")
        return action_set[idx].command
    if "omega" in rec and "v" in rec:
        try:
            return VelocityCommand(float(rec["omega"]), float(rec["v"]))
        except (TypeError, ValueError) as e:
            raise ProtocolError(f"bad continuous action: {e}") from e
    raise ProtocolError("act record needs 'index' or 'omega'+'v'")


# ---------------------------------------------------------------------------
# environment-side session (used by `serve` and by bench's external policies)


def handshake_env_side(conn, env: EscapeEnv, timeout: float = DEFAULT_TIMEOUT) -> dict:
    conn.send(hello_record(env))
    ack = conn.recv(timeout)
    if ack.get("type") != "hello_ack" or ack.get("version") != PROTOCOL_VERSION:
        conn.send({"type": "error", "message": "protocol version mismatch"})
        raise SessionRefused(f"bad hello_ack: {ack}")
    return ack


def run_env_session(
    conn,
    scenarios,
    config: EpisodeConfig,
    episodes: int,
    seed: int = 0,
    *,
    env_kwargs: dict = None,
    timeout: float = DEFAULT_TIMEOUT,
    record_fh=None,
    trace_fh=None,
) -> dict:
    """Serve episodes to a connected policy client.

    Scenarios are cycled in order. Returns a summary dict (also sent to
    the client as the final record). When ``record_fh`` is given, every
    raw client line is logged for later replay; ``trace_fh`` receives the
    environment's step traces.
    """
    env_kwargs = env_kwargs or {}
    envs = {}
    summary = {"episodes": 0, "successes": 0, "protocol_errors": 0}

    def env_for(idx, stage):
        key = (idx % len(scenarios), stage)
        if key not in envs:
            cfg_kwargs = dict(config.__dict__)
            cfg_kwargs["stage"] = stage
            envs[key] = EscapeEnv(
                scenarios[idx % len(scenarios)], EpisodeConfig(**cfg_kwargs), **env_kwargs
            )
            # share the boundary table and action set across the session
            env_kwargs.setdefault("table", envs[key].table)
            env_kwargs.setdefault("action_set", envs[key].action_set)
            if trace_fh is not None:
                envs[key].trace_to(trace_fh)
        return envs[key]

    ack = handshake_env_side(conn, env_for(0, config.stage), timeout)
    if record_fh is not None:
        record_fh.write(json.dumps(ack, separators=(",", ":")) + "\n")
    switch = ack.get("curriculum_switch")

    for e in range(episodes):
        stage = config.stage
        if switch is not None:
            stage = STAGE_FIXED if e < switch else STAGE_RANDOM
        env = env_for(e, stage)
        obs = env.reset(seed=seed + e)
        conn.send(
            {
                "type": "episode",
                "episode": e,
                "scenario_seed": env.scenario.seed,
                "class": env.scenario.class_label(),
                "stage": stage,
                "goal": [env.goal.x, env.goal.y, env.goal.theta],
            }
        )
        step = 0
        while True:
            conn.send(obs_record(e, step, obs))
            try:
                rec = conn.recv(timeout)
                requested = parse_act(rec, env.action_set)
            except (TimeoutError, ProtocolError) as err:
                summary["protocol_errors"] += 1
                conn.send(
                    {
                        "type": "step",
                        "episode": e,
                        "step": step,
                        "terminal": True,
                        "cause": "protocol_error",
                        "error": str(err),
                    }
                )
                break
            if record_fh is not None:
                record_fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
            if config.hybrid_guidance:
                cmd, source = env.hybrid_action(requested)
            else:
                cmd, source = requested, SOURCE_POLICY
            result = env.step(cmd, source=source)
            conn.send(
                step_record(
                    e, step, result, cmd, nearest_action_index(env.action_set, cmd),
                    source,
                )
            )
            obs = result.observation
            step += 1
            if result.terminal:
                if result.cause == "success":
                    summary["successes"] += 1
                break
        summary["episodes"] += 1
    conn.send({"type": "end", **summary})
    return summary


# ---------------------------------------------------------------------------
# client-side helpers


def run_policy_client(conn, act_fn, timeout: float = 600.0, on_record=None) -> dict:
    """Generic policy client: answers every obs with act_fn(obs_record).

    act_fn returns an act record dict, or a raw pre-encoded line (str) for
    byte-exact replay. Returns the final end/summary record.
    """
    hello = conn.recv(timeout)
    if hello.get("type") != "hello" or hello.get("version") != PROTOCOL_VERSION:
        raise SessionRefused(f"unexpected hello: {hello.get('type')}")
    conn.send({"type": "hello_ack", "version": PROTOCOL_VERSION})
    if on_record is not None:
        on_record(hello)
    while True:
        rec = conn.recv(timeout)
        if on_record is not None:
            on_record(rec)
        kind = rec.get("type")
        if kind == "obs":
            reply = act_fn(rec)
            if isinstance(reply, str):
                conn.send_raw(reply)
            else:
                conn.send(reply)
        elif kind in ("end", "error"):
            return rec


def replay_act_fn(transcript_lines):
    """act_fn that replays recorded client lines verbatim (hello_ack first)."""
    lines = [ln for ln in transcript_lines if ln.strip()]
    # first recorded line is the hello_ack; the runner sends its own
    it = iter(lines[1:])

    def act(_obs):
        try:
            return next(it)
        except StopIteration:
            raise ProtocolError("transcript exhausted")

    return act
