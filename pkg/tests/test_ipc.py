import io
import json
import socket
import threading
import time

import numpy as np
import pytest

from escapesim.bench import run_benchmark
from escapesim.env import EpisodeConfig
from escapesim.ipc import (
    PROTOCOL_VERSION,
    ProtocolError,
    SessionRefused,
    dial,
    listen_one,
    replay_act_fn,
    run_env_session,
    run_policy_client,
)
from escapesim.kinematics import MotionLimits, Pose2, build_action_space, integrate_arc
from escapesim.planner import PlanExhausted, PlanningContext, RTRExecutor
from escapesim.policies import ScriptedPolicy
from escapesim.scenario import corridor_scenario


def _free_port():
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def _serve(scenarios, config, episodes, seed, port, out, **kw):
    conn = listen_one(f"tcp:127.0.0.1:{port}")
    try:
        out["summary"] = run_env_session(
            conn, scenarios, config, episodes=episodes, seed=seed, **kw
        )
    finally:
        conn.close()


@pytest.fixture(scope="module")
def corridors():
    return [corridor_scenario(seed=k) for k in range(2)]


class _ObsShim:
    def __init__(self, rec):
        self.scan = np.array(rec["scan"])
        self.target = np.array(rec["target"])
        self.mask = np.array(rec["mask"], dtype=bool)


def _scripted_act_fn():
    pol = ScriptedPolicy(build_action_space(MotionLimits()))

    def act(rec):
        cmd = pol.act(_ObsShim(rec))
        return {"type": "act", "omega": cmd.omega, "v": cmd.v}

    return act


def _session(corridors, act_fn, episodes=2, timeout=5.0, **kw):
    port = _free_port()
    out = {}
    t = threading.Thread(
        target=_serve,
        args=(corridors, EpisodeConfig(max_steps=80), episodes, 3, port, out),
        kwargs={"timeout": timeout, **kw},
    )
    t.start()
    time.sleep(0.2)
    conn = dial(f"tcp:127.0.0.1:{port}")
    end = run_policy_client(conn, act_fn)
    conn.close()
    t.join(timeout=30)
    return out["summary"], end


def test_handshake_and_episode_flow(corridors):
    summary, end = _session(corridors, _scripted_act_fn())
    assert summary["episodes"] == 2
    assert summary["successes"] == 2
    assert end["type"] == "end"


def test_version_mismatch_refused(corridors):
    port = _free_port()
    out = {}
    t = threading.Thread(
        target=lambda: out.update(err=_refused(corridors, port))
    )
    t.start()
    time.sleep(0.2)
    conn = dial(f"tcp:127.0.0.1:{port}")
    hello = conn.recv()
    assert hello["type"] == "hello" and hello["version"] == PROTOCOL_VERSION
    conn.send({"type": "hello_ack", "version": 999})
    err = conn.recv()
    assert err["type"] == "error"
    conn.close()
    t.join(timeout=10)
    assert isinstance(out["err"], SessionRefused)


def _refused(corridors, port):
    conn = listen_one(f"tcp:127.0.0.1:{port}")
    try:
        run_env_session(conn, corridors, EpisodeConfig(), episodes=1)
    except SessionRefused as e:
        return e
    finally:
        conn.close()
    return None


def test_out_of_range_action_fails_episode(corridors):
    def bad_act(_rec):
        return {"type": "act", "index": 43}

    summary, _ = _session(corridors, bad_act, episodes=1)
    assert summary["protocol_errors"] == 1
    assert summary["successes"] == 0


def test_malformed_record_fails_episode(corridors):
    def weird(_rec):
        return "{not json"

    summary, _ = _session(corridors, weird, episodes=1, timeout=1.0)
    assert summary["protocol_errors"] == 1


def test_client_timeout_fails_episode(corridors):
    calls = {"n": 0}

    def slow(_rec):
        calls["n"] += 1
        time.sleep(0.8)
        return {"type": "act", "index": 38}

    summary, _ = _session(corridors, slow, episodes=1, timeout=0.2)
    assert summary["protocol_errors"] == 1


def test_record_and_replay_byte_identical(corridors):
    rec1, tr1 = io.StringIO(), io.StringIO()
    summary1, _ = _session(
        corridors, _scripted_act_fn(), record_fh=rec1, trace_fh=tr1
    )
    rec2, tr2 = io.StringIO(), io.StringIO()
    summary2, _ = _session(
        corridors,
        replay_act_fn(rec1.getvalue().splitlines()),
        record_fh=rec2,
        trace_fh=tr2,
    )
    assert summary1 == summary2
    assert tr1.getvalue() == tr2.getvalue()
    assert rec1.getvalue() == rec2.getvalue()


def test_loopback_guidance_equivalence(corridors):
    """An external client that runs the grid planner itself reproduces the
    GuidancePlanner benchmark exactly."""
    inflation = 0.2475
    ref = run_benchmark(
        corridors, "guidance", inflation=inflation, seed=0, max_steps=200
    )

    limits = MotionLimits()
    state = {}

    def act(rec):
        e = rec["episode"]
        if state.get("episode") != e:
            sc = corridors[e % len(corridors)]
            plan = PlanningContext(sc).plan(inflation, from_pose=sc.start)
            state.update(
                episode=e, pose=sc.start, ex=RTRExecutor(plan, sc.start, limits)
            )
        try:
            cmd = state["ex"].next_command(state["pose"])
        except PlanExhausted:
            cmd = None
        if cmd is None:
            # mirror the bench's give-up by standing still until timeout
            return {"type": "act", "omega": 0.0, "v": 0.0}
        state["pose"] = integrate_arc(state["pose"], cmd, limits.dt)
        return {"type": "act", "omega": cmd.omega, "v": cmd.v}

    # run through bench's external-policy path on the same scenarios
    port = _free_port()

    def policy_server():
        srv = listen_one(f"tcp:127.0.0.1:{port}", timeout=30)
        try:
            run_policy_client(srv, act)
        except ProtocolError:
            pass
        finally:
            srv.close()

    t = threading.Thread(target=policy_server)
    t.start()
    time.sleep(0.2)
    ext = run_benchmark(
        corridors,
        f"external:tcp:127.0.0.1:{port}",
        seed=0,
        max_steps=200,
    )
    t.join(timeout=30)
    ref_d, ext_d = ref.to_dict(), ext.to_dict()
    assert ref_d["overall"]["episodes"] == ext_d["overall"]["episodes"]
    assert ref_d["overall"]["successes"] == ext_d["overall"]["successes"]
    assert (
        ref_d["overall"]["total_success_rate"]
        == ext_d["overall"]["total_success_rate"]
    )
    for label in ref_d["classes"]:
        assert (
            ref_d["classes"][label]["total_success_rate"]
            == ext_d["classes"][label]["total_success_rate"]
        )
        assert ref_d["classes"][label]["mean_steps"] == ext_d["classes"][label]["mean_steps"]
