import asyncio
import threading
import time

from starlette.testclient import TestClient

from neuroloop.commands import Command
from neuroloop.elm import ElmDecoder
from neuroloop.engine import ClosedLoopEngine, EncoderParams, SessionConfig, SessionMode
from neuroloop.service import (
    CommandMailbox,
    LoopService,
    SessionControl,
    _offer,
    create_app,
    frame_schema_check,
)
from neuroloop.task import oracle_policy, record_to_json, spawn_trial_for
from dataclasses import replace


def make_service(mode=SessionMode.HAND_SCRIPTED, trials=1, seed=0, model=None, gate=None,
                 modulation=45.0):
    engine = ClosedLoopEngine(
        encoder_params=EncoderParams(modulation_hz=modulation),
        master_seed=seed,
        session_id="serve",
    )
    return LoopService(engine, SessionConfig(mode, trials), model=model, tick_gate=gate)


def trained_model(seed=0):
    engine = ClosedLoopEngine(master_seed=seed)
    return engine.train_pipeline(ElmDecoder(n_inputs=64, random_state=seed)).m_f


class TestFrameSchema:
    def frame(self):
        svc = make_service()
        with TestClient(create_app(svc)):
            svc.join(timeout=30)
        # rebuild a frame from the log for schema purposes
        return {
            "type": "state", "session": "serve", "mode": "hand_scripted", "trial": 0,
            "tick": 3, "x": 0.0, "y": 3.0, "target_x": 0.0, "target_y": 10.0,
            "target_side": 2.0, "phase": "running", "hold_ticks": 0,
            "cmd_exec": "Forward", "cmd_dec": None, "cmd_oracle": "Forward",
            "successes": 0,
        }

    def test_valid_frame_passes(self):
        assert frame_schema_check(self.frame())

    def test_missing_field_fails(self):
        doc = self.frame()
        del doc["phase"]
        assert not frame_schema_check(doc)

    def test_wrong_type_fails(self):
        doc = self.frame()
        doc["tick"] = "three"
        assert not frame_schema_check(doc)

    def test_extra_unknown_field_passes(self):
        doc = self.frame()
        doc["debug_note"] = "anything"
        assert frame_schema_check(doc)


class TestMailbox:
    def test_held_until_replaced_or_released(self):
        box = CommandMailbox()
        assert box.poll() is Command.STOP
        box.set(Command.FORWARD)
        assert box.poll() is Command.FORWARD
        assert box.poll() is Command.FORWARD  # persists across polls
        box.set(Command.LEFT)
        assert box.poll() is Command.LEFT
        box.release()
        assert box.poll() is Command.STOP


class TestControl:
    def test_abort_overrides_everything(self):
        ctl = SessionControl(autostart=True)
        ctl.abort()
        assert ctl.wait_runnable() == "abort"
        ctl.start()  # start after abort is ignored
        assert ctl.wait_runnable() == "abort"

    def test_start_releases_idle_wait(self):
        ctl = SessionControl(autostart=False)
        results = []
        t = threading.Thread(target=lambda: results.append(ctl.wait_runnable()))
        t.start()
        time.sleep(0.05)
        ctl.start()
        t.join(timeout=5)
        assert results == ["run"]


def test_offer_drops_oldest_when_full():
    q: asyncio.Queue = asyncio.Queue(maxsize=3)
    for i in range(5):
        _offer(q, {"n": i})
    items = [q.get_nowait()["n"] for _ in range(3)]
    assert items == [2, 3, 4]


class TestNoClientsSession:
    def test_session_runs_with_frames_dropped(self):
        model = trained_model(seed=3)
        svc = make_service(SessionMode.NEURAL, trials=2, seed=3, model=model)
        with TestClient(create_app(svc)):
            records = svc.join(timeout=30)
        assert len(records) == 2


class TestRoles:
    def test_first_client_is_operator_then_observers(self):
        gate = threading.Semaphore(0)
        svc = make_service(SessionMode.HAND_SCRIPTED, trials=1, gate=lambda: gate.acquire(timeout=5))
        with TestClient(create_app(svc)) as client:
            with client.websocket_connect("/ws") as op:
                assert op.receive_json() == {"type": "role", "role": "operator"}
                with client.websocket_connect("/ws") as obs:
                    assert obs.receive_json() == {"type": "role", "role": "observer"}
            # operator disconnected: the slot frees for the next connector
            with client.websocket_connect("/ws") as second:
                assert second.receive_json()["role"] == "operator"
            for _ in range(40):
                gate.release()
            svc.join(timeout=30)

    def test_observer_commands_get_role_denied(self):
        gate = threading.Semaphore(0)
        svc = make_service(SessionMode.HAND_SCRIPTED, trials=1, gate=lambda: gate.acquire(timeout=5))
        with TestClient(create_app(svc)) as client:
            with client.websocket_connect("/ws") as op:
                op.receive_json()
                with client.websocket_connect("/ws") as obs:
                    obs.receive_json()
                    obs.send_json({"type": "cmd", "cmd": "Forward"})
                    reply = obs.receive_json()
                    assert reply["type"] == "error" and "role denied" in reply["msg"]
            for _ in range(40):
                gate.release()
            svc.join(timeout=30)

    def test_cmd_in_non_interactive_session_errors(self):
        gate = threading.Semaphore(0)
        svc = make_service(SessionMode.HAND_SCRIPTED, trials=1, gate=lambda: gate.acquire(timeout=5))
        with TestClient(create_app(svc)) as client:
            with client.websocket_connect("/ws") as op:
                op.receive_json()
                op.send_json({"type": "cmd", "cmd": "Forward"})
                reply = op.receive_json()
                assert reply["type"] == "error" and "not interactive" in reply["msg"]
            for _ in range(40):
                gate.release()
            svc.join(timeout=30)

    def test_malformed_message_keeps_connection(self):
        gate = threading.Semaphore(0)
        svc = make_service(SessionMode.HAND_SCRIPTED, trials=1, gate=lambda: gate.acquire(timeout=5))
        with TestClient(create_app(svc)) as client:
            with client.websocket_connect("/ws") as op:
                op.receive_json()
                op.send_text("{not json")
                assert op.receive_json()["type"] == "error"
                op.send_json({"type": "mystery"})
                assert op.receive_json()["type"] == "error"
                op.send_json({"type": "control", "op": "sideways"})
                assert op.receive_json()["type"] == "error"
            for _ in range(40):
                gate.release()
            svc.join(timeout=30)


def drive_interactive(svc, client, trials, collect_frames=None):
    """Scripted operator: plays the oracle policy via the wire protocol."""
    cfg = svc.engine.trial_config
    mismatches = 0
    with client.websocket_connect("/ws") as ws:
        assert ws.receive_json()["role"] == "operator"
        ws.send_json({"type": "control", "op": "start"})
        frame = ws.receive_json()  # spawn frame
        held = None
        while not svc.finished.is_set():
            state = replace(
                spawn_trial_for(cfg, Command.FORWARD),
                x=frame["x"], y=frame["y"],
                target_x=frame["target_x"], target_y=frame["target_y"],
                target_side=frame["target_side"],
            )
            want = oracle_policy(state, cfg)
            if want is not held:
                if want is Command.STOP:
                    ws.send_json({"type": "release"})
                else:
                    ws.send_json({"type": "cmd", "cmd": want.wire_name})
                held = want
                deadline = time.monotonic() + 5
                while svc.mailbox.poll() is not want and time.monotonic() < deadline:
                    time.sleep(0.001)
            svc.gate.release()
            frame = ws.receive_json()
            if collect_frames is not None and frame["type"] == "state":
                collect_frames.append(frame)
            if frame["cmd_exec"] != want.wire_name:
                mismatches += 1
            if frame["phase"] != "running":
                if frame["trial"] + 1 >= trials:
                    break
                frame = ws.receive_json()  # next trial's spawn frame
        svc.gate.release()
    return mismatches


class TestInteractive:
    def make(self, trials):
        gate = threading.Semaphore(0)
        svc = make_service(
            SessionMode.HAND_INTERACTIVE, trials=trials, gate=lambda: gate.acquire(timeout=5)
        )
        svc.gate = gate
        return svc

    def test_command_round_trip_and_completion(self):
        svc = self.make(trials=2)
        with TestClient(create_app(svc)) as client:
            mismatches = drive_interactive(svc, client, trials=2)
            records = svc.join(timeout=60)
        assert mismatches == 0
        assert len(records) == 2
        assert all(r.succeeded for r in records)
        assert all(r.duration_ticks == 23 for r in records)

    def test_frames_agree_with_trial_log(self):
        svc = self.make(trials=1)
        frames = []
        with TestClient(create_app(svc)) as client:
            drive_interactive(svc, client, trials=1, collect_frames=frames)
            records = svc.join(timeout=60)
        record = records[0]
        by_tick = {f["tick"]: f for f in frames if f["trial"] == 0}
        for entry in record.entries:
            frame = by_tick[entry.tick]
            assert (frame["x"], frame["y"]) == (entry.x, entry.y)
            assert frame["cmd_exec"] == entry.cmd_executed.wire_name

    def test_interactive_log_schema_matches_scripted(self):
        svc = self.make(trials=1)
        with TestClient(create_app(svc)) as client:
            drive_interactive(svc, client, trials=1)
            interactive_records = svc.join(timeout=60)

        scripted = make_service(SessionMode.HAND_SCRIPTED, trials=1)
        with TestClient(create_app(scripted)):
            scripted_records = scripted.join(timeout=30)

        a = record_to_json(interactive_records[0])
        b = record_to_json(scripted_records[0])
        assert set(a) == set(b)
        assert set(a["ticks"][0]) == set(b["ticks"][0])


class TestAbort:
    def test_operator_abort_ends_session_early(self):
        gate = threading.Semaphore(0)
        svc = make_service(SessionMode.HAND_INTERACTIVE, trials=50,
                           gate=lambda: gate.acquire(timeout=5))
        with TestClient(create_app(svc)) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_json()
                ws.send_json({"type": "control", "op": "start"})
                ws.receive_json()
                gate.release()
                ws.receive_json()
                ws.send_json({"type": "control", "op": "abort"})
                svc.finished.wait(timeout=10)
        assert svc.finished.is_set()
