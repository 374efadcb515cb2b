"""Operator entry points: the `m` command.

Subcommands tie the stack together for demos, tests, and deployments.
Every command is non-interactive and scriptable; exit codes are part of
the contract:

  0  success (for `registry diff`: registries equivalent)
  1  registry diff found discrepancies
  2  invalid or missing config/scenario/input file
  3  interaction ended aborted
  4  argument or script validation failure
  5  corrupt or incomplete log
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import uuid
from pathlib import Path

from . import interact, logkit
from .bus import MessageBus, RegistrySnapshot, registry_diff
from .errors import MError
from .interact import (CoachRunner, HttpGenerator, MockGenerator, StoryRunner,
                       StoryScript, TimelineLibrary)
from .logkit import CorruptLog, SessionRecord, record, replay
from .model import RobotDescription
from .platform import ConfigError, Platform, PlatformConfig
from .sim import HardwareStubProvider, InvalidScenario, Scenario, SimProvider
from .twinserve import TwinServer

RECORDED_STREAMS = (
    "/m/joint_states", "/m/face_state", "/m/radar_energy", "/m/touch_events",
    "/m/haptic_state", "/m/user_turns",
    "/perception/presence_events", "/perception/touch_gestures",
)

EXIT_OK = 0
EXIT_DIFF = 1
EXIT_CONFIG = 2
EXIT_ABORTED = 3
EXIT_VALIDATION = 4
EXIT_CORRUPT = 5


def _load_config(path: str | None) -> PlatformConfig:
    return PlatformConfig.load(path) if path else PlatformConfig.bundled()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None,
                   help="platform config JSON (default: bundled)")
    p.add_argument("--virtual-time", action="store_true",
                   help="run under the virtual clock, as fast as possible")


# ---------------------------------------------------------------------------
# m sim run

def cmd_sim_run(args) -> int:
    try:
        config = _load_config(args.config)
        scenario = Scenario.load(args.scenario) if args.scenario else None
    except (ConfigError, InvalidScenario, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.port is not None:
        config.ws.port = args.port
    platform = Platform(config, virtual_time=args.virtual_time,
                        scenario=scenario)
    session = SessionRecord.open(platform.bus, platform.session_metadata(),
                                 session_id=args.session_id)
    directory = platform.config.resolve_log_root() / session.session_id
    recorder = record(platform.bus, session, RECORDED_STREAMS,
                      directory=directory)
    twin = None
    if config.ws.enabled:
        mode = "sim_control" if config.mode == "sim" else "mirror"
        twin = TwinServer(platform.bus, platform.desc, mode=mode,
                          host=config.ws.host, port=config.ws.port,
                          static_dir=config.ws.static_dir,
                          forward_hz=config.ws.forward_hz).start()
        print(f"twin server listening on {config.ws.host}:{twin.bound_port}",
              flush=True)
    print(f"session {session.session_id} recording to {directory}", flush=True)
    try:
        if platform.virtual:
            duration = args.duration if args.duration is not None else 10.0
            platform.advance(duration)
            recorder.flush()
        else:
            platform.run_real_time()
            deadline = (time.monotonic() + args.duration
                        if args.duration is not None else None)
            while deadline is None or time.monotonic() < deadline:
                time.sleep(0.1)
    except KeyboardInterrupt:
        pass
    finally:
        recorder.close()
        if twin is not None:
            twin.stop()
        platform.shutdown()
    print(f"session {session.session_id} closed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# m story play

def cmd_story_play(args) -> int:
    try:
        config = _load_config(args.config)
        script = StoryScript.load(args.script)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (interact.InvalidScript, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    platform = Platform(config, virtual_time=args.virtual_time)
    library = TimelineLibrary.bundled(platform.desc)
    try:
        script.validate(library)
    except interact.InvalidScript as exc:
        print(f"error: {exc}", file=sys.stderr)
        platform.shutdown()
        return EXIT_VALIDATION
    if not platform.virtual:
        platform.run_real_time()

    def feedback(index: int) -> None:
        print(f"chunk {index}: {script.chunks[index].text[:52]}...")

    runner = interact.run_story(platform.bus, script, library,
                                on_feedback=feedback)
    print(f"story {script.id}: {runner.state.label()}")
    for t_ns, tl_id in runner.dispatch_log:
        print(f"  cue @ {t_ns / 1e9:.3f}s -> {tl_id}")
    platform.shutdown()
    return EXIT_OK if runner.state.name == interact.COMPLETE else EXIT_ABORTED


# ---------------------------------------------------------------------------
# m coach run

def cmd_coach_run(args) -> int:
    if not 1 <= args.day <= 5:
        print(f"error: --day must be in 1..5, got {args.day}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        config = _load_config(args.config)
        turns_by_day = (interact.load_turns_file(args.turns) if args.turns
                        else interact.bundled_turns())
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: bad turns file: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    turns = turns_by_day.get(args.day, [])
    if not turns:
        print(f"error: no scripted turns for day {args.day}", file=sys.stderr)
        return EXIT_VALIDATION
    platform = Platform(config, virtual_time=args.virtual_time)
    library = TimelineLibrary.bundled(platform.desc)
    if args.generator == "mock":
        generator = MockGenerator(library)
    elif args.generator.startswith("http:") or args.generator.startswith("https:"):
        generator = HttpGenerator(args.generator)
    else:
        print(f"error: --generator must be 'mock' or an http URL",
              file=sys.stderr)
        platform.shutdown()
        return EXIT_VALIDATION

    session = SessionRecord.open(platform.bus, platform.session_metadata(),
                                 session_id=args.session_id)
    directory = platform.config.resolve_log_root() / session.session_id
    recorder = record(platform.bus, session, RECORDED_STREAMS,
                      directory=directory)
    runner = CoachRunner(platform.bus, library, args.day, generator=generator,
                         scripted_turns=turns,
                         session_id=f"{session.session_id}-day{args.day}")
    runner.start()
    if platform.virtual:
        platform.bus.scheduler.run_until(lambda: runner.finished, limit_s=600)
    else:
        platform.run_real_time()
        while not runner.finished:
            time.sleep(0.1)
    recorder.close()
    platform.shutdown()
    trace = runner.trace()
    print(f"coach day {args.day}: "
          f"{'complete' if runner.complete else 'failed'}")
    print(f"phases: {', '.join(trace['phases'])}")
    for turn in trace["history"]:
        print(f"  [{turn['speaker']:>5}] {turn['text']}")
    print(f"session log: {directory}")
    return EXIT_OK if runner.complete else EXIT_ABORTED


# ---------------------------------------------------------------------------
# m log replay / verify

def _session_dir(args) -> Path:
    root = Path(args.data_dir) if args.data_dir else logkit.data_dir()
    return root / args.session_id


def cmd_log_replay(args) -> int:
    directory = _session_dir(args)
    if not directory.is_dir():
        print(f"error: no session at {directory}", file=sys.stderr)
        return EXIT_CONFIG
    bus = MessageBus()
    try:
        count = replay(directory, bus, speed=args.speed)
    except CorruptLog as exc:
        print(f"error: corrupt log: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    print(f"replayed {count} records from {args.session_id}")
    return EXIT_OK


def cmd_log_verify(args) -> int:
    directory = _session_dir(args)
    if not directory.is_dir():
        print(f"error: no session at {directory}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        contents = logkit.read_session(directory, strict=True)
    except CorruptLog as exc:
        print(f"error: corrupt log: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    streams = sorted({r.stream for r in contents.records})
    print(f"session {contents.session.session_id}: "
          f"{len(contents.records)} records, {len(streams)} streams, complete")
    for s in streams:
        n = sum(1 for r in contents.records if r.stream == s)
        print(f"  {s}: {n}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# m registry export / diff

def cmd_registry_export(args) -> int:
    bus = MessageBus()
    desc = RobotDescription.default()
    if args.mode == "sim":
        SimProvider(bus, desc).start()
        provider_id = SimProvider.PROVIDER_ID
    else:
        HardwareStubProvider(bus, desc).start()
        provider_id = HardwareStubProvider.PROVIDER_ID
    snapshot = bus.registry_snapshot(provider_id)
    text = snapshot.to_json()
    if args.output == "-":
        print(text)
    else:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        print(f"exported {len(snapshot.entries)} interfaces to {args.output}")
    return EXIT_OK


def cmd_registry_diff(args) -> int:
    try:
        a = RegistrySnapshot.from_json(Path(args.a).read_text(encoding="utf-8"))
        b = RegistrySnapshot.from_json(Path(args.b).read_text(encoding="utf-8"))
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: unreadable registry export: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    diffs = registry_diff(a, b)
    if not diffs:
        print("registries equivalent")
        return EXIT_OK
    for d in diffs:
        print(f"{d.kind}: {d.path} ({d.iface_kind}) - {d.detail}")
    return EXIT_DIFF


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="m", description="social robot platform runtime")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("sim", help="simulated backend")
    sim_sub = p_sim.add_subparsers(dest="sim_command", required=True)
    p_run = sim_sub.add_parser("run", help="run the simulated platform")
    _add_common(p_run)
    p_run.add_argument("--scenario", default=None, help="scenario JSON")
    p_run.add_argument("--duration", type=float, default=None,
                       help="seconds to run (default: until interrupted, "
                            "or 10 virtual seconds)")
    p_run.add_argument("--port", type=int, default=None,
                       help="override WebSocket port (0 = ephemeral)")
    p_run.add_argument("--session-id", default=None)
    p_run.set_defaults(func=cmd_sim_run)

    p_story = sub.add_parser("story", help="storytelling template")
    story_sub = p_story.add_subparsers(dest="story_command", required=True)
    p_play = story_sub.add_parser("play", help="play a story script")
    _add_common(p_play)
    p_play.add_argument("script", help="story script JSON")
    p_play.add_argument("--standalone", action="store_true", default=True,
                        help="self-host the platform (the only mode; the bus "
                             "is in-process)")
    p_play.set_defaults(func=cmd_story_play)

    p_coach = sub.add_parser("coach", help="conversational coaching template")
    coach_sub = p_coach.add_subparsers(dest="coach_command", required=True)
    p_crun = coach_sub.add_parser("run", help="run one coaching day")
    _add_common(p_crun)
    p_crun.add_argument("--day", type=int, required=True, help="1..5")
    p_crun.add_argument("--generator", default="mock",
                        help="mock | http(s)://host/generate")
    p_crun.add_argument("--turns", default=None,
                        help="scripted user turns JSON (default: bundled)")
    p_crun.add_argument("--session-id", default=None)
    p_crun.add_argument("--standalone", action="store_true", default=True)
    p_crun.set_defaults(func=cmd_coach_run)

    p_log = sub.add_parser("log", help="session logs")
    log_sub = p_log.add_subparsers(dest="log_command", required=True)
    p_replay = log_sub.add_parser("replay", help="republish a session log")
    p_replay.add_argument("session_id")
    p_replay.add_argument("--speed", type=float, default=None,
                          help="time-scaled replay (default: fast as possible)")
    p_replay.add_argument("--data-dir", default=None)
    p_replay.set_defaults(func=cmd_log_replay)
    p_verify = log_sub.add_parser("verify", help="check log integrity")
    p_verify.add_argument("session_id")
    p_verify.add_argument("--data-dir", default=None)
    p_verify.set_defaults(func=cmd_log_verify)

    p_reg = sub.add_parser("registry", help="interface registry tools")
    reg_sub = p_reg.add_subparsers(dest="registry_command", required=True)
    p_export = reg_sub.add_parser("export", help="export an interface set")
    p_export.add_argument("--mode", choices=("sim", "hardware-stub"),
                          required=True)
    p_export.add_argument("-o", "--output", default="-")
    p_export.set_defaults(func=cmd_registry_export)
    p_diff = reg_sub.add_parser("diff", help="diff two interface exports")
    p_diff.add_argument("a")
    p_diff.add_argument("b")
    p_diff.set_defaults(func=cmd_registry_diff)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
