"""Command-line entry points.

Commands: keygen, enroll, auth, serve, simulate, bench, table1.

Option resolution order: command line, then PPKDA_* environment
variables, then the --config file (key=value lines), then built-in
defaults.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
import threading
from pathlib import Path

from . import bench as bench_mod
from . import keystroke, paillier, trust
from .errors import PpkdaError, SessionRejected, UnknownKeyIndex, UnknownUser
from .fixedpoint import FixedPointParams
from .protocol import AuthClient, AuthServer
from .store import TemplateStore
from .transport import SocketChannel, TcpServer, loopback_pair
from .trust import Decision, QuantizedTrustParams, TrustParams

ENV_PREFIX = "PPKDA_"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2
EXIT_USAGE = 3

# Published complexity-table rows for prior protocols; displayed for
# comparison only, never recomputed here.
BASELINE_ROWS = [
    ("Govindarajan et al. (2013)", "4", "N+1", "4N"),
    ("Balagani et al. (2018)", "5", "2N+1", "5N"),
    ("Wei et al. (2020)", "3", "3N", "0"),
]


def load_config(path: str | None) -> dict[str, str]:
    values: dict[str, str] = {}
    if path:
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise PpkdaError(f"bad config line (expected key=value): {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def resolve(name: str, cli_value, config: dict[str, str], default=None):
    """CLI > environment > config file > default."""
    if cli_value is not None:
        return cli_value
    env = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if env is not None:
        return env
    if name in config:
        return config[name]
    return default


def _load_keys(prefix: str) -> tuple[paillier.HomPublicKey, paillier.HomPrivateKey]:
    pub = Path(f"{prefix}.pub.json")
    priv = Path(f"{prefix}.priv.json")
    return (paillier.HomPublicKey.from_json(pub.read_text(encoding="utf-8")),
            paillier.HomPrivateKey.from_json(priv.read_text(encoding="utf-8")))


def _trust_params(args, config) -> TrustParams:
    return TrustParams(
        max_trust=float(resolve("max-trust", args.max_trust, config, 100.0)),
        reward=float(resolve("reward", args.reward, config, 1.0)),
        dist_threshold=float(resolve("dist-threshold", args.dist_threshold, config, 1.5)),
        reject_threshold=float(resolve("reject-threshold", args.reject_threshold, config, 90.0)),
    )


def _local_server(store_dir: str, params: TrustParams, seed: int | None):
    """In-process server over loopback; returns (server, client_channel)."""
    rng = random.Random(seed) if seed is not None else None
    server = AuthServer(TemplateStore(store_dir), params, rng=rng)
    client_chan, server_chan = loopback_pair()
    threading.Thread(target=server.serve_connection, args=(server_chan,),
                     daemon=True).start()
    return server, client_chan


def _connect(args, config, params: TrustParams, seed: int | None):
    addr = resolve("addr", args.addr, config)
    if addr:
        host, _, port = addr.rpartition(":")
        import socket
        sock = socket.create_connection((host or "127.0.0.1", int(port)))
        return SocketChannel(sock)
    store_dir = resolve("store", args.store, config)
    if not store_dir:
        raise PpkdaError("need --addr or --store")
    _server, channel = _local_server(store_dir, params, seed)
    return channel


# --- commands -------------------------------------------------------------

def cmd_keygen(args, config) -> int:
    bits = int(resolve("bits", args.bits, config, 2048))
    prefix = resolve("keys", args.keys, config, "ppkda")
    pub_path = Path(f"{prefix}.pub.json")
    priv_path = Path(f"{prefix}.priv.json")
    if not args.force and (pub_path.exists() or priv_path.exists()):
        print(f"error: {pub_path} or {priv_path} exists (use --force)", file=sys.stderr)
        return EXIT_USAGE
    seed = resolve("seed", args.seed, config)
    rng = random.Random(int(seed)) if seed is not None else None
    pk, sk = paillier.keygen(bits, rng)
    pub_path.write_text(pk.to_json() + "\n", encoding="utf-8")
    priv_path.write_text(sk.to_json() + "\n", encoding="utf-8")
    print(f"wrote {pub_path} and {priv_path} ({bits}-bit modulus)")
    return EXIT_OK


def cmd_enroll(args, config) -> int:
    params = _trust_params(args, config)
    seed = resolve("seed", args.seed, config)
    seed = int(seed) if seed is not None else None
    events = keystroke.read_event_log(args.log)
    pk, sk = _load_keys(resolve("keys", args.keys, config, "ppkda"))
    channel = _connect(args, config, params, seed)
    client = AuthClient(channel, args.user, pk, sk,
                        rng=random.Random(seed) if seed is not None else None)
    report = client.enroll(events)
    print(f"enrolled {report.stored_keys} keys for {args.user}")
    for key, reason in sorted(report.excluded.items()):
        print(f"warning: key {key} excluded: {reason}", file=sys.stderr)
    return EXIT_OK


def cmd_auth(args, config) -> int:
    params = _trust_params(args, config)
    seed = resolve("seed", args.seed, config)
    seed = int(seed) if seed is not None else None
    events = keystroke.read_event_log(args.log)
    pk, sk = _load_keys(resolve("keys", args.keys, config, "ppkda"))
    channel = _connect(args, config, params, seed)
    client = AuthClient(channel, args.user, pk, sk,
                        rng=random.Random(seed) if seed is not None else None)
    client.begin()

    rows = ["event_idx,key,decision"]
    rejected_at = None
    skipped = 0
    for idx, event in enumerate(events):
        try:
            decision = client.keystroke(event)
        except UnknownKeyIndex:
            skipped += 1
            continue
        rows.append(f"{idx},{event.key_index},{decision.value}")
        if decision is Decision.REJECTED:
            rejected_at = idx
            break
    if args.trace_csv:
        Path(args.trace_csv).write_text("\n".join(rows) + "\n", encoding="utf-8")
    if skipped:
        print(f"skipped {skipped} events on unenrolled keys", file=sys.stderr)
    if rejected_at is not None:
        print(f"rejected at event {rejected_at}")
        return EXIT_REJECTED
    print(f"accepted throughout ({len(rows) - 1} keystrokes)")
    return EXIT_OK


def cmd_serve(args, config) -> int:
    params = _trust_params(args, config)
    store_dir = resolve("store", args.store, config, "./ppkda-store")
    addr = resolve("addr", args.addr, config, "127.0.0.1:7700")
    host, _, port = addr.rpartition(":")
    server = AuthServer(TemplateStore(store_dir), params)
    tcp = TcpServer(host or "127.0.0.1", int(port), server.serve_connection)
    tcp.start()
    print(f"listening on {tcp.address[0]}:{tcp.address[1]}, store at {store_dir}")
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        tcp.stop()
    return EXIT_OK


def cmd_simulate(args, config) -> int:
    seed = int(resolve("seed", args.seed, config, 0))
    n_keys = int(resolve("n-keys", args.n_keys, config, 10))
    n_events = int(resolve("n-events", args.n_events, config, 100))
    bits = int(resolve("bits", args.bits, config, 512))
    params = _trust_params(args, config)
    fp = FixedPointParams()

    genuine = keystroke.GeneratorProfile.random(n_keys, seed=seed)
    imposter = keystroke.GeneratorProfile.random(n_keys, seed=seed + 990001)
    enroll_events = keystroke.synthesize(genuine, 50 * n_keys, stream_seed=seed + 1)
    template = keystroke.build_template(enroll_events)

    rng = random.Random(seed)
    pk, sk = paillier.keygen(bits, rng)
    import tempfile
    store_dir = tempfile.mkdtemp(prefix="ppkda-sim-")
    server = AuthServer(TemplateStore(store_dir), params, fp, rng=random.Random(seed + 2))
    qparams = QuantizedTrustParams.from_params(params, fp)

    print(f"simulation seed={seed} keys={n_keys} events={n_events} k={bits}")
    for label, profile, stream_seed in (
            ("genuine", genuine, seed + 3), ("imposter", imposter, seed + 4)):
        events = keystroke.synthesize(profile, n_events, stream_seed=stream_seed)
        plain = trust.run(events, template, params)
        identical = _encrypted_matches_quantized(
            server, pk, sk, fp, qparams, template, events, f"sim-{label}", seed)
        status = plain.final_decision.value
        where = plain.rejection_index
        tail = f" at event {where}" if where is not None else ""
        print(f"{label}: plaintext decision={status}{tail}, "
              f"steps={len(plain.records)}, skipped={plain.skipped}")
        print(f"{label}: C trajectory (every 10th): "
              + " ".join(f"{r.level:.2f}" for r in plain.records[::10]))
        print(f"{label}: traces identical: {'yes' if identical else 'NO'} "
              "(encrypted vs quantized oracle)")
    return EXIT_OK


def _encrypted_matches_quantized(server, pk, sk, fp, qparams, template,
                                 events, user_id, seed) -> bool:
    """Run the encrypted pipeline and diff it step by step against the
    quantized oracle using the private key as test-only escrow."""
    client_chan, server_chan = loopback_pair()
    threading.Thread(target=server.serve_connection, args=(server_chan,),
                     daemon=True).start()
    client = AuthClient(client_chan, user_id, pk, sk, fp, rng=random.Random(seed + 7))
    client.enroll_template(template)
    client.begin()
    session = server.sessions[client._session_id]

    state = trust.init_quantized(qparams)
    for event in events:
        stats = template.stats.get(event.key_index)
        if stats is None:
            continue
        decision = client.keystroke(event)
        d_q = trust.quantized_distance(keystroke.dwell_time(event), stats, fp)
        state = trust.step_quantized(state, d_q, qparams)
        c_plain = paillier.decrypt_signed(sk, pk, session.c_star)
        if c_plain != state.level_q or decision != state.decision:
            return False
        if state.decision is Decision.REJECTED:
            break
    client_chan.close()
    return True


def cmd_bench(args, config) -> int:
    key_sizes = tuple(int(x) for x in
                      str(resolve("key-sizes", args.key_sizes, config, "512,768,1024,1536")).split(","))
    bit_lengths = tuple(int(x) for x in
                        str(resolve("bit-lengths", args.bit_lengths, config, "4,7,10,40")).split(","))
    reps = int(resolve("reps", args.reps, config, 10))
    seed = int(resolve("seed", args.seed, config, 0))
    cfg = bench_mod.BenchConfig(key_sizes=key_sizes, bit_lengths=bit_lengths,
                                repetitions=reps, seed=seed)
    cells = bench_mod.run_bench(cfg)
    print(bench_mod.format_report(cells, reps))
    row = _measured_table_row(10, seed)
    print(f"\ncomplexity counters (N=10 template): rounds={row[0]}, "
          f"transmitted encryptions={row[1]}, subprotocol invocations={row[2]}")
    if args.csv:
        Path(args.csv).write_text(bench_mod.to_csv(cells), encoding="utf-8")
        print(f"wrote {args.csv}")
    return EXIT_OK


def _measured_table_row(n_keys: int, seed: int) -> tuple[int, int, int]:
    """Live enroll + one keystroke over loopback; read the transcript."""
    import tempfile
    fp = FixedPointParams()
    rng = random.Random(seed)
    pk, sk = paillier.keygen(512, rng)
    server = AuthServer(TemplateStore(tempfile.mkdtemp(prefix="ppkda-t1-")),
                        TrustParams(), fp, rng=random.Random(seed + 1))
    profile = keystroke.GeneratorProfile.random(n_keys, seed=seed)
    events = keystroke.synthesize(profile, 50 * n_keys, stream_seed=seed + 2)
    client_chan, server_chan = loopback_pair()
    threading.Thread(target=server.serve_connection, args=(server_chan,),
                     daemon=True).start()
    client = AuthClient(client_chan, "bench-user", pk, sk, fp,
                        rng=random.Random(seed + 3))
    client.enroll(events)
    client.begin()
    template = keystroke.build_template(events)
    for event in keystroke.synthesize(profile, 50, stream_seed=seed + 4):
        if event.key_index in template.stats:
            client.keystroke(event)
            break
    transcript = server.sessions[client._session_id].transcript
    client_chan.close()
    return transcript.table_row()


def cmd_table1(args, config) -> int:
    n = int(resolve("n", args.n, config, 10))
    seed = int(resolve("seed", args.seed, config, 0))
    rounds, transmitted, subs = _measured_table_row(n, seed)
    print(f"Complexity comparison (N = feature/template size; here N={n})")
    print(f"{'Protocol':<30} {'Rounds':>7} {'Transmitted':>12} {'Subprotocols':>13}")
    for name, r, t, s in BASELINE_ROWS:
        print(f"{name:<30} {r:>7} {t:>12} {s:>13}")
    print(f"{'This implementation (measured)':<30} {rounds:>7} "
          f"{f'N+{transmitted - n}={transmitted}':>12} {subs:>13}")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppkda",
        description="Privacy-preserving keystroke-dynamics continuous authentication")
    parser.add_argument("--config", help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trust_flags=False):
        p.add_argument("--seed", help="deterministic seed (tests/demos)")
        p.add_argument("--keys", help="key file prefix (PREFIX.pub.json / PREFIX.priv.json)")
        p.add_argument("--store", help="template store directory (local mode)")
        p.add_argument("--addr", help="server address host:port")
        if trust_flags:
            p.add_argument("--max-trust", type=float)
            p.add_argument("--reward", type=float)
            p.add_argument("--dist-threshold", type=float)
            p.add_argument("--reject-threshold", type=float)

    p = sub.add_parser("keygen", help="generate a key pair")
    p.add_argument("--bits", type=int)
    p.add_argument("--force", action="store_true")
    common(p)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("enroll", help="enroll a user from an event log")
    p.add_argument("--log", required=True)
    p.add_argument("--user", required=True)
    common(p, trust_flags=True)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("auth", help="replay an event log through authentication")
    p.add_argument("--log", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--trace-csv")
    common(p, trust_flags=True)
    p.set_defaults(func=cmd_auth)

    p = sub.add_parser("serve", help="run the authentication server over TCP")
    common(p, trust_flags=True)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("simulate", help="desk-scale genuine/imposter demo")
    p.add_argument("--n-keys", type=int)
    p.add_argument("--n-events", type=int)
    p.add_argument("--bits", type=int)
    common(p, trust_flags=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="crypto benchmark grid")
    p.add_argument("--key-sizes")
    p.add_argument("--bit-lengths")
    p.add_argument("--reps", type=int)
    p.add_argument("--csv")
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("table1", help="complexity comparison table")
    p.add_argument("--n", type=int)
    common(p)
    p.set_defaults(func=cmd_table1)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except UnknownUser as exc:
        print(f"error: unknown user: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SessionRejected as exc:
        print(f"error: session rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot reach server: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except PpkdaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
