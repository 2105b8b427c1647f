"""Deterministic discrete-event wireless medium with honest devices and the
adversary roster (relay, eavesdropper, curious initiator, forger).

Time is an integer number of picoseconds. Nodes sit on a 2-D plane (meters)
that is mapped to latitude/longitude around a geographic anchor. Every frame
reaches each node within range R of its transmitter after ``distance / c``,
rounded to the nearest picosecond. Events at equal times run in scheduling
order, so a run is fully determined by the seed and the placement.
"""

from __future__ import annotations

import enum
import hashlib
import heapq
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable

from . import geo
from .errors import ConfigurationError, DecodeError, RateLimitedError, SimulationError, WalletExhaustedError
from .geo import GeoCoordinate
from .protocol import (BaselineInitiator, BaselineResponder, CryptoMeter, Initiator, Responder, SessionConfig,
                       SessionResult)
from .pseudonym import LTCA, PCA, PSEUDONYM_CURVE, LongTermCredential, PseudonymWallet, provision_wallet
from .trace import Transcript
from .wire import (BaseAuth, BaseChallenge, BaseResponse, MsgA, MsgB, MsgC, MsgD, MsgE, MsgF, decode)

DEFAULT_ANCHOR = GeoCoordinate(59.3293, 18.0686)
DEFAULT_MAX_EVENTS = 1_000_000


class Role(enum.Enum):
    HONEST = "Honest"
    RELAY = "Relay"
    EAVESDROPPER = "Eavesdropper"
    CURIOUS_INITIATOR = "CuriousInitiator"
    FORGER = "Forger"


@dataclass(order=True)
class SimEvent:
    deliver_at: int
    seq: int
    kind: str = field(compare=False)          # "tx" | "rx" | "tunnel" | "call"
    node: str | None = field(compare=False, default=None)
    frame: bytes | None = field(compare=False, default=None, repr=False)
    sender: str | None = field(compare=False, default=None)
    channel: str = field(compare=False, default="radio")
    action: Callable[[int], None] | None = field(compare=False, default=None, repr=False)


def frame_digest(frame: bytes) -> bytes:
    return hashlib.sha256(frame).digest()


class SimNode:
    role = Role.HONEST

    def __init__(self, name: str, position: tuple[float, float]):
        self.name = name
        self.position = (float(position[0]), float(position[1]))
        self.world: World | None = None

    @property
    def adversarial(self) -> bool:
        return self.role not in (Role.HONEST,)

    def attach(self, world: "World") -> None:
        self.world = world

    def receive(self, frame: bytes, now: int, sender: str) -> None:
        pass


class World:
    def __init__(self, config: SessionConfig | None = None, seed: int = 0,
                 anchor: GeoCoordinate = DEFAULT_ANCHOR, max_events: int = DEFAULT_MAX_EVENTS,
                 max_speed: float = 0.0):
        self.config = config or SessionConfig()
        self.seed = seed
        self.anchor = anchor
        self.max_events = max_events
        self.now = 0
        self.nodes: dict[str, SimNode] = {}
        self.trace = Transcript()
        self.blocked: set[frozenset[str]] = set()
        self._queue: list[SimEvent] = []
        self._seq = itertools.count()
        self._authority_rng = self.rng_for("authorities")
        self.ltca = LTCA("LTCA-1", self._authority_rng)
        self.pca = PCA("PCA-1", self.ltca.anchor, self._authority_rng)
        self._baseline_ltcas: dict[str, LTCA] = {}
        check_mobility_bound(self.config, max_speed)

    # --- setup -------------------------------------------------------------------

    def rng_for(self, label: str) -> random.Random:
        return random.Random(f"{self.seed}/{label}")

    def add(self, node: SimNode) -> SimNode:
        if node.name in self.nodes:
            raise ConfigurationError(f"duplicate node name {node.name!r}")
        self.nodes[node.name] = node
        node.attach(self)
        return node

    def baseline_ltca(self, scheme: str) -> LTCA:
        if scheme not in self._baseline_ltcas:
            self._baseline_ltcas[scheme] = LTCA(f"LTCA-{scheme}", self.rng_for(f"ltca/{scheme}"), scheme)
        return self._baseline_ltcas[scheme]

    def add_device(self, name: str, position: tuple[float, float], *, protocol: str = "ppsnd",
                   k: int = 2, tau: int = 600 * 10**12, start_time: int = 0, paillier_bits: int | None = None,
                   signature_scheme: str = PSEUDONYM_CURVE, enforce_rate_limit: bool = True,
                   role: Role = Role.HONEST) -> "Device":
        """Register a device with the authorities and place it in the world."""
        rng = self.rng_for(f"device/{name}")
        if protocol == "snd":
            ltca = self.baseline_ltca(signature_scheme)
            ltc = ltca.issue_ltc(f"ltc-identity:{name}", signature_scheme)
            device = Device(name, position, ltc=ltc, ltc_anchor=ltca.anchor, protocol="snd", rng=rng)
        elif protocol == "ppsnd":
            ltc = self.ltca.issue_ltc(f"ltc-identity:{name}")
            wallet = provision_wallet(self.ltca, self.pca, ltc, rng, k=k, tau=tau, start_time=start_time,
                                      paillier_bits=paillier_bits or self.config.paillier_bits)
            device = Device(name, position, ltc=ltc, wallet=wallet, protocol="ppsnd", rng=rng,
                            enforce_rate_limit=enforce_rate_limit)
        else:
            raise ConfigurationError(f"unknown protocol {protocol!r}")
        device.role = role
        self.add(device)
        return device

    def block(self, a: str, b: str) -> None:
        """Suppress the direct radio link between two nodes (e.g. an obstruction)."""
        self.blocked.add(frozenset((a, b)))

    def move(self, name: str, position: tuple[float, float]) -> None:
        node = self.nodes[name]
        node.position = (float(position[0]), float(position[1]))
        if isinstance(node, Device):
            node.coord = self.geo_of(node.position)

    # --- geometry ----------------------------------------------------------------

    def distance(self, a: str, b: str) -> float:
        pa, pb = self.nodes[a].position, self.nodes[b].position
        return math.hypot(pa[0] - pb[0], pa[1] - pb[1])

    def geo_of(self, position: tuple[float, float]) -> GeoCoordinate:
        x, y = position
        lat = self.anchor.lat + y / geo.METERS_PER_DEGREE
        lng = self.anchor.lng + x / (geo.METERS_PER_DEGREE * math.cos(math.radians(self.anchor.lat)))
        return GeoCoordinate(lat, lng)

    # --- scheduling --------------------------------------------------------------

    def _push(self, event: SimEvent) -> SimEvent:
        if event.deliver_at < self.now:
            raise SimulationError("cannot schedule an event in the past")
        heapq.heappush(self._queue, event)
        return event

    def schedule(self, at: int, action: Callable[[int], None]) -> SimEvent:
        return self._push(SimEvent(at, next(self._seq), "call", action=action))

    def transmit(self, sender: str, frame: bytes, at: int) -> SimEvent:
        """Queue a radio transmission by ``sender`` at time ``at``."""
        return self._push(SimEvent(at, next(self._seq), "tx", node=sender, frame=bytes(frame)))

    def tunnel(self, sender: str, receiver: str, frame: bytes, now: int) -> SimEvent:
        """Out-of-band link between colluding relays; delay is distance / c."""
        delay = geo.propagation_ps(self.distance(sender, receiver))
        return self._push(SimEvent(now + delay, next(self._seq), "tunnel", node=receiver, frame=bytes(frame),
                                   sender=sender, channel="tunnel"))

    def medium_send(self, sender: str, frame: bytes, now: int, to: str | None = None) -> list[SimEvent]:
        """Deliver ``frame`` to every node within R of ``sender`` (or only ``to``)."""
        events = []
        targets = [to] if to is not None else list(self.nodes)
        for name in targets:
            if name == sender or frozenset((sender, name)) in self.blocked:
                continue
            d = self.distance(sender, name)
            if d > self.config.R:
                continue
            event = SimEvent(now + geo.propagation_ps(d), next(self._seq), "rx", node=name,
                             frame=bytes(frame), sender=sender)
            events.append(self._push(event))
        return events

    def run_until_idle(self) -> None:
        processed = 0
        while self._queue:
            processed += 1
            if processed > self.max_events:
                raise SimulationError(f"event budget of {self.max_events} exceeded")
            event = heapq.heappop(self._queue)
            self.now = event.deliver_at
            if event.kind == "tx":
                self.trace.record(self.now, "tx", event.node, event.frame)
                self.medium_send(event.node, event.frame, self.now)
            elif event.kind == "rx":
                self.trace.record(self.now, "rx", event.node, event.frame)
                self.nodes[event.node].receive(event.frame, self.now, event.sender)
            elif event.kind == "tunnel":
                self.nodes[event.node].on_tunnel(event.frame, self.now)
            else:
                event.action(self.now)

    def trace_jsonl(self) -> str:
        return self.trace.to_jsonl()

    # --- convenience ---------------------------------------------------------------

    def start(self, name: str, at: int) -> None:
        node = self.nodes[name]
        self.schedule(at, node.start_discovery)

    def devices(self) -> list["Device"]:
        return [n for n in self.nodes.values() if isinstance(n, Device)]


def check_mobility_bound(config: SessionConfig, max_speed: float) -> None:
    """Refuse scenarios whose worst-case in-session displacement reaches R - R_snd."""
    if max_speed < 0:
        raise ConfigurationError("max_speed must be non-negative")
    duration_s = (config.advert_gap + config.ranging_timeout + 2 * config.followup_timeout) / 10**12
    if max_speed * duration_s >= config.R - config.R_snd:
        raise ConfigurationError(
            f"displacement {max_speed * duration_s:.3f} m per session reaches R - R_snd")


# --- honest (and curious) devices ---------------------------------------------------

class Device(SimNode):
    """A credentialed node running either PP-SND or the baseline protocol."""

    def __init__(self, name: str, position: tuple[float, float], *, ltc: LongTermCredential,
                 wallet: PseudonymWallet | None = None, ltc_anchor=None, protocol: str = "ppsnd",
                 rng: random.Random | None = None, enforce_rate_limit: bool = True):
        super().__init__(name, position)
        self.ltc = ltc
        self.wallet = wallet
        self.ltc_anchor = ltc_anchor
        self.protocol = protocol
        self.rng = rng or random.Random(name)
        self.enforce_rate_limit = enforce_rate_limit
        self.meter = CryptoMeter()
        self.coord: GeoCoordinate | None = None
        self.sessions: list = []
        self.results: list[SessionResult] = []
        self.responder: Responder | BaselineResponder | None = None
        self._seen: set[bytes] = set()
        self._last_start: int | None = None
        self._timers: set[int] = set()

    def attach(self, world: World) -> None:
        super().attach(world)
        self.coord = world.geo_of(self.position)
        if self.protocol == "ppsnd":
            self.responder = Responder(world.config, self.wallet, self.coord, world.pca.anchor, self.rng, self.meter)
        else:
            self.responder = BaselineResponder(world.config, self.ltc, self.coord, self.rng, self.meter)

    @property
    def pid(self) -> bytes:
        return self.wallet.current(self.world.now).pid

    # --- sending ------------------------------------------------------------------

    def _send(self, outgoing) -> None:
        for at, msg in outgoing:
            frame = msg.to_bytes()
            self._seen.add(frame_digest(frame))
            self.world.transmit(self.name, frame, at)

    def _arm_timer(self, session) -> None:
        deadline = session.next_deadline()
        if deadline is not None and deadline not in self._timers:
            self._timers.add(deadline)
            self.world.schedule(deadline, self.on_timer)

    # --- protocol entry points ------------------------------------------------------

    def start_discovery(self, now: int):
        cfg = self.world.config
        if self.enforce_rate_limit and self._last_start is not None and now - self._last_start < cfg.tau_snd:
            raise RateLimitedError(f"{self.name}: next session allowed at {self._last_start + cfg.tau_snd}")
        self.coord = self.world.geo_of(self.position)
        if self.protocol == "ppsnd":
            session = Initiator(cfg, self.wallet.current(now), self.coord, self.world.pca.anchor, self.rng,
                                self.meter)
        else:
            session = BaselineInitiator(cfg, self.ltc, self.coord, self.ltc_anchor, self.rng, self.meter)
        self._last_start = now
        self.sessions.append(session)
        self._send(session.start(now))
        self._arm_timer(session)
        return session

    def on_timer(self, now: int) -> None:
        self._timers.discard(now)
        for session in self.sessions:
            if not session.done:
                self.results.extend(session.on_timeout(now))
                self._arm_timer(session)

    def receive(self, frame: bytes, now: int, sender: str) -> None:
        digest = frame_digest(frame)
        if digest in self._seen:
            return  # first delivery wins; also drops echoes of our own frames
        self._seen.add(digest)
        try:
            msg = decode(frame)
        except DecodeError:
            return
        self.coord = self.world.geo_of(self.position)
        self.responder.coord = self.coord
        if self.protocol == "ppsnd":
            if isinstance(msg, MsgA):
                self.responder.on_a(msg, now)
            elif isinstance(msg, MsgB):
                self._send(self.responder.on_b(msg, now))
            elif isinstance(msg, MsgE):
                self._send(self.responder.on_e(msg, now))
            elif isinstance(msg, (MsgC, MsgD, MsgF)):
                self._to_initiator(msg, frame, now)
        else:
            if isinstance(msg, BaseChallenge):
                self._send(self.responder.on_challenge(msg, now))
            elif isinstance(msg, (BaseResponse, BaseAuth)):
                self._to_initiator(msg, frame, now)

    def _to_initiator(self, msg, frame: bytes, now: int) -> None:
        for session in self.sessions:
            if session.done:
                continue
            if isinstance(msg, MsgC):
                session.on_c(msg, now, frame)
            elif isinstance(msg, MsgD):
                self._send(session.on_d(msg, now, frame))
                self._collect(session)
            elif isinstance(msg, MsgF):
                session.on_f(msg, now, frame)
                self._collect(session)
            elif isinstance(msg, BaseResponse):
                session.on_response(msg, now, frame)
            elif isinstance(msg, BaseAuth):
                session.on_auth(msg, now, frame)
                self._collect(session)
            self._arm_timer(session)

    def _collect(self, session) -> None:
        for result in session.results:
            if not any(result is r for r in self.results):
                self.results.append(result)


# --- adversaries ----------------------------------------------------------------------

class RelayEndpoint(SimNode):
    """Re-broadcasts every frame heard from a non-adversarial node after ``delta_relay``.

    With a ``partner`` the frame is instead tunneled to the partner, which
    re-broadcasts it on arrival after ``delta_relay``.
    """
    role = Role.RELAY

    def __init__(self, name: str, position, delta_relay: int, forwarded: set[bytes]):
        super().__init__(name, position)
        self.delta_relay = delta_relay
        self.partner: RelayEndpoint | None = None
        self.forwarded = forwarded
        self.count = 0

    def on_tunnel(self, frame: bytes, now: int) -> None:
        self.count += 1
        self.world.transmit(self.name, frame, now + self.delta_relay)

    def receive(self, frame: bytes, now: int, sender: str) -> None:
        if self.world.nodes[sender].adversarial:
            return
        digest = frame_digest(frame)
        if digest in self.forwarded:
            return
        self.forwarded.add(digest)
        if self.partner is not None:
            self.world.tunnel(self.name, self.partner.name, frame, now)
        else:
            self.count += 1
            self.world.transmit(self.name, frame, now + self.delta_relay)


@dataclass
class RelayHandle:
    endpoints: list[RelayEndpoint]
    delta_relay: int

    @property
    def frames_relayed(self) -> int:
        return sum(e.count for e in self.endpoints)


def attach_relay(world: World, position, delta_relay: int, mode: str = "single",
                 position2=None, name: str = "E") -> RelayHandle:
    """Add a single relay, or a two-device chain joined by an out-of-band link."""
    if delta_relay <= 0:
        raise ConfigurationError("delta_relay must be strictly positive")
    forwarded: set[bytes] = set()
    if mode == "single":
        endpoints = [RelayEndpoint(name, position, delta_relay, forwarded)]
    elif mode == "chain":
        if position2 is None:
            raise ConfigurationError("chain mode needs a second relay position")
        e1 = RelayEndpoint(f"{name}1", position, delta_relay, forwarded)
        e2 = RelayEndpoint(f"{name}2", position2, delta_relay, forwarded)
        e1.partner, e2.partner = e2, e1
        endpoints = [e1, e2]
    else:
        raise ConfigurationError(f"unknown relay mode {mode!r}")
    for endpoint in endpoints:
        world.add(endpoint)
    return RelayHandle(endpoints, delta_relay)


class Eavesdropper(SimNode):
    role = Role.EAVESDROPPER

    def __init__(self, name: str, position):
        super().__init__(name, position)
        self.captured = Transcript()

    def receive(self, frame: bytes, now: int, sender: str) -> None:
        self.captured.record(now, "rx", self.name, frame)

    def log_bytes(self) -> bytes:
        return self.captured.to_bytes()


def attach_eavesdropper(world: World, position, name: str = "eve") -> Eavesdropper:
    return world.add(Eavesdropper(name, position))


def attach_curious_initiator(world: World, position, period: int, count: int, start: int = 0,
                             name: str = "curious", k: int = 1) -> Device:
    """A credentialed node that ignores its own rate limit and starts ``count`` sessions."""
    device = world.add_device(name, position, k=k, enforce_rate_limit=False, role=Role.CURIOUS_INITIATOR)
    for i in range(count):
        world.start(name, start + i * period)
    return device


class Forger(SimNode):
    """External node without credentials that injects ranging responses.

    On every overheard (b) it immediately answers with a (c) carrying a random
    n2. With ``spoof=True`` it reuses the most recent responder pid it has
    overheard instead of a random one.
    """
    role = Role.FORGER

    def __init__(self, name: str, position, rng: random.Random, spoof: bool = False):
        super().__init__(name, position)
        self.rng = rng
        self.spoof = spoof
        self.known_responders: list[bytes] = []
        self.forged = 0

    def receive(self, frame: bytes, now: int, sender: str) -> None:
        try:
            msg = decode(frame)
        except DecodeError:
            return
        if isinstance(msg, (MsgC, MsgD)):
            if msg.sender_pid not in self.known_responders:
                self.known_responders.append(msg.sender_pid)
        elif isinstance(msg, MsgB):
            if self.spoof and self.known_responders:
                pid = self.known_responders[-1]
            else:
                pid = self.rng.randbytes(32)
            self.forged += 1
            self.world.transmit(self.name, MsgC(pid, msg.sender_pid, self.rng.randbytes(16)).to_bytes(), now)

    def flood_invalid_adverts(self, count: int, at: int) -> None:
        for i in range(count):
            fake = MsgA(self.rng.randbytes(32), self.rng.randbytes(32), self.rng.randbytes(64),
                        self.rng.randbytes(200))
            self.world.transmit(self.name, fake.to_bytes(), at + i)


def attach_forger(world: World, position, spoof: bool = False, name: str = "forger") -> Forger:
    return world.add(Forger(name, position, world.rng_for(f"forger/{name}"), spoof))


def run_pair_session(config: SessionConfig, nodes, now: int = 0, protocol: str | None = None) -> SessionResult:
    """Start a session at ``nodes[0]`` and return its result for ``nodes[1]``."""
    initiator, responder = nodes
    world = initiator.world
    if world is None or responder.world is not world:
        raise SimulationError("both nodes must belong to the same world")
    if protocol is not None and initiator.protocol != protocol:
        raise ConfigurationError(f"initiator runs {initiator.protocol}, not {protocol}")
    session = initiator.start_discovery(now)
    world.run_until_idle()
    peer_key = responder.ltc.identity.encode() if initiator.protocol == "snd" else None
    for result in session.results:
        if peer_key is not None and result.peer_pid == peer_key:
            return result
        if peer_key is None and result.peer_pid is not None and _pid_belongs(responder, result.peer_pid):
            return result
    return next((r for r in session.results if r.peer_pid is None), None) or session.results[-1]


def _pid_belongs(device: Device, pid: bytes) -> bool:
    return device.wallet is not None and any(c.pid == pid for c in device.wallet)
