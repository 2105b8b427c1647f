"""State machines for the privacy-preserving SND exchange (messages a-f) and
for the plaintext challenge-response time-and-location baseline.

The machines are pure with respect to I/O: every handler takes the current
simulated time (integer picoseconds) and returns ``(send_time, message)``
pairs for the caller to transmit. Timers are exposed through
``next_deadline()`` / ``on_timeout(now)``.
"""

from __future__ import annotations

import enum
import hashlib
from contextlib import contextmanager
from dataclasses import dataclass, field
from time import perf_counter

from . import geo
from .encoding import pack_i64, pack_int
from .errors import ConfigurationError, DomainError, WalletExhaustedError
from .geo import GeoCoordinate, NormalizedCoordinate
from .phe import decode_signed, decrypt
from .pseudonym import (Certificate, LongTermCredential, Pseudonym, PseudonymCredentials, PseudonymWallet,
                        TrustAnchor, sign, verify, verify_certificate, verify_pnym)
from .trace import Transcript
from .wire import (BaseAuth, BaseChallenge, BaseResponse, Message, MsgA, MsgB, MsgC, MsgD, MsgE, MsgF,
                   increment_nonce)

PS = 10**12


class Outcome(enum.Enum):
    NEIGHBOR = "Neighbor"
    NOT_NEIGHBOR = "NotNeighbor"
    ABORTED = "Aborted"


class AbortReason(str, enum.Enum):
    HASH_MISMATCH = "HashMismatch"
    AUTH_FAIL = "AuthFail"
    NONCE_MISMATCH = "NonceMismatch"
    TIMEOUT = "Timeout"
    MALFORMED = "Malformed"
    PSEUDONYM_TRANSITION = "PseudonymTransition"
    WALLET_EXHAUSTED = "WalletExhausted"


@dataclass(frozen=True)
class SessionConfig:
    """Protocol parameters. Distances in meters, durations in picoseconds."""
    R: float = 300.0
    R_snd: float = 200.0
    epsilon: float = 5.0
    delta_proc: int = 1_000_000          # 1 us responder turnaround
    normalize_factor: int = geo.DEFAULT_NORMALIZE_FACTOR
    tau_snd: int = 1 * PS                # minimum period between sessions
    paillier_bits: int = 1024
    guard: int = 10_000_000              # 10 us added to the ranging timeout
    followup_timeout: int = 50 * 10**9   # 50 ms for (d), (f)
    advert_gap: int = 10**9              # 1 ms between (a) and (b)

    def __post_init__(self):
        if not 0 < self.R_snd < self.R:
            raise ConfigurationError("need 0 < R_snd < R")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if self.tau_snd < 0 or self.delta_proc < 0 or self.guard < 0:
            raise ConfigurationError("durations must be non-negative")
        if self.normalize_factor <= 0:
            raise ConfigurationError("normalize_factor must be positive")

    @property
    def ranging_timeout(self) -> int:
        return 2 * geo.propagation_ps(self.R) + self.delta_proc + self.guard


@dataclass
class SessionResult:
    outcome: Outcome
    reason: AbortReason | None = None
    d_tof_m: float | None = None
    d_he_m: float | None = None
    t1: int | None = None
    t2: int | None = None
    peer_pid: bytes | None = None
    transcript: Transcript = field(default_factory=Transcript, repr=False)

    @property
    def neighbor(self) -> bool:
        return self.outcome is Outcome.NEIGHBOR


class CryptoMeter:
    """Accumulates wall time spent inside ``timed()`` blocks."""

    def __init__(self):
        self.elapsed = 0.0

    @contextmanager
    def timed(self):
        start = perf_counter()
        try:
            yield
        finally:
            self.elapsed += perf_counter() - start

    def reset(self) -> float:
        elapsed, self.elapsed = self.elapsed, 0.0
        return elapsed


def h(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


# signed payloads; each starts with a domain label
def payload_a(n1: bytes) -> bytes:
    return b"PPSND/a" + n1


def payload_d(initiator_pid: bytes, responder_pid: bytes, n1: bytes, n2_plus_1: bytes) -> bytes:
    return b"PPSND/d" + initiator_pid + responder_pid + n1 + n2_plus_1


def payload_e(initiator_pid: bytes, responder_pid: bytes, x: int, y: int) -> bytes:
    return b"PPSND/e" + initiator_pid + responder_pid + pack_int(x) + pack_int(y)


def payload_f(responder_pid: bytes, initiator_pid: bytes, diff_lat: int, diff_lng: int) -> bytes:
    return b"PPSND/f" + responder_pid + initiator_pid + pack_int(diff_lat) + pack_int(diff_lng)


def payload_base(responder_id: str, initiator_id: str, n1: bytes, n2: bytes, lat_units: int, lng_units: int) -> bytes:
    return (b"SND/c" + responder_id.encode() + b"\x00" + initiator_id.encode() + b"\x00" + n1 + n2
            + pack_i64(lat_units) + pack_i64(lng_units))


def decide(config: SessionConfig, d_tof_m: float, d_loc_m: float) -> Outcome:
    """Neighbor iff the ToF distance is inside R_snd and agrees with the location distance."""
    if d_tof_m < config.R_snd and abs(d_tof_m - d_loc_m) < config.epsilon:
        return Outcome.NEIGHBOR
    return Outcome.NOT_NEIGHBOR


_NULL_METER = CryptoMeter()


# --- PP-SND initiator ------------------------------------------------------------

@dataclass
class _Peer:
    pid: bytes
    t2: int
    n2: bytes
    deadline: int
    transcript: Transcript
    stage: str = "await_d"
    pnym: Pseudonym | None = None
    d_tof_m: float | None = None


class Initiator:
    """One discovery session started by this node (it may reach several peers)."""

    def __init__(self, config: SessionConfig, creds: PseudonymCredentials, coord: GeoCoordinate,
                 anchor: TrustAnchor, rng, meter: CryptoMeter | None = None):
        self.config = config
        self.creds = creds
        self.coord = coord
        self.anchor = anchor
        self.rng = rng
        self.meter = meter or _NULL_METER
        self.pid = creds.pid
        self.t1: int | None = None
        self.n1: bytes | None = None
        self.peers: dict[bytes, _Peer] = {}
        self.results: list[SessionResult] = []
        self._common = Transcript()
        self._ranging_open = False

    # (a), (b)
    def start(self, now: int) -> list[tuple[int, Message]]:
        if not self.creds.pnym.valid_at(now):
            raise WalletExhaustedError("pseudonym not valid at session start")
        self.n1 = self.rng.randbytes(16)
        with self.meter.timed():
            commitment = h(self.n1)
            auth = sign(self.creds.sig_sk, payload_a(self.n1))
        msg_a = MsgA(self.pid, commitment, auth, self.creds.pnym.to_bytes())
        self.t1 = now + self.config.advert_gap
        msg_b = MsgB(self.pid, self.n1)
        self._common.record(now, "tx", "initiator", msg_a.to_bytes())
        self._common.record(self.t1, "tx", "initiator", msg_b.to_bytes())
        self._ranging_open = True
        return [(now, msg_a), (self.t1, msg_b)]

    @property
    def ranging_deadline(self) -> int:
        return self.t1 + self.config.ranging_timeout

    @property
    def done(self) -> bool:
        return not self._ranging_open and all(p.stage == "done" for p in self.peers.values())

    def next_deadline(self) -> int | None:
        pending = [p.deadline for p in self.peers.values() if p.stage != "done"]
        if self._ranging_open:
            pending.append(self.ranging_deadline)
        return min(pending, default=None)

    def _finish(self, peer: _Peer | None, outcome: Outcome, reason: AbortReason | None = None,
                d_he: float | None = None, transcript: Transcript | None = None) -> SessionResult:
        result = SessionResult(
            outcome, reason,
            d_tof_m=peer.d_tof_m if peer else None, d_he_m=d_he,
            t1=self.t1, t2=peer.t2 if peer else None,
            peer_pid=peer.pid if peer else None,
            transcript=peer.transcript if peer else (transcript or self._common),
        )
        if peer:
            peer.stage = "done"
        self.results.append(result)
        return result

    def _guard_lifetime(self, peer: _Peer, now: int) -> SessionResult | None:
        if not self.creds.pnym.valid_at(now):
            return self._finish(peer, Outcome.ABORTED, AbortReason.PSEUDONYM_TRANSITION)
        return None

    # (c)
    def on_c(self, msg: MsgC, now: int, raw: bytes | None = None) -> None:
        if msg.dest_pid != self.pid or not self._ranging_open or now > self.ranging_deadline:
            return
        if msg.sender_pid in self.peers:
            return  # first arrival wins
        transcript = Transcript(self._common)
        transcript.record(now, "rx", "initiator", raw or msg.to_bytes())
        self.peers[msg.sender_pid] = _Peer(msg.sender_pid, now, msg.n2,
                                           now + self.config.followup_timeout, transcript)

    # (d) -> (e)
    def on_d(self, msg: MsgD, now: int, raw: bytes | None = None) -> list[tuple[int, Message]]:
        peer = self.peers.get(msg.sender_pid)
        if msg.dest_pid != self.pid or peer is None or peer.stage != "await_d":
            return []
        peer.transcript.record(now, "rx", "initiator", raw or msg.to_bytes())
        if self._guard_lifetime(peer, now):
            return []
        try:
            pnym_b = Pseudonym.from_bytes(msg.pnym_b)
        except (ValueError, DomainError):
            self._finish(peer, Outcome.ABORTED, AbortReason.MALFORMED)
            return []
        with self.meter.timed():
            ok = (pnym_b.pid == msg.sender_pid and verify_pnym(pnym_b, self.anchor, now)
                  and verify(pnym_b.sig_pk, payload_d(self.pid, msg.sender_pid, self.n1, msg.n2_plus_1),
                             msg.auth_b))
        if not ok:
            self._finish(peer, Outcome.ABORTED, AbortReason.AUTH_FAIL)
            return []
        if msg.n2_plus_1 != increment_nonce(peer.n2):
            self._finish(peer, Outcome.ABORTED, AbortReason.NONCE_MISMATCH)
            return []
        peer.pnym = pnym_b
        peer.d_tof_m = geo.d_tof(self.t1, peer.t2, self.config.delta_proc)
        if peer.d_tof_m >= self.config.R_snd:
            self._finish(peer, Outcome.NOT_NEIGHBOR)
            return []
        with self.meter.timed():
            enc = geo.enc_coord(self.creds.ppk, self.coord, self.config.normalize_factor, self.rng)
            auth = sign(self.creds.sig_sk, payload_e(self.pid, peer.pid, enc.X.value, enc.Y.value))
        msg_e = MsgE(self.pid, peer.pid, enc.X.value, enc.Y.value, auth)
        peer.transcript.record(now, "tx", "initiator", msg_e.to_bytes())
        peer.stage = "await_f"
        peer.deadline = now + self.config.followup_timeout
        return [(now, msg_e)]

    # (f) -> decision
    def on_f(self, msg: MsgF, now: int, raw: bytes | None = None) -> SessionResult | None:
        peer = self.peers.get(msg.sender_pid)
        if msg.dest_pid != self.pid or peer is None or peer.stage != "await_f":
            return None
        peer.transcript.record(now, "rx", "initiator", raw or msg.to_bytes())
        if (aborted := self._guard_lifetime(peer, now)) is not None:
            return aborted
        factor = self.config.normalize_factor
        with self.meter.timed():
            if not verify(peer.pnym.sig_pk, payload_f(peer.pid, self.pid, msg.diff_lat, msg.diff_lng), msg.auth_b):
                return self._finish(peer, Outcome.ABORTED, AbortReason.AUTH_FAIL)
            try:
                c_lat = self.creds.ppk.ciphertext(msg.diff_lat)
                c_lng = self.creds.ppk.ciphertext(msg.diff_lng)
            except DomainError:
                return self._finish(peer, Outcome.ABORTED, AbortReason.MALFORMED)
            n = self.creds.ppk.n
            dlat = decode_signed(decrypt(self.creds.psk, c_lat), n)
            dlng = decode_signed(decrypt(self.creds.psk, c_lng), n)
            if abs(dlat) > 180 * factor or abs(dlng) > 360 * factor:
                return self._finish(peer, Outcome.ABORTED, AbortReason.MALFORMED)
            d_he = geo.euclid_distance_m(dlat, dlng, self.coord.lat, factor)
        return self._finish(peer, decide(self.config, peer.d_tof_m, d_he), d_he=d_he)

    def on_timeout(self, now: int) -> list[SessionResult]:
        finished = []
        if self._ranging_open and now >= self.ranging_deadline:
            self._ranging_open = False
            if not self.peers:
                finished.append(self._finish(None, Outcome.ABORTED, AbortReason.TIMEOUT))
        for peer in self.peers.values():
            if peer.stage != "done" and now >= peer.deadline:
                finished.append(self._finish(peer, Outcome.ABORTED, AbortReason.TIMEOUT))
        return finished


# --- PP-SND responder ------------------------------------------------------------

@dataclass
class _ResponderSession:
    initiator_pid: bytes
    h_n1: bytes
    pnym_a: Pseudonym
    auth_a: bytes
    creds: PseudonymCredentials
    state: str = "WaitingRanging"
    n1: bytes | None = None
    n2: bytes | None = None
    reason: AbortReason | None = None


class Responder:
    """Answers discovery sessions started by other nodes.

    Invalid advertisements are dropped without any reply. Sessions are keyed
    by (initiator pid, commitment); an initiator pid may start at most one
    accepted session per ``tau_snd``.
    """

    def __init__(self, config: SessionConfig, wallet: PseudonymWallet, coord: GeoCoordinate,
                 anchor: TrustAnchor, rng, meter: CryptoMeter | None = None):
        self.config = config
        self.wallet = wallet
        self.coord = coord
        self.anchor = anchor
        self.rng = rng
        self.meter = meter or _NULL_METER
        self.sessions: dict[tuple[bytes, bytes], _ResponderSession] = {}
        self._by_commitment: dict[bytes, tuple[bytes, bytes]] = {}
        self._last_accept: dict[bytes, int] = {}
        self.refused = 0
        self.discarded = 0

    def on_a(self, msg: MsgA, now: int) -> None:
        key = (msg.sender_pid, msg.h_n1)
        if key in self.sessions or msg.h_n1 in self._by_commitment:
            self.discarded += 1
            return
        try:
            creds = self.wallet.current(now)
            pnym_a = Pseudonym.from_bytes(msg.pnym_a)
        except (WalletExhaustedError, ValueError, DomainError):
            self.discarded += 1
            return
        if pnym_a.pid == creds.pid:
            return  # own advertisement
        with self.meter.timed():
            valid = pnym_a.pid == msg.sender_pid and verify_pnym(pnym_a, self.anchor, now)
        if not valid:
            self.discarded += 1
            return
        last = self._last_accept.get(msg.sender_pid)
        if last is not None and now - last < self.config.tau_snd:
            self.refused += 1
            return
        self._last_accept[msg.sender_pid] = now
        self.sessions[key] = _ResponderSession(msg.sender_pid, msg.h_n1, pnym_a, msg.auth_a, creds)
        self._by_commitment[msg.h_n1] = key

    def _abort(self, session: _ResponderSession, reason: AbortReason) -> list:
        session.state = "Aborted"
        session.reason = reason
        return []

    def on_b(self, msg: MsgB, now: int) -> list[tuple[int, Message]]:
        with self.meter.timed():
            commitment = h(msg.n1)
        key = self._by_commitment.get(commitment)
        if key is None:
            # no advertisement matches this n1: abort any waiting session from this sender
            for session in self.sessions.values():
                if session.initiator_pid == msg.sender_pid and session.state == "WaitingRanging":
                    self._abort(session, AbortReason.HASH_MISMATCH)
            return []
        session = self.sessions[key]
        if session.state != "WaitingRanging" or session.initiator_pid != msg.sender_pid:
            return []
        session.n1 = msg.n1
        session.n2 = self.rng.randbytes(16)
        reply_at = now + self.config.delta_proc
        out: list[tuple[int, Message]] = [(reply_at, MsgC(session.creds.pid, session.initiator_pid, session.n2))]
        n2_plus_1 = increment_nonce(session.n2)
        with self.meter.timed():
            auth_ok = verify(session.pnym_a.sig_pk, payload_a(msg.n1), session.auth_a)
            if auth_ok:
                auth_b = sign(session.creds.sig_sk,
                              payload_d(session.initiator_pid, session.creds.pid, msg.n1, n2_plus_1))
        if not auth_ok:
            self._abort(session, AbortReason.AUTH_FAIL)
            return out
        session.state = "WaitingCoordinates"
        out.append((reply_at, MsgD(session.creds.pid, session.initiator_pid, n2_plus_1, auth_b,
                                   session.creds.pnym.to_bytes())))
        return out

    def on_e(self, msg: MsgE, now: int) -> list[tuple[int, Message]]:
        session = next((s for s in self.sessions.values()
                        if s.state == "WaitingCoordinates" and s.initiator_pid == msg.sender_pid
                        and s.creds.pid == msg.dest_pid), None)
        if session is None:
            return []
        if not session.creds.pnym.valid_at(now):
            return self._abort(session, AbortReason.PSEUDONYM_TRANSITION)
        ppk_a = session.pnym_a.ppk
        with self.meter.timed():
            if not verify(session.pnym_a.sig_pk, payload_e(msg.sender_pid, msg.dest_pid, msg.x_a, msg.y_a),
                          msg.auth_a):
                return self._abort(session, AbortReason.AUTH_FAIL)
            try:
                enc_a = geo.EncryptedCoordinate(ppk_a.ciphertext(msg.x_a), ppk_a.ciphertext(msg.y_a))
            except DomainError:
                return self._abort(session, AbortReason.MALFORMED)
            enc_b = geo.enc_coord(ppk_a, self.coord, self.config.normalize_factor, self.rng)
            diff_lat, diff_lng = geo.hec_diff(enc_a, enc_b)
            auth = sign(session.creds.sig_sk,
                        payload_f(session.creds.pid, session.initiator_pid, diff_lat.value, diff_lng.value))
        session.state = "Done"
        return [(now, MsgF(session.creds.pid, session.initiator_pid, diff_lat.value, diff_lng.value, auth))]


# --- baseline CR-TL SND ----------------------------------------------------------

@dataclass
class _BasePeer:
    peer_id: str
    t2: int
    n2: bytes
    deadline: int
    transcript: Transcript
    stage: str = "await_auth"


class BaselineInitiator:
    """Challenge-response time-and-location SND without any privacy protection."""

    def __init__(self, config: SessionConfig, ltc: LongTermCredential, coord: GeoCoordinate,
                 anchor: TrustAnchor, rng, meter: CryptoMeter | None = None):
        self.config = config
        self.ltc = ltc
        self.coord = coord
        self.anchor = anchor
        self.rng = rng
        self.meter = meter or _NULL_METER
        self.identity = ltc.identity
        self.own = NormalizedCoordinate.from_geo(coord, config.normalize_factor)
        self.t1: int | None = None
        self.n1: bytes | None = None
        self.peers: dict[str, _BasePeer] = {}
        self.results: list[SessionResult] = []
        self._common = Transcript()
        self._ranging_open = False

    def start(self, now: int) -> list[tuple[int, Message]]:
        self.n1 = self.rng.randbytes(16)
        self.t1 = now
        msg = BaseChallenge(self.identity, now, self.n1)
        self._common.record(now, "tx", "initiator", msg.to_bytes())
        self._ranging_open = True
        return [(now, msg)]

    @property
    def ranging_deadline(self) -> int:
        return self.t1 + self.config.ranging_timeout

    @property
    def done(self) -> bool:
        return not self._ranging_open and all(p.stage == "done" for p in self.peers.values())

    def next_deadline(self) -> int | None:
        pending = [p.deadline for p in self.peers.values() if p.stage != "done"]
        if self._ranging_open:
            pending.append(self.ranging_deadline)
        return min(pending, default=None)

    def _finish(self, peer, outcome, reason=None, d_tof=None, d_loc=None) -> SessionResult:
        result = SessionResult(outcome, reason, d_tof, d_loc, self.t1, peer.t2 if peer else None,
                               peer.peer_id.encode() if peer else None,
                               peer.transcript if peer else self._common)
        if peer:
            peer.stage = "done"
        self.results.append(result)
        return result

    def on_response(self, msg: BaseResponse, now: int, raw: bytes | None = None) -> None:
        if msg.dest_id != self.identity or not self._ranging_open or now > self.ranging_deadline:
            return
        if msg.sender_id in self.peers:
            return
        transcript = Transcript(self._common)
        transcript.record(now, "rx", "initiator", raw or msg.to_bytes())
        self.peers[msg.sender_id] = _BasePeer(msg.sender_id, now, msg.n2,
                                              now + self.config.followup_timeout, transcript)

    def on_auth(self, msg: BaseAuth, now: int, raw: bytes | None = None) -> SessionResult | None:
        peer = self.peers.get(msg.sender_id)
        if msg.dest_id != self.identity or peer is None or peer.stage != "await_auth":
            return None
        peer.transcript.record(now, "rx", "initiator", raw or msg.to_bytes())
        try:
            cert = Certificate.from_bytes(msg.certificate)
        except ValueError:
            return self._finish(peer, Outcome.ABORTED, AbortReason.MALFORMED)
        with self.meter.timed():
            ok = (cert.identity == msg.sender_id and verify_certificate(cert, self.anchor)
                  and verify(cert.public_key,
                             payload_base(msg.sender_id, self.identity, self.n1, peer.n2, msg.lat_units,
                                          msg.lng_units),
                             msg.auth_b, cert.scheme))
            if ok:
                d_loc = geo.euclid_distance_m(self.own.lat_units - msg.lat_units, self.own.lng_units - msg.lng_units,
                                              self.coord.lat, self.config.normalize_factor)
        if not ok:
            return self._finish(peer, Outcome.ABORTED, AbortReason.AUTH_FAIL)
        d_tof = geo.d_tof(self.t1, peer.t2, self.config.delta_proc)
        return self._finish(peer, decide(self.config, d_tof, d_loc), d_tof=d_tof, d_loc=d_loc)

    def on_timeout(self, now: int) -> list[SessionResult]:
        finished = []
        if self._ranging_open and now >= self.ranging_deadline:
            self._ranging_open = False
            if not self.peers:
                finished.append(self._finish(None, Outcome.ABORTED, AbortReason.TIMEOUT))
        for peer in self.peers.values():
            if peer.stage != "done" and now >= peer.deadline:
                finished.append(self._finish(peer, Outcome.ABORTED, AbortReason.TIMEOUT))
        return finished


class BaselineResponder:
    def __init__(self, config: SessionConfig, ltc: LongTermCredential, coord: GeoCoordinate, rng,
                 meter: CryptoMeter | None = None):
        self.config = config
        self.ltc = ltc
        self.coord = coord
        self.rng = rng
        self.meter = meter or _NULL_METER
        self.own = NormalizedCoordinate.from_geo(coord, config.normalize_factor)

    def on_challenge(self, msg: BaseChallenge, now: int) -> list[tuple[int, Message]]:
        if msg.sender_id == self.ltc.identity:
            return []
        n2 = self.rng.randbytes(16)
        reply_at = now + self.config.delta_proc
        me = self.ltc.identity
        with self.meter.timed():
            auth = sign(self.ltc.signing_key,
                        payload_base(me, msg.sender_id, msg.n1, n2, self.own.lat_units, self.own.lng_units))
        return [
            (reply_at, BaseResponse(me, msg.sender_id, reply_at, n2)),
            (reply_at, BaseAuth(me, msg.sender_id, reply_at, self.own.lat_units, self.own.lng_units,
                                self.ltc.to_bytes(), auth)),
        ]


def baseline_snd_run(config: SessionConfig, nodes, now: int = 0) -> SessionResult:
    """Run one baseline session between two simulator nodes ``(initiator, responder)``."""
    from .simnet import run_pair_session
    return run_pair_session(config, nodes, now, protocol="snd")
