"""Coordinate normalization, encrypted coordinate differences and the two
distance estimates compared by the neighbor decision: location distance and
time-of-flight distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import DomainError, KeyMismatchError, RangingError
from .phe import PaillierCiphertext, PaillierPublicKey, encrypt, he_sub

SPEED_OF_LIGHT = 3e8  # m/s
METERS_PER_DEGREE = 111_320.0
DEFAULT_NORMALIZE_FACTOR = 10**6
PS_PER_SECOND = 10**12


@dataclass(frozen=True)
class GeoCoordinate:
    lat: float
    lng: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise DomainError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lng <= 180.0:
            raise DomainError(f"longitude out of range: {self.lng}")


@dataclass(frozen=True)
class NormalizedCoordinate:
    lat_units: int
    lng_units: int
    factor: int

    @classmethod
    def from_geo(cls, coord: GeoCoordinate, factor: int = DEFAULT_NORMALIZE_FACTOR):
        return cls(
            normalize_deg(coord.lat, True, factor),
            normalize_deg(coord.lng, False, factor),
            factor,
        )


class EncryptedCoordinate(NamedTuple):
    X: PaillierCiphertext
    Y: PaillierCiphertext


def normalize_deg(deg: float, is_lat: bool, factor: int = DEFAULT_NORMALIZE_FACTOR) -> int:
    """Shift a latitude/longitude to be non-negative and scale it to integer units."""
    if factor <= 0:
        raise DomainError("normalize factor must be positive")
    if is_lat:
        if not -90.0 <= deg <= 90.0:
            raise DomainError(f"latitude out of range: {deg}")
        shifted = deg + 90
    else:
        if not -180.0 <= deg <= 180.0:
            raise DomainError(f"longitude out of range: {deg}")
        shifted = deg + 180
    return round(shifted * factor)


def denormalize_diff(units: int, factor: int = DEFAULT_NORMALIZE_FACTOR) -> float:
    return units / factor


def enc_coord(ppk: PaillierPublicKey, coord: GeoCoordinate, factor: int, rng) -> EncryptedCoordinate:
    lat_units = normalize_deg(coord.lat, True, factor)
    lng_units = normalize_deg(coord.lng, False, factor)
    return EncryptedCoordinate(encrypt(ppk, lat_units, rng), encrypt(ppk, lng_units, rng))


def hec_diff(a: EncryptedCoordinate, b: EncryptedCoordinate) -> tuple[PaillierCiphertext, PaillierCiphertext]:
    """Encrypted (a - b) per axis; ``a`` is the initiator's input, ``b`` the participant's own."""
    ppk = a.X.public_key
    if any(c.public_key.n != ppk.n for c in (a.Y, b.X, b.Y)):
        raise KeyMismatchError("coordinates encrypted under different keys")
    return he_sub(ppk, a.X, b.X), he_sub(ppk, a.Y, b.Y)


def euclid_distance_m(dlat_units: int, dlng_units: int, ref_lat: float,
                      factor: int = DEFAULT_NORMALIZE_FACTOR) -> float:
    """Equirectangular distance in meters for normalized-unit differences."""
    dy = denormalize_diff(dlat_units, factor) * METERS_PER_DEGREE
    dx = denormalize_diff(dlng_units, factor) * METERS_PER_DEGREE * math.cos(math.radians(ref_lat))
    return math.hypot(dx, dy)


def planar_distance_m(a: GeoCoordinate, b: GeoCoordinate) -> float:
    """Same projection as :func:`euclid_distance_m` on unquantized degrees, referenced at ``a``."""
    dy = (a.lat - b.lat) * METERS_PER_DEGREE
    dx = (a.lng - b.lng) * METERS_PER_DEGREE * math.cos(math.radians(a.lat))
    return math.hypot(dx, dy)


def d_tof(t1: int, t2: int, delta_proc: int) -> float:
    """Round-trip ranging distance in meters; times are integer picoseconds."""
    rtt = (t2 - t1) - delta_proc
    if rtt < 0 or delta_proc < 0:
        raise RangingError(f"non-physical round trip: t1={t1} t2={t2} delta={delta_proc}")
    return SPEED_OF_LIGHT * rtt / PS_PER_SECOND / 2


def propagation_ps(distance_m: float) -> int:
    """Integer one-way propagation delay, rounded to the nearest picosecond."""
    return round(distance_m * PS_PER_SECOND / SPEED_OF_LIGHT)


def quantization_bound_m(factor: int = DEFAULT_NORMALIZE_FACTOR) -> float:
    return math.sqrt(2) * METERS_PER_DEGREE / factor
