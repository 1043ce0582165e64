"""
Seeded random directions for the gradient surrogates.

Every sampler draws from an RngStream: a Philox counter-based generator keyed
by (seed, stream id), so streams are reproducible bit-for-bit and independent
of each other without shared state.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from .errors import InvalidDimensionError, ZomdError

# 53-bit grid used for uniforms that must avoid both endpoints
_OPEN_GRID = 2 ** 53


class DirectionScheme(str, Enum):
    L1_SPHERE = "l1-sphere"
    L2_SPHERE = "l2-sphere"
    LINF_SPHERE = "linf-sphere"
    LINF_BALL = "linf-ball"
    RADEMACHER = "rademacher"
    COORDINATE = "coordinate"
    L1_BALL = "l1-ball"
    L2_BALL = "l2-ball"


class ZKind(str, Enum):
    """Random vectors Z with E[ZZ^T] = I_n."""
    RADEMACHER = "rademacher"
    SCALED_GAUSSIAN = "gaussian"
    COORDINATE = "coordinate"


SPHERE_SCHEMES = (
    DirectionScheme.L1_SPHERE,
    DirectionScheme.L2_SPHERE,
    DirectionScheme.LINF_SPHERE,
)


class RngStream:
    """
    Reproducible random stream identified by (seed, stream_id).

    A stream must be consumed sequentially. Use substream() to obtain
    non-overlapping child streams that share the key.
    """

    def __init__(self, seed: int, stream_id: int = 0, jumps: int = 0):
        if not 0 <= seed < 2 ** 64 or not 0 <= stream_id < 2 ** 64:
            raise ValueError(f"seed and stream id must be 64-bit unsigned, got ({seed}, {stream_id})")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.jumps = int(jumps)
        bit_generator = np.random.Philox(key=np.array([self.seed, self.stream_id], dtype=np.uint64))
        if self.jumps:
            bit_generator = bit_generator.jumped(self.jumps)
        self.generator = np.random.Generator(bit_generator)

    @property
    def key(self) -> Tuple[int, int, int]:
        return (self.seed, self.stream_id, self.jumps)

    def substream(self, index: int) -> "RngStream":
        """Child stream `index`; children of one stream never overlap each other."""
        return RngStream(self.seed, self.stream_id, jumps=index + 1)

    def open_uniform(self, size) -> np.ndarray:
        """Uniform draws on the open interval (0, 1)."""
        k = self.generator.integers(0, _OPEN_GRID, size=size)
        return (k + 0.5) / _OPEN_GRID

    def laplace(self, size) -> np.ndarray:
        """Standard Laplace draws by inverse CDF from a single uniform each."""
        u = self.open_uniform(size) - 0.5
        return -np.sign(u) * np.log1p(-2.0 * np.abs(u))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, jumps={self.jumps})"


@dataclass(frozen=True)
class Direction:
    coords: np.ndarray
    scheme: DirectionScheme

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))
        object.__setattr__(self, "scheme", DirectionScheme(self.scheme))

    @property
    def n(self) -> int:
        return self.coords.shape[-1]


def _check_dimension(n: int) -> None:
    if n < 2:
        raise InvalidDimensionError(f"dimension must be at least 2, got {n}")


def sign_plus(values: np.ndarray) -> np.ndarray:
    """Componentwise sign with sign(0) = +1."""
    return np.where(values >= 0, 1.0, -1.0)


def _on_sphere(base: np.ndarray, ord) -> np.ndarray:
    return base / np.linalg.norm(base, ord=ord, axis=-1, keepdims=True)


def _radial(size: int, n: int, rng: RngStream) -> np.ndarray:
    # U^(1/n) turns a uniform sphere draw into a uniform ball draw
    return rng.open_uniform((size, 1)) ** (1.0 / n)


def sample_directions(scheme: DirectionScheme, n: int, size: int, rng: RngStream) -> np.ndarray:
    """
    Draw `size` directions of dimension n as a (size, n) array.

    Args:
        scheme: sphere, ball or discrete scheme
        n: dimension, at least 2
        size: number of draws
        rng: stream to consume

    Returns:
        Array whose rows satisfy the scheme's norm invariant
    """
    _check_dimension(n)
    scheme = DirectionScheme(scheme)
    gen = rng.generator
    rows = np.arange(size)

    if scheme is DirectionScheme.L1_SPHERE:
        return _on_sphere(rng.laplace((size, n)), 1)
    if scheme is DirectionScheme.L2_SPHERE:
        return _on_sphere(gen.standard_normal((size, n)), 2)
    if scheme is DirectionScheme.LINF_SPHERE:
        coords = gen.uniform(-1.0, 1.0, (size, n))
        axis = gen.integers(0, n, size=size)
        side = 2.0 * gen.integers(0, 2, size=size) - 1.0
        coords[rows, axis] = side
        return coords
    if scheme is DirectionScheme.LINF_BALL:
        return gen.uniform(-1.0, 1.0, (size, n))
    if scheme is DirectionScheme.RADEMACHER:
        return 2.0 * gen.integers(0, 2, size=(size, n)) - 1.0
    if scheme is DirectionScheme.COORDINATE:
        coords = np.zeros((size, n))
        coords[rows, gen.integers(0, n, size=size)] = np.sqrt(n)
        return coords
    if scheme is DirectionScheme.L1_BALL:
        return _on_sphere(rng.laplace((size, n)), 1) * _radial(size, n, rng)
    if scheme is DirectionScheme.L2_BALL:
        return _on_sphere(gen.standard_normal((size, n)), 2) * _radial(size, n, rng)
    raise ZomdError(f"unknown direction scheme {scheme!r}")


def sample_direction(scheme: DirectionScheme, n: int, rng: RngStream) -> Direction:
    """Draw one direction."""
    scheme = DirectionScheme(scheme)
    return Direction(coords=sample_directions(scheme, n, 1, rng)[0], scheme=scheme)


def l1_extent(kind, n: int) -> float:
    """
    Largest l1 norm a draw of `kind` (a DirectionScheme or ZKind) can have in dimension n.

    Gaussian Z is unbounded; its extent is the mean of ||Z||_1 plus ten
    standard deviations.
    """
    _check_dimension(n)
    value = getattr(kind, "value", kind)
    if value == ZKind.SCALED_GAUSSIAN.value:
        return float(n + 6.0 * np.sqrt(n))
    # Rademacher and coordinate Z share their direction scheme's values
    scheme = DirectionScheme(value)
    if scheme in (DirectionScheme.L1_SPHERE, DirectionScheme.L1_BALL):
        return 1.0
    if scheme in (DirectionScheme.L2_SPHERE, DirectionScheme.L2_BALL, DirectionScheme.COORDINATE):
        return float(np.sqrt(n))
    return float(n)


def sample_z(kind: ZKind, n: int, size: int, rng: RngStream) -> np.ndarray:
    """Draw `size` vectors Z with E[ZZ^T] = I_n."""
    kind = ZKind(kind)
    if kind is ZKind.RADEMACHER:
        return sample_directions(DirectionScheme.RADEMACHER, n, size, rng)
    if kind is ZKind.COORDINATE:
        return sample_directions(DirectionScheme.COORDINATE, n, size, rng)
    _check_dimension(n)
    # sqrt(n) times a Gaussian of covariance I_n / n, which is N(0, I_n)
    return rng.generator.standard_normal((size, n))


def face_index(coords: np.ndarray) -> np.ndarray:
    """i(e) = argmax_i |e_i|; ties go to the smallest index."""
    return np.argmax(np.abs(coords), axis=-1)


def surface_normal(e: Direction, oriented: bool = False) -> np.ndarray:
    """
    Unit normal of the unit sphere at e, following the direction table.

    Args:
        e: direction drawn on the l1, l2 or l-infinity sphere
        oriented: for the l-infinity sphere, multiply the face basis vector by
            sign(e_i(e)) so that it points outward

    Returns:
        Vector of l2 norm 1
    """
    n = e.n
    if e.scheme is DirectionScheme.L1_SPHERE:
        return sign_plus(e.coords) / np.sqrt(n)
    if e.scheme is DirectionScheme.L2_SPHERE:
        return np.array(e.coords, dtype=float)
    if e.scheme in (DirectionScheme.LINF_SPHERE, DirectionScheme.LINF_BALL):
        i = int(face_index(e.coords))
        normal = np.zeros(n)
        normal[i] = sign_plus(e.coords[i]) if oriented else 1.0
        return normal
    raise ZomdError(f"no surface normal for scheme {e.scheme.value}")


def simplex_l1_distance(x: np.ndarray) -> np.ndarray:
    """l1 distance from x (or each row of x) to the unit simplex, in closed form."""
    x = np.asarray(x, dtype=float)
    negative = np.clip(-x, 0.0, None).sum(axis=-1)
    positive = np.clip(x, 0.0, None).sum(axis=-1)
    return negative + np.abs(positive - 1.0)


def simplex_center(n: int) -> np.ndarray:
    _check_dimension(n)
    return np.full(n, 1.0 / n)


def random_simplex_point(n: int, rng: RngStream, concentration: float = 1.0) -> np.ndarray:
    """Dirichlet(concentration) point of the simplex; 1.0 is uniform on the simplex."""
    _check_dimension(n)
    return rng.generator.dirichlet(np.full(n, concentration))
