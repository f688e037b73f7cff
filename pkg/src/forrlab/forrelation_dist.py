"""The forrelation functional and its input distributions.

A length-2N vector z = (z1, z2) is scored by how correlated its second half
is with the Hadamard transform of its first half:

    forr(z) = < H z1 / sqrt(N) , z2 / sqrt(N) >,   H the normalized Hadamard.

Three distributions over inputs are provided, all parameterized by the
half-length N and the coupling strength eps = 1/(50 ln N):

* the coupled Gaussian: first half i.i.d. N(0, eps), second half its
  normalized Hadamard image, giving covariance eps [[I, H], [H, I]];
* the forrelation sign distribution: a Gaussian draw, truncated to [-1, 1]
  coordinatewise, then rounded to signs independently per coordinate with
  matching conditional means;
* the lifted input distribution: a forrelation draw z masked by a uniform
  x, handing one player x and the other y = x . z, so that x . y = z while
  each marginal is uniform.

Instance generators wrap these into labeled two-player inputs; labels are
always computed from the measured forrelation, never assumed from the
generation mode.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from ._bits import is_power_of_two
from ._rng import chunk_sizes, substream
from .boolean_fourier import SignVector, fwht
from .errors import SamplingFailureError

__all__ = [
    "ForrParams",
    "forr",
    "truncate",
    "standard_normal_rows",
    "gaussian_rows",
    "round_rows",
    "forrelation_rows",
    "uniform_sign_rows",
    "sample_gaussian",
    "sample_forrelation",
    "sample_lifted",
    "gaussian_moment",
    "MomentEstimate",
    "Label",
    "InstanceMode",
    "LiftedInstance",
    "classify",
    "generate_instance",
    "planted_instance",
]

MIN_MOMENT_SAMPLES = 10_000


@dataclass(frozen=True)
class ForrParams:
    """Problem size N (a power of two) and the derived coupling eps.

    eps is always 1/(50 ln N); pass ``eps_override`` only for exploratory
    runs in the amplified regime.
    """

    N: int
    eps_override: float | None = None

    def __post_init__(self):
        if self.N < 4 or not is_power_of_two(self.N):
            raise ValueError(f"N must be a power of two >= 4, got {self.N}")
        if self.eps_override is not None and not 0 < self.eps_override <= 1:
            raise ValueError(f"eps override must lie in (0, 1], got {self.eps_override}")

    @property
    def eps(self) -> float:
        if self.eps_override is not None:
            return self.eps_override
        return 1.0 / (50.0 * math.log(self.N))

    @property
    def n(self) -> int:
        """log2(N)."""
        return self.N.bit_length() - 1

    @property
    def input_length(self) -> int:
        """Length 2N of one player's input."""
        return 2 * self.N


def _check_pair_length(length: int) -> int:
    """Validate a 2N vector length and return N."""
    if length % 2 != 0 or not is_power_of_two(length // 2):
        raise ValueError(
            f"vector length must be 2 * (power of two), got {length}")
    return length // 2


def forr(z: np.ndarray) -> float | np.ndarray:
    """Forrelation of z = (z1, z2), batched over leading axes.

    Computed with one normalized Walsh-Hadamard transform in O(N log N):
    (1/(N sqrt(N))) sum_{i,j} (-1)^{<i,j>} z1(i) z2(j).  Sign inputs always
    land in [-1, 1] by Cauchy-Schwarz.
    """
    z = np.asarray(z, dtype=np.float64)
    N = _check_pair_length(z.shape[-1])
    w = fwht(z[..., :N])
    out = (w * z[..., N:]).sum(axis=-1) / (N * math.sqrt(N))
    return float(out) if out.ndim == 0 else out


def truncate(v: np.ndarray) -> np.ndarray:
    """Clamp every coordinate to [-1, 1]; idempotent."""
    return np.clip(np.asarray(v, dtype=np.float64), -1.0, 1.0)


def standard_normal_rows(gen: np.random.Generator, k: int, n: int) -> np.ndarray:
    """(k, n) standard normals by Box-Muller on counter-based uniforms
    (n must be even).

    Each row consumes its own n uniforms in order, so row contents do not
    depend on the batch size.  1 - u stays in (0, 1], keeping the log finite.
    """
    u = gen.uniform(size=(k, n))
    radius = np.sqrt(-2.0 * np.log1p(-u[:, : n // 2]))
    angle = 2.0 * np.pi * u[:, n // 2:]
    return np.concatenate([radius * np.cos(angle), radius * np.sin(angle)],
                          axis=1)


def gaussian_rows(gen: np.random.Generator, params: ForrParams, k: int) -> np.ndarray:
    """k coupled-Gaussian rows of length 2N, drawn from ``gen``.

    Generator-based primitive for custom Monte Carlo loops; the seeded
    samplers below wrap it with fixed chunking.
    """
    first = math.sqrt(params.eps) * standard_normal_rows(gen, k, params.N)
    second = fwht(first) / math.sqrt(params.N)
    return np.concatenate([first, second], axis=1)


def round_rows(gen: np.random.Generator, rows: np.ndarray) -> np.ndarray:
    """Round truncated rows to signs, independently per coordinate, with
    conditional mean equal to the truncated value."""
    probs = (1.0 + truncate(rows)) / 2.0
    u = gen.uniform(size=rows.shape)
    return np.where(u < probs, 1, -1).astype(np.int8)


def forrelation_rows(gen: np.random.Generator, params: ForrParams,
                     k: int) -> np.ndarray:
    """k forrelation-distributed sign rows of length 2N, drawn from ``gen``."""
    return round_rows(gen, gaussian_rows(gen, params, k))


def uniform_sign_rows(gen: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform +-1 entries of the given shape, drawn from ``gen``."""
    return (1 - 2 * gen.integers(0, 2, size=shape, dtype=np.int8)).astype(np.int8)


def _chunked(params: ForrParams, seed: int, samples: int | None, draw):
    """Run ``draw(gen, k)`` over fixed-size chunks with per-chunk substreams.

    Chunk i always uses substream(seed, i), so the result is a pure function
    of (params, seed, samples) no matter how chunks are scheduled.
    """
    if samples is None:
        return draw(substream(seed, 0), 1)[0]
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    parts = [draw(substream(seed, i), k)
             for i, k in enumerate(chunk_sizes(samples))]
    return np.concatenate(parts, axis=0)


def sample_gaussian(params: ForrParams, seed: int,
                    samples: int | None = None) -> np.ndarray:
    """Draw from the coupled Gaussian over 2N coordinates.

    Returns shape (2N,) when ``samples`` is None, else (samples, 2N).  The
    second half of every row is exactly the normalized Hadamard image of the
    first half.
    """
    return _chunked(params, seed, samples,
                    lambda gen, k: gaussian_rows(gen, params, k))


def sample_forrelation(params: ForrParams, seed: int,
                       samples: int | None = None) -> np.ndarray:
    """Draw sign vectors from the forrelation distribution.

    Each coordinate of a truncated Gaussian draw is rounded to +-1
    independently with conditional mean equal to the truncated value.
    """
    def draw(gen, k):
        return round_rows(gen, gaussian_rows(gen, params, k))
    return _chunked(params, seed, samples, draw)


def sample_lifted(params: ForrParams, seed: int,
                  samples: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Draw lifted input pairs (x, y) with x uniform and y = x . z for a
    forrelation-distributed z.  Marginally each of x, y is uniform, and
    x . y recovers z."""
    def draw(gen, k):
        z = round_rows(gen, gaussian_rows(gen, params, k))
        x = uniform_sign_rows(gen, z.shape)
        return np.stack([x, x * z], axis=1)
    out = _chunked(params, seed, samples, draw)
    if samples is None:
        return out[0], out[1]
    return out[:, 0, :], out[:, 1, :]


class MomentEstimate(NamedTuple):
    estimate: float
    standard_error: float


def gaussian_moment(params: ForrParams, s_set: Iterable[int], t_set: Iterable[int],
                    samples: int, seed: int) -> MomentEstimate:
    """Monte Carlo estimate of E[prod_{i in S} x_i prod_{j in T} y_j] under
    the coupled Gaussian, with a normal-approximation standard error.

    S indexes the first half, T the second half, both 0-based in [0, N).
    """
    s_idx = np.fromiter(s_set, dtype=np.int64)
    t_idx = np.fromiter(t_set, dtype=np.int64) + params.N
    for name, idx, hi in (("S", s_idx, params.N), ("T", t_idx - params.N, params.N)):
        if idx.size and (idx.min() < 0 or idx.max() >= hi):
            raise ValueError(f"{name} indices must lie in [0, {hi})")
    if samples < MIN_MOMENT_SAMPLES:
        raise ValueError(
            f"moment estimation needs at least {MIN_MOMENT_SAMPLES} samples, "
            f"got {samples}")
    cols = np.concatenate([s_idx, t_idx])
    total = 0.0
    total_sq = 0.0
    for i, k in enumerate(chunk_sizes(samples)):
        rows = gaussian_rows(substream(seed, i), params, k)
        vals = rows[:, cols].prod(axis=1) if cols.size else np.ones(k)
        total += float(vals.sum())
        total_sq += float(np.square(vals).sum())
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return MomentEstimate(mean, math.sqrt(var / samples))


class Label(str, enum.Enum):
    YES = "YES"
    NO = "NO"
    OUTSIDE_PROMISE = "OUTSIDE_PROMISE"


class InstanceMode(str, enum.Enum):
    PROMISE_YES = "promise_yes"
    PROMISE_NO = "promise_no"
    PLANTED_YES = "planted_yes"
    UNIFORM_NO = "uniform_no"


def classify(params: ForrParams, value: float) -> Label:
    """Promise label from a forrelation value: YES above eps/4, NO below
    eps/8, OUTSIDE_PROMISE in the gap."""
    if value >= params.eps / 4:
        return Label.YES
    if value <= params.eps / 8:
        return Label.NO
    return Label.OUTSIDE_PROMISE


@dataclass(frozen=True)
class LiftedInstance:
    """A labeled two-player input pair."""

    N: int
    eps: float
    x: SignVector
    y: SignVector
    forr_value: float
    label: Label

    def to_json(self) -> str:
        return json.dumps({
            "N": self.N,
            "eps": self.eps,
            "x": self.x.to_base64(),
            "y": self.y.to_base64(),
            "forr": self.forr_value,
            "label": self.label.value,
        })

    @classmethod
    def from_json(cls, text: str) -> "LiftedInstance":
        obj = json.loads(text)
        n = 2 * obj["N"]
        return cls(
            N=obj["N"],
            eps=obj["eps"],
            x=SignVector.from_base64(obj["x"], n),
            y=SignVector.from_base64(obj["y"], n),
            forr_value=obj["forr"],
            label=Label(obj["label"]),
        )


def _instance_from_pair(params: ForrParams, x: np.ndarray,
                        y: np.ndarray) -> LiftedInstance:
    value = float(forr((x * y).astype(np.float64)))
    return LiftedInstance(params.N, params.eps, SignVector(x), SignVector(y),
                          value, classify(params, value))


def _planted_pair(gen: np.random.Generator, params: ForrParams,
                  strength: float) -> tuple[np.ndarray, np.ndarray]:
    """Mask-lifted pair whose product z has z2 aligned with sign(H z1) on a
    (1+strength)/2 fraction of coordinates; measured forrelation
    concentrates near 0.8 * strength."""
    z1 = uniform_sign_rows(gen, (params.N,))
    aligned = np.where(fwht(z1.astype(np.float64)) >= 0, 1, -1).astype(np.int8)
    flips = round_rows(gen, np.full((1, params.N), float(strength)))[0]
    z = np.concatenate([z1, aligned * flips])
    x = uniform_sign_rows(gen, (2 * params.N,))
    return x, x * z


def planted_instance(params: ForrParams, strength: float,
                     seed: int) -> LiftedInstance:
    """Instance with tunable forrelation, roughly 0.8 * strength for
    strength in [-1, 1].  strength = 1 is the planted-yes generator."""
    if not -1.0 <= strength <= 1.0:
        raise ValueError(f"strength must lie in [-1, 1], got {strength}")
    x, y = _planted_pair(substream(seed, 0), params, strength)
    return _instance_from_pair(params, x, y)


def generate_instance(params: ForrParams, mode: InstanceMode, seed: int,
                      max_attempts: int = 10 ** 6) -> LiftedInstance:
    """Draw a labeled instance by mode.

    promise_yes rejection-samples lifted pairs until forr >= eps/4; promise_no
    rejection-samples uniform pairs until forr <= eps/8; planted_yes plants
    an aligned second half (ties resolved to +1) for forrelation near 0.8;
    uniform_no returns one uniform pair.  The label in the result is always
    recomputed from the pair.
    """
    mode = InstanceMode(mode)
    gen = substream(seed, 0)
    if mode is InstanceMode.PLANTED_YES:
        return _instance_from_pair(params, *_planted_pair(gen, params, 1.0))
    if mode is InstanceMode.UNIFORM_NO:
        x = uniform_sign_rows(gen, (2 * params.N,))
        y = uniform_sign_rows(gen, (2 * params.N,))
        return _instance_from_pair(params, x, y)

    for _ in range(max_attempts):
        if mode is InstanceMode.PROMISE_YES:
            z = round_rows(gen, gaussian_rows(gen, params, 1))[0]
            x = uniform_sign_rows(gen, (2 * params.N,))
            y = x * z
        else:  # PROMISE_NO
            x = uniform_sign_rows(gen, (2 * params.N,))
            y = uniform_sign_rows(gen, (2 * params.N,))
        inst = _instance_from_pair(params, x, y)
        if mode is InstanceMode.PROMISE_YES and inst.label is Label.YES:
            return inst
        if mode is InstanceMode.PROMISE_NO and inst.label is Label.NO:
            return inst
    raise SamplingFailureError(
        f"rejection sampling for mode {mode.value} did not accept", max_attempts)
