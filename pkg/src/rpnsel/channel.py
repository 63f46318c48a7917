"""Geometric single-bounce channel model and channel-tensor utilities.

The generator drops transmit antennas, users and point scatterers uniformly
at random in a rectangular area, together with axis-aligned rectangular
obstacles. For subcarrier frequency ``f`` the coefficient between antenna
``t`` and user ``u`` is::

    h = s_tu * (los_tu * a(d_tu) * exp(-j 2 pi f d_tu / c)
                + sum_s g_s * a(d_ts + d_su) * exp(-j 2 pi f (d_ts + d_su) / c))

with amplitude pathloss ``a(d) = lambda / (4 pi) * max(d, 1)^(-eta / 2)``
(free space up to the 1 m reference distance), i.i.d. complex Gaussian
scatterer gains ``g_s``, a per-link log-normal shadowing factor ``s_tu`` and
``los_tu = 0`` when the direct segment crosses an obstacle.

File formats
------------
Both formats store the coefficients subcarrier-major: one record per
(subcarrier, tx antenna) pair, holding ``n_users`` complex values as
interleaved ``re, im`` pairs.

* CSV (``.csv``): two ``#`` comment lines, the second being
  ``# n_subcarriers=F n_tx=T n_users=U``, then ``F*T`` comma-separated rows.
* Binary (any other suffix): the 8-byte magic ``b"RPNCHAN1"``, three
  little-endian uint32 dimensions ``F, T, U``, then ``F*T*U*2`` little-endian
  float64 values.
"""

from __future__ import annotations

import dataclasses
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import ContractError, DomainError, check_channel, check_fraction

SPEED_OF_LIGHT = 299_792_458.0

_MAGIC = b"RPNCHAN1"


@dataclass(frozen=True)
class SceneConfig:
    """Scene layout and radio parameters for :func:`generate_channel`.

    ``tx_positions`` / ``user_positions`` override the random drop when
    given (shape ``(n, 2)``, metres).
    """

    area: tuple = (100.0, 100.0)
    n_tx: int = 64
    n_users: int = 16
    n_scatterers: int = 75
    n_obstacles: int = 1
    carrier_freq: float = 2.6e9
    bandwidth: float = 20e6
    n_subcarriers: int = 64
    shadow_sigma_db: float = 8.0
    pathloss_exponent: float = 3.5
    scatter_gain_db: float = -6.0
    obstacle_fraction: float = 0.25
    seed: int = 0
    tx_positions: tuple | None = None
    user_positions: tuple | None = None

    def __post_init__(self):
        problems = []
        if len(self.area) != 2 or min(self.area) <= 0:
            problems.append("area must be two positive lengths")
        for name in ("n_tx", "n_users", "n_subcarriers"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.n_scatterers < 0:
            problems.append("n_scatterers must be >= 0")
        if self.n_obstacles < 0:
            problems.append("n_obstacles must be >= 0")
        if self.carrier_freq <= 0 or self.bandwidth <= 0:
            problems.append("carrier_freq and bandwidth must be positive")
        if self.shadow_sigma_db < 0:
            problems.append("shadow_sigma_db must be >= 0")
        if not 0 < self.obstacle_fraction < 1:
            problems.append("obstacle_fraction must be in (0, 1)")
        if self.seed < 0:
            problems.append("seed must be non-negative")
        for name, n in (("tx_positions", self.n_tx), ("user_positions", self.n_users)):
            pos = getattr(self, name)
            if pos is not None and np.shape(pos) != (n, 2):
                problems.append(f"{name} must have shape ({n}, 2)")
        if problems:
            raise ContractError("invalid SceneConfig: " + "; ".join(problems))

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_freq

    def subcarrier_frequencies(self):
        k = np.arange(self.n_subcarriers) - (self.n_subcarriers - 1) / 2
        return self.carrier_freq + k * self.bandwidth / self.n_subcarriers


@dataclass(frozen=True, eq=False)
class ChannelTensor:
    """Complex coefficients indexed (subcarrier, tx antenna, user).

    ``subcarriers`` holds the indices of the retained subcarriers in the
    originating grid; positions are metadata and may be ``None`` for
    imported data.
    """

    coeffs: np.ndarray
    tx_positions: np.ndarray | None = None
    user_positions: np.ndarray | None = None
    subcarriers: tuple = field(default=())

    def __post_init__(self):
        coeffs = check_channel(self.coeffs, "coeffs").copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if not self.subcarriers:
            object.__setattr__(self, "subcarriers", tuple(range(coeffs.shape[0])))
        elif len(self.subcarriers) != coeffs.shape[0]:
            raise ContractError("subcarriers must list one index per subcarrier")

    @property
    def shape(self):
        return self.coeffs.shape

    @property
    def n_subcarriers(self):
        return self.coeffs.shape[0]

    @property
    def n_tx(self):
        return self.coeffs.shape[1]

    @property
    def n_users(self):
        return self.coeffs.shape[2]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def mean_energy(self):
        return float(np.mean(np.abs(self.coeffs) ** 2))


def _pathloss_amplitude(d, wavelength, exponent):
    return wavelength / (4 * np.pi) * np.maximum(d, 1.0) ** (-exponent / 2)


def _segments_hit_box(p0, p1, lo, hi):
    """Liang-Barsky test: does segment p0->p1 (arrays (..., 2)) meet the box?"""
    delta = p1 - p0
    t0 = np.zeros(delta.shape[:-1])
    t1 = np.ones(delta.shape[:-1])
    hit = np.ones(delta.shape[:-1], dtype=bool)
    for axis in range(2):
        d = delta[..., axis]
        a = p0[..., axis]
        for p, q in ((-d, a - lo[axis]), (d, hi[axis] - a)):
            parallel = p == 0
            hit &= ~(parallel & (q < 0))
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(parallel, 0.0, q / np.where(parallel, 1.0, p))
            t0 = np.where(~parallel & (p < 0), np.maximum(t0, r), t0)
            t1 = np.where(~parallel & (p > 0), np.minimum(t1, r), t1)
    return hit & (t0 <= t1)


def _inside_any(points, boxes):
    inside = np.zeros(len(points), dtype=bool)
    for lo, hi in boxes:
        inside |= np.all((points >= lo) & (points <= hi), axis=1)
    return inside


def _drop_points(rng, n, area, boxes, taken):
    """Uniform drop avoiding obstacles and points closer than 1 mm to others."""
    pts = rng.uniform((0.0, 0.0), area, size=(n, 2))
    for _ in range(1000):
        bad = _inside_any(pts, boxes)
        ref = np.vstack([taken, pts]) if len(taken) else pts
        diff = pts[:, None, :] - ref[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        offset = len(taken)
        dist[np.arange(n), offset + np.arange(n)] = np.inf
        bad |= np.any(dist < 1e-3, axis=1)
        if not bad.any():
            return pts
        pts[bad] = rng.uniform((0.0, 0.0), area, size=(int(bad.sum()), 2))
    raise DomainError("could not place points outside the obstacles")


def generate_channel(cfg):
    """Draw a scene from ``cfg`` and return its (unnormalised) channel tensor."""
    rng = np.random.default_rng(cfg.seed)
    area = np.asarray(cfg.area, dtype=float)

    boxes = []
    for _ in range(cfg.n_obstacles):
        size = cfg.obstacle_fraction * area
        lo = rng.uniform((0.0, 0.0), area - size)
        boxes.append((lo, lo + size))

    tx = _drop_points(rng, cfg.n_tx, area, boxes, np.empty((0, 2)))
    users = _drop_points(rng, cfg.n_users, area, boxes, tx)
    scat = _drop_points(rng, cfg.n_scatterers, area, boxes, np.vstack([tx, users]))
    if cfg.tx_positions is not None:
        tx = np.asarray(cfg.tx_positions, dtype=float)
    if cfg.user_positions is not None:
        users = np.asarray(cfg.user_positions, dtype=float)

    sigma_s = 10 ** (cfg.scatter_gain_db / 20)
    gains = sigma_s * (
        rng.standard_normal(cfg.n_scatterers) + 1j * rng.standard_normal(cfg.n_scatterers)
    ) / np.sqrt(2)
    shadow = 10 ** (cfg.shadow_sigma_db * rng.standard_normal((cfg.n_tx, cfg.n_users)) / 20)

    lam = cfg.wavelength
    eta = cfg.pathloss_exponent
    d_los = np.linalg.norm(tx[:, None, :] - users[None, :, :], axis=-1)
    visible = np.ones_like(d_los, dtype=bool)
    for lo, hi in boxes:
        p0 = np.broadcast_to(tx[:, None, :], d_los.shape + (2,))
        p1 = np.broadcast_to(users[None, :, :], d_los.shape + (2,))
        visible &= ~_segments_hit_box(p0, p1, lo, hi)
    a_los = np.where(visible, _pathloss_amplitude(d_los, lam, eta), 0.0)

    d_ts = np.linalg.norm(tx[:, None, :] - scat[None, :, :], axis=-1)
    d_su = np.linalg.norm(scat[:, None, :] - users[None, :, :], axis=-1)
    path = d_ts[:, :, None] + d_su[None, :, :]  # (tx, scatterer, user)
    a_path = _pathloss_amplitude(path, lam, eta) * gains[None, :, None]

    freqs = cfg.subcarrier_frequencies()
    coeffs = np.empty((cfg.n_subcarriers, cfg.n_tx, cfg.n_users), dtype=complex)
    for k, f in enumerate(freqs):
        w = -2j * np.pi * f / SPEED_OF_LIGHT
        h = a_los * np.exp(w * d_los)
        if cfg.n_scatterers:
            h = h + np.einsum("tsu,tsu->tu", a_path, np.exp(w * path))
        coeffs[k] = shadow * h
    return ChannelTensor(coeffs, tx_positions=tx, user_positions=users)


def normalize_channel(H):
    """Scale ``H`` by one real constant so its mean |h|^2 equals 1."""
    coeffs = check_channel(H)
    energy = float(np.mean(np.abs(coeffs) ** 2))
    if energy == 0.0:
        raise DomainError("cannot normalise an all-zero channel")
    scaled = coeffs / np.sqrt(energy)
    if isinstance(H, ChannelTensor):
        return H.replace(coeffs=scaled)
    return ChannelTensor(scaled)


def perturb_csi(H, error_fraction, seed=None):
    """Imperfect-CSI estimate ``sqrt(1 - e^2) H + e E``.

    ``E`` is circularly-symmetric complex Gaussian with the same mean
    per-entry energy as ``H``.
    """
    eps = check_fraction(error_fraction, "error_fraction")
    if not isinstance(H, ChannelTensor):
        H = ChannelTensor(check_channel(H))
    if eps == 0.0:
        return H
    rng = np.random.default_rng(seed)
    sigma = np.sqrt(H.mean_energy() / 2)
    E = sigma * (rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape))
    return H.replace(coeffs=np.sqrt(1 - eps**2) * H.coeffs + eps * E)


def subsample_subcarriers(H, fraction, seed=None):
    """Keep a uniformly random ``ceil(fraction * n_subcarriers)`` subcarrier subset.

    Retained subcarriers keep their original order; ``subcarriers`` on the
    result records which ones were kept.
    """
    fraction = check_fraction(fraction, "fraction", low_open=True)
    if not isinstance(H, ChannelTensor):
        H = ChannelTensor(check_channel(H))
    n = H.n_subcarriers
    size = max(1, math.ceil(fraction * n - 1e-9))
    if size >= n:
        return H
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(n, size=size, replace=False))
    return H.replace(
        coeffs=H.coeffs[keep],
        subcarriers=tuple(H.subcarriers[i] for i in keep),
    )


def save_channel(H, path):
    coeffs = check_channel(H)
    path = Path(path)
    n_sub, n_tx, n_users = coeffs.shape
    flat = np.empty((n_sub * n_tx, 2 * n_users))
    rows = coeffs.reshape(n_sub * n_tx, n_users)
    flat[:, 0::2] = rows.real
    flat[:, 1::2] = rows.imag
    if path.suffix.lower() == ".csv":
        header = f"rpnsel channel v1\nn_subcarriers={n_sub} n_tx={n_tx} n_users={n_users}"
        np.savetxt(path, flat, delimiter=",", fmt="%.17g", header=header)
    else:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<3I", n_sub, n_tx, n_users))
            fh.write(flat.astype("<f8").tobytes())


def load_channel(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"channel file not found: {path}")
    if path.suffix.lower() == ".csv":
        with open(path) as fh:
            fh.readline()
            dims = dict(tok.split("=") for tok in fh.readline().lstrip("# ").split())
        shape = tuple(int(dims[k]) for k in ("n_subcarriers", "n_tx", "n_users"))
        flat = np.loadtxt(path, delimiter=",", ndmin=2)
    else:
        with open(path, "rb") as fh:
            if fh.read(len(_MAGIC)) != _MAGIC:
                raise ContractError(f"{path} is not an rpnsel channel file")
            shape = struct.unpack("<3I", fh.read(12))
            flat = np.frombuffer(fh.read(), dtype="<f8")
        flat = flat.reshape(shape[0] * shape[1], 2 * shape[2])
    coeffs = (flat[:, 0::2] + 1j * flat[:, 1::2]).reshape(shape)
    return ChannelTensor(coeffs)
