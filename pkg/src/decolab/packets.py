"""Gaussian wave packets, two-branch superpositions, and coherence norms.

A packet is the minimum-uncertainty Gaussian

    phi(q) = (2 pi sigma)^(-1/4) exp(i p0 (q - q0) / hbar) exp(-(q - q0)^2 / 4 sigma)

with position variance ``sigma`` (rms width sqrt(sigma)) and momentum width
hbar / 2 sqrt(sigma).  Density-matrix blocks rho(q, q') = phi_i(q) phi_j(q')*
are sampled on uniform position grids and reduced with trapezoidal
quadrature, which is exponentially accurate for Gaussians that decay inside
the box.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, ResolutionError, ValidationError

# Grid sizing rule: the box has to cover the packet centers with this many
# rms widths of margin, and the spacing may not exceed sqrt(sigma)/4.
BOX_MARGIN_WIDTHS = 8.0
MAX_SPACING_WIDTHS = 0.25


@dataclass(frozen=True)
class GaussianPacket:
    """Minimum-uncertainty Gaussian at position q0, momentum p0."""

    q0: float
    p0: float
    sigma: float
    hbar: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not self.hbar > 0:
            raise ValidationError(f"hbar must be positive, got {self.hbar}")


@dataclass(frozen=True)
class Superposition:
    """Normalized two-branch superposition c1 |phi1> + c2 |phi2>."""

    packet1: GaussianPacket
    packet2: GaussianPacket
    c1: complex = 2.0 ** -0.5
    c2: complex = 2.0 ** -0.5

    def __post_init__(self):
        if self.packet1.sigma != self.packet2.sigma or self.packet1.hbar != self.packet2.hbar:
            raise ValidationError("superposed packets must share sigma and hbar")
        total = abs(self.c1) ** 2 + abs(self.c2) ** 2
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"|c1|^2 + |c2|^2 = {total}, expected 1")

    @property
    def dq(self):
        return self.packet1.q0 - self.packet2.q0

    @property
    def dp(self):
        return self.packet1.p0 - self.packet2.p0


@dataclass(frozen=True)
class PositionGrid:
    """Uniform grid of n_points positions spanning [q_min, q_max]."""

    q_min: float
    q_max: float
    n_points: int

    def __post_init__(self):
        if not self.q_max > self.q_min:
            raise ValidationError("q_max must exceed q_min")
        n = self.n_points
        if n < 16 or (n & (n - 1)) != 0:
            raise ValidationError(f"n_points must be a power of two >= 16, got {n}")

    @property
    def spacing(self):
        return (self.q_max - self.q_min) / self.n_points

    @property
    def points(self):
        # Endpoint-exclusive: the grid doubles as a periodic FFT box.
        return self.q_min + self.spacing * np.arange(self.n_points)

    @property
    def weights(self):
        """Trapezoidal quadrature weights over the sampled points."""
        w = np.full(self.n_points, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


@dataclass(frozen=True)
class DensityBlock:
    """One block rho^{ij}(q, q') of a density operator, sampled on grid x grid."""

    grid: PositionGrid
    values: np.ndarray

    def __post_init__(self):
        n = self.grid.n_points
        if self.values.shape != (n, n):
            raise ValidationError(
                f"values shape {self.values.shape} does not match grid ({n}, {n})"
            )

    def dagger(self):
        return DensityBlock(self.grid, self.values.conj().T)


def position_amplitude(packet, q):
    """Position-representation amplitude phi(q); broadcasts over q."""
    q = np.asarray(q, dtype=float)
    norm = (2.0 * np.pi * packet.sigma) ** -0.25
    phase = np.exp(1j * packet.p0 * (q - packet.q0) / packet.hbar)
    envelope = np.exp(-((q - packet.q0) ** 2) / (4.0 * packet.sigma))
    return norm * phase * envelope


def momentum_amplitude(packet, p):
    """Momentum-representation amplitude, the Fourier dual of position_amplitude.

    Convention: phi~(p) = (2 pi hbar)^(-1/2) * integral dq e^{-i p q / hbar} phi(q),
    which evaluates to
    (2 pi sigma)^(1/4) (pi hbar)^(-1/2) e^{-i p q0 / hbar} e^{-sigma (p - p0)^2 / hbar^2}.
    """
    p = np.asarray(p, dtype=float)
    norm = (2.0 * np.pi * packet.sigma) ** 0.25 / np.sqrt(np.pi * packet.hbar)
    phase = np.exp(-1j * p * packet.q0 / packet.hbar)
    envelope = np.exp(-packet.sigma * (p - packet.p0) ** 2 / packet.hbar ** 2)
    return norm * phase * envelope


def _check_grid_resolves(grid, packets):
    width = np.sqrt(packets[0].sigma)
    lo = min(p.q0 for p in packets) - BOX_MARGIN_WIDTHS * width
    hi = max(p.q0 for p in packets) + BOX_MARGIN_WIDTHS * width
    if grid.q_min > lo or grid.q_max < hi:
        raise ResolutionError(
            f"grid [{grid.q_min}, {grid.q_max}] does not cover the required box "
            f"[{lo:.6g}, {hi:.6g}]"
        )
    if grid.spacing > MAX_SPACING_WIDTHS * width:
        raise ResolutionError(
            f"grid spacing {grid.spacing:.6g} exceeds sqrt(sigma)/4 = "
            f"{MAX_SPACING_WIDTHS * width:.6g}"
        )


def density_block(packet_i, packet_j, grid):
    """Block rho^{ij}(q, q') = phi_i(q) phi_j(q')* on grid x grid."""
    if packet_i.sigma != packet_j.sigma or packet_i.hbar != packet_j.hbar:
        raise ValidationError("density_block requires packets sharing sigma and hbar")
    _check_grid_resolves(grid, (packet_i, packet_j))
    qs = grid.points
    phi_i = position_amplitude(packet_i, qs)
    phi_j = position_amplitude(packet_j, qs)
    return DensityBlock(grid, np.outer(phi_i, phi_j.conj()))


def superposition_blocks(sup, grid):
    """All four blocks rho^{ij} of a two-branch superposition, keyed (i, j)."""
    packets = {1: sup.packet1, 2: sup.packet2}
    return {
        (i, j): density_block(packets[i], packets[j], grid)
        for i in (1, 2)
        for j in (1, 2)
    }


def coherence_norm(block_a, block_b):
    """Tr(a . b^dagger) by two-dimensional trapezoidal quadrature.

    For b = a this is the coherence norm N = Tr(rho^{ij} rho^{ij dagger});
    it equals 1 at t = 0 for blocks built from normalized packets.
    """
    if block_a.grid != block_b.grid:
        raise GridMismatchError("coherence_norm requires blocks on the same grid")
    w = block_a.grid.weights
    # Tr(a b^dag) = sum_{q,q'} a(q,q') conj(b(q,q')) with quadrature weights.
    acc = np.einsum("i,ij,ij,j->", w, block_a.values, block_b.values.conj(), w)
    return float(acc.real)
