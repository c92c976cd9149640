"""Exact evolution of system x finite-bath pure states.

The oracle measures coherence norms directly from the full Hamiltonian
H = H_sys + H_res + Q (x) B (or Jx (x) B) on small composite Hilbert
spaces, with no short-time or Gaussian approximation, so every closed-form
law can be validated against it at desk scale.

The bath is a product of independent components (spin-halves coupled
through sigma_x, truncated oscillators through a + a^dagger), each
prepared in a pure state with vanishing coupling mean.  Norms are computed
by the pure-state sandwich: reshaping the two evolved joint states into
system x bath matrices A1, A2 gives rho^{12} = A1 A2^dagger after the bath
contraction, and N_12 = ||A1 A2^dagger||_F^2, so the full density matrix is
never stored.

Evolution strategies by model structure:

* static bath (all component frequencies zero): B is diagonalized once and
  the joint evolution factorizes over its eigenvalues, which is exact;
* spin system with a dynamic bath: sparse Krylov propagation
  (``expm_multiply``);
* grid particle: symmetric split-step Fourier, with the bath axis handled
  per grid point when the bath is dynamic;
* frozen particle (infinite mass): the position is a conserved pointer and
  each occupied grid point carries an independent bath evolution.
"""

import hashlib
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import (
    DimensionCapError,
    FitWindowError,
    StepSizeError,
    ValidationError,
)
from .laws import BathMoments, CorrelationFunction
from .packets import PositionGrid, position_amplitude
from .spin import spin_matrices

DEFAULT_DIMENSION_CAP = 4096
DENSE_BATH_LIMIT = 4096          # largest bath materialized as dense matrices
JOINT_DIMENSION_LIMIT = 1 << 21  # largest system x bath state vector
UNITARITY_DRIFT = 1e-8


@dataclass(frozen=True)
class BathComponent:
    """One bath degree of freedom: kind, coupling strength, local frequency."""

    kind: str
    g: float
    omega: float = 0.0
    levels: int = 2

    def __post_init__(self):
        if self.kind not in ("spin-half", "oscillator"):
            raise ValidationError(f"unknown bath component kind {self.kind!r}")
        if not math.isfinite(self.g):
            raise ValidationError("coupling g must be finite")
        if self.kind == "spin-half" and self.levels != 2:
            raise ValidationError("spin-half components have exactly 2 levels")
        if self.kind == "oscillator" and self.levels < 2:
            raise ValidationError("oscillator components need levels >= 2")

    def coupling_operator(self):
        """Local coupling operator including the strength g."""
        if self.kind == "spin-half":
            return self.g * np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        n = np.arange(self.levels - 1)
        a = np.zeros((self.levels, self.levels), dtype=complex)
        a[n, n + 1] = np.sqrt(n + 1.0)
        return self.g * (a + a.conj().T)

    def frequency_operator(self):
        """Local H / hbar (diagonal in the storage basis)."""
        if self.kind == "spin-half":
            return np.diag([0.5 * self.omega, -0.5 * self.omega]).astype(complex)
        return np.diag(self.omega * (np.arange(self.levels) + 0.5)).astype(complex)

    def initial_vector(self, label):
        if self.kind == "spin-half":
            if label == "up":
                return np.array([1.0, 0.0], dtype=complex)
            if label == "down":
                return np.array([0.0, 1.0], dtype=complex)
            raise ValidationError(f"spin-half initial state must be 'up'/'down', got {label!r}")
        n = int(label)
        # n <= levels - 2 keeps <B^2> and the correlation function free of
        # truncation artifacts (a^dagger must act within the kept space).
        if not 0 <= n <= self.levels - 2:
            raise ValidationError(
                f"oscillator initial Fock index must be in [0, levels-2], got {label!r}"
            )
        vec = np.zeros(self.levels, dtype=complex)
        vec[n] = 1.0
        return vec


@dataclass(frozen=True)
class BathModel:
    """Ordered bath components with a pure product initial state.

    Every component's initial state must have a vanishing coupling mean
    (checked numerically), and the total bath dimension must respect
    ``dimension_cap`` (default 4096; raise it deliberately for models that
    are only ever used through closed-form or factorized paths).
    """

    components: Tuple[BathComponent, ...]
    initial: Tuple[Union[str, int], ...]
    dimension_cap: int = DEFAULT_DIMENSION_CAP

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "initial", tuple(self.initial))
        if len(self.components) != len(self.initial):
            raise ValidationError("one initial-state label per component is required")
        if not self.components:
            raise ValidationError("bath needs at least one component")
        if self.dimension > self.dimension_cap:
            raise DimensionCapError(
                f"bath dimension {self.dimension} exceeds cap {self.dimension_cap}"
            )
        for comp, label in zip(self.components, self.initial):
            vec = comp.initial_vector(label)
            mean = vec.conj() @ comp.coupling_operator() @ vec
            if abs(mean) > 1e-12 * max(1.0, abs(comp.g)):
                raise ValidationError(
                    f"initial state {label!r} has nonzero coupling mean {mean:.3g}"
                )

    @property
    def dimension(self):
        d = 1
        for comp in self.components:
            d *= comp.levels
        return d

    def is_static(self):
        return all(comp.omega == 0.0 for comp in self.components)

    def initial_state(self):
        vecs = [c.initial_vector(l) for c, l in zip(self.components, self.initial)]
        return reduce(np.kron, vecs)


def spin_bath(m, var_total, omegas=0.0, dimension_cap=None):
    """Equal-coupling spin-half bath with <B^2> = var_total, all spins up.

    omegas may be a scalar (shared frequency) or a sequence of length m.
    """
    if m < 1:
        raise ValidationError("m must be >= 1")
    g = math.sqrt(var_total / m)
    if np.isscalar(omegas):
        omegas = [float(omegas)] * m
    if len(omegas) != m:
        raise ValidationError("omegas must be scalar or of length m")
    comps = tuple(BathComponent("spin-half", g, float(w)) for w in omegas)
    kwargs = {} if dimension_cap is None else {"dimension_cap": dimension_cap}
    return BathModel(comps, ("up",) * m, **kwargs)


# ---------------------------------------------------------------------------
# Bath operators, moments and correlation functions


@dataclass(frozen=True)
class OracleBathOperators:
    """Dense bath operators plus the derived moments and correlations."""

    B: np.ndarray
    Bdot: np.ndarray
    Bddot: np.ndarray
    H_res: np.ndarray
    moments: BathMoments
    corr: CorrelationFunction
    initial_state: np.ndarray = field(repr=False, default=None)


def _embed(matrices, index):
    """Kronecker embedding of matrices[index] among same-shaped identities."""
    factors = [
        m if k == index else np.eye(m.shape[0], dtype=complex)
        for k, m in enumerate(matrices)
    ]
    return reduce(np.kron, factors)


def _component_statistics(comp, label):
    """(variance factor c, response coefficient r, kappa contribution k1).

    sym_i(s) = 2 g^2 c cos(omega s); resp_i(s) = r sin(omega s) * (g^2/hbar);
    kappa_i = k1 * g^2 omega / hbar.
    """
    if comp.kind == "spin-half":
        z = 1.0 if label == "up" else -1.0
        return 1.0, -2.0 * z, -2.0 * z
    n = int(label)
    return 2.0 * n + 1.0, 2.0, 2.0


def bath_statistics(bath, hbar=1.0):
    """Exact (moments, corr) of the coupling agent, from component spectra.

    For spin-half components in sigma_z eigenstates the symmetric
    correlation is a sum of cosines, sym(s) = sum_i 2 g_i^2 cos(omega_i s);
    Fock-state oscillators contribute 2 g^2 (2n+1) cos(omega s).
    """
    terms = [
        (_component_statistics(c, l), c.g, c.omega)
        for c, l in zip(bath.components, bath.initial)
    ]
    var_b = sum(c * g * g for (c, _, _), g, _ in terms)
    var_bdot = sum(c * (g * w) ** 2 for (c, _, _), g, w in terms)
    kappa = sum(k1 * g * g * w for (_, _, k1), g, w in terms) / hbar

    def sym(s):
        return sum(2.0 * c * g * g * math.cos(w * s) for (c, _, _), g, w in terms)

    def resp(s):
        return sum(
            r * g * g * math.sin(w * s) / hbar for (_, r, _), g, w in terms
        )

    moments = BathMoments(var_b, var_bdot, kappa)
    corr = CorrelationFunction(sym=sym, resp=resp, moments=moments)
    return moments, corr


def build_bath_operators(bath, hbar=1.0):
    """Dense B, Bdot, Bddot, H_res plus exact moments and correlations.

    Bdot and Bddot are the nested commutators (i/hbar)[H_res, .] applied to
    B.  Dense assembly is refused above a bath dimension of 4096 even when
    the model's own cap was raised (the factorized evolution paths never
    need these matrices at such sizes).
    """
    dim = bath.dimension
    if dim > min(bath.dimension_cap, DENSE_BATH_LIMIT):
        raise DimensionCapError(
            f"dense bath operators refused at dimension {dim}"
        )
    coupling_ops = [c.coupling_operator() for c in bath.components]
    freq_ops = [c.frequency_operator() for c in bath.components]
    b_total = sum(_embed(coupling_ops, i) for i in range(len(coupling_ops)))
    h_res = hbar * sum(_embed(freq_ops, i) for i in range(len(freq_ops)))
    bdot = (1j / hbar) * (h_res @ b_total - b_total @ h_res)
    bddot = (1j / hbar) * (h_res @ bdot - bdot @ h_res)
    moments, corr = bath_statistics(bath, hbar)
    return OracleBathOperators(
        B=b_total, Bdot=bdot, Bddot=bddot, H_res=h_res,
        moments=moments, corr=corr, initial_state=bath.initial_state(),
    )


def bath_eigen_decomposition(bath, max_unique=1 << 16):
    """Eigenvalues of B and their weights in the initial product state.

    Returns (values, weights) with duplicates (up to 1e-12 relative)
    collapsed; for M equal couplings this is the binomial distribution on
    M + 1 points.  Exact because the initial state is a product and B is a
    sum of commuting local terms.
    """
    values = np.array([0.0])
    weights = np.array([1.0])
    for comp, label in zip(bath.components, bath.initial):
        w_loc, v_loc = np.linalg.eigh(comp.coupling_operator())
        init = comp.initial_vector(label)
        p_loc = np.abs(v_loc.conj().T @ init) ** 2
        values = (values[:, None] + w_loc[None, :]).ravel()
        weights = (weights[:, None] * p_loc[None, :]).ravel()
        scale = max(np.abs(values).max(), 1e-300)
        keys = np.round(values / scale, 12)
        uniq, inverse = np.unique(keys, return_inverse=True)
        collapsed = np.bincount(inverse, weights=weights)
        values = uniq * scale
        weights = collapsed
        if values.size > max_unique:
            raise DimensionCapError(
                f"bath spectrum exceeds {max_unique} distinct eigenvalues"
            )
    keep = weights > 1e-300
    return values[keep], weights[keep]


# ---------------------------------------------------------------------------
# System specifications and norm curves


@dataclass(frozen=True)
class GridParticle:
    """Particle on a periodic position grid; mass may be math.inf (frozen Q)."""

    grid: PositionGrid
    mass: float
    potential_omega: Optional[float] = None
    hbar: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ValidationError("mass must be positive (math.inf allowed)")
        if self.potential_omega is not None and math.isinf(self.mass):
            raise ValidationError("harmonic potential requires finite mass")
        if not self.hbar > 0:
            raise ValidationError("hbar must be positive")

    def potential(self):
        q = self.grid.points
        if self.potential_omega is None:
            return np.zeros_like(q)
        return 0.5 * self.mass * self.potential_omega ** 2 * q ** 2


@dataclass(frozen=True)
class SpinSystem:
    """Spin j precessing as H_sys = Omega Jz, coupled through Jx."""

    j: float
    omega: float
    hbar: float = 1.0

    def __post_init__(self):
        spin_matrices(self.j)  # validates j
        if not self.hbar > 0:
            raise ValidationError("hbar must be positive")


SystemSpec = Union[GridParticle, SpinSystem]


@dataclass(frozen=True)
class NormCurve:
    """Sampled coherence norm N_12(t) with a model fingerprint."""

    times: np.ndarray
    values: np.ndarray
    fingerprint: str

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValidationError("times and values must be matching 1-d arrays")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("times must be strictly ascending")
        if np.any(values < -1e-9) or np.any(values > 1.0 + 1e-9):
            raise ValidationError("norm values must lie in [0, 1] (within 1e-9)")


class FitResult(NamedTuple):
    exponent: float
    tau: float


def grid_packet_state(packet, grid):
    """l2-normalized grid samples of a Gaussian packet."""
    vec = position_amplitude(packet, grid.points).astype(complex)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ValidationError("packet has no support on the grid")
    return vec / norm


def position_eigenstate(grid, q):
    """Delta state at the grid point nearest q; returns (state, snapped q)."""
    idx = int(np.argmin(np.abs(grid.points - q)))
    vec = np.zeros(grid.n_points, dtype=complex)
    vec[idx] = 1.0
    return vec, float(grid.points[idx])


def _fingerprint(sys, bath, branch1, branch2, times, dt):
    payload = "|".join(
        [
            repr(sys),
            repr(bath),
            hashlib.sha256(np.ascontiguousarray(branch1).tobytes()).hexdigest(),
            hashlib.sha256(np.ascontiguousarray(branch2).tobytes()).hexdigest(),
            hashlib.sha256(np.asarray(times, dtype=float).tobytes()).hexdigest(),
            repr(dt),
        ]
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def _normalized_branch(vec, dim, name):
    v = np.asarray(vec, dtype=complex).ravel()
    if v.size != dim:
        raise ValidationError(f"{name} has length {v.size}, expected {dim}")
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValidationError(f"{name} is the zero vector")
    return v / norm


def _check_times(times):
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValidationError("times must be a non-empty 1-d sequence")
    if t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValidationError("times must be ascending and nonnegative")
    return t


def _sandwich_norm(a_mat, b_mat):
    """N = ||A B^dagger||_F^2 for system x bath matrices A, B."""
    rho = a_mat @ b_mat.conj().T
    return float(np.sum(np.abs(rho) ** 2))


# ---------------------------------------------------------------------------
# Evolution back ends


def _product_norms(weights, psi1, psi2):
    """Norm from the eigenvalue-factorized representation.

    psi_k has shape (n_unique, dim_sys); the reduced block is
    rho^{12} = sum_m W_m psi1_m psi2_m^dagger and its squared Frobenius
    norm is assembled from the two Gram matrices.
    """
    g1 = psi1.conj() @ psi1.T
    g2 = psi2.conj() @ psi2.T
    ww = np.outer(weights, weights)
    return float(np.real(np.sum(ww * g2 * g1.T)))


def _spin_static_curve(sys, bath, branch1, branch2, times):
    bvals, weights = bath_eigen_decomposition(bath)
    jx, _, jz = spin_matrices(sys.j, sys.hbar)
    h_stack = sys.omega * jz[None, :, :] + bvals[:, None, None] * jx[None, :, :]
    w, v = np.linalg.eigh(h_stack)
    v_dag = v.conj().transpose(0, 2, 1)
    c1 = v_dag @ branch1
    c2 = v_dag @ branch2
    norms = np.empty(times.size)
    for i, t in enumerate(times):
        phase = np.exp(-1j * w * t / sys.hbar)
        psi1 = np.einsum("mij,mj->mi", v, phase * c1)
        psi2 = np.einsum("mij,mj->mi", v, phase * c2)
        norms[i] = _product_norms(weights, psi1, psi2)
    return norms


def _sparse_embed(local_ops, index):
    mats = [
        scipy.sparse.csr_matrix(local_ops[k]) if k == index
        else scipy.sparse.identity(local_ops[k].shape[0], format="csr")
        for k in range(len(local_ops))
    ]
    return reduce(lambda a, b: scipy.sparse.kron(a, b, format="csr"), mats)


def _sparse_bath_ops(bath, hbar):
    """Sparse coupling agent B and the (diagonal) H_res of the bath."""
    coupling = [c.coupling_operator() for c in bath.components]
    b_sp = sum(_sparse_embed(coupling, i) for i in range(len(coupling)))
    # Local frequency operators are diagonal in the storage basis.
    diag = np.zeros(bath.dimension)
    for i, comp in enumerate(bath.components):
        pattern = [np.ones(c.levels) for c in bath.components]
        pattern[i] = np.real(np.diag(comp.frequency_operator()))
        diag += reduce(np.kron, pattern)
    return b_sp, hbar * diag


def _spin_sparse_curve(sys, bath, branch1, branch2, times):
    dim_s = branch1.size
    dim_b = bath.dimension
    if dim_s * dim_b > JOINT_DIMENSION_LIMIT:
        raise DimensionCapError(
            f"joint dimension {dim_s * dim_b} exceeds {JOINT_DIMENSION_LIMIT}"
        )
    jx, _, jz = spin_matrices(sys.j, sys.hbar)
    b_sp, hres_diag = _sparse_bath_ops(bath, sys.hbar)
    eye_b = scipy.sparse.identity(dim_b, format="csr")
    h = (
        sys.omega * scipy.sparse.kron(scipy.sparse.csr_matrix(jz), eye_b, format="csr")
        + scipy.sparse.kron(scipy.sparse.identity(dim_s, format="csr"),
                            scipy.sparse.diags(hres_diag), format="csr")
        + scipy.sparse.kron(scipy.sparse.csr_matrix(jx), b_sp, format="csr")
    )
    generator = (-1j / sys.hbar) * h.tocsc()
    chi0 = bath.initial_state()
    psi = np.stack([np.kron(branch1, chi0), np.kron(branch2, chi0)], axis=1)
    norms = np.empty(times.size)
    t_prev = 0.0
    for i, t in enumerate(times):
        dt = t - t_prev
        if dt > 0:
            psi = scipy.sparse.linalg.expm_multiply(generator * dt, psi)
        t_prev = t
        col_norms = np.linalg.norm(psi, axis=0)
        if np.any(np.abs(col_norms - 1.0) > UNITARITY_DRIFT):
            raise StepSizeError(f"unitarity drift {np.abs(col_norms - 1.0).max():.3g}")
        a1 = psi[:, 0].reshape(dim_s, dim_b)
        a2 = psi[:, 1].reshape(dim_s, dim_b)
        norms[i] = _sandwich_norm(a1, a2)
    return norms


def _grid_frozen_curve(sys, bath, branch1, branch2, times):
    qs = sys.grid.points
    occupied = np.flatnonzero((np.abs(branch1) > 1e-14) | (np.abs(branch2) > 1e-14))
    dim_b = bath.dimension
    chi0 = bath.initial_state()
    b_sp, hres_diag = _sparse_bath_ops(bath, sys.hbar)
    w1 = np.abs(branch1[occupied]) ** 2
    w2 = np.abs(branch2[occupied]) ** 2
    norms = np.empty(times.size)
    if dim_b <= 256 and occupied.size * dim_b ** 2 <= (1 << 24):
        b_dense = b_sp.toarray()
        h_stack = (
            qs[occupied][:, None, None] * b_dense[None, :, :]
            + np.diag(hres_diag)[None, :, :]
        )
        w, v = np.linalg.eigh(h_stack)
        coeffs = v.conj().transpose(0, 2, 1) @ chi0
        for i, t in enumerate(times):
            chi_t = np.einsum(
                "mij,mj->mi", v, np.exp(-1j * w * t / sys.hbar) * coeffs
            )
            overlaps = chi_t.conj() @ chi_t.T
            norms[i] = float(w2 @ (np.abs(overlaps) ** 2) @ w1)
        return norms
    # Larger baths: Krylov-propagate one bath state per occupied point.
    chis = np.stack([chi0.copy() for _ in occupied], axis=1)
    t_prev = 0.0
    hres = scipy.sparse.diags(hres_diag)
    generators = [
        ((-1j / sys.hbar) * (q * b_sp + hres)).tocsc() for q in qs[occupied]
    ]
    for i, t in enumerate(times):
        dt = t - t_prev
        if dt > 0:
            for k, gen in enumerate(generators):
                chis[:, k] = scipy.sparse.linalg.expm_multiply(gen * dt, chis[:, k])
        t_prev = t
        drift = np.abs(np.linalg.norm(chis, axis=0) - 1.0).max()
        if drift > UNITARITY_DRIFT:
            raise StepSizeError(f"unitarity drift {drift:.3g}")
        overlaps = chis.conj().T @ chis
        norms[i] = float(w2 @ (np.abs(overlaps) ** 2) @ w1)
    return norms


def _kinetic_phase(grid, mass, hbar, dt):
    k = 2.0 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.spacing)
    return np.exp(-1j * hbar * k ** 2 * dt / (2.0 * mass))


def _grid_static_curve(sys, bath, branch1, branch2, times, dt):
    bvals, weights = bath_eigen_decomposition(bath)
    qs = sys.grid.points
    v_pot = sys.potential()
    psi1 = np.tile(branch1, (bvals.size, 1))
    psi2 = np.tile(branch2, (bvals.size, 1))
    pot = v_pot[None, :] + bvals[:, None] * qs[None, :]
    norms = np.empty(times.size)
    t_prev = 0.0
    for i, t in enumerate(times):
        span = t - t_prev
        if span > 0:
            n_steps = max(1, int(math.ceil(span / dt)))
            delta = span / n_steps
            kin = _kinetic_phase(sys.grid, sys.mass, sys.hbar, delta)
            half_pot = np.exp(-0.5j * pot * delta / sys.hbar)
            for _ in range(n_steps):
                psi1 = half_pot * np.fft.ifft(kin * np.fft.fft(half_pot * psi1, axis=1), axis=1)
                psi2 = half_pot * np.fft.ifft(kin * np.fft.fft(half_pot * psi2, axis=1), axis=1)
        t_prev = t
        drift = max(
            np.abs(np.sqrt(weights @ np.sum(np.abs(psi1) ** 2, axis=1)) - 1.0),
            np.abs(np.sqrt(weights @ np.sum(np.abs(psi2) ** 2, axis=1)) - 1.0),
        )
        if drift > UNITARITY_DRIFT:
            raise StepSizeError(f"unitarity drift {drift:.3g}")
        norms[i] = _product_norms(weights, psi1, psi2)
    return norms


def _grid_dense_curve(sys, bath, branch1, branch2, times, dt):
    n = sys.grid.n_points
    dim_b = bath.dimension
    if n * dim_b ** 2 > (1 << 22):
        raise DimensionCapError(
            "per-point bath propagators would exceed the memory budget; "
            "use a static bath, a smaller grid, or an infinite-mass particle"
        )
    qs = sys.grid.points
    v_pot = sys.potential()
    b_sp, hres_diag = _sparse_bath_ops(bath, sys.hbar)
    b_dense = b_sp.toarray()
    h_stack = (
        qs[:, None, None] * b_dense[None, :, :]
        + np.diag(hres_diag)[None, :, :]
        + v_pot[:, None, None] * np.eye(dim_b)[None, :, :]
    )
    w, v = np.linalg.eigh(h_stack)
    v_dag = v.conj().transpose(0, 2, 1)
    chi0 = bath.initial_state()
    psi1 = np.outer(branch1, chi0)
    psi2 = np.outer(branch2, chi0)
    norms = np.empty(times.size)
    t_prev = 0.0
    for i, t in enumerate(times):
        span = t - t_prev
        if span > 0:
            n_steps = max(1, int(math.ceil(span / dt)))
            delta = span / n_steps
            kin = _kinetic_phase(sys.grid, sys.mass, sys.hbar, delta)[:, None]
            half_phase = np.exp(-0.5j * w * delta / sys.hbar)

            def half_pot(psi):
                coeff = np.einsum("kij,kj->ki", v_dag, psi)
                return np.einsum("kij,kj->ki", v, half_phase * coeff)

            for _ in range(n_steps):
                psi1 = half_pot(np.fft.ifft(kin * np.fft.fft(half_pot(psi1), axis=0), axis=0))
                psi2 = half_pot(np.fft.ifft(kin * np.fft.fft(half_pot(psi2), axis=0), axis=0))
        t_prev = t
        drift = max(
            abs(np.linalg.norm(psi1) - 1.0), abs(np.linalg.norm(psi2) - 1.0)
        )
        if drift > UNITARITY_DRIFT:
            raise StepSizeError(f"unitarity drift {drift:.3g}")
        norms[i] = _sandwich_norm(psi1, psi2)
    return norms


def evolve_norm(sys, bath, branch1, branch2, times, dt=None):
    """Exact coherence norm N_12(t) from the full composite evolution.

    Parameters
    ----------
    sys : GridParticle or SpinSystem
    bath : BathModel
    branch1, branch2 : array_like
        Initial system states (grid samples or spin components); they are
        normalized internally.
    times : array_like
        Ascending sample times starting at >= 0.
    dt : float, optional
        Split-step size for finite-mass grid particles (default: total
        span / 4096).  Ignored by the factorized and Krylov back ends,
        which are exact in the step size.
    """
    times = _check_times(times)
    if isinstance(sys, SpinSystem):
        dim_s = int(round(2 * sys.j)) + 1
        b1 = _normalized_branch(branch1, dim_s, "branch1")
        b2 = _normalized_branch(branch2, dim_s, "branch2")
        if bath.is_static():
            values = _spin_static_curve(sys, bath, b1, b2, times)
        else:
            values = _spin_sparse_curve(sys, bath, b1, b2, times)
    elif isinstance(sys, GridParticle):
        n = sys.grid.n_points
        b1 = _normalized_branch(branch1, n, "branch1")
        b2 = _normalized_branch(branch2, n, "branch2")
        if dt is None:
            dt = max(times[-1], 1e-30) / 4096.0
        if math.isinf(sys.mass):
            values = _grid_frozen_curve(sys, bath, b1, b2, times)
        elif bath.is_static():
            values = _grid_static_curve(sys, bath, b1, b2, times, dt)
        else:
            values = _grid_dense_curve(sys, bath, b1, b2, times, dt)
    else:
        raise ValidationError(f"unsupported system spec {type(sys).__name__}")
    values = np.clip(values, 0.0, None)
    return NormCurve(times, values, _fingerprint(sys, bath, branch1, branch2, times, dt))


# ---------------------------------------------------------------------------
# Closed-form oracle limits and fits


def static_bath_norm(d, bath, t, hbar=1.0):
    """Exact norm for frozen system and bath: N(t) = prod_i cos^2(d g_i t / hbar).

    Requires spin-half components in sigma_z eigenstates under sigma_x
    coupling; ``d`` is the effective separation in the coupling agent.
    """
    for comp in bath.components:
        if comp.kind != "spin-half":
            raise ValidationError("static_bath_norm requires spin-half components")
    t = np.asarray(t, dtype=float)
    gs = np.array([c.g for c in bath.components])
    result = np.prod(np.cos(np.multiply.outer(t, gs) * d / hbar) ** 2, axis=-1)
    return result if result.ndim else float(result)


def bath_characteristic(bath, lam):
    """Exact characteristic function <e^{i lam B}> of the initial state."""
    lam = np.asarray(lam, dtype=float)
    result = np.ones(lam.shape, dtype=complex)
    for comp, label in zip(bath.components, bath.initial):
        if comp.kind == "spin-half":
            result = result * np.cos(lam * comp.g)
        else:
            w_loc, v_loc = np.linalg.eigh(comp.coupling_operator())
            probs = np.abs(v_loc.conj().T @ comp.initial_vector(label)) ** 2
            result = result * (np.exp(1j * np.multiply.outer(lam, w_loc)) @ probs)
    return result if result.ndim else complex(result)


def fit_decay_exponent(curve, window=(0.05, 0.95)):
    """Least-squares fit of log(-log N) vs log t; returns (exponent n, scale tau).

    Only samples with window[0] < N < window[1] and t > 0 participate; the
    curve must be strictly decreasing there and provide at least 8 points.
    """
    lo, hi = window
    mask = (curve.values > lo) & (curve.values < hi) & (curve.times > 0)
    if np.count_nonzero(mask) < 8:
        raise FitWindowError(
            f"only {np.count_nonzero(mask)} points in the fit window (need >= 8)"
        )
    t = curve.times[mask]
    n_vals = curve.values[mask]
    if np.any(np.diff(n_vals) >= 0):
        raise FitWindowError("curve is not strictly decreasing over the fit window")
    x = np.log(t)
    y = np.log(-np.log(n_vals))
    slope, intercept = np.polyfit(x, y, 1)
    return FitResult(float(slope), float(math.exp(-intercept / slope)))
