"""Truncated Fock-space states and the linear-optics toolbox used by the oracle.

Multimode states are stored densely as tensors with one axis per mode, each
axis running over photon numbers ``0..n_max``.  Beamsplitters use the real
orthogonal convention

    b_i = sqrt(1 - t) a_i + sqrt(t) a_j
    b_j = sqrt(t) a_i - sqrt(1 - t) a_j

for transmissivity ``t`` (Heisenberg picture, output in terms of input).  With
``t = 1/2`` mode ``i`` becomes ``(a_i + a_j)/sqrt(2)`` and mode ``j`` becomes
``(a_i - a_j)/sqrt(2)``.  The matrix is symmetric and orthogonal, so every
beamsplitter is its own inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln
from scipy.stats import binom, poisson

TAIL_TOLERANCE = 1e-12
MIN_N_MAX = 12
ADEQUACY_TOLERANCE = 1e-10


class TruncationError(ValueError):
    """Raised when the photon-number cutoff cannot represent a state."""


def truncation_for(alpha: complex | float, tail: float = TAIL_TOLERANCE, floor: int = MIN_N_MAX) -> int:
    """Smallest ``n_max`` whose coherent-state tail beyond it is below ``tail``."""
    mean = abs(alpha) ** 2
    n = floor
    while poisson.sf(n, mean) >= tail:
        n += 1
    return n


# ---------------------------------------------------------------------------
# state containers


@dataclass(frozen=True)
class FockVector:
    """Pure state of ``n_modes`` bosonic modes, amplitudes shaped ``(dim,) * n_modes``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim == 0 or len(set(amps.shape)) != 1:
            raise ValueError(f"amplitude tensor must be a hypercube, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_modes(self) -> int:
        return self.amplitudes.ndim

    @property
    def dim_per_mode(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def n_max(self) -> int:
        return self.dim_per_mode - 1

    @property
    def flat(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat))

    def normalized(self) -> "FockVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return FockVector(self.amplitudes / nrm)

    def inner(self, other: "FockVector") -> complex:
        """``<self|other>``."""
        _check_compatible(self, other)
        return complex(np.vdot(self.flat, other.flat))

    def populations(self, mode: int) -> np.ndarray:
        """Photon-number distribution of one mode."""
        probs = np.abs(np.moveaxis(self.amplitudes, mode, 0)) ** 2
        return probs.reshape(self.dim_per_mode, -1).sum(axis=1)

    def mean_photon_number(self, mode: int = 0) -> float:
        pops = self.populations(mode)
        return float(np.arange(self.dim_per_mode) @ pops / pops.sum())

    def top_level_population(self) -> float:
        """Largest population found on the highest retained level of any mode."""
        return max(float(self.populations(m)[-1]) for m in range(self.n_modes))

    def density(self) -> "DensityOperator":
        v = self.flat
        return DensityOperator(np.outer(v, v.conj()), self.n_modes, self.dim_per_mode)


@dataclass(frozen=True)
class DensityOperator:
    """Mixed state on ``n_modes`` modes with a dense ``dim**n x dim**n`` matrix."""

    matrix: np.ndarray
    n_modes: int
    dim_per_mode: int

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        size = self.dim_per_mode**self.n_modes
        if mat.shape != (size, size):
            raise ValueError(f"matrix shape {mat.shape} does not match {self.n_modes} modes of dim {self.dim_per_mode}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_tensor(cls, tensor: np.ndarray) -> "DensityOperator":
        n = tensor.ndim // 2
        dim = tensor.shape[0]
        size = dim**n
        return cls(tensor.reshape(size, size), n, dim)

    @property
    def tensor(self) -> np.ndarray:
        return self.matrix.reshape((self.dim_per_mode,) * (2 * self.n_modes))

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "DensityOperator":
        tr = self.trace()
        if tr <= 0.0:
            raise ValueError("cannot normalize an operator with non-positive trace")
        return DensityOperator(self.matrix / tr, self.n_modes, self.dim_per_mode)

    def expectation(self, state: FockVector) -> float:
        """``<psi|rho|psi>`` for a pure state on the same modes."""
        if state.n_modes != self.n_modes or state.dim_per_mode != self.dim_per_mode:
            raise ValueError("state and operator live on different spaces")
        v = state.flat
        return float(np.vdot(v, self.matrix @ v).real)

    def populations(self, mode: int) -> np.ndarray:
        return np.real(np.diagonal(self.partial_trace([mode]).matrix)).copy()

    def partial_trace(self, keep: Sequence[int]) -> "DensityOperator":
        keep = list(keep)
        n = self.n_modes
        drop = [m for m in range(n) if m not in keep]
        t = self.tensor
        # bring kept kets, kept bras, then traced pairs into order
        order = keep + [k + n for k in keep] + drop + [d + n for d in drop]
        t = np.transpose(t, order)
        dk = self.dim_per_mode ** len(keep)
        dd = self.dim_per_mode ** len(drop)
        t = t.reshape(dk, dk, dd, dd)
        return DensityOperator(np.einsum("abcc->ab", t), len(keep), self.dim_per_mode)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def validate(self, atol: float = 1e-10, psd_floor: float = -1e-9) -> None:
        """Raise ``ValueError`` unless the operator is a physical density matrix."""
        if not np.allclose(self.matrix, self.matrix.conj().T, atol=atol):
            raise ValueError("density operator is not Hermitian")
        if abs(self.trace() - 1.0) > atol:
            raise ValueError(f"density operator trace {self.trace()!r} differs from 1")
        low = self.eigenvalues().min()
        if low < psd_floor:
            raise ValueError(f"density operator has negative eigenvalue {low!r}")


@dataclass(frozen=True)
class DetectionModel:
    """Number-resolving detector with efficiency ``efficiency``.

    Modelled as a loss channel followed by an ideal projective count, so the
    POVM element for ``n`` clicks is ``sum_m Binom(n; m, efficiency) |m><m|``.
    """

    efficiency: float
    resolves_number: bool = True

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if not self.resolves_number:
            raise ValueError("only number-resolving detectors are supported")

    def response(self, dim: int) -> np.ndarray:
        """Matrix ``R[n, m]`` = probability of ``n`` clicks given ``m`` photons."""
        return thinning_matrix(dim, self.efficiency)

    def povm(self, dim: int) -> list[np.ndarray]:
        """Diagonal POVM elements, one per click count."""
        resp = self.response(dim)
        return [np.diag(resp[n]) for n in range(dim)]


def _check_compatible(a: FockVector, b: FockVector) -> None:
    if a.amplitudes.shape != b.amplitudes.shape:
        raise ValueError(f"incompatible states: {a.amplitudes.shape} vs {b.amplitudes.shape}")


@lru_cache(maxsize=256)
def _thinning_matrix(dim: int, efficiency: float) -> np.ndarray:
    m = np.arange(dim)
    mat = binom.pmf(m[:, None], m[None, :], efficiency)
    mat[np.isnan(mat)] = 0.0
    mat.setflags(write=False)
    return mat


def thinning_matrix(dim: int, efficiency: float) -> np.ndarray:
    """Binomial thinning ``T[n, m] = C(m, n) eta^n (1 - eta)^(m - n)``."""
    return _thinning_matrix(int(dim), float(efficiency))


# ---------------------------------------------------------------------------
# state preparation


def vacuum(n_modes: int, n_max: int) -> FockVector:
    amps = np.zeros((n_max + 1,) * n_modes, dtype=complex)
    amps[(0,) * n_modes] = 1.0
    return FockVector(amps)


def fock_state(occupations: Sequence[int], n_max: int) -> FockVector:
    occupations = tuple(int(n) for n in occupations)
    if any(n < 0 or n > n_max for n in occupations):
        raise TruncationError(f"occupations {occupations} exceed n_max={n_max}")
    amps = np.zeros((n_max + 1,) * len(occupations), dtype=complex)
    amps[occupations] = 1.0
    return FockVector(amps)


def _coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if alpha == 0:
        amps = np.zeros(n_max + 1, dtype=complex)
        amps[0] = 1.0
        return amps
    log_mod = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mod) * np.exp(1j * np.angle(alpha) * n)


def coherent_state(alpha: complex, n_max: int) -> FockVector:
    """Single-mode coherent state ``|alpha>``, renormalized after truncation."""
    alpha = complex(alpha)
    tail = poisson.sf(n_max, abs(alpha) ** 2)
    if tail >= TAIL_TOLERANCE:
        raise TruncationError(
            f"n_max={n_max} leaves Poisson tail {tail:.2e} for |alpha|^2={abs(alpha) ** 2:g}; "
            f"need n_max >= {truncation_for(alpha)}"
        )
    return FockVector(_coherent_amplitudes(alpha, n_max)).normalized()


def cat_state(alpha: complex, parity: str, n_max: int) -> FockVector:
    """Even (``|alpha> + |-alpha>``) or odd (``|alpha> - |-alpha>``) cat state."""
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    alpha = complex(alpha)
    if parity == "odd" and alpha == 0:
        raise ValueError("odd cat state is undefined at alpha = 0")
    # |alpha> +- |-alpha> has amplitudes c_n (1 +- (-1)^n); building it this way
    # keeps the forbidden parity exactly zero
    plus = coherent_state(alpha, n_max).amplitudes
    sign = 1.0 if parity == "even" else -1.0
    mask = 1.0 + sign * (-1.0) ** np.arange(n_max + 1)
    return FockVector(plus * mask).normalized()


def tensor(*states: FockVector) -> FockVector:
    """Tensor product; all factors must share the same cutoff."""
    dims = {s.dim_per_mode for s in states}
    if len(dims) != 1:
        raise ValueError(f"tensor factors have different cutoffs: {sorted(dims)}")
    out = states[0].amplitudes
    for s in states[1:]:
        out = np.multiply.outer(out, s.amplitudes)
    return FockVector(out)


def two_mode_superposition(terms: Sequence[tuple[complex, complex, complex]], n_max: int) -> FockVector:
    """Normalized ``sum_k c_k |x_k>|y_k>`` of two-mode coherent products."""
    amps = 0
    for coeff, x, y in terms:
        amps = amps + coeff * np.multiply.outer(_coherent_amplitudes(complex(x), n_max), _coherent_amplitudes(complex(y), n_max))
    for _, x, y in terms:
        for amp in (x, y):
            if poisson.sf(n_max, abs(amp) ** 2) >= TAIL_TOLERANCE:
                raise TruncationError(f"n_max={n_max} too small for amplitude {amp}")
    return FockVector(amps).normalized()


def quasi_bell_state(label: str, alpha: complex, n_max: int) -> FockVector:
    """One of ``phi+``, ``phi-``, ``psi+``, ``psi-`` built from ``|+-alpha>``.

    ``psi`` states use ``|alpha, -alpha> +- |-alpha, alpha>``.
    """
    alpha = complex(alpha)
    sign = {"+": 1.0, "-": -1.0}[label[-1]]
    if label[:-1] == "phi":
        terms = [(1.0, alpha, alpha), (sign, -alpha, -alpha)]
    elif label[:-1] == "psi":
        terms = [(1.0, alpha, -alpha), (sign, -alpha, alpha)]
    else:
        raise ValueError(f"unknown quasi-Bell label {label!r}")
    return two_mode_superposition(terms, n_max)


# ---------------------------------------------------------------------------
# linear optics


@lru_cache(maxsize=4096)
def _beamsplitter_block(total: int, transmissivity: float) -> np.ndarray:
    """Unitary on the ``total``-photon subspace, basis ``|k, total - k>``.

    Built as a rotation (matrix exponential of the exact finite generator)
    followed by the reflection sign ``(-1)^{n_j}`` applied to the input.
    """
    theta = np.arcsin(np.sqrt(transmissivity))
    k = np.arange(total + 1)
    # generator a_j^dag a_i - a_i^dag a_j in the |k, total-k> basis
    gen = np.zeros((total + 1, total + 1))
    off = np.sqrt((k[:-1] + 1) * (total - k[:-1]))
    gen[k[:-1] + 1, k[:-1]] = -off
    gen[k[:-1], k[:-1] + 1] = off
    rot = expm(theta * gen)
    block = rot * ((-1.0) ** (total - k))[None, :]
    block.setflags(write=False)
    return block


def _apply_two_mode(tensor_: np.ndarray, ax_i: int, ax_j: int, transmissivity: float, conj: bool = False) -> tuple[np.ndarray, float]:
    """Apply the beamsplitter to two axes of a tensor; return (tensor, dropped norm)."""
    dim = tensor_.shape[ax_i]
    t = np.moveaxis(tensor_, (ax_i, ax_j), (-2, -1))
    lead = t.shape[:-2]
    t = t.reshape(-1, dim, dim)
    out = np.zeros_like(t)
    dropped = 0.0
    for total in range(2 * dim - 1):
        k_in = np.arange(max(0, total - dim + 1), min(total, dim - 1) + 1)
        block = _beamsplitter_block(total, float(transmissivity))
        if conj:
            block = block.conj()
        full = t[:, k_in, total - k_in] @ block[:, k_in].T
        inside = (k_in[:, None] == np.arange(total + 1)[None, :]).any(axis=0)
        out[:, k_in, total - k_in] = full[:, inside]
        if not inside.all():
            dropped += float(np.sum(np.abs(full[:, ~inside]) ** 2))
    out = out.reshape(lead + (dim, dim))
    return np.moveaxis(out, (-2, -1), (ax_i, ax_j)), dropped


def beamsplitter(state, mode_i: int, mode_j: int, transmissivity: float):
    """Mix two modes of a ``FockVector`` or ``DensityOperator``.

    Amplitude that would land above the cutoff is discarded; use a cutoff
    chosen by :func:`truncation_for` so that this loss is negligible.
    """
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {transmissivity}")
    n = state.n_modes
    if mode_i == mode_j or not (0 <= mode_i < n and 0 <= mode_j < n):
        raise ValueError(f"invalid mode pair ({mode_i}, {mode_j}) for {n} modes")
    if isinstance(state, FockVector):
        amps, _ = _apply_two_mode(state.amplitudes, mode_i, mode_j, transmissivity)
        return FockVector(amps)
    if isinstance(state, DensityOperator):
        t, _ = _apply_two_mode(state.tensor, mode_i, mode_j, transmissivity)
        t, _ = _apply_two_mode(t, mode_i + n, mode_j + n, transmissivity, conj=True)
        return DensityOperator.from_tensor(t)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def loss_kraus(dim: int, survival: float) -> list[np.ndarray]:
    """Kraus operators of the pure-loss channel, indexed by photons lost."""
    ops = []
    for lost in range(dim):
        k = np.zeros((dim, dim))
        for m in range(lost, dim):
            k[m - lost, m] = np.sqrt(binom.pmf(lost, m, 1.0 - survival)) if survival < 1.0 or lost == 0 else float(lost == 0)
        ops.append(k)
    return ops


def _apply_single(tensor_: np.ndarray, axis: int, op: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.tensordot(op, tensor_, axes=([1], [axis])), 0, axis)


def loss_channel(state: DensityOperator, mode: int, survival: float) -> DensityOperator:
    """Attenuate one mode: beamsplitter onto a vacuum ancilla that is then traced out."""
    if not 0.0 <= survival <= 1.0:
        raise ValueError(f"survival must lie in [0, 1], got {survival}")
    n, dim = state.n_modes, state.dim_per_mode
    t = state.tensor
    out = np.zeros_like(t)
    for k in loss_kraus(dim, survival):
        out += _apply_single(_apply_single(t, mode, k), mode + n, k.conj())
    return DensityOperator.from_tensor(out)


def subtract_photon(state: FockVector, mode: int) -> FockVector:
    """Apply the annihilation operator to ``mode`` and renormalize."""
    dim = state.dim_per_mode
    lower = np.diag(np.sqrt(np.arange(1, dim)), k=1)
    out = FockVector(_apply_single(state.amplitudes, mode, lower))
    if out.norm() < 1e-14:
        raise ValueError("photon subtraction annihilated the state (no photons in mode)")
    return out.normalized()


def detect_number(state: DensityOperator, mode: int, model: DetectionModel) -> list[tuple[int, float, DensityOperator | None]]:
    """Count photons in ``mode``; returns ``(n, probability, conditional state)``.

    The conditional state lives on the remaining modes (the detected mode is
    absorbed).  It is ``None`` for zero-probability outcomes.
    """
    n_modes, dim = state.n_modes, state.dim_per_mode
    if not 0 <= mode < n_modes:
        raise ValueError(f"mode {mode} out of range for {n_modes} modes")
    resp = model.response(dim)
    t = state.tensor
    # diagonal block of the detected mode: <m| rho |m>
    diag = np.moveaxis(np.diagonal(t, axis1=mode, axis2=mode + n_modes), -1, 0)
    rest = [m for m in range(n_modes) if m != mode]
    outcomes = []
    for n in range(dim):
        block = np.tensordot(resp[n], diag, axes=([0], [0]))
        if rest:
            cond = DensityOperator.from_tensor(block)
            prob = cond.trace()
            outcomes.append((n, prob, cond.normalized() if prob > 0 else None))
        else:
            outcomes.append((n, float(np.real(block)), None))
    return outcomes


def von_neumann_entropy(state: DensityOperator, base: float = 2.0) -> float:
    evals = state.eigenvalues()
    evals = evals[evals > 1e-15]
    return float(-np.sum(evals * np.log(evals)) / np.log(base))


def reduced_density(state: FockVector, keep: Sequence[int]) -> DensityOperator:
    """Reduced state of a pure vector without forming the full density matrix."""
    keep = list(keep)
    drop = [m for m in range(state.n_modes) if m not in keep]
    t = np.transpose(state.amplitudes, keep + drop)
    dk = state.dim_per_mode ** len(keep)
    t = t.reshape(dk, -1)
    return DensityOperator(t @ t.conj().T, len(keep), state.dim_per_mode)


def entanglement_entropy(state: FockVector, keep: Sequence[int]) -> float:
    """Entropy (ebits) of the reduced state on ``keep``."""
    return von_neumann_entropy(reduced_density(state, keep))


# ---------------------------------------------------------------------------
# efficient paths for pure states


@dataclass(frozen=True)
class CountStatistics:
    """Inefficient number-resolved detection of several modes of a pure state.

    Outcome statistics are computed by binomial thinning of the ideal count
    distribution; conditional states of the undetected modes are formed only
    on request.
    """

    state: FockVector
    modes: tuple[int, ...]
    efficiency: float

    @property
    def _split(self) -> np.ndarray:
        rest = [m for m in range(self.state.n_modes) if m not in self.modes]
        t = np.transpose(self.state.amplitudes, rest + list(self.modes))
        kept = self.state.dim_per_mode ** len(rest)
        return t.reshape((kept,) + (self.state.dim_per_mode,) * len(self.modes))

    def _thin(self, ideal: np.ndarray) -> np.ndarray:
        resp = thinning_matrix(self.state.dim_per_mode, self.efficiency)
        out = ideal
        for ax in range(ideal.ndim):
            out = np.moveaxis(np.tensordot(resp, out, axes=([1], [ax])), 0, ax)
        return out

    def probabilities(self) -> np.ndarray:
        """Tensor ``P[n_1, ..., n_k]`` over click patterns."""
        return self._thin(np.sum(np.abs(self._split) ** 2, axis=0))

    def overlaps(self, target: FockVector) -> np.ndarray:
        """Unnormalized ``<t|rho_n|t>`` for every click pattern ``n``."""
        amp = np.tensordot(target.flat.conj(), self._split, axes=([0], [0]))
        return self._thin(np.abs(amp) ** 2)

    def conditional(self, pattern: Sequence[int]) -> DensityOperator:
        """Normalized state of the undetected modes given ``pattern``."""
        split = self._split
        resp = thinning_matrix(self.state.dim_per_mode, self.efficiency)
        weights = np.ones(())
        for n in pattern:
            weights = np.multiply.outer(weights, resp[n])
        branches = split.reshape(split.shape[0], -1) * np.sqrt(weights.reshape(-1))[None, :]
        rest = self.state.n_modes - len(self.modes)
        rho = DensityOperator(branches @ branches.conj().T, rest, self.state.dim_per_mode)
        return rho.normalized()


def count_statistics(state: FockVector, modes: Sequence[int], model: DetectionModel) -> CountStatistics:
    return CountStatistics(state, tuple(modes), model.efficiency)


def attenuate_to_subspace(state: FockVector, survival: float, max_level: int) -> np.ndarray:
    """Purified pure-loss channel on every mode, keeping levels ``<= max_level``.

    Returns a matrix whose columns are unnormalized branches ``|psi_k>`` over
    the truncated system space (dim ``(max_level + 1) ** n_modes``), such that
    ``sum_k |psi_k><psi_k|`` equals the attenuated state projected onto that
    space.
    """
    dim = state.dim_per_mode
    kraus = loss_kraus(dim, survival)
    # kraus[lost][kept_level, m]; keep rows 0..max_level -> T[level, lost, m]
    thin = np.stack([k[: max_level + 1] for k in kraus], axis=1)
    out = state.amplitudes[..., None]
    n = state.n_modes
    for ax in range(n):
        out = np.tensordot(thin, out, axes=([2], [ax]))
        out = np.moveaxis(out, (0, 1), (ax, -1))
        out = out.reshape(out.shape[:n] + (-1,))
    return out.reshape((max_level + 1) ** n, -1)
