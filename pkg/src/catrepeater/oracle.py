"""Brute-force Fock-space circuits that check the closed-form model.

Each circuit prepares the optical states explicitly, applies beamsplitters and
inefficient number-resolving detection, and reports exact herald statistics
and conditional states.  Equal losses on the two inputs of a balanced
beamsplitter commute with it, so transmission and memory losses are folded
into the detector efficiency wherever that is exact.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import analytic
from .analytic import LinkParams, MixedLinkState, SwapOutcome
from .fock import (
    ADEQUACY_TOLERANCE,
    DensityOperator,
    DetectionModel,
    FockVector,
    TruncationError,
    attenuate_to_subspace,
    beamsplitter,
    cat_state,
    count_statistics,
    quasi_bell_state,
    tensor,
    truncation_for,
)

MAX_ALPHA_SQ = 4.0


@dataclass(frozen=True)
class CircuitResult:
    """One detection pattern of a circuit; the conditional state is built on demand."""

    outcome_label: tuple
    probability: float
    fidelity_vs_target: float
    _state_factory: Callable[[], DensityOperator] | None = field(default=None, repr=False, compare=False)

    @property
    def conditional_state(self) -> DensityOperator:
        if self._state_factory is None:
            raise ValueError(f"no conditional state available for outcome {self.outcome_label}")
        return self._state_factory()


@dataclass(frozen=True)
class LinkCircuitResult:
    outcomes: tuple[CircuitResult, ...]
    herald_probability: float
    herald_fidelity: float
    efficiency: float
    n_max: int

    def heralds(self) -> tuple[CircuitResult, ...]:
        return tuple(r for r in self.outcomes if sorted(r.outcome_label) == [0, 1])


@dataclass(frozen=True)
class SwapCircuitResult:
    outcomes: tuple[SwapOutcome, ...]
    silent_probability: float
    residual: float
    n_max: int

    def outcome(self, n: int) -> SwapOutcome:
        return self.outcomes[n - 1]


def _require_amplitude(alpha_sq: float, limit: float = MAX_ALPHA_SQ) -> None:
    if alpha_sq > limit:
        raise TruncationError(
            f"|alpha|^2={alpha_sq:g} exceeds the oracle limit {limit:g}; "
            f"the cutoff would need n_max={truncation_for(math.sqrt(alpha_sq))} per mode for the memories alone"
        )


def _check_adequacy(state: FockVector) -> None:
    top = state.top_level_population()
    if top >= ADEQUACY_TOLERANCE:
        raise TruncationError(f"top-level population {top:.2e} at n_max={state.n_max} is not negligible")


def _merged(result_iter):
    return tuple(result_iter)


# ---------------------------------------------------------------------------
# elementary link


def elementary_link_circuit(params: LinkParams, phase: float = 0.0, n_max: int | None = None) -> LinkCircuitResult:
    """Herald an elementary link from two odd cats.

    Modes are ``[memory_a, tapped_a, memory_b, tapped_b]``.  Each cat is split
    on a beamsplitter of transmission ``tap``; the tapped modes travel
    ``L0/2`` to a balanced beamsplitter and are counted.  Fiber loss and the
    detector efficiency combine into one efficiency ``eta_t * eta_d``.  A
    click in the first output heralds ``phi_-`` of the memories, a click in
    the second heralds ``psi_-``; both count as success.
    """
    _require_amplitude(params.alpha_sq)
    alpha = math.sqrt(params.alpha_sq) * cmath.exp(1j * phase)
    dim_max = truncation_for(math.sqrt(params.alpha_sq)) if n_max is None else n_max
    cat = cat_state(alpha, "odd", dim_max)
    _check_adequacy(cat)
    vac = FockVector(np.eye(dim_max + 1, 1).reshape(-1).astype(complex))
    state = tensor(cat, vac, cat, vac)
    state = beamsplitter(state, 0, 1, params.tap)
    state = beamsplitter(state, 2, 3, params.tap)
    state = beamsplitter(state, 1, 3, 0.5)
    eps = analytic.eta_t(params) * params.eta_d
    stats = count_statistics(state, [1, 3], DetectionModel(eps))
    probs = stats.probabilities()
    beta = alpha * math.sqrt(params.cos2)
    targets = {
        (1, 0): quasi_bell_state("phi-", beta, dim_max),
        (0, 1): quasi_bell_state("psi-", beta, dim_max),
    }
    overlaps = {k: stats.overlaps(t) for k, t in targets.items()}

    outcomes = []
    for pattern in np.ndindex(probs.shape):
        p = float(probs[pattern])
        if pattern in targets and p > 0:
            fid = float(overlaps[pattern][pattern]) / p
        else:
            fid = float("nan")
        outcomes.append(CircuitResult(pattern, p, fid, _state_factory=lambda pat=pattern: stats.conditional(pat)))
    herald_p = sum(float(probs[k]) for k in targets)
    herald_f = sum(float(overlaps[k][k]) for k in targets) / herald_p if herald_p > 0 else float("nan")
    return LinkCircuitResult(tuple(outcomes), herald_p, herald_f, eps, dim_max)


# ---------------------------------------------------------------------------
# swap station


def _link_branches(state: MixedLinkState, beta: complex, dim_max: int) -> list[tuple[float, FockVector]]:
    return [
        (state.f_minus, quasi_bell_state("phi-", beta, dim_max)),
        (state.f_plus, quasi_bell_state("phi+", beta, dim_max)),
    ]


def swap_circuit(
    state_ab: MixedLinkState,
    state_bc: MixedLinkState,
    params: LinkParams,
    n_max: int | None = None,
) -> SwapCircuitResult:
    """Swap two links ``A-B1`` and ``B2-C`` at the station holding ``B1, B2``.

    Modes are ``[A, B1, B2, C]``.  The inner memories are retrieved with
    efficiency ``eta_m``, mixed on a balanced beamsplitter and counted with
    efficiency ``eta_d``.  Outcomes are merged over the two detectors (the
    ``d``-click heralds ``phi``-type, the ``d~``-click ``psi``-type states,
    which an ideal local rotation maps onto each other).  Odd counts target
    ``phi_-``/``psi_-`` and even counts ``phi_+``/``psi_+``.
    """
    if state_ab.level != state_bc.level:
        raise ValueError("swap inputs must sit at the same nesting level")
    _require_amplitude(params.alpha_sq)
    beta = math.sqrt(params.beta_sq)
    dim_max = truncation_for(math.sqrt(2.0) * beta) if n_max is None else n_max
    eta = params.eta
    model = DetectionModel(eta)
    shape = (dim_max + 1, dim_max + 1)
    probs = np.zeros(shape)
    ov = {key: np.zeros(shape) for key in ("phi-", "phi+", "psi-", "psi+")}
    targets = {key: quasi_bell_state(key, beta, dim_max) for key in ov}
    for w1, left in _link_branches(state_ab, beta, dim_max):
        for w2, right in _link_branches(state_bc, beta, dim_max):
            w = w1 * w2
            if w == 0.0:
                continue
            psi = beamsplitter(tensor(left, right), 1, 2, 0.5)
            _check_adequacy(psi)
            stats = count_statistics(psi, [1, 2], model)
            probs += w * stats.probabilities()
            for key, t in targets.items():
                ov[key] += w * stats.overlaps(t)

    outcomes = []
    for n in range(1, dim_max + 1):
        odd = n % 2 == 1
        p = probs[n, 0] + probs[0, n]
        good = (ov["phi-"] if odd else ov["phi+"])[n, 0] + (ov["psi-"] if odd else ov["psi+"])[0, n]
        fid = float(good / p) if p > 0 else float("nan")
        outcomes.append(
            SwapOutcome(
                parity="odd" if odd else "even",
                n=n,
                p_success=float(p),
                state_after=MixedLinkState(min(max(fid, 0.0), 1.0) if p > 0 else 1.0, level=state_ab.level + 1),
                fidelity=fid,
            )
        )
    both = float(probs[1:, 1:].sum())
    return SwapCircuitResult(tuple(outcomes), float(probs[0, 0]), both, dim_max)


# ---------------------------------------------------------------------------
# postselection


PS_TARGET = np.array([0.0, 1.0, 1.0, 0.0]) / math.sqrt(2.0)
PS_PATTERNS = ((1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1))


def _two_chain_branches(state: MixedLinkState, params: LinkParams, dim_max: int):
    """Yield ``(weight, vector)`` over sectors of both chains, modes ``[A1, A2, C1, C2]``."""
    beta = math.sqrt(params.beta_sq)
    for w1, left in _link_branches(state, beta, dim_max):
        for w2, right in _link_branches(state, beta, dim_max):
            if w1 * w2 == 0.0:
                continue
            amps = np.einsum("ab,cd->acbd", left.amplitudes, right.amplitudes)
            yield w1 * w2, FockVector(amps)


def postselection_circuit(state: MixedLinkState | Sequence[MixedLinkState], params: LinkParams, n_max: int | None = None) -> CircuitResult:
    """Postselect one photon at each end node of two parallel chains.

    Chain 1 links memories ``A1, C1`` and chain 2 links ``A2, C2``.  Each node
    retrieves its two memories (efficiency ``eta_m``), mixes them on a
    balanced beamsplitter and counts with efficiency ``eta_d``; a single click
    per node is accepted.  The returned state is the accepted two-photon
    state of ``[A1, A2, C1, C2]`` in the one-photon-per-mode basis and the
    fidelity is taken against ``(|A1 C2> + |A2 C1>)/sqrt(2)``.
    """
    if isinstance(state, MixedLinkState):
        states = (state, state)
    else:
        states = tuple(state)
        if len(states) != 2 or states[0] != states[1]:
            raise ValueError("postselection expects two chains in the same state")
    state = states[0]
    if params.alpha_sq > 0.3 + 1e-12:
        raise TruncationError(f"postselection oracle is limited to |alpha|^2 <= 0.3, got {params.alpha_sq:g}")
    beta = math.sqrt(params.beta_sq)
    dim_max = truncation_for(beta) if n_max is None else n_max
    eta = params.eta

    # accepted state: loss then projection onto one photon per node
    rho = np.zeros((16, 16))
    p_local = 0.0
    model = DetectionModel(eta)
    for w, vec in _two_chain_branches(state, params, dim_max):
        _check_adequacy(vec)
        branches = attenuate_to_subspace(vec, eta, 1)
        rho = rho + w * np.real(branches @ branches.conj().T)
        local = beamsplitter(beamsplitter(vec, 0, 1, 0.5), 2, 3, 0.5)
        probs = count_statistics(local, [0, 1, 2, 3], model).probabilities()
        p_local += w * sum(float(probs[pat]) for pat in PS_PATTERNS)
    rho_t = rho.reshape((2,) * 8)
    block = np.array([[rho_t[i + j] for j in PS_PATTERNS] for i in PS_PATTERNS])
    p_accept = float(np.trace(block))
    fid = float(PS_TARGET @ block @ PS_TARGET) / p_accept

    def factory():
        sub = np.zeros((16, 16))
        idx = [int("".join(map(str, pat)), 2) for pat in PS_PATTERNS]
        sub[np.ix_(idx, idx)] = block / p_accept
        return DensityOperator(sub, 4, 2)

    if abs(p_accept - p_local) > 1e-9 * max(1.0, p_accept):
        raise AssertionError(f"postselection probability mismatch: {p_accept} vs {p_local}")
    return CircuitResult(("one click per node",), p_local, fid, _state_factory=factory)


# ---------------------------------------------------------------------------
# quasi-Bell discrimination

BELL_LABELS = ("phi-", "phi+", "psi-", "psi+")


def classify_pattern(n1: int, n2: int) -> str:
    """Map a click pattern on the two outputs to a quasi-Bell label."""
    if n1 == 0 and n2 == 0:
        return "fail"
    if n1 > 0 and n2 > 0:
        return "invalid"
    if n2 == 0:
        return "phi-" if n1 % 2 else "phi+"
    return "psi-" if n2 % 2 else "psi+"


@dataclass(frozen=True)
class DiscriminatorResult:
    label: str
    probabilities: np.ndarray
    classes: dict

    def weight(self, key: str) -> float:
        return self.classes.get(key, 0.0)


def quasi_bell_discriminator(label: str, alpha: complex, eta_d: float = 1.0, n_max: int | None = None) -> DiscriminatorResult:
    """Balanced beamsplitter plus parity-resolving detection of a quasi-Bell state."""
    if label not in BELL_LABELS:
        raise ValueError(f"label must be one of {BELL_LABELS}, got {label!r}")
    _require_amplitude(abs(alpha) ** 2)
    dim_max = truncation_for(math.sqrt(2.0) * abs(alpha)) if n_max is None else n_max
    state = beamsplitter(quasi_bell_state(label, alpha, dim_max), 0, 1, 0.5)
    _check_adequacy(state)
    probs = count_statistics(state, [0, 1], DetectionModel(eta_d)).probabilities()
    classes: dict[str, float] = {}
    for (n1, n2), p in np.ndenumerate(probs):
        key = classify_pattern(n1, n2)
        classes[key] = classes.get(key, 0.0) + float(p)
    # split the misread weight of odd inputs into vacuum and nonzero even counts
    return DiscriminatorResult(label, probs, classes)


def confusion_matrix(alpha: complex, eta_d: float = 1.0) -> tuple[tuple[str, ...], np.ndarray]:
    """Rows: input states; columns: decoded label, ``fail`` and ``invalid``."""
    cols = BELL_LABELS + ("fail", "invalid")
    mat = np.zeros((len(BELL_LABELS), len(cols)))
    for i, lab in enumerate(BELL_LABELS):
        res = quasi_bell_discriminator(lab, alpha, eta_d)
        for j, c in enumerate(cols):
            mat[i, j] = res.weight(c)
    return cols, mat
