"""Closed-form rate and fidelity model of the cat-state repeater.

Notation used throughout:

* ``a = |alpha|^2``, ``s = sin^2(theta)`` (the tapped fraction), ``beta^2 = a cos^2(theta)``
  is the mean photon number left in each memory.
* ``eta = eta_m * eta_d`` is the combined memory and detector efficiency seen by
  the swap and postselection stations.
* A repeater link is a classical mixture ``F_- |phi_-> + F_+ |phi_+>`` of the
  two quasi-Bell sectors, see :class:`MixedLinkState`.

All functions are pure and vectorize over numpy scalars where it is natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

SPEED_IN_FIBER = 2e5  # km/s
ATTENUATION_LENGTH = 22.0  # km

Parity = Literal["odd", "even"]


@dataclass(frozen=True)
class LinkParams:
    """Physical parameters of one elementary link.

    ``L0`` is the link length in km (the central station sits at ``L0/2``).
    A zero length and zero efficiencies are accepted so that degenerate
    cases can be evaluated; ``link_time`` rejects ``L0 = 0``.
    """

    alpha_sq: float
    tap: float
    L0: float = 150.0
    L_att: float = ATTENUATION_LENGTH
    eta_d: float = 0.9
    eta_m: float = 0.9
    c: float = SPEED_IN_FIBER

    def __post_init__(self):
        if not self.alpha_sq > 0:
            raise ValueError(f"alpha_sq must be positive, got {self.alpha_sq}")
        if not 0.0 < self.tap < 1.0:
            raise ValueError(f"tap must lie in (0, 1), got {self.tap}")
        if not self.L0 >= 0:
            raise ValueError(f"L0 must be non-negative, got {self.L0}")
        if not self.L_att > 0:
            raise ValueError(f"L_att must be positive, got {self.L_att}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        for name in ("eta_d", "eta_m"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    @property
    def cos2(self) -> float:
        return 1.0 - self.tap

    @property
    def beta_sq(self) -> float:
        """Mean photon number of each stored memory amplitude."""
        return self.alpha_sq * self.cos2

    @property
    def eta(self) -> float:
        return self.eta_m * self.eta_d

    def with_(self, **changes) -> "LinkParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class Normalizations:
    n_plus: float
    n_minus: float
    m_plus: float
    m_minus: float
    m_plus_theta: float
    m_minus_theta: float

    @classmethod
    def from_params(cls, params: LinkParams) -> "Normalizations":
        a, b2 = params.alpha_sq, params.beta_sq
        return cls(
            n_plus=2.0 * (1.0 + math.exp(-2.0 * a)),
            n_minus=-2.0 * math.expm1(-2.0 * a),
            m_plus=2.0 * (1.0 + math.exp(-4.0 * a)),
            m_minus=-2.0 * math.expm1(-4.0 * a),
            m_plus_theta=2.0 * (1.0 + math.exp(-4.0 * b2)),
            m_minus_theta=-2.0 * math.expm1(-4.0 * b2),
        )


def _m_pair(x_sq: float) -> tuple[float, float]:
    """``(M_+, M_-)`` for a mean photon number ``x_sq``; ``M_- ~ 8 x_sq`` as ``x_sq -> 0``."""
    return 2.0 * (1.0 + math.exp(-4.0 * x_sq)), -2.0 * math.expm1(-4.0 * x_sq)


@dataclass(frozen=True)
class MixedLinkState:
    """Classical mixture of the ``-`` and ``+`` quasi-Bell sectors at a nesting level."""

    f_minus: float
    f_plus: float = field(default=None)  # type: ignore[assignment]
    level: int = 0

    def __post_init__(self):
        if self.f_plus is None:
            object.__setattr__(self, "f_plus", 1.0 - self.f_minus)
        if self.f_minus < -1e-15 or self.f_plus < -1e-15:
            raise ValueError(f"weights must be non-negative, got ({self.f_minus}, {self.f_plus})")
        if abs(self.f_minus + self.f_plus - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {self.f_minus + self.f_plus}")
        if self.level < 0:
            raise ValueError("level must be non-negative")


@dataclass(frozen=True)
class SwapOutcome:
    parity: Parity
    n: int | None
    p_success: float
    state_after: MixedLinkState
    fidelity: float


@dataclass(frozen=True)
class RateReport:
    """Summary of a full chain: per-stage probabilities, fidelities and the time."""

    n_links: int
    params: LinkParams
    p0: float
    t0: float
    f0: float
    swap_probabilities: tuple[float, ...]
    swap_fidelities: tuple[float, ...]
    p_ps: float
    p_ps_exact: float
    postselected_fidelity: float
    total_time: float
    single_chain_time: float
    empirical: dict | None = None

    def as_dict(self) -> dict:
        out = {
            "n_links": self.n_links,
            "alpha_sq": self.params.alpha_sq,
            "tap": self.params.tap,
            "L0_km": self.params.L0,
            "P0": self.p0,
            "T0_s": self.t0,
            "F0": self.f0,
        }
        for lvl, (p, f) in enumerate(zip(self.swap_probabilities, self.swap_fidelities), start=1):
            out[f"P{lvl}"] = p
            out[f"F{lvl}"] = f
        out.update(
            P_ps=self.p_ps,
            P_ps_exact=self.p_ps_exact,
            F_ps=self.postselected_fidelity,
            T_s=self.total_time,
            T_single_chain_s=self.single_chain_time,
        )
        if self.empirical is not None:
            out["empirical"] = dict(self.empirical)
        return out


# ---------------------------------------------------------------------------
# elementary link


def eta_t(params: LinkParams) -> float:
    """Fiber transmission from a memory to the central station (half the link)."""
    return math.exp(-params.L0 / (2.0 * params.L_att))


def link_prefactor(params: LinkParams) -> float:
    """``P0 / (eta_t eta_d)``: the efficiency-independent part of the herald probability."""
    norms = Normalizations.from_params(params)
    x = params.alpha_sq * params.tap
    return (
        2.0
        / norms.n_minus**2
        * 2.0
        * x
        * math.exp(-2.0 * x)
        * (norms.m_minus_theta + 2.0 * norms.m_plus_theta * x)
    )


def link_success_probability(params: LinkParams) -> float:
    """Probability ``P0`` that one attempt heralds an entangled pair (either detector)."""
    return link_prefactor(params) * eta_t(params) * params.eta_d


def link_fidelity(params: LinkParams) -> float:
    """Weight ``F_-^0`` of the target sector in the heralded state."""
    norms = Normalizations.from_params(params)
    x = params.alpha_sq * params.tap
    return norms.m_minus_theta / (norms.m_minus_theta + 2.0 * norms.m_plus_theta * x)


def link_state(params: LinkParams) -> MixedLinkState:
    return MixedLinkState(link_fidelity(params), level=0)


def link_time(params: LinkParams) -> float:
    """Mean time ``T0`` to herald one elementary link, one attempt per ``L0/c``."""
    if params.L0 == 0:
        raise ValueError("zero-length link: T0 = 0/P0 is degenerate")
    p0 = link_success_probability(params)
    if p0 == 0.0:
        return math.inf
    return (params.L0 / params.c) / p0


def link_fidelity_exact(params: LinkParams, efficiency: float | None = None) -> float:
    """Heralded target-sector weight to all orders in the herald efficiency.

    ``efficiency`` is the overall probability ``eps = eta_t eta_d`` that a
    tapped photon is counted.  Undetected tapped photons decohere the memory
    pair; the leading form :func:`link_fidelity` is the ``eps -> 0`` limit.
    """
    eps = eta_t(params) * params.eta_d if efficiency is None else efficiency
    x = params.alpha_sq * params.tap
    m_plus_th, m_minus_th = _m_pair(params.beta_sq)
    m_plus_g, m_minus_g = _m_pair(x * (1.0 - eps))
    return m_minus_th * m_plus_g / (m_minus_th * m_plus_g + m_plus_th * m_minus_g)


def link_success_probability_exact(params: LinkParams, efficiency: float | None = None) -> float:
    """Single-click herald probability to all orders in ``eps = eta_t eta_d``."""
    eps = eta_t(params) * params.eta_d if efficiency is None else efficiency
    x = params.alpha_sq * params.tap
    n_minus = -2.0 * math.expm1(-2.0 * params.alpha_sq)
    inner = -2.0 * math.expm1(-4.0 * (params.beta_sq + (1.0 - eps) * x))
    return 2.0 * 2.0 * eps * x * math.exp(-2.0 * eps * x) * inner / n_minus**2


# ---------------------------------------------------------------------------
# entanglement swapping


def _swap_terms(state: MixedLinkState, params: LinkParams, parity: Parity) -> tuple[float, float]:
    """Numerator and denominator of the post-swap fidelity for one parity class."""
    if parity not in ("odd", "even"):
        raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")
    norms = Normalizations.from_params(params)
    x = 2.0 * (1.0 - params.eta) * params.beta_sq
    ch, sh = math.cosh(x), math.sinh(x)
    if parity == "odd":
        fa, fb = state.f_minus, state.f_plus
        r = norms.m_minus_theta / norms.m_plus_theta
    else:
        fa, fb = state.f_plus, state.f_minus
        r = norms.m_plus_theta / norms.m_minus_theta
    num = (fa**2 + (fb * r) ** 2) * ch + 2.0 * fa * fb * r * sh
    den = (fa**2 + 2.0 * fa * fb + (fb * r) ** 2) * ch + (fb**2 + 2.0 * fa * fb + (fa / r) ** 2) * r * sh
    return num, den


def swap_numerator(state: MixedLinkState, params: LinkParams, parity: Parity = "odd") -> float:
    return _swap_terms(state, params, parity)[0]


def swap_denominator(state: MixedLinkState, params: LinkParams, parity: Parity = "odd") -> float:
    return _swap_terms(state, params, parity)[1]


def swap_numerator_odd(state: MixedLinkState, params: LinkParams) -> float:
    return swap_numerator(state, params, "odd")


def swap_denominator_odd(state: MixedLinkState, params: LinkParams) -> float:
    return swap_denominator(state, params, "odd")


def swap_fidelity(state: MixedLinkState, params: LinkParams, parity: Parity = "odd") -> float:
    """``F_-`` after an odd-count swap, or ``G_+`` after an even-count swap."""
    num, den = _swap_terms(state, params, parity)
    return num / den


def _count_weight(params: LinkParams, n: int) -> float:
    """``eta^n (2 beta^2)^n / n! e^{-2 beta^2}``, evaluated in log space."""
    if params.eta == 0.0:
        return 0.0
    lam = 2.0 * params.beta_sq
    return math.exp(n * math.log(params.eta * lam) - math.lgamma(n + 1) - lam)


def swap_probability_n(state: MixedLinkState, params: LinkParams, n: int, parity: Parity | None = None) -> float:
    """Probability to count ``n`` photons at the swap station (both output modes merged)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    expected = "odd" if n % 2 else "even"
    if parity is not None and parity != expected:
        raise ValueError(f"parity {parity!r} does not match n={n}")
    norms = Normalizations.from_params(params)
    m = norms.m_minus_theta if expected == "odd" else norms.m_plus_theta
    return 2.0 / m * _count_weight(params, n) * swap_denominator(state, params, expected)


def swap_class_probability(state: MixedLinkState, params: LinkParams, parity: Parity) -> float:
    """Total probability of all nonzero counts with the given parity."""
    norms = Normalizations.from_params(params)
    lam = 2.0 * params.beta_sq
    y = params.eta * lam
    if parity == "odd":
        series, m = math.sinh(y), norms.m_minus_theta
    else:
        series, m = math.cosh(y) - 1.0, norms.m_plus_theta
    return 2.0 / m * series * math.exp(-lam) * swap_denominator(state, params, parity)


def swap_success_probability(state: MixedLinkState, params: LinkParams, accept: str = "odd") -> float:
    """Probability that the swap heralds, accepting odd counts or all nonzero counts."""
    p = swap_class_probability(state, params, "odd")
    if accept == "odd":
        return p
    if accept == "all":
        return p + swap_class_probability(state, params, "even")
    raise ValueError(f"accept must be 'odd' or 'all', got {accept!r}")


def swap(state: MixedLinkState, params: LinkParams, parity: Parity = "odd") -> SwapOutcome:
    """Swap two identical links and keep the class ``parity`` (even outcomes are rotated)."""
    fid = swap_fidelity(state, params, parity)
    return SwapOutcome(
        parity=parity,
        n=None,
        p_success=swap_class_probability(state, params, parity),
        state_after=MixedLinkState(fid, 1.0 - fid, level=state.level + 1),
        fidelity=fid,
    )


def swap_outcomes(state: MixedLinkState, params: LinkParams, n_max: int) -> list[SwapOutcome]:
    """One outcome per photon count ``1..n_max``."""
    outs = []
    for n in range(1, n_max + 1):
        parity: Parity = "odd" if n % 2 else "even"
        fid = swap_fidelity(state, params, parity)
        outs.append(
            SwapOutcome(
                parity=parity,
                n=n,
                p_success=swap_probability_n(state, params, n),
                state_after=MixedLinkState(fid, 1.0 - fid, level=state.level + 1),
                fidelity=fid,
            )
        )
    return outs


def nested_states(params: LinkParams, levels: int) -> list[MixedLinkState]:
    """Link states at levels ``0..levels`` along the odd-count branch."""
    states = [link_state(params)]
    for _ in range(levels):
        states.append(swap(states[-1], params, "odd").state_after)
    return states


def large_alpha_fidelity(params: LinkParams) -> float:
    """Parity-independent post-swap fidelity for an error-free input at large amplitude."""
    return 1.0 / (1.0 + math.tanh(2.0 * (1.0 - params.eta) * params.beta_sq))


# ---------------------------------------------------------------------------
# postselection


def postselection_probability(f_minus: float, params: LinkParams) -> float:
    """Leading-order postselection success ``eta^2 F_-^2 / 2``."""
    if not 0.0 <= f_minus <= 1.0:
        raise ValueError(f"f_minus must lie in [0, 1], got {f_minus}")
    return params.eta**2 * f_minus**2 / 2.0


def _postselection_amplitudes(state: MixedLinkState, params: LinkParams) -> tuple[float, float]:
    """Weights ``X`` (target) and ``Y`` (orthogonal) of the accepted two-photon state."""
    norms = Normalizations.from_params(params)
    g_plus, g_minus = _m_pair((1.0 - params.eta) * params.beta_sq)
    fm, fp = state.f_minus, state.f_plus
    x = fm * g_plus / norms.m_minus_theta + fp * g_minus / norms.m_plus_theta
    y = fm * g_minus / norms.m_minus_theta + fp * g_plus / norms.m_plus_theta
    return x, y


def postselected_fidelity(state: MixedLinkState | float, params: LinkParams) -> float:
    """Fidelity of the postselected two-photon state with the dual-rail Bell state.

    Both chains end in ``state``; each end node retrieves its memories with
    efficiency ``eta_m``, mixes them and counts with efficiency ``eta_d``, and
    exactly one click per node is accepted.  Undetected photons act as loss
    that mixes the two sectors; vacuum terms never pass the filter.
    """
    if not isinstance(state, MixedLinkState):
        state = MixedLinkState(float(state))
    x, y = _postselection_amplitudes(state, params)
    return x**2 / (x**2 + y**2)


def postselection_probability_exact(state: MixedLinkState | float, params: LinkParams) -> float:
    """All-orders postselection success probability for the same network."""
    if not isinstance(state, MixedLinkState):
        state = MixedLinkState(float(state))
    x, y = _postselection_amplitudes(state, params)
    b2 = params.eta * params.beta_sq
    return 2.0 * b2**2 * math.exp(-4.0 * b2) * (x**2 + y**2)


# ---------------------------------------------------------------------------
# chain


def _levels_for(n_links: int) -> int:
    if n_links < 2 or n_links & (n_links - 1):
        raise ValueError(f"n_links must be a power of two >= 2, got {n_links}")
    return n_links.bit_length() - 1


def chain_time(params: LinkParams, n_links: int = 4, accept: str = "odd") -> RateReport:
    """Analytic mean time for two parallel chains of ``n_links`` links plus postselection.

    Each doubling of distance costs a factor 3/2 (waiting for the slower of two
    segments) over the success probability of the swap.  The factor for the
    final step accounts for waiting on the slower of the two chains feeding
    the postselection; ``single_chain_time`` omits it.
    """
    levels = _levels_for(n_links)
    p0 = link_success_probability(params)
    t0 = link_time(params)
    states = [link_state(params)]
    probs = []
    for _ in range(levels):
        probs.append(swap_success_probability(states[-1], params, accept))
        states.append(swap(states[-1], params, "odd").state_after)
    final = states[-1]
    p_ps = postselection_probability(final.f_minus, params)
    denom = float(np.prod(probs)) * p_ps
    single = 1.5**levels * t0 / denom if denom > 0 else math.inf
    return RateReport(
        n_links=n_links,
        params=params,
        p0=p0,
        t0=t0,
        f0=states[0].f_minus,
        swap_probabilities=tuple(probs),
        swap_fidelities=tuple(s.f_minus for s in states[1:]),
        p_ps=p_ps,
        p_ps_exact=postselection_probability_exact(final, params),
        postselected_fidelity=postselected_fidelity(final, params),
        total_time=1.5 * single,
        single_chain_time=single,
    )


def chain_time_four_links(params: LinkParams) -> RateReport:
    return chain_time(params, 4)


# ---------------------------------------------------------------------------
# odds and ends


def purification_map(f_in: float, printed: bool = False) -> float:
    """Two-copy purification ``F^2 / (F^2 + (1 - F)^2)``.

    ``printed=True`` evaluates the alternative ``F^2 / (F^2 + 1 - F^2) = F^2``.
    """
    if not 0.0 < f_in <= 1.0:
        raise ValueError(f"f_in must lie in (0, 1], got {f_in}")
    if printed:
        return f_in**2 / (f_in**2 + (1.0 - f_in**2))
    return f_in**2 / (f_in**2 + (1.0 - f_in) ** 2)


def direct_transmission_time(L: float, source_rate: float = 1e10, L_att: float = ATTENUATION_LENGTH) -> float:
    """Mean time to send one photon directly over ``L`` km."""
    if L < 0 or source_rate <= 0 or L_att <= 0:
        raise ValueError("L must be non-negative and source_rate, L_att positive")
    return math.exp(L / L_att) / source_rate


def parity_leakage(alpha_sq: float, eta: float) -> dict[str, float]:
    """Count statistics of an odd cat of mean photon number ``2 alpha_sq`` seen with efficiency ``eta``.

    This is the output of the ``phi_-`` port after 50/50 mixing; losses let an
    odd state register an even count.  Returns the odd, even (n >= 2) and
    vacuum probabilities.
    """
    g2 = 2.0 * alpha_sq
    norm = -2.0 * math.expm1(-2.0 * g2)
    y = eta * g2
    coherence = math.exp(-2.0 * (1.0 - eta) * g2)
    pref = 2.0 / norm * math.exp(-y)
    vacuum = pref * (1.0 - coherence)
    even_all = pref * math.cosh(y) * (1.0 - coherence)
    odd = pref * math.sinh(y) * (1.0 + coherence)
    return {"odd": odd, "even": even_all - vacuum, "vacuum": vacuum}


def bell_failure_probability(alpha_sq: float) -> float:
    """Both-silent probability for ``phi_+`` or ``psi_+`` with ideal detectors: ``|<0|even>|^2``."""
    return 2.0 * math.exp(-2.0 * alpha_sq) / (1.0 + math.exp(-4.0 * alpha_sq))


def bell_failure_probability_printed(alpha_sq: float) -> float:
    """Alternative expression ``2 e^{-4a} / (1 + e^{-4a})`` kept for comparison."""
    return 2.0 * math.exp(-4.0 * alpha_sq) / (1.0 + math.exp(-4.0 * alpha_sq))
