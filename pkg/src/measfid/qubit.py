"""Single-qubit analysis of when the probabilities-only bound holds.

The family studied is E₀ = [[u₀, γ], [γ*, 1 − u₀]], E₁ = 𝟙 − E₀ measured
against the computational basis, with |γ| ≤ √(u₀(1 − u₀)).
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import OutOfRange, Povm, Rank1Pvm, validate_povm
from .haar import BlochQuadrature, QuadEstimate, bloch_quad, bloch_states
from .metrics import infidelity, lower_bound_probs

CSV_COLUMNS = ("u0", "gamma", "F_exact", "lb", "ub", "gap")


def arccot(x):
    """Branch with values in (0, π)."""
    return np.pi / 2 - np.arctan(x)


@dataclass(frozen=True)
class CoherentQubitPovm:
    u0: float
    gamma: complex = 0.0

    def __post_init__(self):
        if not 0.5 <= self.u0 <= 1.0:
            raise OutOfRange("u0 must lie in [1/2, 1]")
        if abs(self.gamma) > self.r_max * (1 + 1e-12) + 1e-15:
            raise OutOfRange(f"|gamma| = {abs(self.gamma)!r} exceeds R_max = {self.r_max!r}")
        object.__setattr__(self, "gamma", complex(self.gamma))

    @classmethod
    def at_fraction(cls, u0: float, frac: float, phase: float = 0.0) -> "CoherentQubitPovm":
        r = np.sqrt(u0 * (1 - u0)) * frac
        return cls(u0, r * np.exp(1j * phase))

    @property
    def r_max(self) -> float:
        return float(np.sqrt(self.u0 * (1 - self.u0)))

    @property
    def gamma_abs(self) -> float:
        return abs(self.gamma)

    @property
    def phase(self) -> float:
        return float(np.angle(self.gamma)) if self.gamma != 0 else 0.0

    @property
    def effects(self) -> np.ndarray:
        g = self.gamma
        e0 = np.array([[self.u0, g], [np.conj(g), 1 - self.u0]], dtype=complex)
        return np.stack([e0, np.eye(2) - e0])

    @property
    def povm(self) -> Povm:
        return validate_povm(self.effects)

    def rotated(self) -> "CoherentQubitPovm":
        """Same member with the phase of γ removed by diag(1, e^{-i arg γ})."""
        return CoherentQubitPovm(self.u0, self.gamma_abs)

    def lower_bound(self) -> float:
        return lower_bound_probs([self.u0, self.u0])


PVM_Z = Rank1Pvm.computational(2)


# -- integrands ---------------------------------------------------------------


def _p_r(povm: CoherentQubitPovm, theta, phi):
    """p₀ = cos²(θ/2), r₀ = u₀cos²(θ/2) + (1−u₀)sin²(θ/2) + Re(γe^{iφ}) sinθ."""
    c2 = np.cos(theta / 2) ** 2
    p0 = c2
    r0 = povm.u0 * c2 + (1 - povm.u0) * (1 - c2) + np.real(povm.gamma * np.exp(1j * phi)) * np.sin(theta)
    r0 = np.clip(r0, 0.0, 1.0)
    return p0, 1 - p0, r0, 1 - r0


def infidelity_integrand(povm: CoherentQubitPovm):
    def f(theta, phi):
        p0, p1, r0, r1 = _p_r(povm, theta, phi)
        return infidelity(np.stack([p0, p1], axis=-1), np.stack([r0, r1], axis=-1))

    return f


def exact_fidelity(povm: CoherentQubitPovm, quad: BlochQuadrature | None = None, tol: float = 1e-6) -> QuadEstimate:
    """F̄ for the family member by Bloch quadrature with a doubling error estimate.

    The infidelity is integrated and subtracted from 1, which keeps the
    small gap F̄ − lb free of cancellation.
    """
    est = bloch_quad(infidelity_integrand(povm), quad, tol=tol, max_levels=2)
    return QuadEstimate(1.0 - est.value, est.error, est.quad)


def fg_gap(pvm: Rank1Pvm, povm: Povm, l: int, m: int, psi) -> np.ndarray | float:
    """f_{l,m}(ψ) − g_{l,m}(ψ) with
    f = √(p_l r_l)√(p_m r_m) and g = √(u_l u_m) p_l p_m.

    ``psi`` may be a PureState or an array of amplitude rows (..., d).
    """
    if l == m:
        raise ValueError("need l != m")
    v = np.asarray(getattr(psi, "amplitudes", psi), dtype=complex)
    b = pvm.basis
    p = np.abs(v @ b.conj()) ** 2
    r = np.clip(np.einsum("...i,kij,...j->...k", v.conj(), povm.effects[[l, m]], v).real, 0.0, None)
    u = np.einsum("ik,kij,jk->k", b[:, [l, m]].conj(), povm.effects[[l, m]], b[:, [l, m]]).real
    f = np.sqrt(p[..., l] * r[..., 0]) * np.sqrt(p[..., m] * r[..., 1])
    g = np.sqrt(u[0] * u[1]) * p[..., l] * p[..., m]
    out = f - g
    return float(out) if np.ndim(out) == 0 else out


# -- regions A_{j,γ} ------------------------------------------------------------


def region_value(povm: CoherentQubitPovm, j: int, theta, phi):
    """⟨ψ|E_j − u_jΠ_j|ψ⟩ evaluated directly on Bloch-sphere states."""
    if j not in (0, 1):
        raise ValueError("j must be 0 or 1")
    e = povm.effects[j].copy()
    e[j, j] = 0.0  # u_j = E_j^{jj}, so E_j − u_jΠ_j zeroes that entry
    v = bloch_states(theta, phi)
    return np.einsum("...i,ij,...j->...", v.conj(), e, v).real


def region_membership(povm: CoherentQubitPovm, j: int, theta, phi):
    out = region_value(povm, j, theta, phi) < 0
    return bool(out) if np.ndim(out) == 0 else out


def region_envelope(povm: CoherentQubitPovm, j: int, theta, phi):
    """Analytic angular ranges containing A_{j,γ}, after rotating arg γ into φ."""
    theta = np.asarray(theta, dtype=float)
    g = povm.gamma_abs
    if g == 0:
        return np.zeros(np.broadcast(theta, phi).shape, dtype=bool)
    c = np.cos(np.asarray(phi) + povm.phase)
    with np.errstate(divide="ignore"):
        if j == 0:
            t = np.real(povm.effects[0][1, 1])
            lim = 2 * arccot(-t / (2 * g * c))
            return (c < 0) & (theta <= lim)
        t = np.real(povm.effects[1][0, 0])
        lim = 2 * arccot(t / (2 * g * c))
        return (c > 0) & (np.pi - theta <= lim)


def _half_range(fn) -> float:
    val, _ = integrate.quad(fn, np.pi / 2, 3 * np.pi / 2, epsabs=1e-13, epsrel=1e-11, limit=200)
    return val


def _off_weight(povm: CoherentQubitPovm, j: int) -> float:
    """tr(E₀Π₁) for j = 0, tr(E₁Π₀) for j = 1."""
    return float(np.real(povm.effects[0][1, 1] if j == 0 else povm.effects[1][0, 0]))


def measure_bound(povm: CoherentQubitPovm, j: int) -> float:
    """¼ − (1/4π)∫_{π/2}^{3π/2} cos(2 arccot(−t_j/(2|γ|cosφ))) dφ."""
    g = povm.gamma_abs
    if g == 0:
        return 0.0
    t = _off_weight(povm, j)
    return 0.25 - _half_range(lambda ph: np.cos(2 * arccot(-t / (2 * g * np.cos(ph))))) / (4 * np.pi)


def delta_term(povm: CoherentQubitPovm, j: int) -> float:
    """(√(u₀u₁)/2π)∫_{π/2}^{3π/2} [cos²φ/(cos²φ + (t_j/2|γ|)²)]² dφ."""
    g = povm.gamma_abs
    if g == 0:
        return 0.0
    a2 = (_off_weight(povm, j) / (2 * g)) ** 2
    u1 = float(np.real(povm.effects[1][1, 1]))
    pref = np.sqrt(povm.u0 * u1) / (2 * np.pi)
    return float(pref * _half_range(lambda ph: (np.cos(ph) ** 2 / (np.cos(ph) ** 2 + a2)) ** 2))


@dataclass(frozen=True)
class RegionReport:
    mu_A0_bound: float
    mu_A1_bound: float
    mu_A0_exact: float
    mu_A1_exact: float
    delta0: float = 0.0
    delta1: float = 0.0
    lhs: float = 0.0
    full_integral: float = 0.0
    sufficient_ok: bool = False
    phase_rotation: float = 0.0


def _grid(quad: BlochQuadrature | None):
    return (quad or BlochQuadrature()).grid()


def measure_bounds(povm: CoherentQubitPovm, quad: BlochQuadrature | None = None) -> RegionReport:
    """Analytic measure bounds for A₀, A₁ next to their masked-quadrature measures."""
    rot = povm.rotated()
    th, ph, w = _grid(quad)
    exact = [float(np.sum(w * region_membership(rot, j, th, ph))) for j in (0, 1)]
    return RegionReport(measure_bound(rot, 0), measure_bound(rot, 1), exact[0], exact[1],
                        phase_rotation=povm.phase)


def sufficient_condition(povm: CoherentQubitPovm, quad: BlochQuadrature | None = None) -> RegionReport:
    """Evaluate ∫_{(A₀∪A₁)^c}(f − g) ≥ δ₀ + δ₁ on the phase-rotated member.

    The complement is masked pointwise on the quadrature nodes.
    """
    rot = povm.rotated()
    th, ph, w = _grid(quad)
    inside = region_membership(rot, 0, th, ph) | region_membership(rot, 1, th, ph)
    gap = fg_gap(PVM_Z, rot.povm, 0, 1, bloch_states(th, ph))
    lhs = float(np.sum(w * gap * ~inside))
    full = float(np.sum(w * gap))
    d0, d1 = delta_term(rot, 0), delta_term(rot, 1)
    mb = measure_bounds(rot, quad)
    return RegionReport(mb.mu_A0_bound, mb.mu_A1_bound, mb.mu_A0_exact, mb.mu_A1_exact,
                        d0, d1, lhs, full, bool(lhs >= d0 + d1), povm.phase)


# -- sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    u0: float
    gamma_abs: float
    F_exact: float
    lb: float
    ub: float
    gap: float
    quad_error: float

    def csv_fields(self) -> list:
        return [f"{v:.12g}" for v in (self.u0, self.gamma_abs, self.F_exact, self.lb, self.ub, self.gap)]


def _row(u0: float, gamma: complex, quad, tol) -> SweepRow:
    povm = CoherentQubitPovm(u0, gamma)
    est = exact_fidelity(povm, quad, tol)
    lb = povm.lower_bound()
    return SweepRow(u0, abs(gamma), est.value, lb, 1 - lb, est.value - lb, est.error)


def gamma_grid(u0: float, points: int) -> np.ndarray:
    r = np.sqrt(u0 * (1 - u0))
    return np.linspace(0.0, r, points)


def sweep_table1(quad=None, u0_values=(0.99, 0.995, 0.999), gamma_points: int = 50, *,
                 phase: float = 0.0, tol: float = 1e-6, threads: int = 1) -> list:
    """Exact F̄, lb and ub = 1 − lb over γ ∈ [0, R_max] for each u₀ (row order fixed)."""
    jobs = []
    for u0 in u0_values:
        if not 0.5 <= u0 < 1:
            raise OutOfRange("u0 must lie in [1/2, 1)")
        for g in gamma_grid(u0, gamma_points):
            jobs.append((float(u0), g * np.exp(1j * phase)))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda a: _row(a[0], a[1], quad, tol), jobs))
    return [_row(u0, g, quad, tol) for u0, g in jobs]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


def desk_u0_grid() -> np.ndarray:
    return np.round(np.arange(50, 100) / 100, 2)


def full_u0_grid() -> np.ndarray:
    """u₀ from 0.5 to 0.9999 in steps of 1e-4 (hours of runtime at default nodes)."""
    return np.round(np.arange(5000, 10000) / 10000, 4)


@dataclass(frozen=True)
class ScanResult:
    violations: list
    max_negative_gap: float
    rows: list


def violation_scan(u0_grid=None, gamma_points: int = 20, quad=None, *, tol_factor: float = 5.0,
                   threads: int = 1) -> ScanResult:
    """Flag (u₀, |γ|) with F̄ < lb − tol_scan, tol_scan = 5 × quadrature error estimate.

    ``max_negative_gap`` is the largest lb − F̄ seen (negative when F̄ > lb everywhere).
    """
    u0_grid = desk_u0_grid() if u0_grid is None else u0_grid
    rows = sweep_table1(quad, u0_grid, gamma_points, threads=threads)
    bad = [r for r in rows if r.F_exact < r.lb - tol_factor * max(r.quad_error, 1e-15)]
    worst = max(r.lb - r.F_exact for r in rows)
    return ScanResult(bad, float(worst), rows)
