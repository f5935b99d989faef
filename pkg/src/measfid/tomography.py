"""Full POVM reconstruction from d² probe states, used as a cost baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DimMismatch, MeasurementModelError, NumericalFailure, Povm, Rank1Pvm, validate_povm
from .device import NoisyDevice


class ProjectionFailed(NumericalFailure):
    pass


@dataclass(frozen=True)
class TomographyPlan:
    """Probe states in the order: d basis states, then |ψ⁺_ij⟩ and |ψ⁻_ij⟩ for i < j."""

    dim: int
    shots_per_state: int = 10_000
    pvm: Rank1Pvm | None = None
    lam: float = 1.0

    def __post_init__(self):
        if self.pvm is not None and self.pvm.dim != self.dim:
            raise DimMismatch("plan basis dimension differs from plan dim")

    @property
    def basis(self) -> Rank1Pvm:
        return self.pvm or Rank1Pvm.computational(self.dim)

    @property
    def pairs(self) -> list:
        return [(i, j) for i in range(self.dim) for j in range(i + 1, self.dim)]

    def input_states(self) -> np.ndarray:
        """Amplitude rows for all d² probe states (in the lab frame)."""
        b = self.basis.basis
        rows = [b[:, j] for j in range(self.dim)]
        rows += [(b[:, i] + b[:, j]) / np.sqrt(2) for i, j in self.pairs]
        rows += [(b[:, i] + 1j * b[:, j]) / np.sqrt(2) for i, j in self.pairs]
        return np.array(rows, dtype=complex)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "shots_per_state": self.shots_per_state, "lambda": self.lam}


def cost_model(d: int, shots_per_state: int) -> dict:
    if d < 1:
        raise ValueError("d must be positive")
    return {"states": d * d, "probabilities": d**3, "total_shots": d * d * shots_per_state}


@dataclass
class ReconstructedPovm:
    raw_effects: np.ndarray
    povm: Povm
    diagnostics: dict = field(default_factory=dict)
    probabilities: np.ndarray | None = None


def assemble_effects(probs: np.ndarray, plan: TomographyPlan) -> np.ndarray:
    """Effects from the (d², d) table of estimated tr(E_k |φ⟩⟨φ|).

    With P_i = tr(E_kΠ_i) and P^±_ij the probe probabilities,
    P^+ + iP^- − (1+i)/2 (P_i + P_j) = tr(E_k|ψ_i⟩⟨ψ_j|) = ⟨ψ_j|E_k|ψ_i⟩,
    so the combination fills entry (j, i); entry (i, j) is its conjugate.
    """
    d = plan.dim
    pairs = plan.pairs
    npair = len(pairs)
    diag = probs[:d]
    plus = probs[d : d + npair]
    minus = probs[d + npair :]
    eff = np.zeros((d, d, d), dtype=complex)
    for k in range(d):
        eff[k][np.diag_indices(d)] = diag[:, k]
        for n, (i, j) in enumerate(pairs):
            c = plus[n, k] + 1j * minus[n, k] - (1 + 1j) / 2 * (diag[i, k] + diag[j, k])
            eff[k, j, i] = c
            eff[k, i, j] = np.conj(c)
    b = plan.basis
    return np.stack([b.from_basis(e) for e in eff])


def _msqrt_inv(s: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(s)
    return (v / np.sqrt(w)) @ v.conj().T


def project_effects(raw: np.ndarray):
    """Hermitize, clip negative eigenvalues, then restore completeness.

    Completeness uses E_k ← S^{-1/2} E_k S^{-1/2} with S = ΣE_k when S is
    positive definite, else the additive shift E_k ← E_k + (𝟙 − S)/d.
    """
    d = raw.shape[1]
    herm = (raw + np.conj(np.swapaxes(raw, 1, 2))) / 2
    herm_res = float(np.max(np.abs(raw - herm)))
    pre_complete = float(np.max(np.abs(raw.sum(axis=0) - np.eye(d))))
    clipped = []
    neg = 0
    for e in herm:
        w, v = np.linalg.eigh(e)
        neg += int(np.sum(w < 0))
        clipped.append((v * np.clip(w, 0.0, None)) @ v.conj().T)
    clipped = np.array(clipped)
    s = clipped.sum(axis=0)
    s = (s + s.conj().T) / 2
    if np.linalg.eigvalsh(s)[0] > 0:
        t = _msqrt_inv(s)
        fixed = np.array([t @ e @ t for e in clipped])
        method = "congruence"
    else:
        fixed = clipped + (np.eye(d) - s)[None] / d
        method = "additive"
    fixed = (fixed + np.conj(np.swapaxes(fixed, 1, 2))) / 2
    post_complete = float(np.max(np.abs(fixed.sum(axis=0) - np.eye(d))))
    diag = {
        "hermitize_residual": herm_res,
        "negative_eigs_clipped": neg,
        "completeness_residual_raw": pre_complete,
        "completeness_residual": post_complete,
        "completeness_method": method,
    }
    return fixed, diag


def probe_probabilities(dev: NoisyDevice, plan: TomographyPlan, *, exact: bool = False) -> np.ndarray:
    """(d², d) table of outcome probabilities for every probe state."""
    rows = []
    for a in plan.input_states():
        rho = np.outer(a, a.conj())
        if exact:
            rows.append(dev.povm.probabilities(rho))
        else:
            counts = dev.outcome_counts(rho, plan.shots_per_state)
            rows.append((counts + plan.lam) / (plan.shots_per_state + plan.dim * plan.lam))
    return np.array(rows)


def reconstruct(dev: NoisyDevice, plan: TomographyPlan, *, exact: bool = False) -> ReconstructedPovm:
    """Estimate all d³ probe probabilities and rebuild the effects.

    ``exact`` reads probabilities from the model instead of sampling.
    """
    if plan.dim != dev.dim:
        raise DimMismatch("plan and device dimensions differ")
    probs = probe_probabilities(dev, plan, exact=exact)
    raw = assemble_effects(probs, plan)
    fixed, diag = project_effects(raw)
    limit = max(10 * diag["completeness_residual_raw"], 1e-9)
    if diag["completeness_residual"] > limit:
        raise ProjectionFailed(
            f"completeness residual {diag['completeness_residual']:.3e} after projection exceeds {limit:.3e}")
    try:
        povm = validate_povm(fixed)
    except MeasurementModelError as exc:
        raise ProjectionFailed(f"projected effects are still invalid: {exc}") from exc
    return ReconstructedPovm(raw, povm, diag, probs)
