"""Validated state and measurement types on a d-dimensional Hilbert space.

Matrices are plain ``numpy`` complex arrays; the wrappers below only pin down
the invariants (normalization, positivity, completeness) that every other
module relies on. All arrays held by the types are made read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOL_PSD = 1e-10
TOL_HERM = 1e-10
TOL_COMPLETE = 1e-9
TOL_NORM = 1e-10


class MeasurementModelError(ValueError):
    """Base class for invalid states, effects and bound inputs."""


class DimMismatch(MeasurementModelError):
    pass


class NotHermitian(MeasurementModelError):
    def __init__(self, residual: float, index: int | None = None):
        self.residual = residual
        self.index = index
        where = "" if index is None else f" (effect {index})"
        super().__init__(f"matrix not hermitian{where}: residual {residual:.3e}")


class NotPsd(MeasurementModelError):
    def __init__(self, index: int | None, min_eig: float):
        self.index = index
        self.min_eig = min_eig
        where = "matrix" if index is None else f"effect {index}"
        super().__init__(f"{where} not positive semidefinite: min eigenvalue {min_eig:.3e}")


class NotComplete(MeasurementModelError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"effects do not sum to identity: residual {residual:.3e}")


class NotNormalized(MeasurementModelError):
    pass


class OutOfRange(MeasurementModelError):
    pass


class NumericalFailure(ArithmeticError):
    """An eigendecomposition or integration did not converge."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise MeasurementModelError("matrix has non-finite entries")
    return a


def hermitian_residual(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def is_hermitian(m, tol: float = TOL_HERM) -> bool:
    return hermitian_residual(m) <= tol


def hermitize(m, tol: float = TOL_HERM) -> np.ndarray:
    """Return (m + m†)/2, refusing matrices whose asymmetry exceeds ``tol``."""
    m = as_matrix(m)
    res = hermitian_residual(m)
    if res > tol:
        raise NotHermitian(res)
    return (m + m.conj().T) / 2


def eigh(m, tol_herm: float = TOL_HERM):
    """Hermitian eigendecomposition after explicit Hermitization."""
    h = hermitize(m, tol_herm)
    try:
        return np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalFailure(str(exc)) from exc


def min_eigenvalue(m, tol_herm: float = TOL_HERM) -> float:
    return float(eigh(m, tol_herm)[0][0])


def is_psd(m, tol: float = TOL_PSD, tol_herm: float = TOL_HERM) -> bool:
    return is_hermitian(m, tol_herm) and min_eigenvalue(m, tol_herm) >= -tol


def psd_sqrt(m, tol_herm: float = TOL_HERM) -> np.ndarray:
    w, v = eigh(m, tol_herm)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        if a.size == 0:
            raise DimMismatch("empty state vector")
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > TOL_NORM:
            raise NotNormalized(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amplitudes", _frozen(a))

    @classmethod
    def normalized(cls, amplitudes) -> "PureState":
        a = np.asarray(amplitudes, dtype=complex).ravel()
        return cls(a / np.linalg.norm(a))

    @classmethod
    def basis(cls, dim: int, k: int) -> "PureState":
        a = np.zeros(dim, dtype=complex)
        a[k] = 1.0
        return cls(a)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.projector())


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        res = hermitian_residual(m)
        if res > TOL_HERM:
            raise NotHermitian(res)
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if abs(tr - 1.0) > TOL_NORM:
            raise NotNormalized(f"density matrix trace {tr!r} differs from 1")
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -TOL_PSD:
            raise NotPsd(None, lo)
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def as_density(x) -> np.ndarray:
    """Matrix view of a DensityMatrix, PureState or raw array."""
    if isinstance(x, DensityMatrix):
        return x.matrix
    if isinstance(x, PureState):
        return x.projector()
    return as_matrix(x)


@dataclass(frozen=True)
class Povm:
    """A validated POVM; build through :func:`validate_povm`."""

    effects: np.ndarray
    min_eig: float = field(default=0.0, compare=False)
    completeness_residual: float = field(default=0.0, compare=False)

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[0]

    def __len__(self):
        return self.n_outcomes

    def __getitem__(self, k) -> np.ndarray:
        return self.effects[k]

    def probabilities(self, state) -> np.ndarray:
        """Raw tr(E_k σ) for every outcome (no clipping)."""
        rho = as_density(state)
        return np.einsum("kij,ji->k", self.effects, rho).real


def validate_povm(
    effects,
    tol_psd: float = TOL_PSD,
    tol_complete: float = TOL_COMPLETE,
    tol_herm: float = TOL_HERM,
) -> Povm:
    """Check positivity and completeness of ``effects`` and wrap them.

    Raises :class:`NotPsd` naming the worst offending effect, or
    :class:`NotComplete` with the max-entry residual of ΣE_k − 𝟙.
    """
    mats = [as_matrix(e) for e in effects]
    if not mats:
        raise DimMismatch("a POVM needs at least one effect")
    d = mats[0].shape[0]
    if any(m.shape != (d, d) for m in mats):
        raise DimMismatch("effects have differing dimensions")
    herm = []
    for k, m in enumerate(mats):
        res = hermitian_residual(m)
        if res > tol_herm:
            raise NotHermitian(res, k)
        herm.append((m + m.conj().T) / 2)
    mins = [float(np.linalg.eigvalsh(m)[0]) for m in herm]
    worst = int(np.argmin(mins))
    if mins[worst] < -tol_psd:
        raise NotPsd(worst, mins[worst])
    residual = float(np.max(np.abs(sum(herm) - np.eye(d))))
    if residual > tol_complete:
        raise NotComplete(residual)
    return Povm(_frozen(np.stack(herm)), min_eig=mins[worst], completeness_residual=residual)


@dataclass(frozen=True)
class Rank1Pvm:
    """Ideal rank-1 projective measurement given by an orthonormal basis.

    ``basis`` holds the basis vectors as columns: ``basis[:, k]`` is |ψ_k⟩.
    """

    basis: np.ndarray

    def __post_init__(self):
        b = as_matrix(self.basis)
        gram = b.conj().T @ b
        err = float(np.max(np.abs(gram - np.eye(b.shape[0]))))
        if err > TOL_NORM:
            raise MeasurementModelError(f"basis not orthonormal: Gram residual {err:.3e}")
        object.__setattr__(self, "basis", _frozen(b))

    @classmethod
    def computational(cls, dim: int) -> "Rank1Pvm":
        return cls(np.eye(dim))

    @classmethod
    def from_states(cls, states) -> "Rank1Pvm":
        return cls(np.column_stack([np.asarray(getattr(s, "amplitudes", s)) for s in states]))

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def state(self, k: int) -> PureState:
        return PureState(self.basis[:, k])

    def projector(self, k: int) -> np.ndarray:
        v = self.basis[:, k]
        return np.outer(v, v.conj())

    @property
    def projectors(self) -> np.ndarray:
        return np.einsum("ik,jk->kij", self.basis, self.basis.conj())

    def as_povm(self) -> Povm:
        return validate_povm(self.projectors)

    def to_basis(self, m: np.ndarray) -> np.ndarray:
        """Matrix elements ⟨ψ_i|m|ψ_j⟩."""
        return self.basis.conj().T @ m @ self.basis

    def from_basis(self, m: np.ndarray) -> np.ndarray:
        return self.basis @ m @ self.basis.conj().T


def overlaps(pvm: Rank1Pvm, povm: Povm) -> np.ndarray:
    """The vector u_k = tr(Π_k E_k)."""
    if pvm.dim != povm.dim or povm.n_outcomes != pvm.dim:
        raise DimMismatch("PVM and POVM must share dimension d with d outcomes")
    b = pvm.basis
    return np.einsum("ik,kij,jk->k", b.conj(), povm.effects, b).real


def overlap(psi: PureState, m, *, return_residual: bool = False):
    """⟨ψ|m|ψ⟩ for hermitian ``m``; optionally also the imaginary residual."""
    m = as_matrix(m)
    res = hermitian_residual(m)
    if res > TOL_HERM:
        raise NotHermitian(res)
    a = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=complex)
    if a.size != m.shape[0]:
        raise DimMismatch("state and matrix dimensions differ")
    z = np.vdot(a, m @ a)
    if return_residual:
        return float(z.real), float(abs(z.imag))
    return float(z.real)


def state_fidelity(a, b) -> float:
    """Uhlmann fidelity (tr√(√a b √a))² between two density matrices."""
    ma, mb = as_density(a), as_density(b)
    if ma.shape != mb.shape:
        raise DimMismatch("states have different dimensions")
    return float(fidelity_batch(ma[None], mb[None])[0])


def fidelity_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Uhlmann fidelity over stacks of density matrices, shapes (n, d, d)."""
    a = (a + np.conj(np.swapaxes(a, -1, -2))) / 2
    b = (b + np.conj(np.swapaxes(b, -1, -2))) / 2
    try:
        w, v = np.linalg.eigh(a)
        sa = (v * np.sqrt(np.clip(w, 0.0, None))[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
        m = sa @ b @ sa
        m = (m + np.conj(np.swapaxes(m, -1, -2))) / 2
        lam = np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalFailure(str(exc)) from exc
    f = np.sum(np.sqrt(np.clip(lam, 0.0, None)), axis=-1) ** 2
    return np.clip(f, 0.0, 1.0)
