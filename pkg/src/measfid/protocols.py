"""Sampling protocols that estimate the fidelity lower bounds, plus trial counts."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .core import DimMismatch, Rank1Pvm
from .device import InsufficientConditionedSamples, NoisyDevice
from .haar import substream

# sub-stream key for pair selection, disjoint from device streams
PAIR_STREAM = 0x5041


class ZeroTrials(ValueError):
    pass


@dataclass(frozen=True)
class EstimationConfig:
    """Accuracy ``epsilon`` with confidence 1 − ``delta``.

    ``lam`` is the additive smoothing weight. ``pairs`` overrides the Hoeffding
    pair count K, ``pair_range`` tightens the range [a, b] it assumes.
    With ``reuse_estimates`` each index is estimated once and shared by every
    pair that draws it; the default re-estimates per draw so the shot count is
    2·K·N regardless of d.
    """

    epsilon: float
    delta: float
    lam: float = 1.0
    seed: int = 0
    u_guess: float = 0.99
    q_guess: float | None = None
    pair_range: tuple = (0.0, 1.0)
    pairs: int | None = None
    exhaustive_pairs: bool = False
    reuse_estimates: bool = False
    max_first_stage_factor: int = 1000

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        for name in ("u_guess", "q_guess"):
            v = getattr(self, name)
            if v is not None and not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        a, b = self.pair_range
        if not 0 <= a <= b <= 1:
            raise ValueError("pair_range must satisfy 0 <= a <= b <= 1")
        object.__setattr__(self, "pair_range", (float(a), float(b)))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        out["pair_range"] = list(self.pair_range)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EstimationConfig":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        if "pair_range" in data:
            data["pair_range"] = tuple(data["pair_range"])
        return cls(**data)


def _exact(x) -> Fraction:
    # decimal reading of the float, so 0.99 means 99/100
    return Fraction(repr(float(x)))


def chebyshev_multiplier(delta: float) -> int:
    """Smallest integer j with 1/j² ≤ δ."""
    t = 1 / _exact(delta)
    c = math.ceil(t)
    return math.isqrt(c - 1) + 1


def chebyshev_trials(cfg: EstimationConfig, u_guess: float | None = None) -> int:
    """N = ⌈j_δ² u(1 − u)/ε²⌉ trials for accuracy ε with confidence 1 − δ."""
    u = _exact(cfg.u_guess if u_guess is None else u_guess)
    if not 0 <= u <= 1:
        raise ValueError("u_guess must lie in [0, 1]")
    j = chebyshev_multiplier(cfg.delta)
    return math.ceil(j * j * u * (1 - u) / _exact(cfg.epsilon) ** 2)


def hoeffding_pairs(cfg: EstimationConfig, range_: tuple | None = None) -> int:
    """K = ⌈ln(2/δ)(b − a)²/(2ε²)⌉ pair samples."""
    a, b = cfg.pair_range if range_ is None else range_
    if a > b:
        raise ValueError("need a <= b")
    spread = (_exact(b) - _exact(a)) ** 2 / (2 * _exact(cfg.epsilon) ** 2)
    if spread == 0:
        return 0
    return math.ceil(math.log(2 / cfg.delta) * float(spread))


def laplace_estimate(successes, trials, lam: float, bins: int = 2):
    """(n + λ)/(N + bins·λ); λ = 0 is the plain frequency."""
    n = np.asarray(successes, dtype=float)
    N = np.asarray(trials, dtype=float)
    if np.any(n > N) or np.any(n < 0):
        raise ValueError("successes must lie in [0, trials]")
    den = N + bins * lam
    if np.any(den == 0):
        raise ZeroTrials("no trials and no smoothing")
    out = (n + lam) / den
    return float(out) if out.ndim == 0 else out


@dataclass
class ProtocolReport:
    lb_hat: float
    per_index: dict
    K: int
    pairs: list
    config: dict
    trial_accounting: dict
    seeds: dict = field(default_factory=dict)
    x_hat: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lb_hat": self.lb_hat,
            "x_hat": self.x_hat,
            "K": self.K,
            "pairs": [list(p) for p in self.pairs],
            "per_index": {str(k): v for k, v in sorted(self.per_index.items())},
            "trial_accounting": self.trial_accounting,
            "config": self.config,
            "seeds": self.seeds,
        }


def draw_pairs(d: int, cfg: EstimationConfig) -> np.ndarray:
    """(K, 2) index pairs: uniform with replacement from {0..d−1}², or all d² pairs."""
    if cfg.exhaustive_pairs:
        if d > 64:
            raise ValueError("exhaustive pair enumeration is limited to d <= 64")
        l, m = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        return np.column_stack([l.ravel(), m.ravel()])
    K = cfg.pairs if cfg.pairs is not None else hoeffding_pairs(cfg)
    if K <= 0:
        raise ValueError("pair count K must be positive")
    return substream(cfg.seed, PAIR_STREAM).integers(0, d, size=(K, 2))


def _basis_inputs(dev: NoisyDevice, pvm: Rank1Pvm):
    if dev.dim != pvm.dim:
        raise DimMismatch("device and PVM dimensions differ")
    return [pvm.projector(j) for j in range(pvm.dim)]


def _per_draw_counts(dev, inputs, flat, N, reuse):
    """Successes for each drawn index: one binomial batch per distinct index."""
    succ = np.empty(flat.size, dtype=np.int64)
    for j in np.unique(flat):
        sel = flat == j
        if reuse:
            succ[sel] = dev.count_outcome(inputs[j], j, N)
        else:
            succ[sel] = dev.count_outcome(inputs[j], j, N, size=int(sel.sum()))
    return succ


def _report_seeds(dev, cfg):
    return {"config_seed": cfg.seed, "device_seed": dev.seed, "device_stream": dev.stream_id}


def run_protocol_probs(dev: NoisyDevice, pvm: Rank1Pvm, cfg: EstimationConfig, *, exact: bool = False) -> ProtocolReport:
    """Estimate lb from success frequencies on the ideal basis states.

    Draws K index pairs, estimates û_j for each pair member from N Bernoulli
    trials (smoothed), and returns (1 + d·mean √(û_l û_m))/(1 + d). With
    ``exact`` the model's u_j replace the sampled estimates.
    """
    d = pvm.dim
    inputs = _basis_inputs(dev, pvm)
    pairs = draw_pairs(d, cfg)
    flat = pairs.ravel()
    shots0 = dev.shots
    if exact:
        u_true = np.array([dev.probabilities(inputs[j])[j] for j in range(d)])
        u_hat = u_true[flat]
        N = 0
        per_index = {int(j): {"n_trials": 0, "successes": 0, "u_hat": float(u_true[j])} for j in np.unique(flat)}
    else:
        N = chebyshev_trials(cfg)
        succ = _per_draw_counts(dev, inputs, flat, N, cfg.reuse_estimates)
        u_hat = laplace_estimate(succ, np.full(flat.size, N), cfg.lam)
        per_index = {}
        for j in np.unique(flat):
            sel = flat == j
            draws = 1 if cfg.reuse_estimates else int(sel.sum())
            s = int(succ[sel][0]) if cfg.reuse_estimates else int(succ[sel].sum())
            per_index[int(j)] = {"n_trials": N * draws, "successes": s,
                                 "u_hat": laplace_estimate(s, N * draws, cfg.lam)}
    u_hat = np.asarray(u_hat).reshape(-1, 2)
    x_hat = float(np.mean(np.sqrt(u_hat[:, 0] * u_hat[:, 1])))
    lb_hat = (1 + d * x_hat) / (1 + d)
    return ProtocolReport(
        lb_hat=float(lb_hat),
        x_hat=x_hat,
        per_index=per_index,
        K=len(pairs),
        pairs=pairs.tolist(),
        config=cfg.to_dict(),
        trial_accounting={"N1": N, "N2": None, "M2": None, "device_shots": dev.shots - shots0},
        seeds=_report_seeds(dev, cfg),
    )


def _trials_until(dev: NoisyDevice, state, k: int, successes: np.ndarray, cap: int) -> np.ndarray:
    """Total trials needed to observe ``successes`` outcome-k events (negative binomial)."""
    p = dev.probabilities(state)[k]
    if p <= 0.0:
        raise InsufficientConditionedSamples(f"outcome {k} never occurs on its basis state")
    fails = dev.rng.negative_binomial(successes, p)
    total = successes + fails
    if np.any(total > cap):
        raise InsufficientConditionedSamples(f"more than {cap} first-stage trials needed for outcome {k}")
    dev.shots += int(total.sum())
    return total


def run_protocol_states(dev: NoisyDevice, pvm: Rank1Pvm, cfg: EstimationConfig, *, exact: bool = False) -> ProtocolReport:
    """Estimate the output-state bound from first and repeated measurements.

    Per drawn index j: N1 first-stage shots on |ψ_j⟩; every outcome j is
    followed by a second measurement of ρ_j. If fewer than N2 outcomes j were
    seen, first-stage shots continue until N2 have been (M2 shots in total).
    û_j comes from the first stage, Q̂_j from the repeats.
    """
    if dev.output_states is None:
        from .device import NoOutputStates

        raise NoOutputStates("protocol needs device output states")
    d = pvm.dim
    inputs = _basis_inputs(dev, pvm)
    pairs = draw_pairs(d, cfg)
    flat = pairs.ravel()
    shots0 = dev.shots
    per_index = {}
    N1 = N2 = 0
    m2_max = None
    if exact:
        u_true = np.array([dev.probabilities(inputs[j])[j] for j in range(d)])
        q_true = np.array([dev.repeat_probability(j, inputs[j]) for j in range(d)])
        u_hat, q_hat = u_true[flat], q_true[flat]
        for j in np.unique(flat):
            per_index[int(j)] = {"n_trials": 0, "successes": 0, "u_hat": float(u_true[j]),
                                 "q_trials": 0, "q_successes": 0, "q_hat": float(q_true[j])}
    else:
        N1 = chebyshev_trials(cfg, cfg.u_guess)
        N2 = chebyshev_trials(cfg, cfg.u_guess if cfg.q_guess is None else cfg.q_guess)
        cap = cfg.max_first_stage_factor * max(N1, N2, 1)
        u_hat = np.empty(flat.size)
        q_hat = np.empty(flat.size)
        for j in np.unique(flat):
            sel = flat == j
            reps = 1 if cfg.reuse_estimates else int(sel.sum())
            first = np.atleast_1d(dev.count_outcome(inputs[j], j, N1, size=reps))
            trials = np.full(reps, N1)
            short = first < N2
            if np.any(short):
                extra = _trials_until(dev, inputs[j], j, N2 - first[short], cap)
                trials[short] = N1 + extra
                first[short] = N2
                m2 = int(trials[short].max())
                m2_max = m2 if m2_max is None else max(m2_max, m2)
            rho_j = dev.output_state(j, inputs[j])
            second = np.atleast_1d(dev.count_outcome(rho_j, j, first))
            uh = laplace_estimate(first, trials, cfg.lam)
            qh = laplace_estimate(second, first, cfg.lam)
            u_hat[sel] = uh if not cfg.reuse_estimates else uh[0]
            q_hat[sel] = qh if not cfg.reuse_estimates else qh[0]
            per_index[int(j)] = {
                "n_trials": int(trials.sum()),
                "successes": int(first.sum()),
                "u_hat": laplace_estimate(int(first.sum()), int(trials.sum()), cfg.lam),
                "q_trials": int(first.sum()),
                "q_successes": int(second.sum()),
                "q_hat": laplace_estimate(int(second.sum()), int(first.sum()), cfg.lam),
            }
    z = np.sqrt(np.asarray(u_hat) * np.asarray(q_hat)).reshape(-1, 2)
    x_hat = float(np.mean(z[:, 0] * z[:, 1]))
    lb_hat = (1 + d * x_hat) / (1 + d)
    return ProtocolReport(
        lb_hat=float(lb_hat),
        x_hat=x_hat,
        per_index=per_index,
        K=len(pairs),
        pairs=pairs.tolist(),
        config=cfg.to_dict(),
        trial_accounting={"N1": N1, "N2": N2, "M2": m2_max, "device_shots": dev.shots - shots0},
        seeds=_report_seeds(dev, cfg),
    )


@dataclass(frozen=True)
class FkQkReport:
    rows: list
    y_bar: float
    z_bar: float

    @property
    def all_ok(self) -> bool:
        return all(r["ok"] for r in self.rows)

    @property
    def aggregate_ok(self) -> bool:
        return self.y_bar >= self.z_bar - 1e-12


def check_fk_qk(dev: NoisyDevice, pvm: Rank1Pvm) -> FkQkReport:
    """Model-level check of F_k = tr(ρ_kΠ_k) ≥ Q_k = tr(ρ_kE_k), plus Ȳ ≥ Z̄."""
    d = pvm.dim
    inputs = _basis_inputs(dev, pvm)
    rows = []
    u = np.empty(d)
    F = np.empty(d)
    Q = np.empty(d)
    for k in range(d):
        rho = dev.output_state(k, inputs[k])
        F[k] = float(np.real(np.trace(rho @ inputs[k])))
        Q[k] = float(np.real(np.trace(rho @ dev.povm.effects[k])))
        u[k] = float(np.real(np.trace(inputs[k] @ dev.povm.effects[k])))
        rows.append({"k": k, "F_k": float(F[k]), "Q_k": float(Q[k]), "ok": bool(F[k] >= Q[k] - 1e-12)})
    su = np.sqrt(np.clip(u, 0, None))
    y_bar = float(np.sum(su * np.sqrt(np.clip(F, 0, None))) ** 2 / d**2)
    z_bar = float(np.sum(su * np.sqrt(np.clip(Q, 0, None))) ** 2 / d**2)
    return FkQkReport(rows, y_bar, z_bar)
