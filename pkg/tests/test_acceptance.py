"""Acceptance criteria, each run at its stated tolerance and runtime budget."""

import math
import time
from fractions import Fraction

import numpy as np

from conftest import noisy_effects, random_effects
from measfid.core import Rank1Pvm, overlaps, validate_povm
from measfid.device import NoisyDevice
from measfid.haar import HaarSampler, mc_integrate, sym_projector
from measfid.metrics import (
    BoundInputs,
    avg_error,
    avg_fidelity_probs,
    lower_bound_probs,
    lower_bound_states,
)
from measfid.protocols import (
    EstimationConfig,
    check_fk_qk,
    chebyshev_trials,
    hoeffding_pairs,
    run_protocol_probs,
    run_protocol_states,
)
from measfid.qubit import CoherentQubitPovm, sweep_table1, violation_scan
from measfid.tomography import TomographyPlan, cost_model, reconstruct

Z = Rank1Pvm.computational(2)
PI = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_1_table_values(criterion):
    expected = {0.99: ("0.9933", "0.0067"), 0.995: ("0.9967", "0.0033"), 0.999: ("0.9993", "0.0007")}
    with Timer() as t:
        got = {}
        for u0 in expected:
            lb = lower_bound_probs([u0, u0])
            got[u0] = (lb, f"{lb:.4f}", f"{avg_error(lb):.4f}")
    exact = all(abs(lb - (1 + 2 * u0) / 3) <= 1e-12 for u0, (lb, _, _) in got.items())
    printed = all(got[u0][1:] == expected[u0] for u0 in expected)
    ok = criterion("1 closed-form bound table", exact and printed and t.seconds < 1,
                   f"{[g[1:] for g in got.values()]} runtime={t.seconds:.3f}s")
    assert ok


def test_2_coherence_sweep(criterion):
    with Timer() as t:
        rows = sweep_table1(None, (0.99, 0.995, 0.999), 50)
    below = [r for r in rows if r.F_exact < r.lb - 5 * r.quad_error]
    inversions = {}
    for u0 in (0.99, 0.995, 0.999):
        curve = [r for r in rows if r.u0 == u0]
        bad = []
        for a, b in zip(curve, curve[1:]):
            if b.gap > a.gap:
                bad.append(b.gap - a.gap <= 5 * (a.quad_error + b.quad_error))
        inversions[u0] = bad
    mono = all(len(b) <= 1 and all(b) for b in inversions.values())
    ok = criterion("2 coherence sweep", not below and mono and t.seconds < 120,
                   f"points={len(rows)} F<lb={len(below)} inversions={ {k: len(v) for k, v in inversions.items()} } "
                   f"min_gap={min(r.gap for r in rows):.3e} runtime={t.seconds:.1f}s")
    assert ok


def test_3_no_violation_scan(criterion):
    with Timer() as t:
        res = violation_scan(gamma_points=20)
    ok = criterion("3 desk-scale violation scan", not res.violations and len(res.rows) == 50 * 20 and t.seconds < 600,
                   f"points={len(res.rows)} violations={len(res.violations)} "
                   f"max(lb-F)={res.max_negative_gap:.3e} runtime={t.seconds:.1f}s")
    assert ok


def _second_moment_ok(d, n, seed):
    vecs = HaarSampler(d, seed=seed).sample_vectors(n)
    two = np.einsum("ni,nj->nij", vecs, vecs).reshape(n, d * d)
    samples = np.einsum("ni,nj->nij", two, two.conj()).reshape(n, -1)
    mean = samples.mean(axis=0)
    target = (sym_projector(d) / (d * (d + 1) / 2)).ravel()
    worst = 0.0
    for part in (np.real, np.imag):
        se = part(samples).std(axis=0, ddof=1) / np.sqrt(n)
        diff = np.abs(part(mean) - part(target))
        fixed = se == 0
        if np.any(diff[fixed] > 1e-15):
            return False, np.inf
        worst = max(worst, float(np.max(diff[~fixed] / se[~fixed])))
    return worst <= 4, worst


def test_4_symmetric_subspace_oracle(criterion):
    with Timer() as t:
        details, ok_all = [], True
        for d in (2, 3, 4):
            ok2, z2 = _second_moment_ok(d, 100_000, seed=d)
            rng = np.random.default_rng(100 + d)
            pvm = Rank1Pvm.computational(d)
            povm = validate_povm(random_effects(rng, d))
            eff = povm.effects

            def first_sum(v):
                p = np.abs(v) ** 2
                r = np.einsum("ni,kij,nj->nk", v.conj(), eff, v).real
                return np.sum(p * r, axis=1)

            mc = mc_integrate(first_sum, HaarSampler(d, seed=200 + d), 100_000)
            exact = (overlaps(pvm, povm).sum() + d) / (d * (d + 1))
            z1 = abs(mc.mean - exact) / mc.std_err
            ok_all &= ok2 and z1 <= 4
            details.append(f"d={d} max|z|_moment={z2:.2f} z_first_sum={z1:.2f}")
    ok = criterion("4 symmetric-subspace oracle", ok_all and t.seconds < 60,
                   "; ".join(details) + f" runtime={t.seconds:.1f}s")
    assert ok


def test_5_protocol_guarantee(criterion):
    dev = NoisyDevice(CoherentQubitPovm(0.99).povm, seed=2024)
    target = 0.993333
    eps = 0.005
    with Timer() as t:
        est = np.array([run_protocol_probs(dev.spawn(i + 1), Z, EstimationConfig(eps, 0.05, seed=i)).lb_hat
                        for i in range(200)])
    frac = float(np.mean(np.abs(est - target) > eps))
    ok = criterion("5 protocol guarantee", frac <= 0.05 + 0.03 and t.seconds < 300,
                   f"miss fraction={frac:.3f} mean={est.mean():.6f} max|err|={np.abs(est - target).max():.2e} "
                   f"runtime={t.seconds:.1f}s")
    assert ok


def test_6_dimension_independent_cost(criterion):
    cfg = EstimationConfig(0.01, 0.05, seed=6)
    with Timer() as t:
        shots = {}
        for d in (2, 4, 8):
            povm = validate_povm(noisy_effects(np.random.default_rng(d), d, 0.02))
            dev = NoisyDevice(povm, seed=d)
            run_protocol_probs(dev, Rank1Pvm.computational(d), cfg)
            shots[d] = dev.shots
        costs = {d: cost_model(d, 1000) for d in (2, 4, 8)}
        tomo = {}
        for d in (2, 4, 8):
            dev = NoisyDevice(validate_povm(random_effects(np.random.default_rng(d), d)), seed=d)
            reconstruct(dev, TomographyPlan(d, shots_per_state=1000))
            tomo[d] = dev.shots
    same = len(set(shots.values())) == 1 and shots[2] == 2 * hoeffding_pairs(cfg) * chebyshev_trials(cfg)
    states = [costs[d]["states"] for d in (2, 4, 8)] == [4, 16, 64]
    probs = [costs[d]["probabilities"] for d in (2, 4, 8)] == [8, 64, 512]
    tomo_ok = all(tomo[d] == d * d * 1000 for d in tomo)
    ok = criterion("6 dimension-independent cost", same and states and probs and tomo_ok and t.seconds < 60,
                   f"protocol shots={shots} tomography shots={tomo} runtime={t.seconds:.1f}s")
    assert ok


def test_7_tomography_roundtrip(criterion):
    with Timer() as t:
        worst = 0.0
        for d in (2, 3, 4):
            rng = np.random.default_rng(70 + d)
            for _ in range(20):
                povm = validate_povm(random_effects(rng, d))
                rec = reconstruct(NoisyDevice(povm), TomographyPlan(d), exact=True)
                worst = max(worst, float(np.max(np.abs(rec.povm.effects - povm.effects))))
        Ns = (1_000, 10_000, 100_000)
        errs = []
        rng = np.random.default_rng(7)
        povms = [validate_povm(random_effects(rng, 3)) for _ in range(20)]
        for N in Ns:
            e = []
            for i, povm in enumerate(povms):
                rec = reconstruct(NoisyDevice(povm, seed=i, stream_id=N), TomographyPlan(3, shots_per_state=N))
                e.append(np.sqrt(np.mean(np.abs(rec.povm.effects - povm.effects) ** 2)))
            errs.append(np.mean(e))
        slope = float(np.polyfit(np.log10(Ns), np.log10(errs), 1)[0])
    ok = criterion("7 tomography round-trip", worst <= 1e-12 and abs(slope + 0.5) <= 0.1 and t.seconds < 300,
                   f"exact max error={worst:.1e} sampled slope={slope:.3f} runtime={t.seconds:.1f}s")
    assert ok


def test_8a_output_state_protocol(criterion):
    dev = NoisyDevice(CoherentQubitPovm(0.99).povm, PI, seed=8)
    target = lower_bound_states(BoundInputs([0.99, 0.99], [0.99, 0.99]))
    eps = 0.005
    with Timer() as t:
        rep = run_protocol_states(dev, Z, EstimationConfig(eps, 0.05, seed=8))
    ok = criterion("8a output-state protocol", abs(rep.lb_hat - 0.986733) <= eps and t.seconds < 120,
                   f"lb_hat={rep.lb_hat:.6f} closed form={target:.6f} runtime={t.seconds:.1f}s")
    assert ok


def _random_density(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def test_8b_fk_qk_for_diagonal_effects(criterion):
    # every device here has diagonal effects in the ideal basis; output states are arbitrary
    rng = np.random.default_rng(88)
    failures, total, example = 0, 0, None
    with Timer() as t:
        for d in (2, 3, 4):
            for _ in range(100):
                w = rng.dirichlet(np.ones(d), size=d)  # column j: distribution of outcomes on |j>
                povm = validate_povm([np.diag(w[:, k]) for k in range(d)])
                dev = NoisyDevice(povm, [_random_density(rng, d) for _ in range(d)])
                rep = check_fk_qk(dev, Rank1Pvm.computational(d))
                total += 1
                if not rep.all_ok:
                    failures += 1
                    example = example or next(r for r in rep.rows if not r["ok"])
    ok = criterion("8b F_k >= Q_k for diagonal effects", failures == 0 and t.seconds < 120,
                   f"{failures}/{total} devices violate F_k >= Q_k; e.g. {example}")
    assert ok, f"{failures}/{total} diagonal-effect devices have F_k < Q_k"


def test_9_trial_counts(criterion):
    with Timer() as t:
        n = chebyshev_trials(EstimationConfig(0.01, 0.01, u_guess=0.99))
        k = hoeffding_pairs(EstimationConfig(0.01, 0.05), (0.0, 1.0))
    ok = criterion("9 trial counts", n == 9900 and k == 18445 and t.seconds < 1,
                   f"chebyshev={n} hoeffding={k} runtime={t.seconds:.3f}s")
    assert ok


def test_10_limits_and_scaling(criterion):
    with Timer() as t:
        ideal_lb = lower_bound_probs([1.0, 1.0])
        ideal_f = avg_fidelity_probs(Z, Z.as_povm()).value
        # lb − (1 − δ) − δ/(1 + d) evaluated in exact rationals on the returned float,
        # in units of the float spacing at lb
        ulps = {}
        for d in (2, 4, 16, 256):
            for delta in (0.5, 0.25, 0.1, 0.01, 2**-7, 2**-20):
                u = 1 - delta
                lb = lower_bound_probs(np.full(d, u))
                seen = 1 - Fraction(u)  # the δ the bound actually receives after rounding 1 − δ
                residual = Fraction(lb) - (1 - seen) - seen / (1 + d)
                ulps[(d, delta)] = abs(residual) / Fraction(math.ulp(lb))
    worst = float(max(ulps.values()))
    ok = criterion("10 no-error limit and scaling", ideal_lb == 1.0 and ideal_f == 1.0 and worst <= 1.0
                   and t.seconds < 1,
                   f"lb={ideal_lb!r} F={ideal_f!r} max |lb - (1-delta) - delta/(1+d)|={worst:.2f} ulp "
                   f"runtime={t.seconds:.3f}s")
    assert ok
