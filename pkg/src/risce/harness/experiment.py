"""Seeded Monte Carlo trials, sweeps and the training-design certificate."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from ..channel_model import draw_channels, total_channel
from ..closed_form import dft_gap_x11, dft_gap_x22, theorem1_certificate
from ..estimator import run_stage1, stage1_total_estimate, stage2_measurements, stage2_refine
from ..exceptions import SingularDesignError
from ..training_design import dft_plus_matrix, make_design, mdft_matrix, random_phase_matrix
from ..transmission import (
    PhaseSource,
    effective_directions,
    gaussian_phase_perturb,
    mrc_snr,
    ms_phase_error,
    optimal_ris_phases,
    random_ris_phases,
    se_drop_approx,
    spectral_efficiency,
)
from .config import ConfigError, ScenarioConfig, SweepVariable
from .output import ResultRow

__all__ = [
    "BASELINE",
    "PERFECT_CSI",
    "TrialResult",
    "certify_designs",
    "metric_names",
    "run_trial",
    "sweep",
    "trial_seed",
    "variant_names",
]

PERFECT_CSI = "PERFECT_CSI"
BASELINE = "NO_PHASE_DESIGN"

_ESTIMATION_METRICS = ("NMSE", "MS_PHASE_ERROR", "SNR", "SE")
_PERTURB_METRICS = ("MS_PHASE_ERROR", "SE", "SE_DROP", "SE_DROP_APPROX")


class _Stream(IntEnum):
    CHANNEL = 0
    SHADOW = 1
    TRAINING = 2
    STAGE1 = 3
    STAGE2 = 4
    PERTURB = 5
    BASELINE = 6


def trial_seed(master_seed: int, trial: int) -> int:
    """Seed of trial ``trial``, a pure function of the master seed and the counter."""
    state = np.random.SeedSequence(master_seed, spawn_key=(trial,)).generate_state(4)
    return int.from_bytes(state.astype("<u4").tobytes(), "little")


def _rng(seed: int, stream: _Stream) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(stream),)))


@dataclass
class TrialResult:
    """Metrics of one trial keyed by ``(variant, metric)``; flagged variants are absent."""

    seed: int
    metrics: dict[tuple[str, str], float] = field(default_factory=dict)
    flagged: list[str] = field(default_factory=list)


def variant_names(config: ScenarioConfig) -> list[str]:
    if config.evaluation.sigma_e is not None:
        return [PERFECT_CSI]
    names = [f"{k.value}/{m.label}" for k in config.estimation.training for m in config.estimation.methods]
    if config.evaluation.include_baseline:
        names += [PERFECT_CSI, BASELINE]
    return names


def metric_names(config: ScenarioConfig, variant: str) -> tuple[str, ...]:
    if config.evaluation.sigma_e is not None:
        return _PERTURB_METRICS
    if variant in (PERFECT_CSI, BASELINE):
        return ("SNR", "SE")
    return _ESTIMATION_METRICS


def run_trial(config: ScenarioConfig, trial_seed: int) -> TrialResult:
    """One pass of the full pipeline for every configured variant.

    All variants see the same channel draw and the same noise streams, so
    differences between them are not blurred by independent randomness.
    """
    geo = config.system_geometry()
    ls = config.large_scale
    ev = config.evaluation
    est = config.estimation
    out = TrialResult(trial_seed)

    L_BU = L_RU = 0.0
    if config.shadowing_enabled():
        L_BU, L_RU = _rng(trial_seed, _Stream.SHADOW).normal(0.0, ls.sigma_sf_dB, size=2)
    budget = config.link_budget(float(L_BU), float(L_RU))
    ch = draw_channels(geo, budget, config.channels.ue.build(), config.channels.br.build(),
                       _rng(trial_seed, _Stream.CHANNEL), blocked_direct=ev.blocked_direct)
    H_los = ch.H_BR_los
    H_full = ch.H_BR.full
    rho = config.training_snr()
    rho_D = config.data_snr()

    # ideal phases from the true channels
    if budget.pure_los or ev.phase_reference == "LOS":
        ref_B, ref_R = geo.a_B_los(), geo.a_R_los()
    else:
        ref_B, ref_R = effective_directions(H_full)
    star = optimal_ris_phases(ch.h_RU, ch.h_BU, ref_B, ref_R, PhaseSource.PERFECT, ev.blocked_direct)
    h_star = total_channel(H_full, star.phases, ch.h_RU, ch.h_BU)
    snr_star = rho_D * float(np.vdot(h_star, h_star).real)
    se_star = math.log2(1.0 + snr_star)

    if ev.sigma_e is not None:
        pert = gaussian_phase_perturb(star, ev.sigma_e, _rng(trial_seed, _Stream.PERTURB))
        h_p = total_channel(H_full, pert.phases, ch.h_RU, ch.h_BU)
        se = math.log2(1.0 + rho_D * float(np.vdot(h_p, h_p).real))
        m = out.metrics
        m[(PERFECT_CSI, "MS_PHASE_ERROR")] = ms_phase_error(pert, star)
        m[(PERFECT_CSI, "SE")] = se
        m[(PERFECT_CSI, "SE_DROP")] = se_star - se
        m[(PERFECT_CSI, "SE_DROP_APPROX")] = se_drop_approx(ev.sigma_e)
        return out

    a_B, a_R = geo.a_B_los(), geo.a_R_los()
    for kind in est.training:
        for method in est.methods:
            name = f"{kind.value}/{method.label}"
            n_active = method.n_active(geo.N_y, geo.N_z)
            try:
                design = make_design(kind, n_active, _rng(trial_seed, _Stream.TRAINING))
                s1 = run_stage1(H_los, H_full, ch.h_RU, ch.h_BU, design, method, geo.N_y, geo.N_z, rho,
                                rng=None if est.zero_noise else _rng(trial_seed, _Stream.STAGE1))
            except SingularDesignError:
                out.flagged.append(name)
                continue
            phi = optimal_ris_phases(s1.h_RU_hat, s1.h_BU_hat, a_B, a_R, PhaseSource.ESTIMATED,
                                     ev.blocked_direct)
            h_tot = total_channel(H_full, phi.phases, ch.h_RU, ch.h_BU)
            h_tau1 = stage1_total_estimate(H_los, phi.phases, s1.h_RU_hat, s1.h_BU_hat)
            y = stage2_measurements(h_tot, est.tau_2, rho,
                                    rng=None if est.zero_noise else _rng(trial_seed, _Stream.STAGE2))
            h_tau = stage2_refine(h_tau1, y, rho, est.stage2)
            snr = mrc_snr(h_tau, h_tot, rho_D)
            m = out.metrics
            # NMSE is a ratio of means; keep both parts of it
            m[(name, "NMSE_NUM")] = float(np.vdot(h_tot - h_tau1, h_tot - h_tau1).real)
            m[(name, "NMSE_DEN")] = float(np.vdot(h_tot, h_tot).real)
            m[(name, "MS_PHASE_ERROR")] = ms_phase_error(phi, star)
            m[(name, "SNR")] = snr
            m[(name, "SE")] = spectral_efficiency(snr, ev.T, design.tau_1 + est.tau_2)

    if ev.include_baseline:
        out.metrics[(PERFECT_CSI, "SNR")] = snr_star
        out.metrics[(PERFECT_CSI, "SE")] = se_star
        rand = random_ris_phases(geo.N, _rng(trial_seed, _Stream.BASELINE))
        h_r = total_channel(H_full, rand.phases, ch.h_RU, ch.h_BU)
        snr_r = rho_D * float(np.vdot(h_r, h_r).real)
        out.metrics[(BASELINE, "SNR")] = snr_r
        out.metrics[(BASELINE, "SE")] = math.log2(1.0 + snr_r)
    return out


def _task(args) -> TrialResult:
    config, seed = args
    return run_trial(config, seed)


def _run_all(tasks, workers: int) -> list[TrialResult]:
    if workers <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so the merge is deterministic
        return list(pool.map(_task, tasks, chunksize=chunk))


def _mean_stderr(vals: np.ndarray) -> tuple[float, float, int]:
    n = vals.size
    if n == 0:
        return math.nan, math.nan, 0
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(vals.mean()), se, n


def _ratio_of_means(results: list[TrialResult], variant: str) -> tuple[float, float, int]:
    """``E|e|^2 / E|h|^2`` with a delta-method standard error."""
    pairs = np.array([(r.metrics[(variant, "NMSE_NUM")], r.metrics[(variant, "NMSE_DEN")])
                      for r in results if (variant, "NMSE_NUM") in r.metrics]).reshape(-1, 2)
    n = len(pairs)
    if n == 0:
        return math.nan, math.nan, 0
    num, den = pairs[:, 0], pairs[:, 1]
    ratio = float(num.mean() / den.mean())
    if n < 2:
        return ratio, 0.0, n
    resid = num - ratio * den
    return ratio, float(resid.std(ddof=1) / (math.sqrt(n) * den.mean())), n


def _aggregate(config: ScenarioConfig, results: list[TrialResult], sweep_var: str, value: float,
               config_hash: str) -> list[ResultRow]:
    rows = []
    seed = config.monte_carlo.seed
    for variant in variant_names(config):
        for metric in metric_names(config, variant):
            if metric == "NMSE":
                mean, se, n = _ratio_of_means(results, variant)
            else:
                vals = np.array([r.metrics[(variant, metric)] for r in results if (variant, metric) in r.metrics])
                mean, se, n = _mean_stderr(vals)
            rows.append(ResultRow(sweep_var, value, metric, variant, mean, se, n, seed, config_hash))
        flagged = sum(variant in r.flagged for r in results)
        if flagged:
            rows.append(ResultRow(sweep_var, value, "FLAGGED", variant, float(flagged), 0.0,
                                  len(results), seed, config_hash))
    return rows


def sweep(config: ScenarioConfig, variable: SweepVariable | str | None = None, grid=None,
          workers: int | None = None) -> list[ResultRow]:
    """Run ``trials`` seeded trials at every grid point and summarize them.

    ``variable`` and ``grid`` default to the config's ``sweep`` section.
    Trial ``i`` uses the same seed at every grid point.
    """
    variable = variable if variable is not None else config.sweep.variable
    grid = list(grid) if grid is not None else list(config.sweep.grid)
    if variable is None:
        raise ConfigError("no sweep variable given")
    variable = SweepVariable(variable)
    if not grid:
        raise ConfigError("sweep grid is empty")
    workers = workers or config.monte_carlo.workers
    points = [config.with_value(variable, v) for v in grid]
    base_hash = config.config_hash()
    n = config.monte_carlo.trials
    seeds = [trial_seed(config.monte_carlo.seed, i) for i in range(n)]
    tasks = [(p, s) for p in points for s in seeds]
    results = _run_all(tasks, workers)
    rows = []
    for k, (p, v) in enumerate(zip(points, grid)):
        rows += _aggregate(p, results[k * n:(k + 1) * n], variable.value, float(v), base_hash)
    return rows


def certify_designs(N_prime: int, M: int, random_designs: int = 100, seed: int = 0,
                    beta_bar: float = 1.0) -> list[ResultRow]:
    """Certificate rows for MDFT, DFT_PLUS (``w = -1``) and random designs.

    Each design gets TRACE_X11, TRACE_X22, TRACE_SUM, BOUND_GAP and RANK
    rows; DFT_PLUS also gets measured and analytic gaps to MDFT.
    """
    if random_designs < 0:
        raise ValueError("random_designs must be >= 0")
    rng = np.random.default_rng(seed)
    designs = [mdft_matrix(N_prime), dft_plus_matrix(N_prime)]
    designs += [random_phase_matrix(N_prime, rng) for _ in range(random_designs)]
    labels = ["MDFT", "DFT_PLUS"] + [f"RANDOM_{i}" for i in range(random_designs)]
    report = theorem1_certificate(designs, M, beta_bar, labels=labels)
    h = f"N{N_prime}_M{M}_k{random_designs}_b{beta_bar!r}"
    digest = hashlib.sha256(h.encode()).hexdigest()[:16]

    def row(metric, variant, v):
        return ResultRow("N_prime", float(N_prime), metric, variant, float(v), 0.0, 1, seed, digest)

    rows = []
    for e in report.entries:
        rows += [row("TRACE_X11", e.label, e.tr_X11), row("TRACE_X22", e.label, e.tr_X22),
                 row("TRACE_SUM", e.label, e.trace_sum), row("BOUND_GAP", e.label, e.bound_gap),
                 row("RANK", e.label, e.rank)]
    md, dft = report.entries[0], report.entries[1]
    rows += [row("GAP_X11", "DFT_PLUS", dft.tr_X11 - md.tr_X11),
             row("GAP_X11_ANALYTIC", "DFT_PLUS", dft_gap_x11(M, N_prime, beta_bar)),
             row("GAP_X22", "DFT_PLUS", dft.tr_X22 - md.tr_X22),
             row("GAP_X22_ANALYTIC", "DFT_PLUS", dft_gap_x22(N_prime))]
    return rows
