"""Reproducible simulation studies built on the estimator, oracle and qubit simulator.

Covers Monte Carlo estimation-error campaigns (matched vs mismatched
measurement models), Gaussian-approximation validity sweeps, closed-loop
fringe tracking with and without frequency feedback, fringe fitting, and the
fixed-evolution-time frequentist baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import curve_fit

from . import oracle
from .estimator import (
    TWO_PI,
    GaussianBelief,
    LikelihoodModel,
    ProbeSettings,
    design_probe,
    optimal_detuning,
    optimal_tau,
    update,
)
from .qubitsim import (
    QUASISTATIC,
    NoiseProcess,
    cycle_duration,
    initial_state,
    rng_for_run,
    sample_outcome,
    step_noise,
)

MAD_TO_SIGMA = 1.4826  # scales a median absolute deviation to a Gaussian sigma


# ---------------------------------------------------------------------------
# Monte Carlo estimation-error campaigns
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CampaignConfig:
    """One Monte Carlo campaign: repeated estimations of shifts drawn from the prior.

    truth_model generates the outcomes; update_model is what the estimator
    assumes.  Setting them equal gives a matched campaign.
    """

    run_count: int
    n_shots: int
    prior: GaussianBelief
    truth_model: LikelihoodModel
    update_model: LikelihoodModel
    noise: NoiseProcess | None = None
    master_seed: int = 0

    def __post_init__(self):
        if self.run_count < 1:
            raise ValueError(f"run_count must be >= 1, got {self.run_count}")
        if self.n_shots < 0:
            raise ValueError(f"n_shots must be >= 0, got {self.n_shots}")


@dataclass(frozen=True)
class RunResult:
    """Per-run campaign record."""

    eps_true: float
    eps_hat: float
    final_sigma: float


@dataclass(frozen=True)
class ErrorStats:
    """Aggregate error statistics of a campaign."""

    errors: np.ndarray  # eps_hat - eps_true, per run [Hz]
    final_sigmas: np.ndarray
    mean_final_sigma: float
    std: float
    mad: float
    outlier_fraction: float  # |error| > 3 * final sigma of the run
    calibration_fraction: float  # |error| <= final sigma of the run

    @classmethod
    def from_runs(cls, runs: list[RunResult]) -> "ErrorStats":
        errors = np.array([r.eps_hat - r.eps_true for r in runs])
        sigmas = np.array([r.final_sigma for r in runs])
        abs_err = np.abs(errors)
        return cls(
            errors=errors,
            final_sigmas=sigmas,
            mean_final_sigma=float(sigmas.mean()),
            std=float(errors.std()),
            mad=float(np.median(np.abs(errors - np.median(errors)))),
            outlier_fraction=float(np.mean(abs_err > 3.0 * sigmas)),
            calibration_fraction=float(np.mean(abs_err <= sigmas)),
        )


def _run_single_estimation(
    prior: GaussianBelief,
    n_shots: int,
    truth_model: LikelihoodModel,
    update_model: LikelihoodModel,
    eps_true: float,
    rng: np.random.Generator,
    noise: NoiseProcess | None = None,
) -> tuple[GaussianBelief, float]:
    """One estimation sequence against a simulated qubit; returns (belief, final eps_true).

    Closed-form scalar path: the simulated shift may drift between shots if a
    non-quasistatic noise process is supplied.
    """
    mu, sigma = prior.mu, prior.sigma
    alpha_u, beta_u = update_model.alpha, update_model.beta
    inv_T_u = update_model.inv_T
    alpha_t, beta_t = truth_model.alpha, truth_model.beta
    inv_T_t = truth_model.inv_T
    drifting = noise is not None and noise.kind != QUASISTATIC
    state = None
    if drifting:
        state = replace(initial_state(noise, rng), eps_true=eps_true)

    for _ in range(n_shots):
        tau = optimal_tau(sigma, update_model.T)
        delta_f = 0.25 / tau + mu
        if drifting:
            eps_true = state.eps_true
        phase = TWO_PI * (delta_f - eps_true) * tau
        p_plus = 0.5 + 0.5 * (alpha_t + beta_t * math.exp(-tau * inv_T_t) * math.cos(phase))
        m = 1 if rng.random() < p_plus else -1

        damp = math.exp(-tau * inv_T_u - 2.0 * math.pi**2 * sigma**2 * tau**2)
        bias = 1.0 + m * alpha_u
        mu = mu + TWO_PI * m * beta_u * sigma**2 * tau * damp / bias
        var = sigma**2 - 4.0 * math.pi**2 * beta_u**2 * sigma**4 * tau**2 * damp**2 / bias**2
        sigma = math.sqrt(max(var, 1e-12 * sigma**2))

        if drifting:
            dt = cycle_duration(ProbeSettings(tau=tau, delta_f=delta_f))
            state = step_noise(noise, state, dt, rng)
    return GaussianBelief(mu, sigma), eps_true


def run_campaign(cfg: CampaignConfig) -> ErrorStats:
    """Execute the campaign; per-run RNG streams make the result worker-order independent."""
    runs = []
    for i in range(cfg.run_count):
        rng = rng_for_run(cfg.master_seed, i)
        eps_true = cfg.prior.mu + cfg.prior.sigma * float(rng.standard_normal())
        try:
            belief, _ = _run_single_estimation(
                cfg.prior,
                cfg.n_shots,
                cfg.truth_model,
                cfg.update_model,
                eps_true,
                rng,
                cfg.noise,
            )
        except Exception as exc:
            raise RuntimeError(f"campaign run {i} failed: {exc}") from exc
        runs.append(RunResult(eps_true=eps_true, eps_hat=belief.mu, final_sigma=belief.sigma))
    return ErrorStats.from_runs(runs)


def campaign_runs(cfg: CampaignConfig) -> list[RunResult]:
    """Per-run records for the campaign (same streams as run_campaign)."""
    runs = []
    for i in range(cfg.run_count):
        rng = rng_for_run(cfg.master_seed, i)
        eps_true = cfg.prior.mu + cfg.prior.sigma * float(rng.standard_normal())
        belief, _ = _run_single_estimation(
            cfg.prior, cfg.n_shots, cfg.truth_model, cfg.update_model, eps_true, rng, cfg.noise
        )
        runs.append(RunResult(eps_true=eps_true, eps_hat=belief.mu, final_sigma=belief.sigma))
    return runs


def mad_calibration(stats: ErrorStats) -> tuple[float, float]:
    """(1.4826 * MAD of errors, its ratio to the mean final posterior sigma)."""
    if stats.errors.size < 1000:
        raise ValueError("need >= 1000 errors for a stable MAD calibration")
    scaled = MAD_TO_SIGMA * stats.mad
    return scaled, scaled / stats.mean_final_sigma


# ---------------------------------------------------------------------------
# Gaussian-approximation validity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    """One (tau, outcome) point of the Gaussian-validity sweep."""

    tau_multiplier: float
    tau: float
    m: int
    posterior_sigma: float
    kl_bits: float
    n_modes: int


def gaussian_validity_sweep(
    prior: GaussianBelief,
    model: LikelihoodModel,
    tau_multipliers: list[float],
) -> list[SweepRow]:
    """True-posterior sigma and KL against the Gaussian fit, for scaled probe times.

    For each tau = multiplier * tau_opt and each outcome, the exact grid
    posterior is computed with the inflection-point detuning; the KL
    divergence is against its own method-of-moments Gaussian fit.
    """
    if any(mult <= 0 for mult in tau_multipliers):
        raise ValueError("tau multipliers must be positive")
    tau_opt = optimal_tau(prior.sigma, model.T)
    grid_prior = oracle.from_gaussian(prior)
    rows = []
    for mult in tau_multipliers:
        tau = mult * tau_opt
        probe = ProbeSettings(tau=tau, delta_f=optimal_detuning(prior.mu, tau))
        for m in (-1, +1):
            post = oracle.grid_update(grid_prior, m, probe, model)
            fit = oracle.gaussian_fit(post)
            gauss = oracle.GridPosterior(
                post.eps_values,
                _normal_weights(post.eps_values, fit.mu, fit.sigma),
            )
            rows.append(
                SweepRow(
                    tau_multiplier=mult,
                    tau=tau,
                    m=m,
                    posterior_sigma=fit.sigma,
                    kl_bits=oracle.kl_divergence(post, gauss),
                    n_modes=oracle.count_local_maxima(post),
                )
            )
    return rows


def _normal_weights(eps: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    w = np.exp(-0.5 * ((eps - mu) / sigma) ** 2)
    return w / w.sum()


# ---------------------------------------------------------------------------
# Closed-loop fringe tracking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FringeRecord:
    """Averaged Ramsey fringe: flip fraction per evolution time."""

    tau_values: np.ndarray
    flip_fractions: np.ndarray
    feedback: bool

    def __post_init__(self):
        if self.tau_values.shape != self.flip_fractions.shape:
            raise ValueError("tau_values and flip_fractions must have equal length")
        if np.any((self.flip_fractions < 0) | (self.flip_fractions > 1)):
            raise ValueError("flip fractions must lie in [0, 1]")


def closed_loop_track(
    noise: NoiseProcess,
    n_shots: int,
    m_cycles: int,
    tau_max: float,
    model: LikelihoodModel,
    seed: int,
    repetitions: int = 200,
    sigma0: float = 30e3,
    target_detuning: float = 1e6,
) -> tuple[FringeRecord, FringeRecord]:
    """Interleaved estimation + verification fringes, with and without feedback.

    Feedback arm: before each verification Ramsey shot at evolution time
    tau_j, the shift is re-estimated with n_shots adaptive probes (prior mean
    warm-started from the previous estimate) and the verification detuning is
    offset so the expected total detuning is target_detuning.  The
    feedback-off arm keeps the nominal frequency (assumes zero shift).  The
    quasistatic shift is redrawn per repetition; fringes are averaged over
    repetitions.  All repetitions are advanced in lockstep (vectorized), so
    the result depends only on the seed.
    """
    if m_cycles < 2:
        raise ValueError(f"m_cycles must be >= 2, got {m_cycles}")
    if not tau_max > 0.0:
        raise ValueError(f"tau_max must be positive, got {tau_max}")
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    if noise.kind != QUASISTATIC:
        raise ValueError("closed_loop_track supports quasistatic noise only")

    rng = np.random.default_rng(seed)
    taus = np.linspace(tau_max / m_cycles, tau_max, m_cycles)
    R = repetitions
    alpha, beta, inv_T = model.alpha, model.beta, model.inv_T

    def draw_outcomes(p_plus: np.ndarray) -> np.ndarray:
        return np.where(rng.random(R) < p_plus, 1, -1)

    flips_fb = np.zeros(m_cycles)
    flips_open = np.zeros(m_cycles)
    mu_hat = np.zeros(R)  # warm start carries across the M cycles of each repetition

    # Feedback arm, vectorized across repetitions: each "row" is one repetition.
    eps = rng.normal(0.0, noise.sigma_eps, size=R)
    for j, tau_j in enumerate(taus):
        # Estimation sequence, warm-started at the previous estimate.
        mu = mu_hat.copy()
        sigma = np.full(R, sigma0)
        for _ in range(n_shots):
            tau = _optimal_tau_vec(sigma, inv_T)
            delta_f = 0.25 / tau + mu
            damp = np.exp(-tau * inv_T - 2.0 * np.pi**2 * sigma**2 * tau**2)
            p_plus = 0.5 + 0.5 * (
                alpha + beta * np.exp(-tau * inv_T) * np.cos(TWO_PI * (delta_f - eps) * tau)
            )
            m = draw_outcomes(p_plus)
            bias = 1.0 + m * alpha
            mu = mu + TWO_PI * m * beta * sigma**2 * tau * damp / bias
            var = sigma**2 - 4.0 * np.pi**2 * beta**2 * sigma**4 * tau**2 * damp**2 / bias**2
            sigma = np.sqrt(np.maximum(var, 1e-12 * sigma**2))
        mu_hat = mu
        # Verification Ramsey shot with the drive adjusted by the estimate.
        delta_f_eff = target_detuning + mu_hat
        p_flip = 0.5 + 0.5 * (
            alpha + beta * math.exp(-tau_j * inv_T) * np.cos(TWO_PI * (delta_f_eff - eps) * tau_j)
        )
        flips_fb[j] = np.mean(rng.random(R) < p_flip)

    # Feedback-off arm: fresh quasistatic draws, nominal frequency.
    eps = rng.normal(0.0, noise.sigma_eps, size=R)
    for j, tau_j in enumerate(taus):
        p_flip = 0.5 + 0.5 * (
            alpha + beta * math.exp(-tau_j * inv_T) * np.cos(TWO_PI * (target_detuning - eps) * tau_j)
        )
        flips_open[j] = np.mean(rng.random(R) < p_flip)

    return (
        FringeRecord(tau_values=taus, flip_fractions=flips_fb, feedback=True),
        FringeRecord(tau_values=taus, flip_fractions=flips_open, feedback=False),
    )


def _optimal_tau_vec(sigma: np.ndarray, inv_T: float) -> np.ndarray:
    root = np.sqrt(16.0 * np.pi**2 * sigma**2 + inv_T**2)
    return 2.0 / (root + inv_T)


# ---------------------------------------------------------------------------
# Fringe fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FringeFit:
    """Least-squares fit of p(tau) = c + A exp(-(tau/T2)^2) cos(2 pi f tau + phi)."""

    t2: float
    frequency: float
    amplitude: float
    offset: float
    phase: float
    t2_err: float
    frequency_err: float
    residual_rms: float
    identifiable: bool


class FitError(RuntimeError):
    """Fringe fit did not converge; message carries residual diagnostics."""


def _fringe_model(tau, c, A, t2, f, phi):
    return c + A * np.exp(-((tau / t2) ** 2)) * np.cos(TWO_PI * f * tau + phi)


def fit_fringe(record: FringeRecord) -> FringeFit:
    """Fit a Gaussian-envelope decaying cosine to an averaged fringe.

    Start values: frequency from the discrete Fourier peak, amplitude from
    half the record's range, T2 from half the span.  A flat record is
    reported as unidentifiable rather than fitted.
    """
    tau = np.asarray(record.tau_values, dtype=float)
    y = np.asarray(record.flip_fractions, dtype=float)
    if tau.size < 10:
        raise ValueError(f"need >= 10 points to fit a fringe, got {tau.size}")

    span = float(tau[-1] - tau[0])
    amp0 = float(y.max() - y.min()) / 2.0
    if amp0 < 1e-6:
        return FringeFit(
            t2=math.nan,
            frequency=math.nan,
            amplitude=0.0,
            offset=float(y.mean()),
            phase=0.0,
            t2_err=math.inf,
            frequency_err=math.inf,
            residual_rms=float(np.std(y)),
            identifiable=False,
        )

    # Frequency seed from the dominant nonzero DFT bin (uniform tau grid).
    dt = float(tau[1] - tau[0])
    spectrum = np.abs(np.fft.rfft(y - y.mean()))
    freqs = np.fft.rfftfreq(tau.size, d=dt)
    f0 = float(freqs[1:][np.argmax(spectrum[1:])])
    if f0 <= 0.0:
        f0 = 1.0 / span
    p0 = [float(y.mean()), amp0, span / 2.0, f0, 0.0]

    try:
        popt, pcov = curve_fit(
            _fringe_model,
            tau,
            y,
            p0=p0,
            bounds=(
                [-np.inf, 0.0, dt / 10.0, 0.0, -np.pi],
                [np.inf, np.inf, np.inf, 10.0 * f0 + 1.0 / dt, np.pi],
            ),
            maxfev=20000,
        )
    except RuntimeError as exc:
        resid = y - _fringe_model(tau, *p0)
        raise FitError(
            f"fringe fit failed to converge (start residual rms {np.std(resid):.3g}): {exc}"
        ) from exc

    resid = y - _fringe_model(tau, *popt)
    perr = np.sqrt(np.diag(pcov))
    c, A, t2, f, phi = popt
    return FringeFit(
        t2=float(t2),
        frequency=float(f),
        amplitude=float(A),
        offset=float(c),
        phase=float(phi),
        t2_err=float(perr[2]),
        frequency_err=float(perr[3]),
        residual_rms=float(np.std(resid)),
        identifiable=bool(np.isfinite(perr[2])),
    )


# ---------------------------------------------------------------------------
# Frequentist fixed-evolution-time baseline
# ---------------------------------------------------------------------------


def frequentist_estimate(
    eps_true: float,
    tau: float,
    shots: int,
    model: LikelihoodModel,
    rng: np.random.Generator,
) -> float:
    """Fixed-tau estimate: average outcomes at the inflection detuning and invert linearly.

    The probe sits at delta_f = 1/(4 tau) (inflection at zero shift), so
    E[m] ~= alpha + 2 pi beta tau e^(-tau/T) eps for small shifts.  The
    estimate is clamped to the unambiguous range (-1/(2 tau), +1/(2 tau)].
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probe = ProbeSettings(tau=tau, delta_f=0.25 / tau)
    total = 0
    for _ in range(shots):
        total += sample_outcome(eps_true, probe, model, rng)
    m_bar = total / shots
    slope = TWO_PI * model.beta * tau * math.exp(-tau * model.inv_T)
    est = (m_bar - model.alpha) / slope
    half_range = 0.5 / tau
    return float(min(max(est, -half_range), half_range))
