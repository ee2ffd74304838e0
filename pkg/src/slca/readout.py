"""Turning a spike log into a coefficient vector.

All readouts are post hoc. Average currents are integrated exactly: with
mu_i(0) = b_i the soma current is

    mu_i(t) = b_i - sum_{j != i} w_ij sum_k exp(-(t - t_jk)/tau) [t >= t_jk]

for both engines (the fixed-step engine relaxes currents exactly and only
quantises spike times), so its window integral has a closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ThresholdSpec, threshold_apply
from .errors import EmptyWindow
from .spiking import SpikeLog


@dataclass(frozen=True)
class RateEstimate:
    method: str
    values: np.ndarray
    at_time: float
    t0: float = 0.0
    tau_kernel: Optional[float] = None


def default_t0(log: SpikeLog) -> float:
    return log.t_end / 10.0


def default_tau_kernel(log: SpikeLog) -> float:
    drive = float(np.max(log.b - log.bias))
    return 10.0 * log.nu_f / drive if drive > 0 else 10.0 * log.nu_f


def _check_window(log: SpikeLog, t0: float, t: float):
    if not t > t0:
        raise EmptyWindow(f"window ({t0}, {t}] is empty")
    if t0 < 0 or t > log.t_end * (1 + 1e-12):
        raise ValueError(f"window ({t0}, {t}] not inside the run [0, {log.t_end}]")


def rate_window(log: SpikeLog, t0: float, t: float) -> RateEstimate:
    """Spike count in (t0, t] divided by t - t0."""
    _check_window(log, t0, t)
    return RateEstimate("window", log.counts_in(t0, t) / (t - t0), t, t0=t0)


def kernel_integrals(log: SpikeLog, t0: float, t: float) -> np.ndarray:
    """K_j = integral over (t0, t] of sum_k exp(-(s - t_jk)/tau) for spikes t_jk <= t."""
    tau = log.tau
    K = np.zeros(log.N)
    for j, s in enumerate(log.spike_times):
        s = s[s <= t]
        if s.size == 0:
            continue
        start = np.maximum(s, t0)
        K[j] = tau * float(np.sum(np.exp(-(start - s) / tau) - np.exp(-(t - s) / tau)))
    return K


def avg_current(log: SpikeLog, t0: float, t: float) -> np.ndarray:
    """(1/(t - t0)) * integral of mu_i over (t0, t], in closed form."""
    _check_window(log, t0, t)
    K = kernel_integrals(log, t0, t)
    return log.b - log.weights.offdiag_matvec(K) / (t - t0)


def rate_thresholded_current(log: SpikeLog, t0: float, t: float,
                             spec: Optional[ThresholdSpec] = None) -> RateEstimate:
    """T_lambda(u(t)) / nu_f with the unit-slope rectifier at the bias current.

    For an elastic-net network (nu_f = 2*lambda2 + 1) this equals the
    slope-reduced activation applied to u. ``spec`` only supplies lambda1 and
    sidedness; it defaults to the run's bias.
    """
    u = avg_current(log, t0, t)
    if spec is None:
        spec = ThresholdSpec(log.bias)
    unit = ThresholdSpec(spec.lambda1, 0.0, spec.sided)
    return RateEstimate("thresholded_current", threshold_apply(u, unit) / log.nu_f, t, t0=t0)


def rate_exp_kernel(log: SpikeLog, tau_kernel: Optional[float] = None,
                    t: Optional[float] = None) -> RateEstimate:
    """sum over spikes t_ik <= t of exp(-(t - t_ik)/tau_k) / tau_k."""
    if tau_kernel is None:
        tau_kernel = default_tau_kernel(log)
    if not tau_kernel > 0:
        raise ValueError("tau_kernel must be positive")
    if t is None:
        t = log.t_end
    vals = np.zeros(log.N)
    for i, s in enumerate(log.spike_times):
        s = s[s <= t]
        if s.size:
            vals[i] = float(np.sum(np.exp(-(t - s) / tau_kernel))) / tau_kernel
    return RateEstimate("exp_kernel", vals, t, tau_kernel=tau_kernel)


def delta_gap(log: SpikeLog, t0: float, t: float, spec: Optional[ThresholdSpec] = None,
              nu_f: Optional[float] = None) -> np.ndarray:
    """Delta_i = T_lambda(u_i(t)) - a_i(t) * nu_f (unit-slope rectifier)."""
    if spec is None:
        spec = ThresholdSpec(log.bias)
    if nu_f is None:
        nu_f = log.nu_f
    u = avg_current(log, t0, t)
    a = rate_window(log, t0, t).values
    return threshold_apply(u, ThresholdSpec(spec.lambda1)) - a * nu_f


def fixed_point_residual(log: SpikeLog, t0: float, t: float) -> float:
    """|| b - u(t) - W a(t) ||_inf with window rates (W off-diagonal Gram)."""
    u = avg_current(log, t0, t)
    a = rate_window(log, t0, t).values
    return float(np.max(np.abs(log.b - u - log.weights.offdiag_matvec(a))))


def write_readout_csv(path, log: SpikeLog, t0: Optional[float] = None, t: Optional[float] = None,
                      tau_kernel: Optional[float] = None) -> None:
    if t is None:
        t = log.t_end
    if t0 is None:
        t0 = default_t0(log)
    win = rate_window(log, t0, t).values
    thr = rate_thresholded_current(log, t0, t).values
    ker = rate_exp_kernel(log, tau_kernel, t).values
    u = avg_current(log, t0, t)
    gap = delta_gap(log, t0, t)
    with open(path, "w") as fh:
        fh.write("neuron_id,a_window,a_thresh_current,a_exp_kernel,u_avg,delta_gap\n")
        for i in range(log.N):
            fh.write(f"{i},{win[i]:.17g},{thr[i]:.17g},{ker[i]:.17g},{u[i]:.17g},{gap[i]:.17g}\n")
