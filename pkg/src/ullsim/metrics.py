"""Performance metrics: spectral efficiencies, channel MSE, BLER, effective SNR."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SINR_CAP = 1e9                # noiseless observations saturate here


@dataclass
class MetricRecord:
    """One aggregated result row (see harness.write_csv for the column order)."""

    mode: str
    combiner: str
    grid_param: str
    grid_value: float
    iteration: int
    ue_index_class: int
    mse_ch: float = np.nan
    se_uatf: float = np.nan
    se_mi: float = np.nan
    bler: float = np.nan
    snr_eff_db: float = np.nan
    n_trials: int = 0
    stderr: dict = field(default_factory=dict)


def se_uatf_moments(gain: complex, denom_var: float, prelog: float) -> float:
    """Hardening-style achievable SE from known moments.

    gain = E{y_hat s*}, denom_var = Var{y_hat - gain*s}. The observation is
    treated as a deterministic channel `gain` plus uncorrelated noise, which
    lower-bounds the true mutual information.
    """
    if denom_var <= 0:
        if np.abs(gain) > 0:
            return prelog * np.log2(1.0 + SINR_CAP)
        raise ValueError("degenerate observation: zero gain and zero variance")
    sinr = min(np.abs(gain) ** 2 / denom_var, SINR_CAP)
    return prelog * np.log2(1.0 + sinr)


def se_uatf_samples(y_hat: np.ndarray, s: np.ndarray, prelog: float,
                    min_samples: int = 1000) -> float:
    """Empirical hardening SE from paired observation/symbol samples.

    y_hat, s: flat sample arrays over symbols (and trials). The effective
    gain is estimated as mean(y_hat s*) for unit-energy symbols; everything
    not explained by it counts as noise.
    """
    y_hat = np.asarray(y_hat).ravel()
    s = np.asarray(s).ravel()
    if y_hat.size != s.size:
        raise ValueError("y_hat and s must have the same number of samples")
    if y_hat.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {y_hat.size}")
    es2 = np.mean(np.abs(s) ** 2)
    gain = np.mean(y_hat * np.conj(s)) / es2
    resid = y_hat - gain * s
    denom = np.mean(np.abs(resid) ** 2) - np.abs(np.mean(resid)) ** 2
    return se_uatf_moments(gain, denom, prelog)


def se_mutual_info(bit_posteriors: np.ndarray, prelog: float, n_bits_per_symbol: int,
                   code_rate: float) -> float:
    """Decoder-aware SE from per-bit posterior probabilities.

    bit_posteriors: probabilities of one hypothesis per coded bit (either
    convention; the entropy is symmetric). Each bit contributes
    1 - H2(posterior) recovered information; scaling by the modulation
    order and code rate converts to information symbols per data sample.
    """
    p = np.clip(np.asarray(bit_posteriors, dtype=float), 0.0, 1.0)
    ent = binary_entropy(p)
    return prelog * n_bits_per_symbol * code_rate * float(np.mean(1.0 - ent))


def binary_entropy(p: np.ndarray) -> np.ndarray:
    """H2(p) in bits, with 0*log(0) = 0."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    inside = (p > 0) & (p < 1)
    q = p[inside]
    out[inside] = -q * np.log2(q) - (1 - q) * np.log2(1 - q)
    return out


def mse_channel_analytic(C: np.ndarray) -> np.ndarray:
    """Per-antenna MSE tr(C)/M from error covariances C: (..., M, M)."""
    M = C.shape[-1]
    return np.einsum("...ii->...", C).real / M


def mse_channel_empirical(h: np.ndarray, h_hat: np.ndarray) -> float:
    """Mean ||h - h_hat||^2 / M over all leading axes (M = last axis)."""
    err = np.asarray(h) - np.asarray(h_hat)
    return float(np.mean(np.abs(err) ** 2))


def bler(decoded_ok: np.ndarray) -> float:
    """Fraction of codewords that failed to decode."""
    ok = np.asarray(decoded_ok, dtype=bool)
    if ok.size == 0:
        raise ValueError("no codewords")
    return float(1.0 - ok.mean())


def effective_snr_db(g: np.ndarray, n_var: np.ndarray) -> float:
    """10 log10 of mean effective-signal power over mean effective noise."""
    num = np.mean(np.abs(np.asarray(g)) ** 2)
    den = np.mean(np.asarray(n_var))
    if den <= 0:
        raise ValueError("nonpositive noise variance")
    return float(10.0 * np.log10(num / den))
