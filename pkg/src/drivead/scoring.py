"""Gaussian error models, Mahalanobis / NLL-scaled anomaly scores, and
percentile-based evaluation reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data.trace import CHANNEL_NAMES
from .errors import DataError, NotPositiveDefiniteError
from .model.config import EOS_ID, NUM_MANEUVERS, SOS_ID
from .numeric import SpdFactor, cholesky, solve_spd

COMBINED = "combined"
MODALITIES = CHANNEL_NAMES + (COMBINED,)
NLL_FLOOR = 1e-3
REPORT_PERCENTILES = (0.001, 0.01, 0.1, 0.5, 1.0)


def error_vectors(x: np.ndarray, recon: np.ndarray) -> dict:
    """Per-modality reconstruction-error vectors.

    x, recon (N, T, 6) -> each channel (N, T); "combined" is the
    channel-major concatenation (N, 6*T) in CHANNEL_NAMES order.
    """
    e = np.asarray(recon, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    out = {name: e[:, :, c] for c, name in enumerate(CHANNEL_NAMES)}
    out[COMBINED] = np.concatenate([e[:, :, c] for c in range(e.shape[2])], axis=1)
    return out


@dataclass
class GaussianErrorModel:
    """Multivariate Gaussian over error vectors of one modality."""

    modality: str
    dim: int
    mean: np.ndarray
    factor: SpdFactor
    ridge: float

    @classmethod
    def fit(cls, errors: np.ndarray, modality: str = COMBINED,
            ridge: float | None = None) -> "GaussianErrorModel":
        """mu = sample mean; Sigma = sample covariance (N-1) + ridge * I.

        ridge=None uses 1e-4 * trace(Sigma) / dim; pass ridge=0 to require a
        well-conditioned sample covariance (raises NotPositiveDefiniteError
        otherwise, e.g. when N <= dim).
        """
        errors = np.asarray(errors, dtype=np.float64)
        if errors.ndim != 2 or errors.shape[0] < 2:
            raise DataError("need at least 2 error vectors to fit a Gaussian")
        mean = errors.mean(axis=0)
        centered = errors - mean
        cov = centered.T @ centered / (errors.shape[0] - 1)
        dim = cov.shape[0]
        if ridge is None:
            ridge = 1e-4 * np.trace(cov) / dim
        if ridge > 0:
            cov = cov + ridge * np.eye(dim)
        try:
            factor = cholesky(cov)
        except NotPositiveDefiniteError:
            raise NotPositiveDefiniteError(
                f"{modality}: covariance not positive definite with ridge "
                f"{ridge:g}; raise the ridge") from None
        return cls(modality=modality, dim=dim, mean=mean, factor=factor,
                   ridge=float(ridge))

    def mahalanobis(self, e: np.ndarray) -> np.ndarray:
        """sqrt((e - mu)^T Sigma^-1 (e - mu)) via two triangular solves.

        Accepts a single vector (dim,) or a batch (N, dim)."""
        e = np.asarray(e, dtype=np.float64)
        single = e.ndim == 1
        if e.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: {e.shape[-1]} vs {self.dim}")
        centered = (e[None, :] if single else e) - self.mean
        y = solve_spd(self.factor, centered.T)  # solves (L L^T) y = (e - mu)
        q = np.einsum("dn,dn->n", centered.T, y)
        d = np.sqrt(np.maximum(q, 0.0))
        return float(d[0]) if single else d


def fit_error_model(errors, modality: str = COMBINED, ridge=None):
    return GaussianErrorModel.fit(errors, modality, ridge)


def mahalanobis(model: GaussianErrorModel, e: np.ndarray):
    return model.mahalanobis(e)


def sequence_nll(symbols, stats) -> float:
    """-sum log f_s over predicted maneuvers, EOS excluded from the sum.

    Frequencies come from training LabelStats, not the model's softmax."""
    freqs = stats.frequencies
    total = 0.0
    seen = False
    for s in np.asarray(symbols).reshape(-1):
        s = int(s)
        if s == EOS_ID:
            continue
        if s == SOS_ID or not 0 <= s < NUM_MANEUVERS:
            raise DataError(f"symbol id {s} is not a maneuver")
        total -= math.log(freqs[s])
        seen = True
    if not seen and len(np.asarray(symbols).reshape(-1)) == 0:
        raise DataError("sequence_nll needs a nonempty symbol sequence")
    return total


def scaled_score(raw: float, nll: float, floor: float = NLL_FLOOR) -> float:
    """raw / max(nll, floor): down-weights rare-but-normal maneuvers."""
    if raw < 0:
        raise ValueError("raw score must be >= 0")
    return raw / max(nll, floor)


@dataclass
class ScoredWindow:
    window_id: int
    raw_score: float
    predicted_symbols: np.ndarray
    nll: float
    scaled: float
    majority_label: int = -1
    anomaly_fraction: float = 0.0


def rank_and_select(scores, top_percentile: float):
    """Top ceil(N * p / 100) entries by descending score, ties by id ascending.

    `scores` is a sequence of (window_id, score) pairs or ScoredWindow-likes
    with .window_id / attribute named by `key`."""
    if not 0 < top_percentile <= 100:
        raise ValueError("percentile must be in (0, 100]")
    items = list(scores)
    if not items:
        raise DataError("rank_and_select on empty score list")
    if not isinstance(items[0], tuple):
        items = [(s.window_id, s.raw_score) for s in items]
    items.sort(key=lambda t: (-t[1], t[0]))
    keep = math.ceil(len(items) * top_percentile / 100.0)
    return items[:keep]


@dataclass
class DetectionRow:
    percentile: float
    captured: int
    total: int

    @property
    def fraction(self) -> float:
        return self.captured / self.total if self.total else 0.0

    def formatted(self) -> str:
        return f"{100.0 * self.fraction:.2f}% ({self.captured}/{self.total})"


def detection_report(scores, target_ids,
                     percentiles=REPORT_PERCENTILES) -> list[DetectionRow]:
    """Recall of `target_ids` within the top-p percentile for each p.

    `scores` is a sequence of (window_id, score) pairs."""
    target_ids = set(target_ids)
    rows = []
    for p in percentiles:
        selected = {wid for wid, _ in rank_and_select(scores, p)}
        rows.append(DetectionRow(percentile=p,
                                 captured=len(selected & target_ids),
                                 total=len(target_ids)))
    return rows
