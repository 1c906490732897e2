"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numeric import SeededRng


@dataclass
class GradCheckReport:
    max_rel_err: float = 0.0
    checked: int = 0
    failures: list = field(default_factory=list)  # (param name, index, rel err)

    @property
    def passed(self) -> bool:
        return not self.failures


def relative_error(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


def gradient_check(loss_fn, params, step=1e-3, tolerance=1e-4,
                   max_entries_per_param=16, rng: SeededRng | None = None):
    """Compare analytic gradients against central finite differences.

    `loss_fn(want_grad)` returns the scalar loss; when want_grad is true it
    must also accumulate gradients into the params (which are zeroed here
    first). Large parameters are subsampled per `max_entries_per_param`.
    """
    rng = rng or SeededRng(0)
    for p in params:
        p.zero_grad()
    loss_fn(True)
    analytic = {p.name: p.grad.copy() for p in params}

    report = GradCheckReport()
    for p in params:
        flat = p.value.reshape(-1)
        n = flat.size
        if n <= max_entries_per_param:
            indices = np.arange(n)
        else:
            indices = np.sort(rng.permutation(n)[:max_entries_per_param])
        a_flat = analytic[p.name].reshape(-1)
        for idx in indices:
            orig = flat[idx]
            flat[idx] = orig + step
            plus = loss_fn(False)
            flat[idx] = orig - step
            minus = loss_fn(False)
            flat[idx] = orig
            numeric = (plus - minus) / (2 * step)
            err = relative_error(float(a_flat[idx]), numeric)
            report.checked += 1
            report.max_rel_err = max(report.max_rel_err, err)
            if err > tolerance:
                report.failures.append((p.name, int(idx), err))
    return report
