from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    passed: bool
    checked: int
    worst_error: float
    worst_param: str | None
    worst_index: tuple | None
    worst_analytic: float = 0.0
    worst_numeric: float = 0.0
    failures: list[tuple[str, tuple, float]] = field(default_factory=list)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        where = f"{self.worst_param}{list(self.worst_index)}" if self.worst_param else "-"
        return (f"{status}: {self.checked} entries, worst relative error {self.worst_error:.3e} at {where} "
                f"(analytic {self.worst_analytic:.6e}, numeric {self.worst_numeric:.6e})")


def grad_check(f: Callable[[], Tensor], params: dict[str, Tensor], h: float = 1e-6, tol: float = 1e-6,
               max_entries: int | None = None) -> GradCheckReport:
    """Compare backprop gradients of scalar ``f()`` with central differences.

    ``f`` must rebuild its graph on each call and be deterministic (dropout
    off, batch norm in eval mode).  The error for one entry is
    ``|analytic - numeric| / max(1, |numeric|)``.
    """
    for p in params.values():
        p.zero_grad()
    out = f()
    out.backward()
    analytic = {k: p.grad.copy() for k, p in params.items()}

    worst = (0.0, None, None, 0.0, 0.0)
    failures = []
    checked = 0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            if max_entries is not None and checked >= max_entries:
                break
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f().data)
            flat[i] = orig - h
            fm = float(f().data)
            flat[i] = orig
            num = (fp - fm) / (2 * h)
            ana = float(analytic[name].reshape(-1)[i])
            err = abs(ana - num) / max(1.0, abs(num))
            idx = np.unravel_index(i, p.shape) if p.shape else ()
            if err > worst[0] or worst[1] is None:
                worst = (err, name, tuple(int(j) for j in idx), ana, num)
            if not err < tol:
                failures.append((name, tuple(int(j) for j in idx), err))
            checked += 1
    return GradCheckReport(
        passed=not failures,
        checked=checked,
        worst_error=worst[0],
        worst_param=worst[1],
        worst_index=worst[2],
        worst_analytic=worst[3],
        worst_numeric=worst[4],
        failures=failures,
    )
