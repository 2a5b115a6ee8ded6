"""Central-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np

from .tensor import Tape, Tensor, backward


class NondeterministicFunctionError(RuntimeError):
    pass


@dataclass
class ParamCheck:
    name: str
    coords_checked: int
    max_rel_err: float
    worst_index: tuple
    analytic: float
    numeric: float


@dataclass
class GradCheckReport:
    """Per-parameter results; ``passed`` compares the worst error with ``tol``."""

    tol: float
    h: float
    params: List[ParamCheck] = field(default_factory=list)
    refined: int = 0

    @property
    def max_rel_err(self) -> float:
        return max((p.max_rel_err for p in self.params), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "h": self.h,
            "max_rel_err": self.max_rel_err,
            "refined_coords": self.refined,
            "params": [
                {
                    "name": p.name,
                    "coords_checked": p.coords_checked,
                    "max_rel_err": p.max_rel_err,
                    "worst_index": [int(i) for i in p.worst_index],
                    "analytic": p.analytic,
                    "numeric": p.numeric,
                }
                for p in self.params
            ],
        }


def rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1e-8)


def _central(scalar, flat, i, step) -> float:
    orig = flat[i]
    flat[i] = orig + step
    fp = scalar()
    flat[i] = orig - step
    fm = scalar()
    flat[i] = orig
    return (fp - fm) / (2.0 * step)


def grad_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    h: float = 1e-3,
    tol: float = 1e-4,
    max_coords: int = 64,
    rng: Optional[np.random.Generator] = None,
    refine: int = 2,
) -> GradCheckReport:
    """Compare tape gradients of the scalar ``f()`` against central differences.

    ``f`` is called with no arguments and must read the current values of
    ``params`` (which are perturbed in place). The step for coordinate ``i``
    is ``h * max(1, |theta_i|)``. Tensors with more than ``max_coords``
    entries are checked on a uniform sample of coordinates drawn from ``rng``.

    A coordinate that fails at step ``h`` is re-estimated up to ``refine``
    times with the step shrunk tenfold each time, keeping the smallest error.
    This separates ReLU kinks lying within ``h`` of the evaluation point
    (which disappear at a finer step) from wrong gradients (which do not).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for p in params.values():
        p.requires_grad = True

    with Tape() as tape:
        loss = f()
    f0 = loss.item()
    analytic: Dict[str, np.ndarray] = {}
    grads = backward(loss, tape, wrt=list(params.values()))
    for name, p in params.items():
        analytic[name] = grads[p].copy()

    def scalar() -> float:
        return f().item()

    if scalar() != f0:
        raise NondeterministicFunctionError("f returned different values on two identical evaluations")

    report = GradCheckReport(tol=tol, h=h)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        if flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        else:
            coords = np.arange(flat.size)
        worst = ParamCheck(name, len(coords), 0.0, (), 0.0, 0.0)
        for i in coords:
            a = float(analytic[name].reshape(-1)[i])
            step = h * max(1.0, abs(flat[i]))
            numeric = _central(scalar, flat, i, step)
            err = rel_err(a, numeric)
            for _ in range(refine):
                if err < tol:
                    break
                step /= 10.0
                n2 = _central(scalar, flat, i, step)
                if rel_err(a, n2) < err:
                    numeric, err = n2, rel_err(a, n2)
                report.refined += 1
            if err >= worst.max_rel_err:
                worst = ParamCheck(name, len(coords), err,
                                   np.unravel_index(i, p.shape), a, numeric)
        report.params.append(worst)
    return report
