"""Distances between a true and a reconstructed reward vector."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from pril.errors import ZeroVector

NORMS = {"l1": 1, "l2": 2, "linf": np.inf}


def _norm(v: np.ndarray, kind: str) -> float:
    if kind not in NORMS:
        raise ValueError(f"norm must be one of {sorted(NORMS)}")
    return float(np.linalg.norm(v, ord=NORMS[kind]))


def normalized_distance(R, R_hat, norm: str = "l2") -> float:
    """Scale each vector to unit ``norm``, then return that norm of their difference."""
    R = np.asarray(R, dtype=np.float64)
    R_hat = np.asarray(R_hat, dtype=np.float64)
    if R.shape != R_hat.shape:
        raise ValueError("reward vectors differ in length")
    n1, n2 = _norm(R, norm), _norm(R_hat, norm)
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroVector(f"cannot normalize an all-zero reward vector under {norm}")
    return _norm(R / n1 - R_hat / n2, norm)


def sign_change_count(R, R_hat) -> int:
    """States whose reward flips strictly from positive to negative or back."""
    R = np.asarray(R, dtype=np.float64)
    R_hat = np.asarray(R_hat, dtype=np.float64)
    if R.shape != R_hat.shape:
        raise ValueError("reward vectors differ in length")
    return int(np.count_nonzero(np.sign(R) * np.sign(R_hat) < 0))


@dataclass(frozen=True)
class DistanceReport:
    l1: float
    l2: float
    linf: float
    sign_changes: int

    def as_dict(self) -> dict:
        return asdict(self)


def distance_report(R, R_hat) -> DistanceReport:
    return DistanceReport(
        l1=normalized_distance(R, R_hat, "l1"),
        l2=normalized_distance(R, R_hat, "l2"),
        linf=normalized_distance(R, R_hat, "linf"),
        sign_changes=sign_change_count(R, R_hat),
    )
