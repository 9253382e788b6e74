"""Iterative magnitude pruning on linear models.

One run loops for rounds k = 0..q: reset the active weights to their
initialization, train to the horizon with exact gradient flow, record the
trained vector, then delete the smallest-magnitude active weights.  The
returned final weights are the round-q trained vector, i.e. the vector
trained under a mask with exactly q * per_round coordinates pruned, before
that round's own prune is applied.  Everything an auditor needs to replay
the run is kept in the trace.

Indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .designs import FeatureSet
from .flow import INFINITE, Horizon, closed_form_weights, normalize_horizon
from .linalg import sym_eig

TIE_BREAK_RULES = ("lowest_index", "highest_index")


@dataclass(frozen=True)
class PruneMask:
    """Which coordinates survive, plus the chronological prune order."""

    active: np.ndarray
    prune_order: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        a = np.asarray(self.active, dtype=bool).copy()
        a.setflags(write=False)
        object.__setattr__(self, "active", a)
        order = tuple(int(i) for i in self.prune_order)
        object.__setattr__(self, "prune_order", order)
        if len(set(order)) != len(order):
            raise ValueError("prune_order entries must be distinct")
        if int(a.sum()) + len(order) != a.shape[0]:
            raise ValueError("active count plus prune_order length must equal p")
        if any(a[i] for i in order):
            raise ValueError("pruned indices must be inactive")

    @classmethod
    def full(cls, p: int) -> "PruneMask":
        return cls(active=np.ones(p, dtype=bool))

    @property
    def p(self) -> int:
        return self.active.shape[0]

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def prune(self, indices) -> "PruneMask":
        idx = [int(i) for i in np.atleast_1d(indices)]
        for i in idx:
            if not self.active[i]:
                raise ValueError(f"index {i} is already pruned")
        new_active = self.active.copy()
        new_active[idx] = False
        return PruneMask(active=new_active, prune_order=self.prune_order + tuple(idx))


@dataclass(frozen=True)
class ImpConfig:
    """Inputs of one pruning run.

    prune_rounds is the loop bound q: the loop body executes q + 1 times and
    prunes q + 1 times, but the returned weights come from round q's
    training, under a mask with q * per_round pruned coordinates.  w_init
    defaults to the zero vector.  The argmin tie rule is "lowest_index"
    unless configured otherwise.
    """

    horizon: Horizon = INFINITE
    prune_rounds: int = 0
    w_init: np.ndarray | None = None
    per_round: int = 1
    rank_tol: float | None = None
    tie_break: str = "lowest_index"

    def __post_init__(self) -> None:
        object.__setattr__(self, "horizon", normalize_horizon(self.horizon))
        if self.prune_rounds < 0:
            raise ValueError("prune_rounds must be nonnegative")
        if self.per_round < 1:
            raise ValueError("per_round must be positive")
        if self.tie_break not in TIE_BREAK_RULES:
            raise ValueError(f"unknown tie_break rule {self.tie_break!r}")
        if self.w_init is not None:
            object.__setattr__(self, "w_init", np.asarray(self.w_init, dtype=float))


@dataclass(frozen=True)
class RoundRecord:
    """Mask before this round's prune, the trained vector, and what was pruned."""

    mask: PruneMask
    weights: np.ndarray
    pruned: tuple[int, ...]
    pruned_magnitudes: tuple[float, ...]


@dataclass(frozen=True)
class ImpTrace:
    rounds: tuple[RoundRecord, ...] = field(default_factory=tuple)
    final_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def prune_order(self) -> tuple[int, ...]:
        out: tuple[int, ...] = ()
        for rec in self.rounds:
            out = out + rec.pruned
        return out


def _select_prune(
    magnitudes: np.ndarray, count: int, tie_break: str
) -> np.ndarray:
    """Local indices of the `count` smallest magnitudes under the tie rule."""
    if tie_break == "lowest_index":
        order = np.argsort(magnitudes, kind="stable")
    else:  # highest_index: among ties, the larger index goes first
        m = magnitudes.shape[0]
        order = np.lexsort((-np.arange(m), magnitudes))
    return order[:count]


def run_imp(
    features: FeatureSet,
    config: ImpConfig,
    init_hook: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> ImpTrace:
    """Execute the pruning loop and return the full trace.

    `init_hook(round, active_indices, w0_active)`, when given, observes each
    round's initialization; it exists so tests can verify that survivors are
    reset to w_init before retraining.
    """
    y = features.require_targets()
    p = features.p
    w_init = config.w_init if config.w_init is not None else np.zeros(p)
    if w_init.shape != (p,):
        raise ValueError(f"w_init must have length p={p}, got {w_init.shape}")
    q = config.prune_rounds
    if config.per_round * (q + 1) > p:
        raise ValueError(
            f"per_round * (prune_rounds + 1) = {config.per_round * (q + 1)} exceeds p = {p}"
        )

    cov = features.covariance
    data_vec = features.phi.T @ y / features.n

    mask = PruneMask.full(p)
    rounds: list[RoundRecord] = []
    final_weights = np.zeros(p)
    for k in range(q + 1):
        active_idx = mask.active_indices()
        w0_active = w_init[active_idx]
        if init_hook is not None:
            init_hook(k, active_idx, w0_active)

        eig = sym_eig(cov.restrict(active_idx), config.rank_tol)
        w_active = closed_form_weights(eig, data_vec[active_idx], w0_active, config.horizon)

        weights = np.zeros(p)
        weights[active_idx] = w_active
        local = _select_prune(np.abs(w_active), config.per_round, config.tie_break)
        pruned = tuple(int(i) for i in active_idx[local])
        magnitudes = tuple(float(abs(weights[i])) for i in pruned)

        rounds.append(
            RoundRecord(mask=mask, weights=weights, pruned=pruned, pruned_magnitudes=magnitudes)
        )
        if k == q:
            final_weights = weights
        mask = mask.prune(pruned)

    return ImpTrace(rounds=tuple(rounds), final_weights=final_weights)


def imp_prune_order(features: FeatureSet, config: ImpConfig | None = None) -> np.ndarray:
    """Full pruning ranking: run with q = p - 1 and one prune per round."""
    base = config if config is not None else ImpConfig()
    full = replace(base, prune_rounds=features.p - 1, per_round=1)
    trace = run_imp(features, full)
    return np.asarray(trace.prune_order, dtype=int)


def trace_to_dict(trace: ImpTrace) -> dict:
    """JSON-ready form of a trace (the audit schema used by the harness)."""
    return {
        "final_weights": trace.final_weights.tolist(),
        "rounds": [
            {
                "active": rec.mask.active.tolist(),
                "weights": rec.weights.tolist(),
                "pruned": list(rec.pruned),
                "pruned_magnitudes": list(rec.pruned_magnitudes),
            }
            for rec in trace.rounds
        ],
    }


def trace_from_dict(d: dict) -> ImpTrace:
    rounds = []
    order: tuple[int, ...] = ()
    for rd in d["rounds"]:
        mask = PruneMask(active=np.asarray(rd["active"], dtype=bool), prune_order=order)
        pruned = tuple(int(i) for i in rd["pruned"])
        rounds.append(
            RoundRecord(
                mask=mask,
                weights=np.asarray(rd["weights"], dtype=float),
                pruned=pruned,
                pruned_magnitudes=tuple(float(x) for x in rd["pruned_magnitudes"]),
            )
        )
        order = order + pruned
    return ImpTrace(
        rounds=tuple(rounds),
        final_weights=np.asarray(d["final_weights"], dtype=float),
    )
