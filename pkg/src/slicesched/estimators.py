"""scikit-learn style wrappers around the two schedule synthesizers.

The fit/predict shape only partly fits this problem: ``fit`` takes a whole
instance (network plus flows) instead of a feature matrix, ``predict``
returns per-flow deadline bounds, and ``score`` is the fraction of flows the
simulator sees fully supported.
"""

from __future__ import annotations

import json
from os import PathLike
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .model import CapacityError, InfeasibleError, Instance, SliceAllocation, SliceSchedError
from .simulator import default_horizon, simulate
from .synthesis import arsc, cbh_baseline, solve_initial_rates


def check_instance(X) -> Instance:
    """Accept an :class:`Instance`, a JSON-style dict, or a path to a JSON file."""
    if isinstance(X, Instance):
        return X
    if isinstance(X, dict):
        return Instance.from_json(X)
    if isinstance(X, (str, PathLike)):
        return Instance.from_json(json.loads(Path(X).read_text(encoding="utf-8")))
    raise TypeError(f"expected an Instance, dict or path, got {type(X).__name__}")


class _SchedulerBase(BaseEstimator):
    def __init__(self, max_denominator: int = 10**6, tol: float = 1e-9, verify: bool = True):
        self.max_denominator = max_denominator
        self.tol = tol
        self.verify = verify

    def _synthesize(self, inst, initial):
        raise NotImplementedError

    def fit(self, X, y=None):
        inst = check_instance(X)
        if not inst.flows:
            raise SliceSchedError("cannot fit an instance without flows")
        self.network_ = inst.network
        try:
            initial = solve_initial_rates(
                inst.network, inst.flows, tol=self.tol, max_denominator=self.max_denominator
            )
            result = self._synthesize(inst, initial)
        except InfeasibleError:
            result = None
        self.result_ = result
        self.feasible_ = result is not None
        self.schedule_ = result.schedule if result else None
        self.slices_ = result.slices if result else None
        self.k_ = dict(result.k) if result else {}
        self.report_ = None
        if result is not None and self.verify:
            self.report_ = result.report or simulate(
                inst.network, inst.flows, result.slices, result.schedule,
                default_horizon(result.schedule, inst.flows),
            )
            self.feasible_ = self.report_.supports
        return self

    def predict(self, X) -> np.ndarray:
        """Deadline bound (sum of max inter-scheduling times) for every flow of ``X``."""
        check_is_fitted(self, "result_")
        if not self.feasible_:
            raise InfeasibleError("the fitted instance had no schedule")
        inst = check_instance(X)
        out = []
        for f in inst.flows:
            missing = [e for e in f.route if e not in self.k_]
            if missing:
                raise SliceSchedError(f"flow {f.id!r} uses unscheduled links {missing}")
            out.append(sum(self.k_[e] for e in f.route))
        return np.asarray(out, dtype=np.int64)

    def score(self, X, y=None) -> float:
        """Share of the flows of ``X`` that meet their deadline under the fitted schedule."""
        check_is_fitted(self, "result_")
        inst = check_instance(X)
        if not self.feasible_ or not inst.flows:
            return 0.0
        slices = SliceAllocation({(f.id, e): f.lam * self.k_[e] for f in inst.flows for e in f.route})
        try:
            slices.validate(inst.network, inst.flows)
        except CapacityError:
            return 0.0
        report = simulate(
            inst.network, inst.flows, slices, self.schedule_, default_horizon(self.schedule_, inst.flows)
        )
        ok = sum(1 for f in inst.flows if report.flows[f.id].expired == 0)
        return ok / len(inst.flows)


class ARSCScheduler(_SchedulerBase):
    """Almost-regular schedule with slices ``lambda * k_e``."""

    def _synthesize(self, inst, initial):
        return arsc(inst.network, inst.flows, initial=initial)


class CBHScheduler(_SchedulerBase):
    """Contiguous-block baseline with resource-minimizing slices."""

    def _synthesize(self, inst, initial):
        return cbh_baseline(inst.network, inst.flows, initial=initial)
