"""scikit-learn style wrappers around the functional solvers.

The estimators hold solver settings as constructor parameters (so
``get_params``/``set_params``/``clone`` work) and store results in
trailing-underscore attributes after ``fit(mu, nu)``. There is no
``predict``: a transport problem has no held-out samples to score.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .allocation import solve
from .exceptions import InvalidParameterError
from .measures import AtomicMeasure
from .oracle import solve_rot
from .payoff import ConstantC
from .relax import RelaxationConfig
from .sweep import geometric_grid, run_sweep


def as_measure(obj) -> AtomicMeasure:
    """Accept an :class:`AtomicMeasure` or a ``(positions, masses)`` pair."""
    if isinstance(obj, AtomicMeasure):
        return obj
    try:
        positions, masses = obj
    except (TypeError, ValueError):
        raise InvalidParameterError("expected an AtomicMeasure or a (positions, masses) pair")
    return AtomicMeasure(positions, masses)


class _SolverParams(BaseEstimator):
    def _config(self) -> RelaxationConfig:
        return RelaxationConfig(tol=self.tol, max_iter=self.max_iter,
                                multistarts=self.multistarts, seed=self.seed,
                                oracle_limit=self.oracle_limit, n_jobs=self.n_jobs)


class BranchedTransport(_SolverParams):
    """Minimal Gilbert cost ``d_alpha`` between two balanced measures.

    Attributes (after fit)
    ----------------------
    distance_ : float
    path_ : TransportPath
    certified_ : bool
    """

    def __init__(self, alpha=0.5, mode="exact", oracle_limit=6, multistarts=8, seed=0,
                 tol=1e-9, max_iter=10000, n_jobs=None):
        self.alpha = alpha
        self.mode = mode
        self.oracle_limit = oracle_limit
        self.multistarts = multistarts
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter
        self.n_jobs = n_jobs

    def fit(self, mu, nu):
        res = solve_rot(as_measure(mu), as_measure(nu), self.alpha, self._config(), self.mode)
        self.distance_ = res.value
        self.path_ = res.path
        self.certified_ = res.certified
        return self


class PartialTransport(_SolverParams):
    """Optimal partial transport for a boundary payoff.

    Parameters
    ----------
    alpha : float
    c : float
        Constant payoff level, used when ``payoff`` is None.
    payoff : ConstantC or PerAtom, optional

    Attributes (after fit)
    ----------------------
    report_ : SolveReport
    path_, energy_, allocation_, components_ : shortcuts into ``report_``
    """

    def __init__(self, alpha=0.5, c=1.0, payoff=None, mode="exact", oracle_limit=6,
                 multistarts=8, seed=0, tol=1e-9, max_iter=10000, n_jobs=None):
        self.alpha = alpha
        self.c = c
        self.payoff = payoff
        self.mode = mode
        self.oracle_limit = oracle_limit
        self.multistarts = multistarts
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter
        self.n_jobs = n_jobs

    def fit(self, mu, nu):
        h = ConstantC(self.c) if self.payoff is None else self.payoff
        rep = solve(as_measure(mu), as_measure(nu), h, self.alpha, self._config(), self.mode)
        self.report_ = rep
        self.path_ = rep.path
        self.energy_ = rep.energy
        self.allocation_ = rep.allocation
        self.components_ = rep.components
        return self

    def score(self, mu, nu):
        """Negated optimal energy (higher is better, like sklearn scores)."""
        h = ConstantC(self.c) if self.payoff is None else self.payoff
        return -solve(as_measure(mu), as_measure(nu), h, self.alpha, self._config(),
                      self.mode).energy


class PayoffSweep(_SolverParams):
    """Constant-payoff sweep; ``report_`` holds a :class:`SweepReport`."""

    def __init__(self, alpha=0.5, c_grid=None, mode="exact", oracle_limit=6, multistarts=8,
                 seed=0, tol=1e-9, max_iter=10000, n_jobs=None):
        self.alpha = alpha
        self.c_grid = c_grid
        self.mode = mode
        self.oracle_limit = oracle_limit
        self.multistarts = multistarts
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter
        self.n_jobs = n_jobs

    def fit(self, mu, nu):
        grid = geometric_grid() if self.c_grid is None else list(self.c_grid)
        self.report_ = run_sweep(as_measure(mu), as_measure(nu), self.alpha, grid,
                                 self._config(), self.mode)
        return self
