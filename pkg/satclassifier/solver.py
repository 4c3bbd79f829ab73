"""Accelerated primal-dual solver for one class subproblem.

For class ``j`` the smoothing model restricted to the test values reads::

    min_u  beta/2 ||u - uhat||^2 + alpha/2 u^T LS u + alpha u^T L3 ubar
           + ||A_S u + H_j||_1

The fidelity, Dirichlet and coupling terms form ``G`` (strongly convex with
modulus ``beta``), the total variation term is ``F(A_S u)``. The dual prox
is a clamp onto ``[-1, 1]``; the primal prox is a sparse SPD linear solve
done by Jacobi-preconditioned conjugate gradient.
"""

from dataclasses import dataclass
import math

from astropy import log
import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .config import SolverConfig
from .exceptions import InvalidInputError, SolverStallError
from .graph import operator_norm_estimate, theorem_norm_bound

__all__ = ['prox_f_star', 'prox_g', 'step_size_init', 'acceleration_update',
           'objective_value', 'PdState', 'PrimalDualSolver', 'solve_subproblem']


def prox_f_star(x_tilde, sigma, H):
    """Dual prox: projection of ``x_tilde + sigma H`` onto ``{|p| <= 1}``.

    Negative entries saturate at ``-1``.
    """
    return np.clip(np.asarray(x_tilde) + sigma * np.asarray(H), -1.0, 1.0)


class _QuadraticProx(object):
    """Solver of ``(alpha LS + (beta + 1/tau) I) u = beta uhat + x/tau - alpha L3 ubar``."""
    def __init__(self, params, blocks, u_hat, u_bar, cfg):
        self.alpha = params.alpha
        self.beta = params.beta
        self.cfg = cfg
        self.LS = blocks.system_matrix(cfg.exact_laplacian_block)
        self.n = self.LS.shape[0]
        self.diag = self.LS.diagonal() if self.n else np.zeros(0)
        coupling = blocks.L3 @ np.asarray(u_bar, dtype=np.float64) if self.n else np.zeros(0)
        self.rhs_const = self.beta * np.asarray(u_hat, dtype=np.float64) - self.alpha * coupling
        self.dirichlet = self.alpha > 0 and self.LS.nnz > 0
        self.cg_iterations = 0

    def solve(self, x=None, tau=None, guess=None):
        """Prox at ``x`` with step ``tau``; ``tau=None`` minimizes ``G`` itself."""
        shift = self.beta if tau is None else self.beta + 1.0 / tau
        rhs = self.rhs_const if tau is None else self.rhs_const + x / tau
        if self.n == 0:
            return np.zeros(0)
        if not self.dirichlet:
            return rhs / shift

        alpha, LS = self.alpha, self.LS
        system = LinearOperator((self.n, self.n), matvec=lambda v: alpha * (LS @ v) + shift * v,
                                dtype=np.float64)
        inverse_diag = 1.0 / (alpha * self.diag + shift)
        jacobi = LinearOperator((self.n, self.n), matvec=lambda v: inverse_diag * v, dtype=np.float64)

        counter = [0]

        def count(_):
            counter[0] += 1

        u, info = cg(system, rhs, x0=guess, rtol=self.cfg.cg_tol, atol=0.0,
                     maxiter=self.cfg.cg_max_iters, M=jacobi, callback=count)
        self.cg_iterations += counter[0]
        if info != 0:
            residual = float(np.linalg.norm(rhs - system @ u))
            rhs_norm = float(np.linalg.norm(rhs))
            if residual > self.cfg.cg_tol * rhs_norm:
                raise SolverStallError('conjugate gradient did not converge in the primal prox',
                                       residual=residual, iterations=counter[0])
        return u


def prox_g(x, tau, params, blocks, u_hat_s, u_bar_j, cfg=None):
    """Primal prox of ``G`` at ``x`` with step ``tau``.

    Parameters
    ----------
    x : ndarray
        Point of evaluation (test values).
    tau : float
        Positive primal step.
    params : ModelParams
    blocks : LaplacianSplit
    u_hat_s : ndarray
        Initialization restricted to the test nodes.
    u_bar_j : ndarray
        Fixed training labels of the class.
    cfg : SolverConfig, optional

    Returns
    -------
    u : ndarray
    """
    if not tau > 0:
        raise InvalidInputError('tau must be positive, got {}'.format(tau))
    cfg = SolverConfig() if cfg is None else cfg
    return _QuadraticProx(params, blocks, u_hat_s, u_bar_j, cfg).solve(np.asarray(x, dtype=np.float64), tau)


def step_size_init(op_norm, mode, n, k):
    """Initial primal and dual steps.

    ``'theorem'`` uses the worst-case bound ``N sqrt(k - 1)`` on the
    operator norm, ``'power'`` the supplied estimate. Both return
    ``tau0 = sigma0 = 0.99 / norm``.
    """
    if mode == 'theorem':
        norm = theorem_norm_bound(n, k)
    elif mode == 'power':
        if not op_norm > 0:
            raise InvalidInputError('power step mode needs a positive operator norm, got {}'.format(op_norm))
        norm = op_norm
    else:
        raise InvalidInputError("mode must be 'theorem' or 'power', got {!r}".format(mode))
    step = 0.99 / norm
    return step, step


def acceleration_update(tau, sigma, beta):
    """One step of the strong-convexity acceleration rule.

    Returns
    -------
    theta, tau_next, sigma_next : float
        ``theta = 1 / sqrt(1 + beta tau)``, ``tau theta`` and
        ``sigma / theta``; the product of the steps is unchanged.
    """
    theta = 1.0 / math.sqrt(1.0 + beta * tau)
    return theta, theta * tau, sigma / theta


def objective_value(u_s, params, blocks, op, u_hat_s, u_bar_j, class_idx, exact_block=False):
    """Value of the class subproblem objective at ``u_s``."""
    u_s = np.asarray(u_s, dtype=np.float64)
    u_hat_s = np.asarray(u_hat_s, dtype=np.float64)
    LS = blocks.system_matrix(exact_block)
    fidelity = 0.5 * params.beta * float(np.sum((u_hat_s - u_s) ** 2))
    if u_s.size:
        dirichlet = 0.5 * params.alpha * float(u_s @ (LS @ u_s))
        coupling = params.alpha * float(u_s @ (blocks.L3 @ np.asarray(u_bar_j, dtype=np.float64)))
    else:
        dirichlet = coupling = 0.0
    total_variation = float(np.sum(np.abs(op.apply(u_s) + op.offset(class_idx))))
    return fidelity + dirichlet + coupling + total_variation


@dataclass
class PdState:
    """Primal-dual iterate."""
    x: np.ndarray
    x_tilde: np.ndarray
    z: np.ndarray
    tau: float
    sigma: float
    theta: float = 1.0
    iter: int = 0


class PrimalDualSolver(object):
    """Accelerated primal-dual iteration for one class.

    Parameters
    ----------
    class_idx : int
        Class ``j``.
    u_hat_s : ndarray
        Fidelity anchor on the test nodes.
    u_bar_j : ndarray
        Training labels of class ``j`` (0/1 per training node).
    op : GradientOp
    blocks : LaplacianSplit
    params : ModelParams
    cfg : SolverConfig
    op_norm : float, optional
        Precomputed estimate of ``||A_S||``; computed on demand in
        ``'power'`` step mode.
    diagnostics : callable, optional
        Receives one dict per iteration with ``iteration``, ``objective``,
        ``residual``, ``tau`` and ``sigma``.
    """
    def __init__(self, class_idx, u_hat_s, u_bar_j, op, blocks, params, cfg=None,
                 op_norm=None, diagnostics=None):
        self.class_idx = int(class_idx)
        self.u_hat_s = np.asarray(u_hat_s, dtype=np.float64)
        self.u_bar_j = np.asarray(u_bar_j, dtype=np.float64)
        if self.u_hat_s.shape != (op.n_test,):
            raise InvalidInputError('u_hat_s must have length {}'.format(op.n_test))
        self.op = op
        self.blocks = blocks
        self.params = params
        self.cfg = SolverConfig() if cfg is None else cfg
        self.op_norm = op_norm
        self.diagnostics = diagnostics
        self.prox = _QuadraticProx(params, blocks, self.u_hat_s, self.u_bar_j, self.cfg)
        self.state = None
        self.converged = False
        self.residual = np.inf

    def __repr__(self):
        return "<PrimalDualSolver class {} on {} test nodes>".format(self.class_idx, self.op.n_test)

    def objective(self, u_s):
        return objective_value(u_s, self.params, self.blocks, self.op, self.u_hat_s, self.u_bar_j,
                               self.class_idx, exact_block=self.cfg.exact_laplacian_block)

    def _initial_state(self, x0):
        x = self.u_hat_s.copy() if x0 is None else np.array(x0, dtype=np.float64)
        if self.cfg.step_mode == 'power':
            if self.op_norm is None:
                self.op_norm = operator_norm_estimate(self.op, self.cfg.power_iters)
            tau, sigma = step_size_init(self.op_norm, 'power', self.op.n, self.op.k)
        else:
            tau, sigma = step_size_init(None, 'theorem', self.op.n, self.op.k)
        return PdState(x=x, x_tilde=np.zeros(self.op.A.shape[0]), z=x.copy(), tau=tau, sigma=sigma)

    def solve(self, x0=None):
        """Run until the relative primal change drops below ``rel_tol``.

        Parameters
        ----------
        x0 : ndarray, optional
            Initial primal iterate; defaults to the fidelity anchor.

        Returns
        -------
        u : ndarray
            Smoothed labeling function on the test nodes.
        """
        if self.op.n_test == 0:
            self.converged = True
            self.residual = 0.0
            return np.zeros(0)
        if self.op.A.nnz == 0:
            # no edge touches a test node: the minimizer of G solves the problem
            self.converged = True
            self.residual = 0.0
            return self.prox.solve()

        state = self._initial_state(x0)
        self.state = state
        H = self.op.offset(self.class_idx)
        beta = self.params.beta
        for iteration in range(1, self.cfg.max_iters + 1):
            state.x_tilde = prox_f_star(state.x_tilde + state.sigma * self.op.apply(state.z), state.sigma, H)
            x_prev = state.x
            state.x = self.prox.solve(x_prev - state.tau * self.op.adjoint(state.x_tilde), state.tau,
                                      guess=x_prev)
            state.theta, state.tau, state.sigma = acceleration_update(state.tau, state.sigma, beta)
            state.z = state.x + state.theta * (state.x - x_prev)
            state.iter = iteration

            self.residual = float(np.linalg.norm(state.x - x_prev) / max(1.0, np.linalg.norm(x_prev)))
            if self.diagnostics is not None:
                self.diagnostics({'class': self.class_idx, 'iteration': iteration,
                                  'objective': self.objective(state.x), 'residual': self.residual,
                                  'tau': state.tau, 'sigma': state.sigma})
            if self.residual <= self.cfg.rel_tol:
                self.converged = True
                break

        log.debug('class {}: {} primal-dual iterations, residual {:.2e}, {} CG iterations'.format(
            self.class_idx, state.iter, self.residual, self.prox.cg_iterations))
        return state.x.copy()


def solve_subproblem(class_idx, u_hat_s, u_bar_j, op, blocks, params, cfg=None, x0=None,
                     op_norm=None, diagnostics=None):
    """Solve one class subproblem and return the smoothed test values.

    See `PrimalDualSolver` for the parameters.
    """
    solver = PrimalDualSolver(class_idx, u_hat_s, u_bar_j, op, blocks, params, cfg=cfg,
                              op_norm=op_norm, diagnostics=diagnostics)
    return solver.solve(x0=x0)
