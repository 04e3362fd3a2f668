"""Dense solver for ``max tr(R V)  s.t.  diag(V) = 1, V >= 0`` over complex Hermitian V.

Primal-dual path following on the log-det barrier. The dual is
``min sum(y)  s.t.  Z = Diag(y) - R >= 0``. Starting from ``V = I`` and a
diagonally dominant ``y`` both iterates stay strictly feasible: the diagonal
constraint is linear and ``V = I`` satisfies it, so every Newton step keeps
``diag(V) = 1`` exactly. Each step targets the barrier weight
``mu = tr(Z V) / (10 n)`` and solves (HKM direction)

    (Z^-1 o V^T) dy = mu diag(Z^-1) - 1
    dV = mu Z^-1 - V - Z^-1 Diag(dy) V          (then Hermitian part)

which is a real n x n system. ``tr(Z V)`` is the duality gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, SolverFailureError

DEFAULT_TOL = 1e-7
DEFAULT_SAMPLES = 1000
MAX_NEWTON_STEPS = 500

_SIGMA = 0.1  # barrier target shrinks tenfold per step
_STEP_FRACTION = 0.95


@dataclass(frozen=True)
class UnitDiagSdp:
    objective: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.objective, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise InvalidArgumentError(f"objective must be square, got shape {r.shape}")
        if r.shape[0] < 2:
            raise InvalidArgumentError("objective must be at least 2 x 2")
        if not np.all(np.isfinite(r)):
            raise InvalidArgumentError("objective has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(r))))
        if np.max(np.abs(r - r.conj().T)) > 1e-12 * scale:
            raise InvalidArgumentError("objective is not Hermitian")
        object.__setattr__(self, "objective", (r + r.conj().T) / 2)

    @property
    def size(self) -> int:
        return self.objective.shape[0]

    def value(self, v: np.ndarray) -> float:
        """``v^H R v`` for one vector or a stack of row vectors."""
        v = np.asarray(v)
        if v.ndim == 1:
            return float(np.real(np.vdot(v, self.objective @ v)))
        return np.real(np.einsum("si,ij,sj->s", v.conj(), self.objective, v))


@dataclass(frozen=True)
class SdpSolution:
    primal: np.ndarray
    objective_value: float
    duality_gap: float
    iterations: int

    @property
    def dual_value(self) -> float:
        """Certified upper bound on the SDP optimum."""
        return self.objective_value + self.duality_gap


def _max_step(x, dx):
    """Largest ``a`` with ``x + a dx`` PSD, for Hermitian PD ``x``."""
    c = np.linalg.cholesky(x)
    m = np.linalg.solve(c, np.linalg.solve(c, dx).conj().T).conj().T
    lam_min = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
    return np.inf if lam_min >= 0 else -1.0 / lam_min


def _hermitian(a):
    return (a + a.conj().T) / 2


def solve_unit_diag_sdp(prob: UnitDiagSdp, tol: float = DEFAULT_TOL,
                        max_steps: int = MAX_NEWTON_STEPS) -> SdpSolution:
    """Maximize ``tr(R V)`` over unit-diagonal PSD matrices.

    Args:
        prob: the problem data.
        tol: absolute tolerance on the duality gap.
        max_steps: Newton step budget.

    Returns:
        SdpSolution whose ``duality_gap`` is at most ``tol``.

    Raises:
        SolverFailureError: the step budget ran out first.
    """
    if not tol > 0:
        raise InvalidArgumentError("tol must be > 0")
    r = prob.objective
    n = prob.size
    v = np.eye(n, dtype=complex)
    if not np.any(r):
        return SdpSolution(v, 0.0, 0.0, 0)

    y = np.sum(np.abs(r), axis=1) + 1.0
    ones = np.ones(n)
    gap = np.inf
    for step in range(max_steps + 1):
        z = np.diag(y) - r
        gap = float(np.real(np.sum(z * v.T)))
        if gap <= tol:
            primal = float(np.real(np.sum(r * v.T)))
            return SdpSolution(v, primal, max(gap, 0.0), step)
        if step == max_steps:
            break
        mu = _SIGMA * gap / n
        zinv = _hermitian(np.linalg.inv(z))
        schur = np.real(zinv * v.T)
        rhs = mu * np.real(np.diag(zinv)) - ones
        dy = np.linalg.solve(schur, rhs)
        dv = _hermitian(mu * zinv - v - (zinv * dy) @ v)
        dv[np.diag_indices(n)] = 0.0
        a_p = min(1.0, _STEP_FRACTION * _max_step(v, dv))
        a_d = min(1.0, _STEP_FRACTION * _max_step(z, np.diag(dy).astype(complex)))
        v = _hermitian(v + a_p * dv)
        v[np.diag_indices(n)] = 1.0
        y = y + a_d * dy
    raise SolverFailureError(
        f"SDP did not reach gap {tol:g} within {max_steps} Newton steps",
        {"gap": gap, "size": n, "objective": float(np.real(np.sum(r * v.T)))},
    )


def extract_rank_one(sol: SdpSolution, prob: UnitDiagSdp, num_samples: int = DEFAULT_SAMPLES,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Gaussian randomization: draw ``xi ~ CN(0, V)``, project to unit modulus, keep the best.

    Samples are drawn as one block, so for a fixed seed a larger
    ``num_samples`` only appends candidates. Ties go to the lowest index.
    """
    if num_samples < 1:
        raise InvalidArgumentError("num_samples must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    w, u = np.linalg.eigh(sol.primal)
    # drop round-off eigenvalues so an exactly rank-one V gives exact phases
    w = np.where(w > 1e-12 * max(w[-1], 0.0), w, 0.0)
    factor = u * np.sqrt(w)
    n = prob.size
    draws = rng.standard_normal((num_samples, n, 2))
    r = (draws[..., 0] + 1j * draws[..., 1]) / np.sqrt(2)
    xi = r @ factor.T
    cand = np.exp(1j * np.angle(xi))
    vals = prob.value(cand)
    return cand[int(np.argmax(vals))]
