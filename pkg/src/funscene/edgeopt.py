"""Temporal edge-belief optimization for functional edge association.

For each fine-grained node the engine keeps a candidate set of parent
objects, accumulated log-odds evidence and a soft assignment distribution z
on the simplex.  Each evidence step re-solves

    max_z  sum_o z_o L_o  +  lambda_H * H(z)  -  lambda_D * 0.5 * ||z - z_prev||^2

which is concave (linear + entropy + concave quadratic), so the stationary
point is the global maximum.  The solver is entropic mirror ascent
(multiplicative weights) with step 1/(lambda_H + lambda_D); the objective is
(lambda_H + lambda_D)-smooth relative to the entropy kernel on the simplex,
which makes that step size monotonically convergent.  The final edge choice
is the arg-max of the integrated decision score L(o) + log z(o).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from funscene.model import DuplicateEvidenceError, EdgeBelief


@dataclass(frozen=True)
class EdgeOptParams:
    lambda_h: float = 1.0
    lambda_d: float = 1.0
    eps_clamp: float = 1e-6
    solver_iters: int = 200
    solver_tol: float = 1e-8
    min_obs: int = 2

    def __post_init__(self):
        if self.lambda_h < 0 or self.lambda_d < 0:
            raise ValueError("term weights must be non-negative")
        if not (0.0 < self.eps_clamp < 0.5):
            raise ValueError("eps_clamp must lie in (0, 0.5)")
        if self.solver_tol <= 0:
            raise ValueError("solver_tol must be positive")


def clamped_logit(s: float, eps: float) -> float:
    s = min(1.0 - eps, max(eps, s))
    return math.log(s / (1.0 - s))


def accumulate(belief: EdgeBelief, object_id: str, s_2d: float, frame_id: int,
               params: EdgeOptParams) -> EdgeBelief:
    """Fold one frame's support score into the belief's log-odds.

    A new candidate enters with uniform mass 1/(k+1); existing entries (and
    z_prev) are rescaled by k/(k+1) so relative history is preserved.
    """
    if not math.isfinite(s_2d):
        raise ValueError(f"support score must be finite, got {s_2d}")
    if frame_id in belief.obs_frames.get(object_id, set()):
        raise DuplicateEvidenceError(
            f"candidate {object_id} already has evidence for frame {frame_id}"
        )
    if object_id not in belief.logodds:
        k = len(belief.candidates)
        scale = k / (k + 1)
        for o in belief.candidates:
            belief.z[o] *= scale
            belief.z_prev[o] *= scale
        belief.candidates.append(object_id)
        belief.logodds[object_id] = 0.0
        belief.z[object_id] = 1.0 / (k + 1)
        belief.z_prev[object_id] = 1.0 / (k + 1)
        belief.obs_frames[object_id] = set()
    belief.logodds[object_id] += clamped_logit(s_2d, params.eps_clamp)
    belief.obs_frames[object_id].add(frame_id)
    return belief


def _objective(z: np.ndarray, l_vec: np.ndarray, z_prev: np.ndarray, params: EdgeOptParams) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.sum(np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0))
    smooth = 0.5 * float(np.sum((z - z_prev) ** 2))
    return float(z @ l_vec) + params.lambda_h * float(ent) - params.lambda_d * smooth


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, len(v) + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def solve_assignment(
    l_vec: np.ndarray, z_prev: np.ndarray, params: EdgeOptParams
) -> np.ndarray:
    """Maximise the evidence + entropy - smoothing objective over the simplex."""
    l_vec = np.asarray(l_vec, dtype=np.float64)
    z_prev = np.asarray(z_prev, dtype=np.float64)
    if not np.all(np.isfinite(l_vec)):
        raise ValueError("log-odds vector contains non-finite entries")
    n = len(l_vec)
    if n == 1:
        return np.array([1.0])
    if params.lambda_h == 0.0 and params.lambda_d == 0.0:
        z = np.zeros(n)
        z[int(np.argmax(l_vec))] = 1.0
        return z
    if params.lambda_d == 0.0:
        return _softmax(l_vec / params.lambda_h)
    if params.lambda_h == 0.0:
        # boundary-degenerate case: the objective is a Euclidean proximal
        # step, solved exactly by projection
        return _project_simplex(z_prev + l_vec / params.lambda_d)

    eta = 1.0 / (params.lambda_h + params.lambda_d)
    z = _softmax(l_vec / params.lambda_h)  # smoothing-free optimum as warm start
    for _ in range(params.solver_iters):
        # coordinates that underflowed to exactly 0 stay there (multiplicative
        # updates cannot revive them, and the entropy pull is below float range)
        support = z > 0.0
        zs = z[support]
        grad = (
            l_vec[support]
            - params.lambda_h * (1.0 + np.log(zs))
            - params.lambda_d * (zs - z_prev[support])
        )
        residual = float(np.abs(grad - zs @ grad).max())
        if residual <= params.solver_tol:
            break
        zs = zs * np.exp(eta * (grad - grad.max()))
        z = np.zeros_like(z)
        z[support] = zs / zs.sum()
    return z


def optimize_step(belief: EdgeBelief, params: EdgeOptParams) -> dict[str, float]:
    """Advance the belief one step: z_prev <- z, z <- objective arg-max."""
    if not belief.candidates:
        raise ValueError("belief has no candidates to optimize over")
    order = list(belief.candidates)
    l_vec = np.array([belief.logodds[o] for o in order])
    z_prev = np.array([belief.z[o] for o in order])
    z_new = solve_assignment(l_vec, z_prev, params)
    belief.z_prev = {o: float(v) for o, v in zip(order, z_prev)}
    belief.z = {o: float(v) for o, v in zip(order, z_new)}
    return belief.z


def decision_score(belief: EdgeBelief) -> dict[str, float]:
    """Integrated decision score L(o) + log z(o) per candidate."""
    out: dict[str, float] = {}
    for o in belief.candidates:
        z = belief.z[o]
        out[o] = belief.logodds[o] + (math.log(z) if z > 0 else -math.inf)
    return out


def select_edge(belief: EdgeBelief, params: EdgeOptParams) -> str | None:
    """Top-1 candidate by decision score, once enough frames contributed.

    "Observations" counts distinct evidence frames for this fine node; ties
    go to the earliest-created candidate.
    """
    if len(belief.observed_frames()) < params.min_obs:
        return None
    scores = decision_score(belief)
    best, best_score = None, -math.inf
    for o in belief.candidates:  # insertion order fixes ties
        if scores[o] > best_score:
            best, best_score = o, scores[o]
    if best_score == -math.inf:
        return None
    return best


def count_argmax(belief: EdgeBelief) -> str | None:
    """Observation-count arg-max, the graph-optimization-free fallback."""
    best, best_count = None, -1
    for o in belief.candidates:
        c = len(belief.obs_frames[o])
        if c > best_count:
            best, best_count = o, c
    return best
