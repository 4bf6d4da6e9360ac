"""Path-following solver with Frank-Wolfe inner steps and confidence updates."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .affinity import DummyMapping
from .factorization import FactorizedProblem
from .graph import Assignment, ValidationError
from .objective import ObjectiveContext, QuadraticModel, f_theta, uniform_confidence

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    theta_step: float = 0.01
    fw_max_iters: int = 200
    fw_gap_tol: float = 1e-6
    confidence_update: bool = True
    lc_floor: float = 1e-3
    seed: int = 0
    fw_variant: str = "plain"

    def __post_init__(self):
        if not 0.0 < self.theta_step <= 1.0:
            raise ValidationError("theta_step must lie in (0, 1]")
        if self.fw_max_iters < 1 or self.fw_gap_tol <= 0 or self.lc_floor < 0:
            raise ValidationError("iteration limits and tolerances must be positive")
        if self.fw_variant not in ("plain", "away"):
            raise ValidationError(f"fw_variant must be 'plain' or 'away', got {self.fw_variant!r}")

    def thetas(self) -> np.ndarray:
        steps = int(round(1.0 / self.theta_step))
        if np.isclose(steps * self.theta_step, 1.0):
            return np.linspace(0.0, 1.0, steps + 1)
        grid = np.arange(0.0, 1.0, self.theta_step)
        return np.append(grid, 1.0)


@dataclass
class SolveReport:
    assignment: Assignment
    objective_trace: list = field(default_factory=list)
    lc_trace: list = field(default_factory=list)
    fw_iters: list = field(default_factory=list)
    wall_time: float = 0.0
    flags: list = field(default_factory=list)
    capped_steps: int = 0
    relaxed: np.ndarray | None = None
    fw_values: list = field(default_factory=list, repr=False)

    @property
    def confidence(self) -> np.ndarray:
        return self.lc_trace[-1][1] if self.lc_trace else None


def hungarian(profit) -> np.ndarray:
    """Permutation maximizing the total profit of a square matrix.

    Rectangular input is padded with zero-profit rows or columns; the
    returned array has one column index per padded row.
    """
    profit = np.asarray(profit, dtype=float)
    if not np.all(np.isfinite(profit)):
        raise ValidationError("profit matrix has non-finite entries")
    n = max(profit.shape)
    if profit.shape[0] != profit.shape[1]:
        square = np.zeros((n, n))
        square[: profit.shape[0], : profit.shape[1]] = profit
        profit = square
    _, cols = linear_sum_assignment(profit, maximize=True)
    return cols


def permutation_matrix(perm, n: int | None = None) -> np.ndarray:
    perm = np.asarray(perm)
    X = np.zeros((len(perm), len(perm) if n is None else n))
    X[np.arange(len(perm)), perm] = 1.0
    return X


def exact_line_search(X, D, ctx: ObjectiveContext) -> float:
    """Maximizer over ``[0, 1]`` of ``F_theta(X + g (D - X))``.

    The objective is quadratic along the segment, so it is recovered from
    its values at ``g = 0, 1/2, 1``.
    """
    X = np.asarray(X, dtype=float)
    D = np.asarray(D, dtype=float)
    f0 = f_theta(X, ctx)
    fh = f_theta(0.5 * (X + D), ctx)
    f1 = f_theta(D, ctx)
    a = 2.0 * (f0 + f1 - 2.0 * fh)
    b = f1 - f0 - a
    return _quadratic_argmax(a, b, scale=max(abs(f0), abs(f1), 1.0))


def _quadratic_argmax(a: float, b: float, scale: float = 1.0) -> float:
    if abs(a) <= 1e-14 * scale:
        return 1.0 if b > 0 else 0.0
    if a < 0:
        return float(min(1.0, max(0.0, -b / (2.0 * a))))
    # convex along the segment: best endpoint
    return 1.0 if a + b > 0 else 0.0


@dataclass
class FWResult:
    x: np.ndarray
    value: float
    iters: int
    converged: bool
    values: list
    active: dict | None = None


def birkhoff_decomposition(X, tol: float = 1e-12) -> dict:
    """Write a doubly stochastic ``X`` as a convex combination of permutations.

    Returns ``{perm tuple: weight}``. Each round takes a permutation inside
    the support of the remainder (one exists by Birkhoff's theorem) with its
    smallest entry as weight.
    """
    R = np.array(getattr(X, "matrix", X), dtype=float)
    n = R.shape[0]
    if R.shape != (n, n) or not (np.allclose(R.sum(axis=0), 1, atol=1e-8)
                                 and np.allclose(R.sum(axis=1), 1, atol=1e-8)):
        raise ValidationError("Birkhoff decomposition needs a doubly stochastic matrix")
    out = {}
    rows = np.arange(n)
    remaining = 1.0
    while remaining > tol:
        # prefer large entries; zero entries are effectively forbidden
        profit = np.where(R > tol, np.log(np.maximum(R, tol)), -1e6)
        perm = hungarian(profit)
        w = float(R[rows, perm].min())
        if w <= tol:
            break
        key = tuple(int(c) for c in perm)
        out[key] = out.get(key, 0.0) + w
        R[rows, perm] -= w
        remaining -= w
    total = sum(out.values())
    return {k: v / total for k, v in out.items()}


def _uniform_active(n: int) -> dict:
    # the uniform matrix is the average of the n cyclic shifts
    return {tuple(int(c) for c in (np.arange(n) + k) % n): 1.0 / n for k in range(n)}


def frank_wolfe(model: QuadraticModel, x0: np.ndarray, theta: float, cfg: SolverConfig,
                record: bool = False, active: dict | None = None) -> FWResult:
    """Maximize the model's ``F_theta`` over doubly stochastic matrices.

    With ``cfg.fw_variant == "away"`` the iterate is tracked as a convex
    combination of permutations (``active``, decomposed from ``x0`` when
    not supplied) and away steps from the worst stored vertex are allowed.
    """
    n = model.n
    Q = model.hessian_half(theta)
    c = model.linear
    x = np.array(x0, dtype=float)
    away = cfg.fw_variant == "away"
    if away and active is None:
        active = birkhoff_decomposition(x.reshape(n, n, order="F"))
    active = dict(active) if away else None
    cols = np.arange(n)
    Qx = Q @ x
    value = float(c @ x + x @ Qx)
    values = [value] if record else []
    it = 0
    converged = False
    while it < cfg.fw_max_iters:
        grad = c + 2.0 * Qx
        perm = hungarian(grad.reshape(n, n, order="F"))
        d = -x
        d[cols + n * perm] += 1.0
        gap = float(grad @ d)
        if gap <= cfg.fw_gap_tol * max(1.0, abs(value)):
            converged = True
            break
        limit = 1.0
        toward = True
        if away:
            scores = {k: float(grad[cols + n * np.array(k)].sum()) for k in active}
            worst = min(scores, key=scores.get)
            away_gap = float(grad @ x) - scores[worst]
            if away_gap > gap and active[worst] < 1.0:
                toward = False
                d = x.copy()
                d[cols + n * np.array(worst)] -= 1.0
                gap = away_gap
                limit = active[worst] / (1.0 - active[worst])
        Qd = Q @ d
        a = float(d @ Qd)
        step = limit * _quadratic_argmax(a * limit * limit, gap * limit,
                                         scale=max(1.0, abs(value)))
        if step <= 0.0:
            converged = True
            break
        x = x + step * d
        Qx = Qx + step * Qd
        value = value + step * gap + step * step * a
        if away:
            if toward:
                key = tuple(int(v) for v in perm)
                active = {k: w * (1.0 - step) for k, w in active.items()}
                active[key] = active.get(key, 0.0) + step
            else:
                active = {k: w * (1.0 + step) for k, w in active.items()}
                active[worst] -= step
            active = {k: w for k, w in active.items() if w > 1e-12}
        it += 1
        if record:
            values.append(value)
    return FWResult(x, value, it, converged, values, active)


def frank_wolfe_max(ctx: ObjectiveContext, X0, cfg: SolverConfig) -> tuple[Assignment, bool]:
    """Fixed-``theta`` Frank-Wolfe from ``X0``; returns the iterate and a convergence flag."""
    model = QuadraticModel(ctx.problem)
    model.set_confidence(ctx.confidence)
    X0 = np.asarray(getattr(X0, "matrix", X0), dtype=float)
    res = frank_wolfe(model, X0.reshape(-1, order="F"), ctx.theta, cfg)
    X = np.clip(res.x.reshape(X0.shape, order="F"), 0.0, 1.0)
    return Assignment(X), res.converged


def _discretize(X: np.ndarray) -> np.ndarray:
    return permutation_matrix(hungarian(X), X.shape[1])


def layer_confidence(X_cont, problem: FactorizedProblem, lc_floor: float = 1e-3) -> np.ndarray:
    """Per-layer separation between matched and unmatched edge affinities.

    The current relaxed solution is discretized; for each layer the mean
    affinity over edge pairs it selects minus the mean over pairs selected
    by its complement gives the raw score. Scores are clipped at zero and
    mapped affinely so every entry is at least ``lc_floor`` and the vector
    sums to one.
    """
    n_layers = problem.n_layers
    if lc_floor * n_layers > 1.0:
        raise ValidationError("lc_floor too large for the number of layers")
    if problem.affinities.Kqi.size == 0:
        return uniform_confidence(n_layers)
    X = _discretize(np.asarray(getattr(X_cont, "matrix", X_cont), dtype=float))
    return _floor_normalize(raw_layer_scores(X, problem), lc_floor)


def raw_layer_scores(X, problem: FactorizedProblem) -> np.ndarray:
    """Unclipped per-layer scores for a binary assignment ``X``."""
    inc = problem.incidences
    Kqi = problem.affinities.Kqi
    X = np.asarray(X, dtype=float)
    means = []
    for Z in (X, 1.0 - X):
        mask = (inc.G1i.T @ Z @ inc.G2i) * (inc.H1i.T @ Z @ inc.H2i)
        count = mask.sum()
        if count > 0:
            means.append(np.einsum("kef,ef->k", Kqi, mask) / count)
        else:
            means.append(np.zeros(problem.n_layers))
    return means[0] - means[1]


def _floor_normalize(raw: np.ndarray, lc_floor: float) -> np.ndarray:
    n = raw.shape[0]
    pos = np.maximum(raw, 0.0)
    total = pos.sum()
    if not np.isfinite(total) or total <= 0:
        return uniform_confidence(n)
    return lc_floor + (1.0 - n * lc_floor) * pos / total


def path_following(model, n: int, cfg: SolverConfig, update=None, record_fw: bool = False):
    """Run the theta sweep on a :class:`QuadraticModel`-like object.

    ``update(X)`` is called after each fixed-theta solve and may return a new
    confidence vector, which is pushed into the model before the next step.
    Returns ``(X, traces)``.
    """
    x = np.full(n * n, 1.0 / n)
    active = _uniform_active(n) if cfg.fw_variant == "away" else None
    objective_trace, lc_trace, fw_iters, fw_values = [], [], [], []
    flags = []
    capped = 0
    for theta in cfg.thetas():
        theta = float(theta)
        res = frank_wolfe(model, x, theta, cfg, record=record_fw, active=active)
        x, active = res.x, res.active
        if not res.converged:
            capped += 1
        fw_iters.append(res.iters)
        if record_fw:
            fw_values.append(res.values)
        objective_trace.append((theta, res.value, model.gm(x)))
        if update is not None:
            lc = update(x.reshape(n, n, order="F"))
            if lc is not None:
                model.set_confidence(lc)
        lc_trace.append((theta, np.array(model.confidence, copy=True)))
    # capped steps mid-path are routine (Frank-Wolfe is sublinear while the
    # objective is concave); only an unconverged final step is a warning
    if not res.converged:
        flags.append("final_step_unconverged")
    if not np.all(np.isfinite(x)):
        flags.append("non_finite")
    return x.reshape(n, n, order="F"), dict(
        objective_trace=objective_trace,
        lc_trace=lc_trace,
        fw_iters=fw_iters,
        flags=flags,
        fw_values=fw_values,
        capped_steps=capped,
    )


def finalize(X: np.ndarray, mapping: DummyMapping | None = None) -> Assignment:
    """Round a relaxed solution to a permutation and drop dummy rows/columns."""
    if np.all(X.max(axis=1) >= 1.0 - 1e-6):
        binary = (X >= 1.0 - 1e-6).astype(float)
        if not (np.all(binary.sum(axis=0) == 1) and np.all(binary.sum(axis=1) == 1)):
            binary = _discretize(X)
    else:
        binary = _discretize(X)
    if mapping is not None:
        binary = mapping.strip(binary)
    return Assignment(binary, "binary")


def solve_mlfgm(problem: FactorizedProblem, cfg: SolverConfig | None = None,
                mapping: DummyMapping | None = None, record_fw: bool = False) -> SolveReport:
    """Multi-layer factorized path following from a uniform start."""
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    n = problem.shape[0]
    model = QuadraticModel(problem)
    update = None
    if cfg.confidence_update:
        def update(X):
            return layer_confidence(X, problem, cfg.lc_floor)

    flags = []
    try:
        X, traces = path_following(model, n, cfg, update, record_fw=record_fw)
        flags.extend(traces["flags"])
        assignment = finalize(X, mapping)
    except (np.linalg.LinAlgError, ValueError) as exc:  # pragma: no cover - defensive
        log.warning("solve failed: %s", exc)
        X = np.full((n, n), 1.0 / n)
        traces = dict(objective_trace=[], lc_trace=[], fw_iters=[], fw_values=[])
        flags.append(f"failed: {exc}")
        assignment = finalize(X, mapping)
    report = SolveReport(
        assignment=assignment,
        objective_trace=traces["objective_trace"],
        lc_trace=traces["lc_trace"],
        fw_iters=traces["fw_iters"],
        wall_time=time.perf_counter() - start,
        flags=flags,
        capped_steps=traces.get("capped_steps", 0),
        relaxed=X,
        fw_values=traces["fw_values"],
    )
    return report
