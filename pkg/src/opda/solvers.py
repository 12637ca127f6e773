"""OPDA drivers, proximal baselines, stationarity metrics and traces."""
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ._backend import kernels
from .directions import (
    BlockHistory,
    LbfgsHistory,
    SketchStrategy,
    SvrgAnchor,
    block_update,
    combine_svrg,
)
from .errors import ArgumentError, DivergenceError, OracleError, UnsupportedError
from .numcore import RandomSource, sample_minibatch
from .objectives import l1_objective
from .operators import align_phi, align_pi, prox_l1, pseudo_grad

DIRECTION_MODES = ("fm", "qn_lbfgs", "qn_block", "sgd")
BASELINE_MODES = ("none", "prox_svrg", "prox_sgd")
ANCHOR_CHOICES = ("average", "uniform_random")
DEFAULT_THETA = 0.1
DIVERGENCE_FACTOR = 1e3

SOLVER_NAMES = {
    "opda-fm": ("fm", "none"),
    "opda-qn-lbfgs": ("qn_lbfgs", "none"),
    "opda-qn-block": ("qn_block", "none"),
    "opda-sgd": ("sgd", "none"),
    "prox-svrg": ("none", "prox_svrg"),
    "prox-sgd": ("none", "prox_sgd"),
}


@dataclass(frozen=True)
class SolverConfig:
    eta: float = None
    lambda1: float = 0.0
    batch: int = 1
    m_inner: int = 1
    memory: int = 5
    rank: int = 1
    direction_mode: str = "fm"
    baseline_mode: str = "none"
    anchor_choice: str = "average"
    sketch: str = "gaussian"
    seed: int = 0
    max_outer: int = 10
    tol_gradmap: float = 0.0
    fstar: float = None
    max_passes: float = None
    timing: bool = False

    def problems(self):
        out = []
        if self.eta is not None and not self.eta > 0:
            out.append(f"eta must be positive, got {self.eta}")
        if not self.lambda1 >= 0:
            out.append(f"lambda1 must be nonnegative, got {self.lambda1}")
        for name in ("batch", "m_inner", "memory", "rank", "max_outer"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.direction_mode not in DIRECTION_MODES + ("none",):
            out.append(f"unknown direction_mode {self.direction_mode!r}")
        if self.baseline_mode not in BASELINE_MODES:
            out.append(f"unknown baseline_mode {self.baseline_mode!r}")
        driving = (self.direction_mode != "none") + (self.baseline_mode != "none")
        if driving != 1:
            out.append("exactly one of direction_mode and baseline_mode must be set")
        if self.anchor_choice not in ANCHOR_CHOICES:
            out.append(f"unknown anchor_choice {self.anchor_choice!r}")
        if self.sketch not in ("identity_cols", "gaussian", "prev_directions"):
            out.append(f"unknown sketch {self.sketch!r}")
        if not 0 <= self.seed < 2**64:
            out.append("seed must fit in 64 unsigned bits")
        if not self.tol_gradmap >= 0:
            out.append("tol_gradmap must be nonnegative")
        if self.max_passes is not None and not self.max_passes > 0:
            out.append("max_passes must be positive")
        return out

    def validate(self):
        probs = self.problems()
        if probs:
            raise ArgumentError("; ".join(probs))
        return self

    @property
    def solver_name(self):
        for name, modes in SOLVER_NAMES.items():
            if modes == (self.direction_mode, self.baseline_mode):
                return name
        return None

    @classmethod
    def for_solver(cls, name, **kwargs):
        if name not in SOLVER_NAMES:
            raise ArgumentError(f"unknown solver {name!r}")
        d, b = SOLVER_NAMES[name]
        return cls(direction_mode=d, baseline_mode=b, **kwargs)


@dataclass(frozen=True)
class TraceRecord:
    outer: int
    data_passes: float
    wall_ms: float
    objective: float
    suboptimality: float
    nnz: int
    gradmap_norm: float


TRACE_FIELDS = tuple(f.name for f in fields(TraceRecord))


@dataclass
class StepRecord:
    """Intermediate quantities of one inner step (kept for diagnostics)."""

    x_prev: np.ndarray
    pseudo: np.ndarray
    v: np.ndarray
    d: np.ndarray
    p: np.ndarray
    x_minus: np.ndarray
    x_new: np.ndarray
    q: np.ndarray


@dataclass
class SolverState:
    x: np.ndarray
    anchor: SvrgAnchor
    rng: RandomSource
    history: object = None
    sketch: SketchStrategy = None
    step_index: int = 0
    inner_iterate_sum: np.ndarray = None
    inner_count: int = 0
    pick: int = -1
    picked: np.ndarray = None
    data_passes: float = 0.0
    last_step: StepRecord = None


@dataclass
class RunResult:
    x: np.ndarray
    trace: list
    eta: float
    stats: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.trace[-1] if self.trace else None


def default_eta(obj, x0=None, theta=DEFAULT_THETA):
    """``theta / L`` with L from the objective's smoothness bound."""
    try:
        lip = obj.estimate_smoothness().l_upper
    except UnsupportedError:
        x0 = np.zeros(obj.dim) if x0 is None else x0
        lip = float(np.linalg.norm(obj.hessian(x0), 2))
    return theta / lip


def init_state(obj, cfg, x0):
    x = np.array(x0, dtype=np.float64)
    rng = RandomSource(cfg.seed)
    state = SolverState(x=x, anchor=SvrgAnchor.at(obj, x), rng=rng)
    if cfg.direction_mode == "qn_lbfgs":
        state.history = LbfgsHistory(cfg.memory)
    elif cfg.direction_mode == "qn_block":
        state.history = BlockHistory(cfg.memory, min(cfg.rank, obj.dim))
        state.sketch = SketchStrategy(cfg.sketch, cfg.memory)
    _start_epoch(cfg, state)
    return state


def _start_epoch(cfg, state):
    state.inner_iterate_sum = np.zeros_like(state.x)
    state.inner_count = 0
    state.picked = None
    if cfg.anchor_choice == "uniform_random":
        state.pick = int(state.rng.integers(0, cfg.m_inner))


def _finish_step(cfg, state, x_new):
    state.step_index += 1
    state.inner_iterate_sum += x_new
    if state.inner_count == state.pick:
        state.picked = x_new
    state.inner_count += 1
    state.x = x_new


def _check_finite(x, step):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"non-finite iterate at step {step}", step=step)


def opda_step(obj, cfg, state):
    """One inner iteration of OPDA; mutates and returns ``state``."""
    n = obj.n_samples
    eta = cfg.eta
    lam = cfg.lambda1
    x = state.x
    s = sample_minibatch(state.rng, n, cfg.batch)
    g = obj.grad_minibatch(x, s)
    pseudo = pseudo_grad(g, x, lam)
    if cfg.direction_mode == "sgd":
        v = pseudo
        state.data_passes += cfg.batch / n
    else:
        g_ref = obj.grad_minibatch(state.anchor.x_tilde, s)
        v = combine_svrg(g, g_ref, state.anchor.full_grad)
        state.data_passes += 2.0 * cfg.batch / n
    if cfg.direction_mode in ("qn_lbfgs", "qn_block"):
        d = state.history.apply(v)
    else:
        d = v
    p = align_pi(d, pseudo)
    x_minus = x - eta * p
    x_new = align_phi(x_minus, x, eta * lam)
    _check_finite(x_new, state.step_index + 1)
    q = (x - x_new) / eta
    state.last_step = StepRecord(x, pseudo, v, d, p, x_minus, x_new, q)
    _finish_step(cfg, state, x_new)
    if cfg.direction_mode == "qn_block":
        state.sketch.record_direction(d)
        if state.step_index % cfg.memory == 0:
            block_update(obj, x, s, state.sketch, state.history, state.rng)
            state.data_passes += cfg.batch * state.history.rank / n
    return state


def prox_svrg_step(obj, cfg, state):
    n = obj.n_samples
    x = state.x
    s = sample_minibatch(state.rng, n, cfg.batch)
    g = obj.grad_minibatch(x, s)
    g_ref = obj.grad_minibatch(state.anchor.x_tilde, s)
    v = combine_svrg(g, g_ref, state.anchor.full_grad)
    state.data_passes += 2.0 * cfg.batch / n
    x_new = prox_l1(x - cfg.eta * v, cfg.eta * cfg.lambda1)
    _check_finite(x_new, state.step_index + 1)
    _finish_step(cfg, state, x_new)
    return state


def prox_sgd_step(obj, cfg, state):
    n = obj.n_samples
    x = state.x
    s = sample_minibatch(state.rng, n, cfg.batch)
    g = obj.grad_minibatch(x, s)
    state.data_passes += cfg.batch / n
    x_new = prox_l1(x - cfg.eta * g, cfg.eta * cfg.lambda1)
    _check_finite(x_new, state.step_index + 1)
    _finish_step(cfg, state, x_new)
    return state


def gradient_mapping(obj, cfg, x, history=None, full_grad=None, eta=None):
    """OPDA gradient mapping ``(phi(x - eta*pbar; x; eta*lam) - x) / eta``.

    ``pbar`` aligns ``H grad F(x)`` with the full-gradient pseudo-gradient;
    ``H`` is the identity when ``history`` is None.
    """
    eta = cfg.eta if eta is None else eta
    x = np.asarray(x, dtype=np.float64)
    g = obj.grad_full(x) if full_grad is None else full_grad
    pseudo = pseudo_grad(g, x, cfg.lambda1)
    d = g if history is None else history.apply(g)
    pbar = align_pi(d, pseudo)
    return (align_phi(x - eta * pbar, x, eta * cfg.lambda1) - x) / eta


def _uses_anchor(cfg):
    return cfg.baseline_mode == "prox_svrg" or cfg.direction_mode in ("fm", "qn_lbfgs", "qn_block")


def _step_fn(cfg):
    if cfg.baseline_mode == "prox_svrg":
        return prox_svrg_step
    if cfg.baseline_mode == "prox_sgd":
        return prox_sgd_step
    return opda_step


def run(obj, cfg, x0=None):
    """Run the solver selected by ``cfg`` and return a ``RunResult``.

    One trace row per outer epoch, taken at the new reference point.  The
    full gradient there is reused as the next epoch's anchor gradient and
    is charged one data pass when that epoch starts.
    """
    x0 = np.zeros(obj.dim) if x0 is None else np.array(x0, dtype=np.float64)
    if cfg.eta is None:
        cfg = replace(cfg, eta=default_eta(obj, x0))
    cfg.validate()
    state = init_state(obj, cfg, x0)
    step = _step_fn(cfg)
    anchored = _uses_anchor(cfg)
    p0 = l1_objective(obj, x0, cfg.lambda1)
    ceiling = DIVERGENCE_FACTOR * max(p0, 1.0)
    trace = []
    elapsed = 0.0
    for t in range(cfg.max_outer):
        tic = time.perf_counter()
        if anchored:
            state.data_passes += 1.0
        for _ in range(cfg.m_inner):
            try:
                step(obj, cfg, state)
            except DivergenceError as exc:
                raise DivergenceError(f"{exc} (epoch {t + 1})", step=exc.step, epoch=t + 1) from None
        if cfg.anchor_choice == "average":
            x_ref = state.inner_iterate_sum / state.inner_count
        else:
            x_ref = state.picked
        g_ref = obj.grad_full(x_ref)
        if cfg.direction_mode == "qn_lbfgs":
            state.history.push(x_ref - state.anchor.x_tilde, g_ref - state.anchor.full_grad)
        state.anchor = SvrgAnchor(x_ref.copy(), g_ref, t + 1)
        elapsed += time.perf_counter() - tic

        p_ref = l1_objective(obj, x_ref, cfg.lambda1)
        if not np.isfinite(p_ref) or p_ref > ceiling:
            raise DivergenceError(f"objective {p_ref!r} diverged at epoch {t + 1}", epoch=t + 1)
        gmap = gradient_mapping(obj, cfg, x_ref, state.history, full_grad=g_ref)
        gnorm = float(np.sqrt(kernels.dot(gmap, gmap)))
        trace.append(
            TraceRecord(
                outer=t + 1,
                data_passes=state.data_passes,
                wall_ms=elapsed * 1e3 if cfg.timing else 0.0,
                objective=p_ref,
                suboptimality=None if cfg.fstar is None else p_ref - cfg.fstar,
                nnz=int(np.count_nonzero(x_ref)),
                gradmap_norm=gnorm,
            )
        )
        _start_epoch(cfg, state)
        if gnorm <= cfg.tol_gradmap:
            break
        if cfg.max_passes is not None and state.data_passes >= cfg.max_passes:
            break
    stats = {"steps": state.step_index, "wall_ms": elapsed * 1e3}
    if state.history is not None:
        stats["updates_accepted"] = state.history.accepted
        stats["updates_rejected"] = state.history.rejected
        total = state.history.accepted + state.history.rejected
        stats["rejection_rate"] = state.history.rejected / total if total else 0.0
    return RunResult(state.anchor.x_tilde, trace, cfg.eta, stats)


def opda_run(obj, cfg, x0=None):
    if cfg.direction_mode == "none":
        raise ArgumentError("opda_run needs a direction_mode")
    return run(obj, cfg, x0)


def prox_svrg_run(obj, cfg, x0=None):
    return run(obj, replace(cfg, direction_mode="none", baseline_mode="prox_svrg"), x0)


def prox_sgd_run(obj, cfg, x0=None):
    return run(obj, replace(cfg, direction_mode="none", baseline_mode="prox_sgd"), x0)


def spectral_smoothness(obj, iters=200, rtol=1e-10):
    """Top Hessian eigenvalue at the origin by power iteration.

    For logistic loss the curvature weights peak at the origin and for
    least squares the Hessian is constant, so this is a global bound.
    """
    v = np.full(obj.dim, 1.0 / np.sqrt(obj.dim))
    x = np.zeros(obj.dim)
    est = 0.0
    for _ in range(iters):
        w = obj.hvp_minibatch(x, obj.all_rows, v)
        new = float(np.sqrt(kernels.dot(w, w)))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - est) <= rtol * new:
            return new
        est = new
    return est


def solve_fstar(obj, lambda1, tol=1e-13, max_iter=500_000, x0=None):
    """P(x*) by full-batch proximal gradient with step 1/L.

    Dataset objectives use the power-iteration curvature bound (padded by
    1%).  Polynomial problems start from L = 1 and double L until the
    quadratic upper model holds.  Stops once the proximal gradient-mapping
    norm is at most ``tol``.
    """
    backtrack = obj.kind == "poly2d"
    lip = 1.0 if backtrack else 1.01 * spectral_smoothness(obj)
    if lip <= 0.0:
        lip = 1.0
    x = np.zeros(obj.dim) if x0 is None else np.array(x0, dtype=np.float64)
    f = obj.value(x)
    g = obj.grad_full(x)
    for _ in range(max_iter):
        while True:
            x_new = prox_l1(x - g / lip, lambda1 / lip)
            diff = x_new - x
            if not backtrack:
                break
            f_new = obj.value(x_new)
            if f_new <= f + kernels.dot(g, diff) + 0.5 * lip * kernels.dot(diff, diff):
                break
            lip *= 2.0
            if lip > 1e300:
                raise OracleError("step size collapsed; objective not smooth here")
        if lip * np.sqrt(kernels.dot(diff, diff)) <= tol:
            return l1_objective(obj, x_new, lambda1)
        x = x_new
        if backtrack:
            f = f_new
        g = obj.grad_full(x)
    raise OracleError(f"proximal gradient did not reach tol={tol} in {max_iter} iterations")
