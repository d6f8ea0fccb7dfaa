"""Forward dynamics of every layer variant, plus weight sampling.

Feature matrices are plain float64 arrays of shape (n, k).  All layer
functions are pure; ``run_trajectory`` owns the only mutable state of a
run.  Degenerate (zero/constant) normalization columns abort a run
rather than being masked with an epsilon; an optional denominator floor
exists for robustness experiments only and is off by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, DegenerateColumnError, DomainError
from .graphio import OperatorMatrix
from .spectral import symmetric_eig, top_k

VARIANTS = ("vanilla", "residual", "batchnorm", "pairnorm", "graphnorm",
            "graphnormv2", "powerembed")
NONLINEARITIES = ("identity", "relu")

_DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class WeightSpec:
    """How layer weights are produced.

    gaussian: i.i.d. N(mean, std^2) entries, std=None meaning 1/sqrt(k)
    (variance-preserving at init).  identity: I_k.  explicit: a fixed
    per-step list of matrices.
    """

    mode: str = "gaussian"
    mean: float = 0.0
    std: Optional[float] = None
    matrices: Optional[tuple] = None

    def __post_init__(self):
        if self.mode not in ("gaussian", "identity", "explicit"):
            raise DomainError(f"unknown weight mode {self.mode!r}")
        if self.std is not None and self.std < 0:
            raise DomainError("weight std must be >= 0")
        if self.mode == "explicit" and not self.matrices:
            raise DomainError("explicit weight spec needs matrices")


def sample_weight(spec: WeightSpec, shape: tuple[int, int],
                  rng: np.random.Generator, step: int = 0) -> np.ndarray:
    """Draw (or look up) the weight matrix for one step."""
    if spec.mode == "identity":
        return np.eye(shape[0], shape[1])
    if spec.mode == "explicit":
        if step >= len(spec.matrices):
            raise DomainError(f"explicit weight list exhausted at step {step}")
        w = np.asarray(spec.matrices[step], dtype=np.float64)
        if w.shape != shape:
            raise ContractError(f"explicit weight shape {w.shape} != {shape}")
        return w
    std = spec.std if spec.std is not None else 1.0 / np.sqrt(shape[0])
    return rng.normal(spec.mean, std, size=shape)


@dataclass(frozen=True)
class NormContext:
    """Top-k eigenvector basis augmented with the all-ones completion,
    used by the projection-centered normalization layer."""

    vkplus: np.ndarray

    def __post_init__(self):
        gram = self.vkplus.T @ self.vkplus
        if np.abs(gram - np.eye(gram.shape[0])).max(initial=0.0) > 1e-8:
            raise ContractError("vkplus is not orthonormal")

    @property
    def k(self) -> int:
        return self.vkplus.shape[1] - 1


def build_norm_context(a: OperatorMatrix, k: int) -> NormContext:
    """V_{k+} = [V_k | r/||r||] with r = 1 - V_k V_k^+ 1."""
    n = a.n
    if not 0 <= k <= n - 1:
        raise DomainError(f"projection width k={k} must be in [0, n-1]")
    vk = top_k(symmetric_eig(a), k)
    ones = np.ones(n)
    r = ones - vk @ (vk.T @ ones)
    norm = np.linalg.norm(r)
    if norm < 1e-12 * np.sqrt(n):
        raise DomainError("all-ones vector already lies in the top-k basis")
    return NormContext(vkplus=np.concatenate([vk, (r / norm)[:, None]], axis=1))


def bn_emulating_tau(ctx: NormContext) -> np.ndarray:
    """Coordinates of 1/sqrt(n) in the V_{k+} basis; with this tau the
    projection centering reproduces the plain mean subtraction."""
    n = ctx.vkplus.shape[0]
    return ctx.vkplus.T @ (np.ones(n) / np.sqrt(n))


@dataclass(frozen=True)
class LayerConfig:
    """One layer variant plus its parameters."""

    variant: str = "vanilla"
    nonlinearity: str = "identity"
    weight_spec: WeightSpec = field(default_factory=WeightSpec)
    weight_spec2: Optional[WeightSpec] = None  # residual W2 (default: weight_spec)
    alpha: float = 0.2                # residual strength
    scale: float = 1.0                # pairnorm target scale
    graphnorm_tau: Optional[np.ndarray] = None   # (k,), default all ones
    gnv2_k: int = 2                   # projection width
    gnv2_tau: Optional[np.ndarray] = None        # (k+1, k), default bn-emulating
    gnv2_tau_mode: str = "bn"         # bn | gaussian (untrained ablation)
    gamma: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    norm_context: Optional[NormContext] = None   # precomputed V_{k+}
    denom_floor: float = 0.0          # robustness-only epsilon, off by default

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown layer variant {self.variant!r}")
        if self.nonlinearity not in NONLINEARITIES:
            raise DomainError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.variant == "residual" and not 0.0 < self.alpha < 1.0:
            raise DomainError(f"residual alpha={self.alpha} outside (0,1)")


def _apply_nl(x: np.ndarray, nl: str) -> np.ndarray:
    if nl == "relu":
        return np.maximum(x, 0.0)
    return x


def step_vanilla(a: OperatorMatrix, x: np.ndarray, w: np.ndarray,
                 nl: str = "identity") -> np.ndarray:
    """X <- sigma(A X W)."""
    if x.shape[0] != a.n or w.shape[0] != x.shape[1]:
        raise ContractError(
            f"shape mismatch: A {a.data.shape}, X {x.shape}, W {w.shape}")
    return _apply_nl(a.data @ x @ w, nl)


def step_residual(a: OperatorMatrix, x: np.ndarray, x0: np.ndarray,
                  w1: np.ndarray, w2: np.ndarray, alpha: float,
                  nl: str = "identity") -> np.ndarray:
    """X <- sigma((1-alpha) A X W1 + alpha X0 W2)."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha={alpha} outside (0,1)")
    if x0.shape != x.shape:
        raise ContractError(f"x0 shape {x0.shape} != x shape {x.shape}")
    return _apply_nl((1.0 - alpha) * (a.data @ x @ w1) + alpha * (x0 @ w2), nl)


def _check_denominators(norms: np.ndarray, ref: np.ndarray, floor: float,
                        what: str) -> np.ndarray:
    bad = norms <= _DEGENERATE_TOL * np.maximum(1.0, ref)
    if np.any(bad):
        if floor > 0.0:
            return np.maximum(norms, floor)
        raise DegenerateColumnError(int(np.flatnonzero(bad)[0]), what)
    return norms


def batch_norm(x: np.ndarray, denom_floor: float = 0.0) -> np.ndarray:
    """Center each column, then divide by its 2-norm."""
    centered = x - x.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centered, axis=0)
    norms = _check_denominators(norms, np.linalg.norm(x, axis=0), denom_floor,
                                "zero vector after centering")
    return centered / norms


def step_batchnorm(a: OperatorMatrix, x: np.ndarray, w: np.ndarray,
                   nl: str = "identity", denom_floor: float = 0.0) -> np.ndarray:
    return batch_norm(step_vanilla(a, x, w, nl), denom_floor)


def graph_norm(x: np.ndarray, tau: np.ndarray, gamma=None, beta=None,
               denom_floor: float = 0.0) -> np.ndarray:
    """Partial-mean centering: subtract tau_j of the column mean, scale
    by the root-mean-square, then apply the affine parameters."""
    n, k = x.shape
    tau = np.broadcast_to(np.asarray(tau, dtype=np.float64), (k,))
    gamma = np.ones(k) if gamma is None else np.asarray(gamma, dtype=np.float64)
    beta = np.zeros(k) if beta is None else np.asarray(beta, dtype=np.float64)
    centered = x - tau[None, :] * x.mean(axis=0, keepdims=True)
    sigma = np.linalg.norm(centered, axis=0) / np.sqrt(n)
    sigma = _check_denominators(sigma, np.linalg.norm(x, axis=0), denom_floor,
                                "zero spread after partial centering")
    return gamma[None, :] * centered / sigma[None, :] + beta[None, :]


def graph_norm_v2(x: np.ndarray, ctx: NormContext, tau: np.ndarray,
                  gamma=None, beta=None, denom_floor: float = 0.0) -> np.ndarray:
    """Projection centering: subtract (V_{k+} tau_j tau_j^T V_{k+}^T) x_j,
    scale each column by the 2-norm of the result, apply the affine."""
    n, k = x.shape
    tau = np.asarray(tau, dtype=np.float64)
    if tau.shape != (ctx.vkplus.shape[1], k):
        raise ContractError(
            f"tau shape {tau.shape} != ({ctx.vkplus.shape[1]}, {k})")
    gamma = np.ones(k) if gamma is None else np.asarray(gamma, dtype=np.float64)
    beta = np.zeros(k) if beta is None else np.asarray(beta, dtype=np.float64)
    coords = ctx.vkplus.T @ x                       # (k+1, k)
    # column j: V tau_j tau_j^T coords_j
    scal = np.sum(tau * coords, axis=0)             # tau_j^T V^T x_j
    centered = x - ctx.vkplus @ (tau * scal[None, :])
    sigma = np.linalg.norm(centered, axis=0)
    sigma = _check_denominators(sigma, np.linalg.norm(x, axis=0), denom_floor,
                                "zero vector after projection centering")
    return gamma[None, :] * centered / sigma[None, :] + beta[None, :]


def pair_norm(x: np.ndarray, s: float = 1.0,
              denom_floor: float = 0.0) -> np.ndarray:
    """Column-mean centering followed by global Frobenius rescaling to
    s * sqrt(n)."""
    n = x.shape[0]
    centered = x - x.mean(axis=0, keepdims=True)
    total = np.linalg.norm(centered)
    if total <= _DEGENERATE_TOL * max(1.0, float(np.linalg.norm(x))):
        if denom_floor > 0.0:
            total = max(total, denom_floor)
        else:
            raise DegenerateColumnError(0, "all columns zero after centering")
    return s * np.sqrt(n) * centered / total


def power_embed_step(a: OperatorMatrix, x: np.ndarray, w: np.ndarray,
                     nl: str = "identity", denom_floor: float = 0.0) -> np.ndarray:
    """sigma(A X W) followed by per-column 2-norm scaling (no centering)."""
    y = step_vanilla(a, x, w, nl)
    norms = np.linalg.norm(y, axis=0)
    norms = _check_denominators(norms, np.linalg.norm(x, axis=0), denom_floor,
                                "zero column")
    return y / norms


@dataclass
class TrajectoryLog:
    """Per-step observer records for one simulated run."""

    records: list
    final: np.ndarray
    aborted: bool = False
    abort_step: Optional[int] = None
    abort_reason: Optional[str] = None

    def __len__(self):
        return len(self.records)


def _resolve_gnv2(a: OperatorMatrix, x0: np.ndarray, cfg: LayerConfig,
                  rng: np.random.Generator):
    ctx = cfg.norm_context or build_norm_context(a, cfg.gnv2_k)
    if cfg.gnv2_tau is not None:
        tau = np.asarray(cfg.gnv2_tau, dtype=np.float64)
    elif cfg.gnv2_tau_mode == "gaussian":
        tau = rng.normal(0.0, 1.0, size=(ctx.vkplus.shape[1], x0.shape[1]))
    else:
        tau = np.tile(bn_emulating_tau(ctx)[:, None], (1, x0.shape[1]))
    return ctx, tau


def run_trajectory(a: OperatorMatrix, x0: np.ndarray, cfg: LayerConfig,
                   steps: int, rng: np.random.Generator,
                   observer: Optional[Callable[[int, np.ndarray], object]] = None,
                   ) -> TrajectoryLog:
    """Apply the configured layer ``steps`` times.

    The observer is invoked after every step with (step, X) and its
    return value is appended to the log.  Degenerate columns or
    non-finite features truncate the run; the partial log is kept.
    For the residual variant W1 is sampled before W2 at each step.
    """
    if steps < 1:
        raise DomainError("steps must be >= 1")
    x = np.array(x0, dtype=np.float64, copy=True)
    if x.ndim != 2 or x.shape[0] != a.n:
        raise ContractError(f"x0 shape {x.shape} incompatible with n={a.n}")
    k = x.shape[1]
    spec2 = cfg.weight_spec2 or cfg.weight_spec
    if cfg.variant == "graphnormv2":
        ctx, gnv2_tau = _resolve_gnv2(a, x0, cfg, rng)
    gn_tau = cfg.graphnorm_tau if cfg.graphnorm_tau is not None else np.ones(k)
    records: list = []
    for t in range(steps):
        try:
            if cfg.variant == "residual":
                w1 = sample_weight(cfg.weight_spec, (k, k), rng, step=t)
                w2 = sample_weight(spec2, (k, k), rng, step=t)
                x_new = step_residual(a, x, x0, w1, w2, cfg.alpha,
                                      cfg.nonlinearity)
            else:
                w = sample_weight(cfg.weight_spec, (k, k), rng, step=t)
                if cfg.variant == "vanilla":
                    x_new = step_vanilla(a, x, w, cfg.nonlinearity)
                elif cfg.variant == "batchnorm":
                    x_new = step_batchnorm(a, x, w, cfg.nonlinearity,
                                           cfg.denom_floor)
                elif cfg.variant == "pairnorm":
                    x_new = pair_norm(step_vanilla(a, x, w, cfg.nonlinearity),
                                      cfg.scale, cfg.denom_floor)
                elif cfg.variant == "graphnorm":
                    x_new = graph_norm(step_vanilla(a, x, w, cfg.nonlinearity),
                                       gn_tau, cfg.gamma, cfg.beta,
                                       cfg.denom_floor)
                elif cfg.variant == "graphnormv2":
                    x_new = graph_norm_v2(
                        step_vanilla(a, x, w, cfg.nonlinearity),
                        ctx, gnv2_tau, cfg.gamma, cfg.beta, cfg.denom_floor)
                elif cfg.variant == "powerembed":
                    x_new = power_embed_step(a, x, w, cfg.nonlinearity,
                                             cfg.denom_floor)
                else:  # pragma: no cover
                    raise DomainError(f"unhandled variant {cfg.variant!r}")
        except DegenerateColumnError as exc:
            return TrajectoryLog(records=records, final=x, aborted=True,
                                 abort_step=t + 1, abort_reason=str(exc))
        if not np.all(np.isfinite(x_new)):
            return TrajectoryLog(records=records, final=x, aborted=True,
                                 abort_step=t + 1,
                                 abort_reason="non-finite features")
        x = x_new
        if observer is not None:
            records.append(observer(t + 1, x))
    return TrajectoryLog(records=records, final=x)
