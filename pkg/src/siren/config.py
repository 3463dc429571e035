"""Typed experiment configuration and JSON-dict validation.

Every CLI entry point funnels through ``validate_config`` so that a malformed
config fails with a field-level message (exit code 2) before any work starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import CovarianceFactor, RngStream, identity_factor, make_covariance_factor
from .errors import ConfigInvalid
from .losses import Glm, LogisticPaper, Loss, Square
from .observations import (
    BitFlipBudget,
    BoundedL2,
    Corruption,
    FixedOffsets,
    FlipSign,
    LinearNoise,
    NoCorruption,
    NoisySign,
    ObservationModel,
    SignClean,
    UniformQuantizer,
)
from .signal_sets import (
    DictionaryImage,
    L1Ball,
    L2Ball,
    PolytopeHull,
    SignalSet,
    SqrtSparsitySet,
    Subspace,
)

EXPERIMENT_KINDS = (
    "estimate", "sweep-m", "sweep-tau", "sweep-condition",
    "meanwidth", "modelparams", "rsc", "smallball",
)


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 50_000
    step: str | float = "auto"  # "auto" | "backtracking" | fixed step size
    backtracking_beta: float = 0.5
    backtracking_c: float = 1e-4
    acceleration: bool = False
    tol: float = 1e-8
    projection_tol: float = 1e-10
    init: str = "projected_zero"  # or "random"
    track_objectives: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigInvalid("solver.max_iters: must be >= 1")
        if self.tol <= 0 or self.projection_tol <= 0:
            raise ConfigInvalid("solver.tol: tolerances must be > 0")
        if not (0 < self.backtracking_beta < 1 and 0 < self.backtracking_c < 1):
            raise ConfigInvalid("solver.backtracking: beta and c must lie in (0, 1)")
        if isinstance(self.step, str):
            if self.step not in ("auto", "backtracking"):
                raise ConfigInvalid("solver.step: expected 'auto', 'backtracking', or a number")
        elif self.step <= 0:
            raise ConfigInvalid("solver.step: fixed step must be > 0")
        if self.init not in ("projected_zero", "random"):
            raise ConfigInvalid("solver.init: expected 'projected_zero' or 'random'")


@dataclass(frozen=True)
class TrialSpec:
    """Everything needed to run one end-to-end recovery trial."""

    n: int
    m: int
    set_cfg: dict
    loss_cfg: dict
    model_cfg: dict
    corruption_cfg: dict = field(default_factory=lambda: {"kind": "none"})
    covariance_cfg: dict = field(default_factory=lambda: {"kind": "identity"})
    x0_cfg: dict = field(default_factory=lambda: {"kind": "sparse", "s": 4})
    solver: SolverConfig = field(default_factory=SolverConfig)
    dilation: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigInvalid("trial.n: must be >= 1")
        if self.m < 1:
            raise ConfigInvalid("trial.m: must be >= 1")
        if self.dilation <= 0:
            raise ConfigInvalid("trial.dilation: must be > 0")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    trial: TrialSpec | None = None
    grid: tuple[float, ...] = ()
    trials: int = 1
    seed: int = 0
    out: str | None = None
    plot: bool = False
    samples: int = 10_000
    t: float | None = None
    m_window: float | None = None
    n_window: float | None = None
    set_cfg: dict | None = None  # meanwidth without a full trial
    n: int | None = None
    center: list[float] | None = None


# ---------------------------------------------------------------------------
# builders


def build_loss(cfg: dict) -> Loss:
    kind = cfg.get("kind")
    if kind == "square":
        return Square()
    if kind == "logistic_paper":
        return LogisticPaper()
    if kind == "glm":
        return Glm(link=cfg.get("link", "square"))
    raise ConfigInvalid(f"loss.kind: unknown loss {kind!r}")


def build_model(cfg: dict) -> ObservationModel:
    kind = cfg.get("kind")
    try:
        if kind == "linear":
            return LinearNoise(gain=float(cfg.get("gain", 1.0)),
                               noise_std=float(cfg.get("noise_std", 0.0)))
        if kind == "sign_clean":
            return SignClean()
        if kind == "flip_sign":
            return FlipSign(p=float(cfg["p"]))
        if kind == "noisy_sign":
            return NoisySign(noise=cfg.get("noise", "logistic"),
                             scale=float(cfg.get("scale", 1.0)))
        if kind == "quantizer":
            return UniformQuantizer(step=float(cfg["step"]), sat=float(cfg["sat"]))
    except KeyError as exc:
        raise ConfigInvalid(f"model.{exc.args[0]}: required for kind {kind!r}") from None
    except ValueError as exc:
        raise ConfigInvalid(f"model: {exc}") from None
    raise ConfigInvalid(f"model.kind: unknown model {kind!r}")


def build_corruption(cfg: dict) -> Corruption:
    kind = cfg.get("kind", "none")
    try:
        if kind == "none":
            return NoCorruption()
        if kind == "bit_flips":
            return BitFlipBudget(tau=int(cfg["tau"]))
        if kind == "l2":
            return BoundedL2(eps=float(cfg["eps"]))
        if kind == "offsets":
            return FixedOffsets(offsets=np.asarray(cfg["values"], dtype=float))
    except KeyError as exc:
        raise ConfigInvalid(f"corruption.{exc.args[0]}: required for kind {kind!r}") from None
    except ValueError as exc:
        raise ConfigInvalid(f"corruption: {exc}") from None
    raise ConfigInvalid(f"corruption.kind: unknown corruption {kind!r}")


def build_covariance(cfg: dict, n: int, rng: RngStream) -> CovarianceFactor:
    kind = cfg.get("kind", "identity")
    if kind == "identity":
        return identity_factor(n)
    if kind == "diag":
        values = np.asarray(cfg["values"], dtype=float)
        if values.shape != (n,):
            raise ConfigInvalid("covariance.values: length must equal n")
        return make_covariance_factor(np.diag(values))
    if kind == "diag_condition":
        cond = float(cfg["cond"])
        if cond < 1:
            raise ConfigInvalid("covariance.cond: must be >= 1")
        evals = np.logspace(0.0, math.log10(cond), n)
        perm = rng.child(0).generator().permutation(n)
        return make_covariance_factor(np.diag(evals[perm]))
    if kind == "rotated_condition":
        cond = float(cfg["cond"])
        if cond < 1:
            raise ConfigInvalid("covariance.cond: must be >= 1")
        evals = np.logspace(0.0, math.log10(cond), n)
        gen = rng.child(0).generator()
        q, _ = np.linalg.qr(gen.standard_normal((n, n)))
        return make_covariance_factor((q * evals) @ q.T)
    if kind == "explicit":
        return make_covariance_factor(np.asarray(cfg["matrix"], dtype=float))
    raise ConfigInvalid(f"covariance.kind: unknown covariance {kind!r}")


def build_x0(cfg: dict, n: int, rng: RngStream) -> np.ndarray:
    """Unnormalized signal; run_trial rescales to || sqrt(Sigma) x0 || = 1."""
    kind = cfg.get("kind", "sparse")
    gen = rng.generator()
    if kind == "sparse":
        s = int(cfg.get("s", 4))
        if not (1 <= s <= n):
            raise ConfigInvalid("x0.s: must satisfy 1 <= s <= n")
        support = gen.choice(n, size=s, replace=False)
        x = np.zeros(n)
        x[support] = gen.choice((-1.0, 1.0), size=s) / math.sqrt(s)
        return x
    if kind == "spike":
        x = np.zeros(n)
        x[0] = 1.0
        return x
    if kind == "gaussian":
        x = gen.standard_normal(n)
        return x / np.linalg.norm(x)
    raise ConfigInvalid(f"x0.kind: unknown signal spec {kind!r}")


def _orthonormal_with_first(x0: np.ndarray, d: int) -> np.ndarray:
    """Deterministic orthonormal basis whose span contains x0."""
    n = x0.shape[0]
    cols = [x0 / np.linalg.norm(x0)]
    i = 0
    while len(cols) < d and i < n:
        v = np.zeros(n)
        v[i] = 1.0
        for c in cols:
            v = v - (c @ v) * c
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            cols.append(v / nv)
        i += 1
    if len(cols) < d:
        raise ConfigInvalid("set.dim: could not build an orthonormal basis of that size")
    return np.stack(cols, axis=1)


def build_set(cfg: dict, n: int, mu: float | None = None,
              x0: np.ndarray | None = None, dilation: float = 1.0,
              rng: RngStream | None = None) -> SignalSet:
    """Construct the signal set; 'auto' sizes dilate so that mu * x0 is feasible."""
    kind = cfg.get("kind")

    def auto_scale(per_unit: float) -> float:
        if mu is None or x0 is None:
            raise ConfigInvalid(f"set.radius: 'auto' needs model parameters and x0 "
                                f"(set kind {kind!r})")
        return dilation * abs(mu) * per_unit

    if kind == "l1ball":
        radius = cfg.get("radius", "auto")
        if radius == "auto":
            radius = auto_scale(float(np.linalg.norm(x0, 1)))
        return L1Ball(float(radius), n)
    if kind == "l2ball":
        radius = cfg.get("radius", "auto")
        if radius == "auto":
            radius = auto_scale(float(np.linalg.norm(x0)))
        center = np.asarray(cfg.get("center", np.zeros(n)), dtype=float)
        if center.shape != (n,):
            raise ConfigInvalid("set.center: length must equal n")
        return L2Ball(center, float(radius))
    if kind == "sqrt_sparsity":
        s = int(cfg.get("s", 1))
        scale = cfg.get("scale", 1.0)
        if scale == "auto":
            scale = auto_scale(max(float(np.linalg.norm(x0)),
                                   float(np.linalg.norm(x0, 1)) / math.sqrt(s)))
        return SqrtSparsitySet(s, n, float(scale))
    if kind == "subspace":
        d = int(cfg.get("dim", 1))
        if not (1 <= d <= n):
            raise ConfigInvalid("set.dim: must satisfy 1 <= dim <= n")
        if x0 is not None and np.linalg.norm(x0) > 0:
            return Subspace(_orthonormal_with_first(x0, d))
        return Subspace(np.eye(n)[:, :d])
    if kind == "polytope":
        vertices = np.asarray(cfg["vertices"], dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != n:
            raise ConfigInvalid("set.vertices: expected a (k, n) array")
        return PolytopeHull(vertices)
    if kind == "dictionary":
        inner = build_set(cfg["inner"], int(cfg.get("inner_dim", n)), mu=mu, x0=None,
                          dilation=dilation, rng=rng)
        if "matrix" in cfg:
            d_mat = np.asarray(cfg["matrix"], dtype=float)
        elif cfg.get("ortho", False):
            gen = (rng or RngStream(0)).generator()
            q, _ = np.linalg.qr(gen.standard_normal((n, inner.dim)))
            d_mat = q
        else:
            raise ConfigInvalid("set.matrix: dictionary needs 'matrix' or 'ortho': true")
        return DictionaryImage(d_mat, inner)
    raise ConfigInvalid(f"set.kind: unknown signal set {kind!r}")


def build_solver(cfg: dict | None) -> SolverConfig:
    if cfg is None:
        return SolverConfig()
    allowed = {f for f in SolverConfig.__dataclass_fields__}
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigInvalid(f"solver.{sorted(unknown)[0]}: unknown field")
    return SolverConfig(**cfg)


# ---------------------------------------------------------------------------
# top-level validation


def _require(cfg: dict, key: str, kind: str):
    if key not in cfg:
        raise ConfigInvalid(f"{key}: required for kind {kind!r}")
    return cfg[key]


def validate_trial(cfg: Any) -> TrialSpec:
    if not isinstance(cfg, dict):
        raise ConfigInvalid("trial: expected an object")
    for key in ("n", "m", "set", "loss", "model"):
        if key not in cfg:
            raise ConfigInvalid(f"trial.{key}: required")
    allowed = {"n", "m", "set", "loss", "model", "corruption", "covariance",
               "x0", "solver", "dilation"}
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigInvalid(f"trial.{sorted(unknown)[0]}: unknown field")
    spec = TrialSpec(
        n=int(cfg["n"]),
        m=int(cfg["m"]),
        set_cfg=dict(cfg["set"]),
        loss_cfg=dict(cfg["loss"]),
        model_cfg=dict(cfg["model"]),
        corruption_cfg=dict(cfg.get("corruption", {"kind": "none"})),
        covariance_cfg=dict(cfg.get("covariance", {"kind": "identity"})),
        x0_cfg=dict(cfg.get("x0", {"kind": "sparse", "s": 4})),
        solver=build_solver(cfg.get("solver")),
        dilation=float(cfg.get("dilation", 1.0)),
    )
    # Fail fast on malformed component configs (set sizing may need mu/x0 and
    # is checked at run time instead).
    build_loss(spec.loss_cfg)
    build_model(spec.model_cfg)
    build_corruption(spec.corruption_cfg)
    return spec


def validate_config(cfg: Any) -> ExperimentConfig:
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config: expected a JSON object")
    kind = cfg.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigInvalid(f"kind: expected one of {EXPERIMENT_KINDS}, got {kind!r}")
    seed = int(cfg.get("seed", 0))
    out = cfg.get("out")

    if kind in ("estimate", "sweep-m", "sweep-tau", "sweep-condition", "rsc", "smallball"):
        trial = validate_trial(_require(cfg, "trial", kind))
    else:
        trial = validate_trial(cfg["trial"]) if "trial" in cfg else None

    grid: tuple[float, ...] = ()
    trials = int(cfg.get("trials", 1))
    if kind.startswith("sweep"):
        raw = _require(cfg, "grid", kind)
        if not isinstance(raw, (list, tuple)) or len(raw) < 1:
            raise ConfigInvalid("grid: expected a non-empty list")
        grid = tuple(float(v) for v in raw)
        if any(v <= 0 for v in grid) and kind != "sweep-tau":
            raise ConfigInvalid("grid: values must be positive")
        if any(v < 0 for v in grid):
            raise ConfigInvalid("grid: values must be non-negative")
        if list(grid) != sorted(grid) or len(set(grid)) != len(grid):
            raise ConfigInvalid("grid: values must be strictly increasing")
        if trials < 1:
            raise ConfigInvalid("trials: must be >= 1")

    if kind == "modelparams" and trial is None:
        if "loss" not in cfg or "model" not in cfg:
            raise ConfigInvalid("loss: modelparams needs 'loss' and 'model' (or a trial)")

    set_cfg = cfg.get("set")
    if kind == "meanwidth" and trial is None and set_cfg is None:
        raise ConfigInvalid("set: meanwidth needs a 'set' (or a trial)")

    return ExperimentConfig(
        kind=kind,
        trial=trial,
        grid=grid,
        trials=trials,
        seed=seed,
        out=out,
        plot=bool(cfg.get("plot", False)),
        samples=int(cfg.get("samples", 10_000)),
        t=float(cfg["t"]) if "t" in cfg else None,
        m_window=_parse_window(cfg.get("M")),
        n_window=_parse_window(cfg.get("N")),
        set_cfg=dict(set_cfg) if set_cfg is not None else None,
        n=int(cfg["n"]) if "n" in cfg else None,
        center=list(cfg["center"]) if "center" in cfg else None,
    )


def _parse_window(v) -> float | None:
    if v is None:
        return None
    if isinstance(v, str):
        if v.lower() in ("inf", "infinity"):
            return math.inf
        raise ConfigInvalid(f"M/N: expected a number or 'inf', got {v!r}")
    return float(v)
