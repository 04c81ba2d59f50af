"""Learning algorithms whose replace-one stability the package measures.

Three trainers are provided, each returning a hypothesis vector for a
linear predictor:

* :func:`fit_ridge` - exact minimizer of mean squared error plus
  ``lam * ||h||^2``, by the normal equations.
* :func:`fit_rerm` - minimizer of a certified margin loss plus
  ``lam * ||h||_p^p`` for ``p`` in (1, 2], by proximal gradient descent
  (proximal subgradient descent for the hinge).
* :func:`run_sgd` - one pass of stochastic gradient descent with a
  per-regime step-size schedule, uniform with-replacement sampling from a
  seeded index stream, and optional projection onto a centered ball.

Algorithm presets bundle a trainer with the loss model it certifies, so
experiment configs can address them by name. Batched helpers
(:func:`fit_batch`, :func:`sgd_twin_distances`) advance many SGD runs in
lockstep; they produce the same trajectories as :func:`run_sgd` called per
cell with the matching seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as _dc_replace

import numpy as np

from .exceptions import ConvergenceError, DomainError, NonFiniteIterateError
from .losses import LabeledExample, LossModel, make_loss, margin_slopes
from .seeding import substream

SGD_REGIMES = ("nonconvex", "convex", "strongly_convex")
PRESETS = ("constant", "ridge", "rerm-lp", "sgd-nonconvex", "sgd-convex", "sgd-strongly-convex")


# ---------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class Sample:
    """An ordered training set of n labeled examples in d dimensions."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.labels, dtype=np.float64, copy=True)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise ValueError("features must be a non-empty (n, d) array")
        if y.shape != (X.shape[0],):
            raise ValueError("labels must be a vector with one entry per row of features")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("sample entries must be finite")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @classmethod
    def from_examples(cls, examples) -> "Sample":
        examples = list(examples)
        if not examples:
            raise ValueError("need at least one example")
        X = np.stack([np.asarray(z.x, dtype=np.float64) for z in examples])
        y = np.array([z.y for z in examples], dtype=np.float64)
        return cls(X, y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def example(self, i: int) -> LabeledExample:
        if not 0 <= i < self.n:
            raise ValueError(f"index {i} out of range for sample of size {self.n}")
        return LabeledExample(self.features[i].copy(), float(self.labels[i]))

    def replaced(self, i: int, z: LabeledExample) -> "Sample":
        """A copy of the sample with example i swapped for z."""
        if not 0 <= i < self.n:
            raise ValueError(f"index {i} out of range for sample of size {self.n}")
        if z.x.shape != (self.dim,):
            raise ValueError("replacement example has the wrong dimension")
        X = self.features.copy()
        y = self.labels.copy()
        X[i] = z.x
        y[i] = z.y
        return Sample(X, y)


def check_sample_domain(loss: LossModel, sample: Sample) -> None:
    """Raise DomainError if any example violates the loss model's domain."""
    norms = np.linalg.norm(sample.features, axis=1)
    limit = loss.feature_bound * (1.0 + 1e-9) + 1e-12
    if np.any(norms > limit):
        worst = float(norms.max())
        raise DomainError(
            f"feature norm {worst:.6g} exceeds bound {loss.feature_bound:.6g}"
        )
    y = sample.labels
    if loss.kind in ("hinge", "logistic"):
        if np.any(np.abs(np.abs(y) - 1.0) > 1e-12):
            raise DomainError("classification labels must be exactly +1 or -1")
    else:
        lim = loss.label_bound * (1.0 + 1e-9) + 1e-12
        if np.any(np.abs(y) > lim):
            raise DomainError(
                f"label magnitude {float(np.abs(y).max()):.6g} exceeds bound "
                f"{loss.label_bound:.6g}"
            )


def empirical_risk(loss: LossModel, h, sample: Sample) -> float:
    """Mean loss of h over the sample."""
    h = loss.check_hypothesis(h)
    if h.shape != (sample.dim,):
        raise ValueError("hypothesis dimension does not match the sample")
    check_sample_domain(loss, sample)
    return float(loss.values_raw(h, sample.features, sample.labels).mean())


# ---------------------------------------------------------------------------
# ridge regression


def fit_ridge(sample: Sample, lam: float) -> np.ndarray:
    """Exact minimizer of (1/n) sum (<h,x_i> - y_i)^2 + lam ||h||^2.

    Solves the normal equations, with one refinement pass so the residual
    gradient norm stays below 1e-10 at desk scale.
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError("lam must be positive and finite")
    X, y = sample.features, sample.labels
    n, d = X.shape
    A = X.T @ X / n + lam * np.eye(d)
    b = X.T @ y / n
    h = np.linalg.solve(A, b)
    resid = b - A @ h
    if np.linalg.norm(resid) > 1e-14:
        h = h + np.linalg.solve(A, resid)
    grad_norm = 2.0 * float(np.linalg.norm(A @ h - b))
    if grad_norm >= 1e-10:
        raise ConvergenceError("ridge normal equations left a large residual", grad_norm)
    return h


# ---------------------------------------------------------------------------
# penalized ERM


@dataclass(frozen=True)
class PenaltySpec:
    """The penalty lam * ||h||_p^p with p in (1, 2]."""

    p: float
    lam: float

    def __post_init__(self):
        if not 1.0 < self.p <= 2.0:
            raise ValueError("penalty exponent p must lie in (1, 2]")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("penalty weight lam must be positive and finite")

    def value(self, h) -> float:
        h = np.asarray(h, dtype=np.float64)
        return float(np.sum(np.abs(h) ** self.p))

    def gradient(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=np.float64)
        return self.p * np.sign(h) * np.abs(h) ** (self.p - 1.0)

    def prox(self, v: np.ndarray, step: float) -> np.ndarray:
        """argmin_u 0.5 ||u - v||^2 + step * lam * ||u||_p^p, coordinatewise.

        Closed form at p = 2; otherwise a monotone bisection on each
        coordinate, run to absolute tolerance 1e-12.
        """
        w = step * self.lam
        if self.p == 2.0:
            return v / (1.0 + 2.0 * w)
        a = np.abs(v)
        lo = np.zeros_like(a)
        hi = a.copy()
        # First-order condition u + w*p*u^(p-1) = |v| on [0, |v|]; the left
        # side is increasing, so bisection converges unconditionally.
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            g = mid + w * self.p * mid ** (self.p - 1.0) - a
            high = g > 0
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
            if float(np.max(hi - lo)) < 1e-12:
                break
        return np.sign(v) * 0.5 * (lo + hi)


def fit_rerm(
    sample: Sample,
    loss: LossModel,
    penalty: PenaltySpec,
    tol: float = 1e-8,
    max_iter: int = 50000,
) -> np.ndarray:
    """Minimize empirical risk plus lam * ||h||_p^p.

    Smooth losses use a monotone accelerated proximal-gradient iteration
    with step 1/s and stop when the objective gradient norm drops below
    ``tol`` (the penalty is differentiable for p > 1). The hinge uses a
    projected proximal-subgradient iteration with diminishing steps and
    stops when the best objective value improves by less than ``tol`` over
    a sweep of 64 iterations. Raises ConvergenceError, carrying the
    achieved certificate, if ``max_iter`` is exhausted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    check_sample_domain(loss, sample)
    X, y = sample.features, sample.labels
    d = sample.dim

    def objective(h: np.ndarray) -> float:
        return float(loss.values_raw(h, X, y).mean()) + penalty.lam * penalty.value(h)

    smoothness = loss.constants().smoothness
    if smoothness is not None:
        eta = 1.0 / smoothness
        x = np.zeros(d)
        fx = objective(x)
        mom = x
        tk = 1.0
        gnorm = math.inf
        for _ in range(max_iter):
            z = penalty.prox(mom - eta * loss.risk_gradient_raw(mom, X, y), eta)
            fz = objective(z)
            if fz > fx:
                # Accelerated step overshot; fall back to the plain descent
                # step from x, which cannot increase the objective.
                z = penalty.prox(x - eta * loss.risk_gradient_raw(x, X, y), eta)
                fz = objective(z)
                tk = 1.0
            tnext = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
            mom = z + ((tk - 1.0) / tnext) * (z - x)
            x, fx, tk = z, fz, tnext
            grad = loss.risk_gradient_raw(x, X, y) + penalty.lam * penalty.gradient(x)
            gnorm = float(np.linalg.norm(grad))
            if gnorm < tol:
                return x
        raise ConvergenceError("proximal gradient exhausted max_iter", gnorm)

    # Hinge path. Iterates are projected onto the ball that provably
    # contains the minimizer (lam * ||h*||_p^p <= objective(0)).
    radius = (loss.value_at_zero() / penalty.lam) ** (1.0 / penalty.p)
    ggrad = loss.feature_bound + penalty.lam * penalty.p * radius ** (penalty.p - 1.0)
    step0 = max(radius, 1.0) / ggrad
    x = np.zeros(d)
    best = x
    fbest = objective(x)
    mark = fbest
    sweep = 64
    for k in range(max_iter):
        step = step0 / math.sqrt(k + 1.0)
        g = loss.risk_gradient_raw(x, X, y)
        z = penalty.prox(x - step * g, step)
        nrm = float(np.linalg.norm(z))
        if nrm > radius:
            z = z * (radius / nrm)
        x = z
        fz = objective(z)
        if fz < fbest:
            best, fbest = z, fz
        if (k + 1) % sweep == 0:
            if mark - fbest < tol:
                return best
            mark = fbest
    raise ConvergenceError("subgradient method exhausted max_iter", mark - fbest)


# ---------------------------------------------------------------------------
# stochastic gradient descent


@dataclass(frozen=True)
class SgdSpec:
    """Schedule and sampling plan for one SGD run.

    ``regime`` selects the step-size rule: "nonconvex" uses the decaying
    schedule ``alpha_t = c/t``; "convex" and "strongly_convex" use a
    constant step, capped at 2/s and 1/s respectively against the loss's
    certified smoothness when the run starts. The strongly convex regime
    additionally requires projection onto a centered ball.
    """

    regime: str
    steps: int
    seed: int
    step: float | None = None
    step_constant: float | None = None
    projection_radius: float | None = None

    def __post_init__(self):
        if self.regime not in SGD_REGIMES:
            raise ValueError(f"unknown SGD regime {self.regime!r}")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.regime == "nonconvex":
            if self.step_constant is None or not (
                self.step_constant > 0 and math.isfinite(self.step_constant)
            ):
                raise ValueError("nonconvex regime needs a positive step constant c")
        else:
            if self.step is None or not (self.step > 0 and math.isfinite(self.step)):
                raise ValueError(f"{self.regime} regime needs a positive constant step")
        if self.regime == "strongly_convex" and self.projection_radius is None:
            raise ValueError("strongly_convex regime requires a projection radius")
        if self.projection_radius is not None and not (
            self.projection_radius > 0 and math.isfinite(self.projection_radius)
        ):
            raise ValueError("projection radius must be positive and finite")

    def step_sizes(self) -> np.ndarray:
        if self.regime == "nonconvex":
            return self.step_constant / np.arange(1.0, self.steps + 1.0)
        return np.full(self.steps, float(self.step))

    def validate_against(self, loss: LossModel) -> None:
        """Check the regime's step cap against the loss's certified constants."""
        consts = loss.constants()
        if self.regime == "nonconvex":
            return
        if consts.smoothness is None:
            raise ValueError(f"{self.regime} regime requires a certified smoothness")
        cap = (2.0 if self.regime == "convex" else 1.0) / consts.smoothness
        if self.step > cap * (1.0 + 1e-12):
            raise ValueError(
                f"step {self.step:.6g} exceeds the {self.regime} cap {cap:.6g}"
            )
        if self.regime == "strongly_convex" and consts.strong_convexity <= 0:
            raise ValueError(
                "strongly_convex regime needs a strongly convex objective; "
                "augment the loss with a ridge term first"
            )


@dataclass(frozen=True)
class SgdRun:
    """Final iterate and the full trajectory h_0 .. h_T."""

    final: np.ndarray
    trajectory: np.ndarray


def run_sgd(sample: Sample, loss: LossModel, spec: SgdSpec) -> SgdRun:
    """One SGD pass from h_0 = 0 with uniform with-replacement sampling.

    The index stream is drawn up front from ``spec.seed``, so two runs
    with equal (sample, spec) produce bitwise-equal trajectories, and twin
    runs on S and a replaced copy of S share their index stream when given
    the same spec.
    """
    spec.validate_against(loss)
    check_sample_domain(loss, sample)
    n, d = sample.n, sample.dim
    alphas = spec.step_sizes()
    idx = substream(spec.seed, "sgd-indices").integers(0, n, size=spec.steps)
    h = np.zeros(d)
    traj = np.zeros((spec.steps + 1, d))
    for t in range(spec.steps):
        z = sample.example(int(idx[t]))
        g = loss.gradient(h, z)
        h = h - alphas[t] * g
        if spec.projection_radius is not None:
            nrm = float(np.linalg.norm(h))
            if nrm > spec.projection_radius:
                h = h * (spec.projection_radius / nrm)
        if not np.all(np.isfinite(h)):
            raise NonFiniteIterateError(step=t + 1)
        traj[t + 1] = h
    return SgdRun(final=h, trajectory=traj)


def _batched_sgd(
    loss: LossModel,
    alphas: np.ndarray,
    projection_radius: float | None,
    index_streams: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    twin: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
):
    """Advance C SGD runs in lockstep; mirrors run_sgd's arithmetic.

    ``features`` is either one shared (n, d) training set or a per-run
    (C, n, d) stack. With ``twin = (replaced_index, repl_x, repl_y)`` a
    second state is advanced on the replaced samples using the same index
    streams, and both final states are returned.
    """
    idx = np.asarray(index_streams)
    cells, steps = idx.shape
    shared = features.ndim == 2
    d = features.shape[-1]
    rows = np.arange(cells)
    rho = loss.ridge_term
    HA = np.zeros((cells, d))
    HB = np.zeros((cells, d)) if twin is not None else None
    if twin is not None:
        rep_i, rep_x, rep_y = twin
    for t in range(steps):
        it = idx[:, t]
        if shared:
            xa = features[it]
            ya = labels[it]
        else:
            xa = features[rows, it]
            ya = labels[rows, it]
        ua = np.einsum("cd,cd->c", HA, xa)
        ga = margin_slopes(loss.kind, ua, ya)[:, None] * xa
        if rho:
            ga = ga + 2.0 * rho * HA
        HA = HA - alphas[t] * ga
        if projection_radius is not None:
            nrm = np.linalg.norm(HA, axis=1)
            over = nrm > projection_radius
            if np.any(over):
                HA[over] *= (projection_radius / nrm[over])[:, None]
        if HB is not None:
            hit = it == rep_i
            xb = np.where(hit[:, None], rep_x, xa)
            yb = np.where(hit, rep_y, ya)
            ub = np.einsum("cd,cd->c", HB, xb)
            gb = margin_slopes(loss.kind, ub, yb)[:, None] * xb
            if rho:
                gb = gb + 2.0 * rho * HB
            HB = HB - alphas[t] * gb
            if projection_radius is not None:
                nrm = np.linalg.norm(HB, axis=1)
                over = nrm > projection_radius
                if np.any(over):
                    HB[over] *= (projection_radius / nrm[over])[:, None]
        if not np.all(np.isfinite(HA)) or (HB is not None and not np.all(np.isfinite(HB))):
            raise NonFiniteIterateError(step=t + 1)
    if HB is None:
        return HA
    return HA, HB


def strongly_convex_objective(loss: LossModel, lam: float) -> LossModel:
    """Add lam * ||h||^2 to a loss, making it 2*lam strongly convex.

    The certified constants are recomputed on the same domain: the value
    bound grows by lam * R^2, the smoothness by 2*lam, and the gradient
    bound L*B by 2*lam*R.
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError("lam must be positive and finite")
    return _dc_replace(loss, ridge_term=loss.ridge_term + lam)


# ---------------------------------------------------------------------------
# algorithm presets


def _loss_value_at_zero(kind: str, label_bound: float) -> float:
    if kind == "hinge":
        return 1.0
    if kind == "logistic":
        return math.log(2.0)
    if kind == "squared":
        return label_bound**2
    raise ValueError(f"unknown loss kind {kind!r}")


class ConstantAlgorithm:
    """Outputs a fixed vector regardless of the sample. Used as a null case."""

    name = "constant"
    stochastic = False

    def __init__(self, output, loss: LossModel | None = None):
        out = np.asarray(output, dtype=np.float64)
        if out.ndim != 1 or out.size == 0 or not np.all(np.isfinite(out)):
            raise ValueError("output must be a finite non-empty vector")
        self.output = out
        self._loss = loss
        self.feature_bound = loss.feature_bound if loss is not None else 1.0

    def loss_for(self, n: int) -> LossModel | None:
        return self._loss

    def fit(self, sample: Sample, seed: int = 0) -> np.ndarray:
        return self.output.copy()


class RidgeAlgorithm:
    """Squared loss with an l2 penalty, solved exactly.

    The certified hypothesis radius comes from lam * ||h_S||^2 being at
    most the objective at zero, which the label bound caps at Y^2.
    """

    name = "ridge"
    stochastic = False

    def __init__(self, lam: float, feature_bound: float, label_bound: float):
        if not (lam > 0 and math.isfinite(lam)):
            raise ValueError("lam must be positive and finite")
        self.lam = float(lam)
        self.feature_bound = float(feature_bound)
        self.label_bound = float(label_bound)
        radius = math.sqrt(_loss_value_at_zero("squared", label_bound) / lam)
        self._loss = make_loss("squared", feature_bound, radius, label_bound)

    def loss_for(self, n: int) -> LossModel:
        return self._loss

    def fit(self, sample: Sample, seed: int = 0) -> np.ndarray:
        return fit_ridge(sample, self.lam)


class LpRermAlgorithm:
    """A certified margin loss with an l_p^p penalty, p in (1, 2]."""

    name = "rerm-lp"
    stochastic = False

    def __init__(
        self,
        loss_kind: str,
        penalty: PenaltySpec,
        feature_bound: float,
        label_bound: float = 1.0,
        tol: float = 1e-9,
        max_iter: int = 50000,
    ):
        self.penalty = penalty
        self.feature_bound = float(feature_bound)
        self.tol = tol
        self.max_iter = max_iter
        at_zero = _loss_value_at_zero(loss_kind, label_bound)
        radius = (at_zero / penalty.lam) ** (1.0 / penalty.p)
        self._loss = make_loss(loss_kind, feature_bound, radius, label_bound)

    def loss_for(self, n: int) -> LossModel:
        return self._loss

    def fit(self, sample: Sample, seed: int = 0) -> np.ndarray:
        return fit_rerm(sample, self._loss, self.penalty, self.tol, self.max_iter)


def _norm_policy(value, kind: str) -> dict:
    """Normalize step/steps/c policies to {'mode': ..., ...} dictionaries."""
    allowed = {
        "step": ("constant", "inverse_smoothness", "inverse_gamma_n"),
        "steps": ("fixed", "multiple_of_n", "n_squared"),
        "c": ("constant", "inverse_smoothness"),
    }[kind]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        mode = "fixed" if kind == "steps" else "constant"
        out = {"mode": mode, "value": float(value)}
    elif isinstance(value, str):
        out = {"mode": value}
    elif isinstance(value, dict):
        out = dict(value)
        if "mode" not in out:
            raise ValueError(f"{kind} policy needs a 'mode' key")
    else:
        raise ValueError(f"cannot interpret {kind} policy {value!r}")
    if out["mode"] not in allowed:
        raise ValueError(f"unknown {kind} policy mode {out['mode']!r}")
    if out["mode"] in ("constant", "fixed"):
        if "value" not in out and "factor" not in out:
            raise ValueError(f"{kind} policy {out['mode']!r} needs a value")
    if out["mode"] == "multiple_of_n" and "factor" not in out:
        raise ValueError("multiple_of_n policy needs a factor")
    if out["mode"] == "n_squared":
        out.setdefault("factor", 1.0)
    extra = set(out) - {"mode", "value", "factor"}
    if extra:
        raise ValueError(f"unknown {kind} policy keys {sorted(extra)}")
    return out


class SgdAlgorithm:
    """SGD preset with per-n schedule resolution and loss certification.

    Projected runs certify the loss on the projection ball; unprojected
    runs certify it on the worst-case reach of the iterates, computed from
    the step schedule and the loss's own gradient bound.
    """

    stochastic = True

    def __init__(
        self,
        regime: str,
        loss_kind: str,
        feature_bound: float,
        label_bound: float = 1.0,
        *,
        step=None,
        steps=None,
        c=None,
        gamma: float = 0.0,
        projection_radius: float | None = None,
    ):
        if regime not in SGD_REGIMES:
            raise ValueError(f"unknown SGD regime {regime!r}")
        self.regime = regime
        self.name = f"sgd-{regime.replace('_', '-')}"
        self.loss_kind = loss_kind
        self.feature_bound = float(feature_bound)
        self.label_bound = float(label_bound)
        self.gamma = float(gamma)
        self.projection_radius = projection_radius
        if regime == "strongly_convex":
            if not (self.gamma > 0 and math.isfinite(self.gamma)):
                raise ValueError("strongly_convex regime needs gamma > 0")
            if projection_radius is None:
                raise ValueError("strongly_convex regime needs a projection radius")
        elif self.gamma:
            raise ValueError("gamma is only meaningful for the strongly_convex regime")
        self.ridge_term = self.gamma / 2.0
        if steps is None:
            raise ValueError("an SGD preset needs a steps policy")
        self.steps_policy = _norm_policy(steps, "steps")
        if regime == "nonconvex":
            if c is None:
                raise ValueError("nonconvex regime needs a step-constant policy c")
            self.c_policy = _norm_policy(c, "c")
            self.step_policy = None
        else:
            if step is None:
                raise ValueError(f"{regime} regime needs a step policy")
            self.step_policy = _norm_policy(step, "step")
            self.c_policy = None
        # Smoothness does not depend on the certified radius, so a probe
        # model with radius 1 yields the constant used by step policies.
        probe = make_loss(loss_kind, feature_bound, 1.0, label_bound, self.ridge_term)
        self._smoothness = probe.constants().smoothness

    # -- schedule resolution --------------------------------------------------

    def steps_for(self, n: int) -> int:
        mode = self.steps_policy["mode"]
        if mode == "fixed":
            return int(self.steps_policy["value"])
        if mode == "multiple_of_n":
            return int(round(self.steps_policy["factor"] * n))
        return int(round(self.steps_policy["factor"] * n * n))

    def _inverse_smoothness(self) -> float:
        if self._smoothness is None:
            raise ValueError(
                "loss has no certified smoothness; give an explicit step value"
            )
        return 1.0 / self._smoothness

    def step_for(self, n: int) -> float | None:
        if self.step_policy is None:
            return None
        mode = self.step_policy["mode"]
        if mode == "constant":
            return float(self.step_policy["value"])
        if mode == "inverse_smoothness":
            return self._inverse_smoothness()
        return 1.0 / (self.gamma * n)

    def c_for(self, n: int) -> float | None:
        if self.c_policy is None:
            return None
        if self.c_policy["mode"] == "constant":
            return float(self.c_policy["value"])
        return self._inverse_smoothness()

    def spec_for(self, n: int, seed: int) -> SgdSpec:
        return SgdSpec(
            regime=self.regime,
            steps=self.steps_for(n),
            seed=seed,
            step=self.step_for(n),
            step_constant=self.c_for(n),
            projection_radius=self.projection_radius,
        )

    def loss_for(self, n: int) -> LossModel:
        if self.projection_radius is not None:
            radius = self.projection_radius
        else:
            radius = _drift_radius(
                self.loss_kind,
                self.spec_for(n, 0).step_sizes(),
                self.feature_bound,
                self.label_bound,
            )
            if not math.isfinite(radius):
                raise ValueError(
                    "cannot certify a finite reach radius for this schedule; "
                    "use a projection or a shorter run"
                )
            radius = max(radius, 1e-9)
        return make_loss(
            self.loss_kind,
            self.feature_bound,
            radius,
            self.label_bound,
            self.ridge_term,
        )

    def fit(self, sample: Sample, seed: int = 0) -> np.ndarray:
        loss = self.loss_for(sample.n)
        return run_sgd(sample, loss, self.spec_for(sample.n, seed)).final


def _drift_radius(kind: str, alphas: np.ndarray, B: float, Y: float) -> float:
    """Worst-case iterate norm of unprojected SGD from the origin."""
    if kind in ("hinge", "logistic"):
        # Margin slope is at most 1, so each step moves by at most alpha*B.
        return B * float(np.sum(alphas))
    r = 0.0
    for a in alphas:
        r = r * (1.0 + 2.0 * a * B * B) + 2.0 * a * B * Y
        if not math.isfinite(r):
            return math.inf
    return r


def make_algorithm(
    preset: str,
    loss_kind: str,
    feature_bound: float,
    label_bound: float = 1.0,
    **params,
):
    """Build a named algorithm preset bound to a loss and data domain."""
    if preset == "constant":
        output = np.asarray(params.pop("vector"), dtype=np.float64)
        _reject_extra(preset, params)
        radius = max(1.0, 2.0 * float(np.linalg.norm(output)))
        loss = make_loss(loss_kind, feature_bound, radius, label_bound)
        return ConstantAlgorithm(output, loss)
    if preset == "ridge":
        if loss_kind != "squared":
            raise ValueError("the ridge preset trains the squared loss")
        lam = params.pop("lam")
        _reject_extra(preset, params)
        return RidgeAlgorithm(lam, feature_bound, label_bound)
    if preset == "rerm-lp":
        penalty = PenaltySpec(p=params.pop("p"), lam=params.pop("lam"))
        tol = params.pop("tol", 1e-9)
        max_iter = int(params.pop("max_iter", 50000))
        _reject_extra(preset, params)
        return LpRermAlgorithm(
            loss_kind, penalty, feature_bound, label_bound, tol=tol, max_iter=max_iter
        )
    if preset in ("sgd-nonconvex", "sgd-convex", "sgd-strongly-convex"):
        regime = preset[len("sgd-") :].replace("-", "_")
        kwargs = {
            "steps": params.pop("steps"),
            "projection_radius": params.pop("projection_radius", None),
        }
        if regime == "nonconvex":
            kwargs["c"] = params.pop("c")
        else:
            kwargs["step"] = params.pop("step")
        if regime == "strongly_convex":
            kwargs["gamma"] = params.pop("gamma")
        _reject_extra(preset, params)
        return SgdAlgorithm(regime, loss_kind, feature_bound, label_bound, **kwargs)
    raise ValueError(f"unknown algorithm preset {preset!r}")


def _reject_extra(preset: str, params: dict) -> None:
    if params:
        raise ValueError(f"unknown parameters for preset {preset!r}: {sorted(params)}")


# ---------------------------------------------------------------------------
# batched entry points


def sgd_twin_distances(
    algorithm: SgdAlgorithm,
    features: np.ndarray,
    labels: np.ndarray,
    replaced_index: np.ndarray,
    repl_x: np.ndarray,
    repl_y: np.ndarray,
    seeds,
    return_states: bool = False,
):
    """Final-iterate distances between coupled runs on S and on S with one
    example replaced, one entry per cell.

    ``features`` is a shared (n, d) sample or a per-cell (C, n, d) stack;
    cell c replaces index ``replaced_index[c]`` with ``(repl_x[c],
    repl_y[c])`` and drives both runs with the index stream derived from
    ``seeds[c]``, exactly as run_sgd would.
    """
    n = features.shape[-2]
    spec = algorithm.spec_for(n, 0)
    loss = algorithm.loss_for(n)
    spec.validate_against(loss)
    idx = np.stack(
        [substream(s, "sgd-indices").integers(0, n, size=spec.steps) for s in seeds]
    )
    HA, HB = _batched_sgd(
        loss,
        spec.step_sizes(),
        spec.projection_radius,
        idx,
        features,
        labels,
        twin=(np.asarray(replaced_index), np.asarray(repl_x), np.asarray(repl_y)),
    )
    distances = np.linalg.norm(HA - HB, axis=1)
    if return_states:
        return distances, HA, HB
    return distances


def fit_batch(algorithm, samples, seeds) -> np.ndarray:
    """Fit the algorithm on each sample; batched for SGD presets."""
    samples = list(samples)
    seeds = list(seeds)
    if len(samples) != len(seeds):
        raise ValueError("need one seed per sample")
    if not samples:
        raise ValueError("need at least one sample")
    if isinstance(algorithm, SgdAlgorithm) and len(samples) > 1:
        n = samples[0].n
        if all(s.n == n for s in samples):
            spec = algorithm.spec_for(n, 0)
            loss = algorithm.loss_for(n)
            spec.validate_against(loss)
            X = np.stack([s.features for s in samples])
            y = np.stack([s.labels for s in samples])
            idx = np.stack(
                [
                    substream(s, "sgd-indices").integers(0, n, size=spec.steps)
                    for s in seeds
                ]
            )
            return _batched_sgd(
                loss, spec.step_sizes(), spec.projection_radius, idx, X, y
            )
    return np.stack([algorithm.fit(s, seed=sd) for s, sd in zip(samples, seeds)])
