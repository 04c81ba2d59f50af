"""Loss models for linear prediction, with certified analytic constants.

Every loss here is of margin form ``loss(h, (x, y)) = phi(<h, x>, y)``,
optionally plus a ridge term ``rho * ||h||^2`` used to make an objective
strongly convex. The model certifies, over the domain
``{||h|| <= radius} x {||x|| <= feature_bound}``:

=========  =======================  ==========================  ============
kind       margin Lipschitz L       value bound M               smoothness s
=========  =======================  ==========================  ============
hinge      1                        1 + R*B                     (none)
logistic   1                        log(1 + exp(R*B))           B^2 / 4
squared    2*(R*B + Y)              (R*B + Y)^2                 2*B^2
=========  =======================  ==========================  ============

with R the hypothesis radius, B the feature bound, and Y the label bound
(labels of the classification losses are hard ±1, so Y = 1 there). L is
stated so that ``|loss(h,z) - loss(g,z)| <= L * |<h,x> - <g,x>|`` for the
pure margin losses; the gradient-norm bound ``||grad|| <= L*B`` holds for
all of them, and for ridge-augmented models L is enlarged by ``2*rho*R/B``
so that the same product L*B stays a gradient bound over the domain. The
ridge term adds ``rho * R^2`` to M, ``2*rho`` to s, and makes the model
``2*rho``-strongly convex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .seeding import substream

KINDS = ("hinge", "logistic", "squared")

# Relative slack accepted by domain checks, covering float round-off from
# projections and norm computations.
_DOMAIN_RTOL = 1e-9
_DOMAIN_ATOL = 1e-12


@dataclass(frozen=True)
class LabeledExample:
    """One observation: a feature vector and a real label."""

    x: np.ndarray
    y: float

    def __post_init__(self):
        arr = np.asarray(self.x, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("feature vector must be one-dimensional and non-empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature entries must be finite")
        if not math.isfinite(self.y):
            raise ValueError("label must be finite")
        object.__setattr__(self, "x", arr)
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class LossConstants:
    """Certified constants of a loss model over its declared domain."""

    lipschitz: float
    bound: float
    smoothness: float | None
    strong_convexity: float


def _within(value: float, limit: float) -> bool:
    return value <= limit * (1.0 + _DOMAIN_RTOL) + _DOMAIN_ATOL


def _sigmoid(t: np.ndarray) -> np.ndarray:
    """1/(1+exp(-t)) without overflow on either tail."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    exp_t = np.exp(t[~pos])
    out[~pos] = exp_t / (1.0 + exp_t)
    return out


def margin_values(kind: str, margins: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """phi(u, y) for a batch of margins, without domain checks."""
    u = np.asarray(margins, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if kind == "hinge":
        return np.maximum(0.0, 1.0 - y * u)
    if kind == "logistic":
        return np.logaddexp(0.0, -y * u)
    if kind == "squared":
        return (u - y) ** 2
    raise ValueError(f"unknown loss kind {kind!r}")


def margin_slopes(kind: str, margins: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d phi / d u for a batch of margins, without domain checks.

    The hinge slope at margin exactly 1 is taken to be 0 (a valid
    subgradient, and the convention every calculation here relies on).
    """
    u = np.asarray(margins, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if kind == "hinge":
        return np.where(y * u < 1.0, -y, 0.0)
    if kind == "logistic":
        return -y * _sigmoid(-y * u)
    if kind == "squared":
        return 2.0 * (u - y)
    raise ValueError(f"unknown loss kind {kind!r}")


@dataclass(frozen=True)
class LossModel:
    """A margin loss plus optional ridge term, certified on a bounded domain.

    Use :func:`make_loss` rather than the constructor; it validates the
    domain parameters and fixes the label bound of classification losses.
    """

    kind: str
    feature_bound: float
    radius: float
    label_bound: float
    ridge_term: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if not (self.feature_bound > 0 and math.isfinite(self.feature_bound)):
            raise ValueError("feature bound must be positive and finite")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError("hypothesis radius must be positive and finite")
        if not (self.label_bound > 0 and math.isfinite(self.label_bound)):
            raise ValueError("label bound must be positive and finite")
        if self.ridge_term < 0 or not math.isfinite(self.ridge_term):
            raise ValueError("ridge term must be non-negative and finite")

    # -- certified constants -------------------------------------------------

    def constants(self) -> LossConstants:
        rb = self.radius * self.feature_bound
        if self.kind == "hinge":
            base_l, base_m, base_s = 1.0, 1.0 + rb, None
        elif self.kind == "logistic":
            base_l = 1.0
            base_m = float(np.logaddexp(0.0, rb))
            base_s = self.feature_bound**2 / 4.0
        else:
            base_l = 2.0 * (rb + self.label_bound)
            base_m = (rb + self.label_bound) ** 2
            base_s = 2.0 * self.feature_bound**2
        rho = self.ridge_term
        lipschitz = base_l + 2.0 * rho * self.radius / self.feature_bound
        bound = base_m + rho * self.radius**2
        smoothness = None if base_s is None else base_s + 2.0 * rho
        return LossConstants(
            lipschitz=lipschitz,
            bound=bound,
            smoothness=smoothness,
            strong_convexity=2.0 * rho,
        )

    def value_at_zero(self) -> float:
        """Largest loss value at h = 0 over labels in the domain."""
        if self.kind == "hinge":
            return 1.0
        if self.kind == "logistic":
            return math.log(2.0)
        return self.label_bound**2

    # -- domain checks -------------------------------------------------------

    def check_hypothesis(self, h: np.ndarray) -> np.ndarray:
        h = np.asarray(h, dtype=np.float64)
        if h.ndim != 1:
            raise ValueError("hypothesis must be a one-dimensional vector")
        if not np.all(np.isfinite(h)):
            raise ValueError("hypothesis entries must be finite")
        if not _within(float(np.linalg.norm(h)), self.radius):
            raise DomainError(
                f"hypothesis norm {np.linalg.norm(h):.6g} exceeds certified radius "
                f"{self.radius:.6g}"
            )
        return h

    def check_example(self, z: LabeledExample) -> LabeledExample:
        if not _within(float(np.linalg.norm(z.x)), self.feature_bound):
            raise DomainError(
                f"feature norm {np.linalg.norm(z.x):.6g} exceeds bound "
                f"{self.feature_bound:.6g}"
            )
        if self.kind in ("hinge", "logistic"):
            if abs(abs(z.y) - 1.0) > 1e-12:
                raise DomainError("classification labels must be exactly +1 or -1")
        elif not _within(abs(z.y), self.label_bound):
            raise DomainError(
                f"label magnitude {abs(z.y):.6g} exceeds bound {self.label_bound:.6g}"
            )
        return z

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, h, z: LabeledExample) -> float:
        h = self.check_hypothesis(h)
        self.check_example(z)
        if h.shape != z.x.shape:
            raise ValueError(f"dimension mismatch: {h.size} vs {z.x.size}")
        u = float(h @ z.x)
        val = float(margin_values(self.kind, np.array([u]), np.array([z.y]))[0])
        if self.ridge_term:
            val += self.ridge_term * float(h @ h)
        return val

    def gradient(self, h, z: LabeledExample) -> np.ndarray:
        h = self.check_hypothesis(h)
        self.check_example(z)
        if h.shape != z.x.shape:
            raise ValueError(f"dimension mismatch: {h.size} vs {z.x.size}")
        u = float(h @ z.x)
        slope = float(margin_slopes(self.kind, np.array([u]), np.array([z.y]))[0])
        grad = slope * z.x
        if self.ridge_term:
            grad = grad + 2.0 * self.ridge_term * h
        return grad

    # -- batch helpers (no domain checks; used by solvers and experiments) ---

    def values_raw(self, h: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        vals = margin_values(self.kind, X @ h, y)
        if self.ridge_term:
            vals = vals + self.ridge_term * float(h @ h)
        return vals

    def risk_gradient_raw(self, h: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        slopes = margin_slopes(self.kind, X @ h, y)
        grad = X.T @ slopes / X.shape[0]
        if self.ridge_term:
            grad = grad + 2.0 * self.ridge_term * h
        return grad


def make_loss(
    kind: str,
    feature_bound: float,
    hypothesis_radius: float,
    label_bound: float = 1.0,
    ridge_term: float = 0.0,
) -> LossModel:
    """Build a loss model certified on the given domain.

    Classification losses (hinge, logistic) take hard ±1 labels, so their
    stored label bound is always 1 regardless of the argument.
    """
    if kind in ("hinge", "logistic"):
        label_bound = 1.0
    return LossModel(
        kind=kind,
        feature_bound=float(feature_bound),
        radius=float(hypothesis_radius),
        label_bound=float(label_bound),
        ridge_term=float(ridge_term),
    )


def _certify_draws(loss: LossModel, rng, count: int, dim: int, margin_gap: float):
    """Draw (H, X, y) with hypotheses strictly inside the certified ball.

    For the hinge loss, points whose margin lies within ``margin_gap`` of
    the kink at y*<h,x> = 1 are redrawn so directional derivatives exist.
    """
    hs, xs, ys = [], [], []
    needed = count
    while needed > 0:
        m = 2 * needed
        hdir = rng.normal(size=(m, dim))
        hdir /= np.linalg.norm(hdir, axis=1, keepdims=True)
        H = hdir * (loss.radius * (1.0 - 1e-4) * rng.random(size=(m, 1)))
        xdir = rng.normal(size=(m, dim))
        xdir /= np.linalg.norm(xdir, axis=1, keepdims=True)
        X = xdir * (loss.feature_bound * rng.random(size=(m, 1)) ** (1.0 / dim))
        if loss.kind in ("hinge", "logistic"):
            y = np.where(rng.random(size=m) < 0.5, -1.0, 1.0)
        else:
            y = rng.uniform(-loss.label_bound, loss.label_bound, size=m)
        keep = np.ones(m, dtype=bool)
        if loss.kind == "hinge" and margin_gap > 0.0:
            margins = np.einsum("td,td->t", H, X)
            keep = np.abs(1.0 - y * margins) > margin_gap
        take = min(needed, int(keep.sum()))
        idx = np.flatnonzero(keep)[:take]
        hs.append(H[idx])
        xs.append(X[idx])
        ys.append(y[idx])
        needed -= take
    return np.concatenate(hs), np.concatenate(xs), np.concatenate(ys)


def _row_values(loss: LossModel, H: np.ndarray, X: np.ndarray, y: np.ndarray):
    vals = margin_values(loss.kind, np.einsum("td,td->t", H, X), y)
    if loss.ridge_term:
        vals = vals + loss.ridge_term * np.einsum("td,td->t", H, H)
    return vals


def certify_loss(
    loss: LossModel,
    dim: int = 4,
    points: int = 1000,
    triples: int = 10000,
    seed: int = 0,
    fd_tolerance: float = 1e-5,
) -> dict:
    """Monte-Carlo certification of a loss model's gradient and constants.

    Three checks over the certified domain, all seeded:

    * finite differences: central differences of the value along a random
      direction agree with the analytic gradient to ``fd_tolerance``
      relative error on ``points`` draws (hinge draws avoid the kink);
    * Lipschitz and value bound: on ``triples`` random (h, g, z) triples,
      ``|loss(h,z) - loss(g,z)| <= L*B*||h-g||`` and ``0 <= loss <= M``;
    * smoothness (when certified): gradient differences are bounded by
      ``s * ||h-g||`` on the same triples.

    Returns a nested dict of observed extremes with an overall "ok" flag.
    """
    if dim < 1 or points < 1 or triples < 1:
        raise ValueError("dim, points and triples must be positive")
    rng = substream(seed, "loss-certify")
    consts = loss.constants()
    slack = lambda bound: bound * (1.0 + 1e-9) + 1e-12

    H, X, y = _certify_draws(loss, rng, points, dim, margin_gap=1e-3)
    V = rng.normal(size=(points, dim))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    eps = 1e-6 * loss.radius
    plus = _row_values(loss, H + eps * V, X, y)
    minus = _row_values(loss, H - eps * V, X, y)
    fd = (plus - minus) / (2.0 * eps)
    slopes = margin_slopes(loss.kind, np.einsum("td,td->t", H, X), y)
    dots = slopes * np.einsum("td,td->t", X, V)
    if loss.ridge_term:
        dots = dots + 2.0 * loss.ridge_term * np.einsum("td,td->t", H, V)
    fd_rel = float(np.max(np.abs(fd - dots) / np.maximum(1.0, np.abs(dots))))

    H1, X2, y2 = _certify_draws(loss, rng, triples, dim, margin_gap=0.0)
    H2, _, _ = _certify_draws(loss, rng, triples, dim, margin_gap=0.0)
    vals1 = _row_values(loss, H1, X2, y2)
    vals2 = _row_values(loss, H2, X2, y2)
    dists = np.linalg.norm(H1 - H2, axis=1)
    lip_limit = slack(consts.lipschitz * loss.feature_bound) * dists + 1e-15
    lip_excess = float(np.max(np.abs(vals1 - vals2) - lip_limit))
    all_vals = np.concatenate([vals1, vals2])
    value_low = float(all_vals.min())
    value_high = float(all_vals.max())
    bound_ok = value_low >= -1e-12 and value_high <= slack(consts.bound)

    smooth = None
    if consts.smoothness is not None:
        s1 = margin_slopes(loss.kind, np.einsum("td,td->t", H1, X2), y2)
        s2 = margin_slopes(loss.kind, np.einsum("td,td->t", H2, X2), y2)
        G1 = s1[:, None] * X2
        G2 = s2[:, None] * X2
        if loss.ridge_term:
            G1 = G1 + 2.0 * loss.ridge_term * H1
            G2 = G2 + 2.0 * loss.ridge_term * H2
        grad_diffs = np.linalg.norm(G1 - G2, axis=1)
        smooth_limit = slack(consts.smoothness) * dists + 1e-15
        smooth_excess = float(np.max(grad_diffs - smooth_limit))
        smooth = {
            "triples": triples,
            "max_excess": smooth_excess,
            "ok": smooth_excess <= 0.0,
        }

    report = {
        "kind": loss.kind,
        "ridge_term": loss.ridge_term,
        "finite_difference": {
            "points": points,
            "max_rel_error": fd_rel,
            "tolerance": fd_tolerance,
            "ok": fd_rel <= fd_tolerance,
        },
        "lipschitz": {
            "triples": triples,
            "max_excess": lip_excess,
            "ok": lip_excess <= 0.0,
        },
        "bound": {
            "triples": triples,
            "min_value": value_low,
            "max_value": value_high,
            "limit": consts.bound,
            "ok": bound_ok,
        },
        "smoothness": smooth,
    }
    checks = [report["finite_difference"], report["lipschitz"], report["bound"]]
    if smooth is not None:
        checks.append(smooth)
    report["ok"] = all(c["ok"] for c in checks)
    return report
