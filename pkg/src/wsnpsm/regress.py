"""Least-squares models of PSD and PLR over subsets of (B_P, P_S, N_C)."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .experiment import Dataset, ParamPoint

PREDICTORS = ("b_p", "p_s", "n_c")

# variant id -> predictors, ordered as in ParamPoint
VARIANTS: dict[int, tuple[str, ...]] = {
    1: ("b_p",),
    2: ("p_s",),
    3: ("n_c",),
    4: ("b_p", "p_s"),
    5: ("b_p", "n_c"),
    6: ("p_s", "n_c"),
    7: ("b_p", "p_s", "n_c"),
}
RESPONSES = ("psd", "plr")


class SingularDesignError(ValueError):
    def __init__(self, column: str, reason: str = "is linearly dependent on the other columns"):
        super().__init__(f"design matrix is singular: column {column!r} {reason}")
        self.column = column


class UndefinedOmegaError(ValueError):
    pass


class Interval(NamedTuple):
    lo: float
    hi: float
    level: float = 0.95

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi


class Prediction(NamedTuple):
    value: float
    clamped: bool = False


@dataclass(frozen=True)
class RegressionModel:
    variant: int
    response: str
    coefficients: tuple[float, ...]
    stderr: tuple[float, ...]
    omega: float
    residual_variance: float
    n: int
    dof: int
    # (X^T W X)^-1, needed for prediction intervals
    xtx_inv: tuple[tuple[float, ...], ...] | None = field(default=None, compare=False, repr=False)

    @property
    def predictors(self) -> tuple[str, ...]:
        return VARIANTS[self.variant]

    @property
    def names(self) -> tuple[str, ...]:
        return ("intercept",) + self.predictors


def _check_variant(variant: int) -> tuple[str, ...]:
    try:
        return VARIANTS[variant]
    except KeyError:
        raise ValueError(f"unknown model variant {variant}; expected 1..7") from None


def _as_arrays(rows) -> tuple[np.ndarray, np.ndarray]:
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to fit")
    x = np.array([list(r[0]) for r in rows], dtype=float)
    y = np.array([r[1] for r in rows], dtype=float)
    return x, y


def _design(x: np.ndarray, names: Sequence[str]) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != len(names):
        raise ValueError(f"expected {len(names)} predictor columns ({', '.join(names)}), got shape {x.shape}")
    return np.column_stack([np.ones(len(x)), x])


def _check_rank(design: np.ndarray, names: Sequence[str]) -> None:
    labels = ("intercept",) + tuple(names)
    for k, name in enumerate(names, start=1):
        col = design[:, k]
        if np.all(col == col[0]):
            raise SingularDesignError(name, "has zero variance")
    rank = 0
    for k in range(design.shape[1]):
        r = np.linalg.matrix_rank(design[:, : k + 1])
        if r == rank:
            raise SingularDesignError(labels[k])
        rank = r


def fit_ols(
    rows: Iterable[tuple[Sequence[float], float]],
    variant: int,
    response: str = "psd",
    weights: Sequence[float] | None = None,
) -> RegressionModel:
    """Fit ``y = r0 + sum(r_i * x_i)`` by least squares.

    ``rows`` hold the variant's predictors only, in ``VARIANTS`` order.
    With ``weights`` the fit is weighted least squares and Omega is the
    weighted coefficient of determination.
    """
    names = _check_variant(variant)
    if response not in RESPONSES:
        raise ValueError(f"response must be one of {RESPONSES}, got {response!r}")
    x, y = _as_arrays(rows)
    design = _design(x, names)
    n, p = design.shape
    if n <= p:
        raise ValueError(f"need more than {p} observations for {p} coefficients, got {n}")
    _check_rank(design, names)

    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w <= 0):
        raise ValueError("weights must be positive, one per row")
    sw = np.sqrt(w)
    a = design * sw[:, None]
    b = y * sw

    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = b - a @ coef
    sse = float(resid @ resid)
    ybar = float(np.average(y, weights=w))
    sst = float(w @ (y - ybar) ** 2)
    dof = n - p
    sigma2 = sse / dof
    xtx_inv = np.linalg.inv(a.T @ a)
    se = np.sqrt(np.maximum(np.diag(xtx_inv) * sigma2, 0.0))
    omega = 1.0 - sse / sst if sst > 0 else 1.0
    return RegressionModel(
        variant,
        response,
        tuple(float(c) for c in coef),
        tuple(float(s) for s in se),
        min(1.0, max(0.0, omega)),
        sigma2,
        n,
        dof,
        tuple(tuple(float(v) for v in row) for row in xtx_inv),
    )


def residuals(model: RegressionModel, rows) -> np.ndarray:
    x, y = _as_arrays(rows)
    design = _design(x, model.predictors)
    return y - design @ np.array(model.coefficients)


def r_squared(model: RegressionModel, rows) -> float:
    _, y = _as_arrays(rows)
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0:
        raise UndefinedOmegaError("response is constant; coefficient of determination undefined")
    e = residuals(model, rows)
    return 1.0 - float(e @ e) / sst


def t_quantile(level: float, dof: int) -> float:
    """Two-sided critical value of Student's t."""
    if not 0 < level < 1:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    if dof < 1:
        raise ValueError("need at least one degree of freedom")
    return float(stats.t.ppf(0.5 + level / 2, dof))


def coef_confidence_intervals(model: RegressionModel, level: float = 0.95) -> list[Interval]:
    q = t_quantile(level, model.dof)
    return [Interval(c - q * s, c + q * s, level) for c, s in zip(model.coefficients, model.stderr)]


def nonzero_test(interval: Interval) -> bool:
    return not interval.lo <= 0.0 <= interval.hi


def predictor_correlation(xs_i: Sequence[float], xs_j: Sequence[float], level: float = 0.95) -> tuple[float, bool]:
    """Pearson r and whether the zero-correlation hypothesis survives."""
    a = np.asarray(xs_i, dtype=float)
    b = np.asarray(xs_j, dtype=float)
    n = len(a)
    if n != len(b) or n < 3:
        raise ValueError("need two series of equal length >= 3")
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    if saa == 0 or sbb == 0:
        raise ValueError("correlation undefined for a zero-variance series")
    r = float(da @ db) / math.sqrt(saa * sbb)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, False
    t = abs(r) * math.sqrt((n - 2) / (1 - r * r))
    return r, t < t_quantile(level, n - 2)


def _point_values(model: RegressionModel, point: ParamPoint | Mapping[str, float]) -> list[float]:
    get = point.get if isinstance(point, Mapping) else lambda k: getattr(point, k)
    values = []
    for name in model.predictors:
        v = get(name)
        if v is None:
            raise ValueError(f"model variant {model.variant} needs a value for {name}")
        values.append(float(v))
    return values


def predict(model: RegressionModel, point: ParamPoint | Mapping[str, float]) -> Prediction:
    x = _point_values(model, point)
    c = model.coefficients
    y = c[0] + sum(ci * xi for ci, xi in zip(c[1:], x))
    if model.response == "plr" and not 0.0 <= y <= 1.0:
        return Prediction(min(1.0, max(0.0, y)), True)
    return Prediction(y, False)


def prediction_interval(model: RegressionModel, point, level: float = 0.95) -> Interval:
    """Interval for one new observation at ``point`` (unclamped)."""
    if model.xtx_inv is None:
        raise ValueError("model carries no covariance; refit to get prediction intervals")
    x0 = np.array([1.0] + _point_values(model, point))
    lever = float(x0 @ np.array(model.xtx_inv) @ x0)
    c = model.coefficients
    y = c[0] + float(np.dot(c[1:], x0[1:]))
    half = t_quantile(level, model.dof) * math.sqrt(model.residual_variance * (1.0 + lever))
    return Interval(y - half, y + half, level)


def dataset_rows(
    dataset: Dataset,
    response: str,
    predictors: Sequence[str] = PREDICTORS,
    per_trial: bool = False,
) -> list[tuple[tuple[float, ...], float]]:
    """Regression rows from a sweep.

    PSD rows are per-run means by default, or one row per NOI trial with
    ``per_trial``. PLR only exists per run.
    """
    rows = []
    for r in dataset:
        x = tuple(float(getattr(r.point, p)) for p in predictors)
        if response == "plr":
            if r.plr is None:
                raise ValueError(f"run {tuple(r.point)} has no PLR")
            rows.append((x, r.plr))
        elif response == "psd":
            if per_trial:
                rows.extend((x, float(v)) for v in r.noi_psd())
            else:
                rows.append((x, r.psd_mean))
        else:
            raise ValueError(f"response must be one of {RESPONSES}, got {response!r}")
    return rows


def fit_dataset(dataset: Dataset, variant: int, response: str, per_trial: bool = False) -> RegressionModel:
    rows = dataset_rows(dataset, response, _check_variant(variant), per_trial)
    return fit_ols(rows, variant, response)


def model_to_json(model: RegressionModel) -> str:
    doc = {
        "variant": model.variant,
        "response": model.response,
        "coefficients": list(model.coefficients),
        "stderr": list(model.stderr),
        "omega": model.omega,
        "n": model.n,
        "dof": model.dof,
        "residual_variance": model.residual_variance,
    }
    if model.xtx_inv is not None:
        doc["xtx_inv"] = [list(row) for row in model.xtx_inv]
    return json.dumps(doc, indent=2) + "\n"


def model_from_json(text: str) -> RegressionModel:
    doc = json.loads(text)
    try:
        variant = int(doc["variant"])
        names = _check_variant(variant)
        coef = tuple(float(c) for c in doc["coefficients"])
        se = tuple(float(s) for s in doc["stderr"])
        response = doc["response"]
        omega, n, dof = float(doc["omega"]), int(doc["n"]), int(doc["dof"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed model document: {exc}") from None
    if response not in RESPONSES:
        raise ValueError(f"unknown response {response!r}")
    if len(coef) != len(names) + 1 or len(se) != len(coef):
        raise ValueError(f"variant {variant} needs {len(names) + 1} coefficients and standard errors")
    xtx = doc.get("xtx_inv")
    return RegressionModel(
        variant,
        response,
        coef,
        se,
        omega,
        float(doc.get("residual_variance", float("nan"))),
        n,
        dof,
        tuple(tuple(float(v) for v in row) for row in xtx) if xtx is not None else None,
    )
