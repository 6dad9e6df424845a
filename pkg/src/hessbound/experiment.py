"""Critical-point study: Gaussian two-class data, full-batch gradient descent
from many random initialisations, deduplication, spectra and statistics.

Every random stream is a Philox generator keyed by ``(rng_seed, stream, ...)``
so a run is reproducible bit-for-bit from its config alone.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.spatial.distance import pdist, squareform
from scipy.stats import skew, spearmanr

from .activations import ActivationKind
from .bound import SpectrumReport, lambda_sup_from_batch, spectrum_report
from .errors import DomainError, NumericError, ShapeError
from .hessian import hessian_from_batch
from .loss_grad import loss_and_grad, total_loss
from .network import Dataset, NetworkParams, NetworkShape, forward_batch, unflatten
from .oracle import matrix_sq_trace, matrix_trace
from .stats import macro_f1, mann_whitney_u
from .traces import trace_bundle

STREAM_TRAIN, STREAM_TEST, STREAM_INIT = 0, 1, 2


@dataclass(frozen=True)
class ExperimentConfig:
    M: int = 2
    N: int = 3
    I_train: int = 50
    I_test: int = 1000
    seeds: int = 500
    T_max: int = 10_000
    eps_converge: float = 1e-3
    learning_rate: float = 0.125
    init_range: float = 10.0
    activation: str = "sigmoid"
    class0_mean: tuple = (1.0, 1.0)
    class1_mean: tuple = (-1.0, -1.0)
    variance: float = 2.0
    rng_seed: int = 0
    trajectory_seeds: int = 0
    trajectory_stride: int = 50
    high_quantile: float = 0.9
    hist_bins: int = 30

    def __post_init__(self):
        object.__setattr__(self, "activation", str(ActivationKind.parse(self.activation)))
        object.__setattr__(self, "class0_mean", tuple(float(v) for v in self.class0_mean))
        object.__setattr__(self, "class1_mean", tuple(float(v) for v in self.class1_mean))
        for name in ("M", "N", "I_train", "I_test", "seeds", "T_max", "trajectory_stride", "hist_bins"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be positive")
        if self.trajectory_seeds < 0:
            raise DomainError("trajectory_seeds must be nonnegative")
        if not 0.0 < self.eps_converge < 1.0:
            raise DomainError("eps_converge must lie in (0, 1)")
        if not (self.variance >= 0.0 and self.learning_rate > 0.0 and self.init_range > 0.0):
            raise DomainError("variance must be nonnegative; learning_rate and init_range positive")
        if not 0.0 < self.high_quantile < 1.0:
            raise DomainError("high_quantile must lie in (0, 1)")
        if len(self.class0_mean) != self.M or len(self.class1_mean) != self.M:
            raise ShapeError(f"class means must have M={self.M} entries")

    @property
    def kind(self) -> ActivationKind:
        return ActivationKind.parse(self.activation)

    @property
    def shape(self) -> NetworkShape:
        return NetworkShape(self.M, self.N)

    def to_json(self) -> dict:
        out = asdict(self)
        out["class0_mean"] = list(self.class0_mean)
        out["class1_mean"] = list(self.class1_mean)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        return cls(**obj)


def make_rng(cfg: ExperimentConfig, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.rng_seed, *stream])))


def generate_dataset(cfg: ExperimentConfig, split: str, rng: np.random.Generator | None = None) -> Dataset:
    """Class 0 samples first, then class 1; each is ``mean + sqrt(var) * N(0, I)``."""
    if split not in ("train", "test"):
        raise DomainError(f"split must be 'train' or 'test', got {split!r}")
    I = cfg.I_train if split == "train" else cfg.I_test
    if rng is None:
        rng = make_rng(cfg, STREAM_TRAIN if split == "train" else STREAM_TEST)
    n0 = I // 2
    n1 = I - n0
    if n0 != n1:
        warnings.warn(f"odd sample count {I}: using {n0} class-0 and {n1} class-1 samples", stacklevel=2)
    scale = math.sqrt(cfg.variance)
    X0 = np.array(cfg.class0_mean)[:, None] + scale * rng.standard_normal((cfg.M, n0))
    X1 = np.array(cfg.class1_mean)[:, None] + scale * rng.standard_normal((cfg.M, n1))
    q = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return Dataset(np.hstack([X0, X1]), q)


def initial_theta(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    rng = make_rng(cfg, STREAM_INIT, seed)
    return rng.uniform(-cfg.init_range, cfg.init_range, size=cfg.shape.D)


@dataclass
class CriticalPoint:
    theta: np.ndarray
    final_loss: float
    grad_ratio: float
    epochs: int
    spectrum: SpectrumReport
    macro_f1_test: float
    seed: int
    tr_analytic: float = math.nan
    tr_sq_analytic: float = math.nan

    def to_json(self) -> dict:
        return {
            "seed": int(self.seed),
            "theta": [float(v) for v in self.theta],
            "final_loss": float(self.final_loss),
            "grad_ratio": float(self.grad_ratio),
            "epochs": int(self.epochs),
            "macro_f1_test": float(self.macro_f1_test),
            "tr_analytic": float(self.tr_analytic),
            "tr_sq_analytic": float(self.tr_sq_analytic),
            "spectrum": self.spectrum.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CriticalPoint":
        return cls(
            theta=np.array(obj["theta"], dtype=np.float64),
            final_loss=obj["final_loss"],
            grad_ratio=obj["grad_ratio"],
            epochs=obj["epochs"],
            spectrum=SpectrumReport.from_json(obj["spectrum"]),
            macro_f1_test=obj["macro_f1_test"],
            seed=obj["seed"],
            tr_analytic=obj.get("tr_analytic", math.nan),
            tr_sq_analytic=obj.get("tr_sq_analytic", math.nan),
        )


@dataclass
class NotConverged:
    seed: int
    reason: str
    epochs: int
    final_loss: float
    grad_ratio: float

    def to_json(self) -> dict:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in asdict(self).items()}


def predict(params: NetworkParams, kind: ActivationKind, data: Dataset) -> np.ndarray:
    """Hard labels: class 1 when the logit is positive."""
    return (forward_batch(params, kind, data).z > 0.0).astype(np.int64)


def analyse_point(
    theta, cfg: ExperimentConfig, data: Dataset, test: Dataset | None = None
) -> tuple[SpectrumReport, float, float, float]:
    """Spectrum, test macro F1 and the closed-form traces at ``theta``."""
    params = unflatten(theta, cfg.shape)
    batch = forward_batch(params, cfg.kind, data)
    traces = trace_bundle(batch, params)
    spectrum = spectrum_report(hessian_from_batch(params, batch), traces)
    f1 = macro_f1(predict(params, cfg.kind, test), test.q) if test is not None else math.nan
    return spectrum, f1, traces.tr_total, traces.tr_sq_total


def train_gd(
    cfg: ExperimentConfig,
    data: Dataset,
    theta0,
    rng: np.random.Generator | None = None,
    *,
    seed: int = -1,
    test: Dataset | None = None,
    trajectory: bool = False,
):
    """Full-batch gradient descent from ``theta0``.

    Convergence is checked every epoch as ``||g_t|| / ||g_0|| < eps``.
    Returns ``(result, traj)`` where ``result`` is a :class:`CriticalPoint`
    or :class:`NotConverged` and ``traj`` is a list of
    ``(epoch, L, lambda_sup, lambda1)`` taken every ``trajectory_stride``
    epochs (empty unless ``trajectory`` is set).  ``rng`` is accepted for
    interface symmetry; plain gradient descent draws no random numbers.
    """
    shape, kind, lr = cfg.shape, cfg.kind, cfg.learning_rate
    theta = np.array(theta0, dtype=np.float64)
    if theta.shape != (shape.D,):
        raise ShapeError(f"theta0 must have length D={shape.D}")
    traj: list[tuple[int, float, float, float]] = []

    def log(t, L):
        params = unflatten(theta, shape)
        batch = forward_batch(params, kind, data)
        lam1 = spectrum_report(hessian_from_batch(params, batch)).lambda1
        traj.append((t, L, lambda_sup_from_batch(batch, params), lam1))

    try:
        L, g = loss_and_grad(theta, shape, kind, data)
    except NumericError as exc:
        return NotConverged(seed, f"non-finite at start: {exc}", 0, math.nan, math.nan), traj
    g0 = float(np.linalg.norm(g))
    ratio = 0.0 if g0 == 0.0 else 1.0
    t = 0
    while True:
        if trajectory and t % cfg.trajectory_stride == 0:
            log(t, L)
        if ratio < cfg.eps_converge:
            break
        if t >= cfg.T_max:
            return NotConverged(seed, "epoch budget exhausted", t, L, ratio), traj
        theta = theta - lr * g
        t += 1
        try:
            L, g = loss_and_grad(theta, shape, kind, data)
        except NumericError as exc:
            return NotConverged(seed, f"diverged: {exc}", t, math.nan, math.nan), traj
        if not math.isfinite(L):
            return NotConverged(seed, "diverged: non-finite loss", t, L, math.nan), traj
        ratio = float(np.linalg.norm(g)) / g0

    spectrum, f1, tr, tr_sq = analyse_point(theta, cfg, data, test)
    return CriticalPoint(theta, L, ratio, t, spectrum, f1, seed, tr, tr_sq), traj


def dedup_threshold(thetas: np.ndarray) -> float:
    d = pdist(thetas)
    return max(float(np.mean(d) - 3.0 * np.std(d)), 0.0)


def dedup_critical_points(points: list[CriticalPoint]) -> list[CriticalPoint]:
    """Merge points closer than ``max(mean - 3 std, 0)`` of all pairwise
    distances (exact duplicates always merge); keep the lowest seed of each
    connected cluster.
    """
    points = sorted(points, key=lambda p: p.seed)
    if len(points) < 2:
        return list(points)
    thetas = np.array([p.theta for p in points])
    tau = dedup_threshold(thetas)
    dist = squareform(pdist(thetas))
    clusters = DisjointSet(range(len(points)))
    for i, j in zip(*np.nonzero(np.triu(dist <= tau, 1))):
        clusters.merge(int(i), int(j))
    return [points[min(s)] for s in sorted(clusters.subsets(), key=min)]


def split_high_low(points, quantile: float = 0.9):
    """Partition by the empirical ``quantile`` of lambda_sup; ties go low."""
    if not 0.0 < quantile < 1.0:
        raise DomainError("quantile must lie in (0, 1)")
    points = list(points)
    if not points:
        return [], []
    lam = np.array([p.spectrum.lambda_sup for p in points])
    cut = float(np.quantile(lam, quantile))
    low = [p for p, v in zip(points, lam) if v <= cut]
    high = [p for p, v in zip(points, lam) if v > cut]
    return low, high


def loss_slice(params: NetworkParams, kind, data: Dataset, direction, alphas, tol: float = 1e-9):
    """``[(alpha, L(theta + alpha * u)), ...]`` along a unit direction ``u``."""
    from .network import flatten

    u = np.asarray(direction, dtype=np.float64).reshape(-1)
    if u.shape[0] != params.shape.D:
        raise ShapeError(f"direction must have length D={params.shape.D}")
    if abs(float(np.linalg.norm(u)) - 1.0) > tol:
        raise DomainError("direction must have unit length")
    theta = flatten(params)
    kind = ActivationKind.parse(kind)
    return [(float(a), total_loss(unflatten(theta + a * u, params.shape), kind, data)) for a in alphas]


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    points: list[CriticalPoint]
    failures: list[NotConverged]
    survivors: list[CriticalPoint]
    low: list[CriticalPoint]
    high: list[CriticalPoint]
    mw_u: float
    mw_p: float
    trajectories: dict[int, list] = field(default_factory=dict)

    @property
    def n_converged(self) -> int:
        return len(self.points)

    def summary(self) -> dict:
        lam = np.array([p.spectrum.lambda_sup for p in self.survivors])
        v2, w2, rtr = _norm_columns(self)
        out = {
            "seeds": self.config.seeds,
            "converged": self.n_converged,
            "not_converged": len(self.failures),
            "unique": len(self.survivors),
            "dedup_threshold": dedup_threshold(np.array([p.theta for p in self.points]))
            if self.n_converged >= 2
            else 0.0,
            "low_count": len(self.low),
            "high_count": len(self.high),
            "low_median_f1": _median([p.macro_f1_test for p in self.low]),
            "high_median_f1": _median([p.macro_f1_test for p in self.high]),
            "mann_whitney_u": self.mw_u,
            "mann_whitney_p": self.mw_p,
            "lambda_sup_skewness": float(skew(lam)) if lam.size > 2 else None,
            "spearman_v_norm": _spearman(v2, lam),
            "spearman_w_norm": _spearman(w2, lam),
            "spearman_rtr_norm": _spearman(rtr, lam),
            "bound_violations": sum(
                p.spectrum.lambda1 > p.spectrum.lambda_sup + 1e-9 * max(1.0, abs(p.spectrum.lambda_sup))
                for p in self.points
            ),
            "unique_seeds": [p.seed for p in self.survivors],
        }
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in out.items()}


def _median(values) -> float:
    return float(np.median(values)) if len(values) else math.nan


def _spearman(a, b) -> float:
    if len(a) < 3 or np.all(a == a[0]) or np.all(b == b[0]):
        return math.nan
    return float(spearmanr(a, b).statistic)


def _norm_columns(report: ExperimentReport):
    """Per survivor: ``||V_tilde||^2``, ``||W_tilde||^2``, ``||R^T R||_F^2``."""
    data = generate_dataset(report.config, "train")
    v2, w2, rtr = [], [], []
    for p in report.survivors:
        params = unflatten(p.theta, report.config.shape)
        R = forward_batch(params, report.config.kind, data).R
        v2.append(float(np.sum(params.V_tilde**2)))
        w2.append(float(np.sum(params.W_tilde**2)))
        rtr.append(float(np.sum((R.T @ R) ** 2)))
    return np.array(v2), np.array(w2), np.array(rtr)


def assemble_report(cfg, points, failures, trajectories=None) -> ExperimentReport:
    points = sorted(points, key=lambda p: p.seed)
    survivors = dedup_critical_points(points)
    low, high = split_high_low(survivors, cfg.high_quantile)
    if low and high:
        u, p = mann_whitney_u([q.macro_f1_test for q in low], [q.macro_f1_test for q in high])
    else:
        u, p = math.nan, math.nan
    return ExperimentReport(cfg, points, sorted(failures, key=lambda f: f.seed), survivors, low, high, u, p,
                            trajectories or {})


def run_seed(cfg: ExperimentConfig, seed: int, data: Dataset, test: Dataset):
    return train_gd(
        cfg, data, initial_theta(cfg, seed), seed=seed, test=test, trajectory=seed < cfg.trajectory_seeds
    )


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentReport:
    """Train every seed in order and assemble the report.

    ``progress`` is an optional callable ``(seed, result)``.  Per-seed
    failures are recorded, never raised.
    """
    data = generate_dataset(cfg, "train")
    test = generate_dataset(cfg, "test")
    points, failures, trajectories = [], [], {}
    for seed in range(cfg.seeds):
        try:
            result, traj = run_seed(cfg, seed, data, test)
        except (NumericError, DomainError) as exc:
            result, traj = NotConverged(seed, f"analysis failed: {exc}", -1, math.nan, math.nan), []
        (points if isinstance(result, CriticalPoint) else failures).append(result)
        if traj:
            trajectories[seed] = traj
        if progress is not None:
            progress(seed, result)
    return assemble_report(cfg, points, failures, trajectories)


# -- output files ----------------------------------------------------------------


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def write_figure_data(report: ExperimentReport, out) -> None:
    """Everything derived from the critical points (re-runnable by ``analyze``)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = report.config
    data = generate_dataset(cfg, "train")

    _write_csv(out / "fig2_eigen_vs_bound.csv", ["lambda1", "lambda_sup"],
               [(float(p.spectrum.lambda1), float(p.spectrum.lambda_sup)) for p in report.points])

    lam = np.array([p.spectrum.lambda_sup for p in report.survivors])
    if lam.size:
        counts, edges = np.histogram(lam, bins=cfg.hist_bins)
        rows = [(float(edges[k]), float(edges[k + 1]), int(counts[k])) for k in range(len(counts))]
    else:
        rows = []
    _write_csv(out / "fig5_hist.csv", ["bin_left", "bin_right", "count"], rows)

    high_seeds = {p.seed for p in report.high}
    _write_csv(out / "fig6_groups.csv", ["seed", "group", "lambda_sup", "macro_f1"],
               [(p.seed, "high" if p.seed in high_seeds else "low", float(p.spectrum.lambda_sup),
                 float(p.macro_f1_test)) for p in report.survivors])

    rows = []
    for p in report.points:
        params = unflatten(p.theta, cfg.shape)
        H = hessian_from_batch(params, forward_batch(params, cfg.kind, data)).assembled
        rows.append((matrix_trace(H), float(p.tr_analytic), matrix_sq_trace(H), float(p.tr_sq_analytic)))
    _write_csv(out / "fig8_traces.csv", ["tr_numeric", "tr_analytic", "trsq_numeric", "trsq_analytic"], rows)

    v2, w2, rtr = _norm_columns(report)
    _write_csv(out / "fig9_norms.csv", ["seed", "v_tilde_sq_norm", "w_tilde_sq_norm", "lambda_sup"],
               [(p.seed, float(a), float(b), float(p.spectrum.lambda_sup))
                for p, a, b in zip(report.survivors, v2, w2)])
    _write_csv(out / "fig11_ortho.csv", ["seed", "rtr_sq_norm", "lambda_sup"],
               [(p.seed, float(c), float(p.spectrum.lambda_sup)) for p, c in zip(report.survivors, rtr)])

    _write_json(out / "summary.json", report.summary())


def write_report(report: ExperimentReport, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", report.config.to_json())
    _write_json(out / "critical_points.json", [p.to_json() for p in report.points])
    _write_json(out / "failures.json", [f.to_json() for f in report.failures])
    _write_csv(out / "trajectories.csv", ["seed", "epoch", "loss", "lambda_sup", "lambda1"],
               [(s, e, float(L), float(ls), float(l1))
                for s, traj in sorted(report.trajectories.items()) for e, L, ls, l1 in traj])
    write_figure_data(report, out)


def load_config(out) -> ExperimentConfig:
    return ExperimentConfig.from_json(json.loads((Path(out) / "config.json").read_text(encoding="utf-8")))


def load_points(out) -> list[CriticalPoint]:
    raw = json.loads((Path(out) / "critical_points.json").read_text(encoding="utf-8"))
    return [CriticalPoint.from_json(obj) for obj in raw]


def load_failures(out) -> list[NotConverged]:
    path = Path(out) / "failures.json"
    if not path.is_file():
        return []
    nan = math.nan
    return [
        NotConverged(f["seed"], f["reason"], f["epochs"],
                     nan if f["final_loss"] is None else f["final_loss"],
                     nan if f["grad_ratio"] is None else f["grad_ratio"])
        for f in json.loads(path.read_text(encoding="utf-8"))
    ]


def reanalyse(out) -> ExperimentReport:
    """Recompute spectra and statistics from a saved sweep directory."""
    out = Path(out)
    cfg = load_config(out)
    data = generate_dataset(cfg, "train")
    test = generate_dataset(cfg, "test")
    points = []
    for p in load_points(out):
        spectrum, f1, tr, tr_sq = analyse_point(p.theta, cfg, data, test)
        points.append(CriticalPoint(p.theta, p.final_loss, p.grad_ratio, p.epochs, spectrum, f1, p.seed, tr, tr_sq))
    report = assemble_report(cfg, points, load_failures(out))
    write_figure_data(report, out)
    return report
