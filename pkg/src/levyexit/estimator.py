"""Monte-Carlo estimation of the mean first exit time over an eps sweep."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import CENSORED, LEFT, NONFINITE, RIGHT, Domain, Potential, in_gdelta, simulate_paths
from .errors import CensoringError, LevyExitError, NumericalFailure
from .measures import LOG_PERTURBED_STABLE, STABLE, LevyTriplet
from .sampling import DEFAULT_DELTA_CUT, NoiseSampler

log = logging.getLogger(__name__)

CSV_COLUMNS = ("epsilon", "n_paths", "mean_exit", "stderr", "ci95_low", "ci95_high",
               "censored_fraction", "dt", "seed")
RELIABLE_CENSORING = 0.01
MAX_CENSORING = 0.5
Z95 = 1.959963984540054


@dataclass(frozen=True)
class ExitExperimentConfig:
    """Everything that determines a Monte-Carlo exit-time experiment.

    ``dt=None`` means ``1e-3`` relaxation times of the potential.
    ``t_cap=None`` means ``1e4`` times the predicted mean exit time when a
    predictor exists for the noise, else ``1e6``.  ``require_well`` turns
    on the single-well and ``G^delta`` checks on the start point.
    """

    noise: LevyTriplet
    potential: Potential = field(default_factory=Potential.quadratic)
    domain: Domain = field(default_factory=Domain)
    x0: float = 0.0
    epsilons: tuple = (0.1,)
    n_paths: int = 10_000
    dt: Optional[float] = None
    t_cap: Optional[float] = None
    seed: int = 0
    delta_cut: float = DEFAULT_DELTA_CUT
    small_jump_mode: Optional[str] = None
    method: str = "auto"
    threads: Optional[int] = None
    require_well: bool = True

    def __post_init__(self):
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if not self.epsilons:
            raise ValueError("need at least one epsilon")
        if any(not e > 0 for e in self.epsilons):
            raise ValueError("epsilons must be positive")
        if any(e1 <= e2 for e1, e2 in zip(self.epsilons, self.epsilons[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if self.n_paths < 100:
            raise ValueError("n_paths must be at least 100")
        if self.dt is None:
            object.__setattr__(self, "dt", 1e-3 * self.potential.relaxation_time)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_cap is not None and not self.t_cap >= self.dt:
            raise ValueError("t_cap must be at least dt")
        if self.require_well:
            self.potential.check_single_well(self.domain.a, self.domain.b)
            if not in_gdelta(self.potential, self.domain, self.x0):
                raise ValueError(f"x0={self.x0} is not in G^delta for delta={self.domain.delta}")

    def sampler(self, eps):
        return NoiseSampler(self.noise, eps, self.delta_cut, self.small_jump_mode, self.method)

    def predicted_mean(self, eps):
        """Leading-order mean exit time where a closed-form predictor exists."""
        from .asymptotics import predict_mean_exit, stable_limit_mass
        from .conditions import ScaleFunction

        m = self.noise.jumps
        if m is None or m.kind not in (STABLE, LOG_PERTURBED_STABLE) or m.scale != 1.0:
            return None
        g = ScaleFunction.power(m.alpha) if m.kind == STABLE else ScaleFunction.power_over_log(m.alpha)
        if m.kind == LOG_PERTURBED_STABLE and eps >= 1.0:
            return None
        return predict_mean_exit(stable_limit_mass(m.alpha, self.domain.a, self.domain.b), g, eps,
                                 self.domain.a, self.domain.b)

    def cap_for(self, eps):
        if self.t_cap is not None:
            return self.t_cap
        pred = self.predicted_mean(eps)
        return 1e4 * pred if pred is not None else 1e6


@dataclass(frozen=True)
class ExitTimeEstimate:
    epsilon: float
    mean: float
    stderr: float
    ci95_low: float
    ci95_high: float
    n_effective: int
    censored_fraction: float
    std: float = 0.0
    exits_left: int = 0
    exits_right: int = 0
    t_cap: float = math.inf
    error: Optional[str] = None

    @property
    def reliable(self):
        return self.error is None and self.censored_fraction <= RELIABLE_CENSORING

    @property
    def cv(self):
        return self.std / self.mean if self.mean > 0 else math.nan


def stream_ids(eps_index, n_paths):
    """Stream of path ``i`` at sweep position ``j`` is ``j * 2^32 + i``."""
    return (np.uint64(eps_index) << np.uint64(32)) + np.arange(n_paths, dtype=np.uint64)


def summarize(eps, times, sides, t_cap):
    """Sample mean, stderr and normal CI; censored paths count as ``t_cap``."""
    n = times.shape[0]
    if np.any(sides == NONFINITE):
        raise NumericalFailure(f"{int(np.sum(sides == NONFINITE))} paths became non-finite")
    censored = float(np.mean(sides == CENSORED))
    if censored > MAX_CENSORING:
        raise CensoringError(f"eps={eps}: {censored:.1%} of paths censored at t_cap={t_cap}")
    # shifted by the first sample: exact zero spread for identical times
    d = times - times[0]
    mean = float(times[0] + np.mean(d))
    std = float(np.std(d, ddof=1)) if n > 1 else 0.0
    se = std / math.sqrt(n)
    if censored > RELIABLE_CENSORING:
        log.warning("eps=%g: %.2f%% of paths censored; mean is biased low", eps, 100 * censored)
    return ExitTimeEstimate(
        epsilon=float(eps), mean=mean, stderr=se, ci95_low=mean - Z95 * se,
        ci95_high=mean + Z95 * se, n_effective=n, censored_fraction=censored, std=std,
        exits_left=int(np.sum(sides == LEFT)), exits_right=int(np.sum(sides == RIGHT)),
        t_cap=float(t_cap))


def estimate_mean_exit(cfg: ExitExperimentConfig, eps, eps_index=0, backend=None):
    """Mean exit time at noise level ``eps`` from ``cfg.n_paths`` independent paths."""
    t_cap = cfg.cap_for(eps)
    times, sides, _, _ = simulate_paths(
        cfg.potential, cfg.sampler(eps), cfg.domain, cfg.x0, cfg.dt, t_cap, cfg.seed,
        stream_ids(eps_index, cfg.n_paths), threads=cfg.threads, backend=backend)
    return summarize(eps, times, sides, t_cap)


def sweep(cfg: ExitExperimentConfig, progress: Optional[Callable] = None, backend=None):
    """Estimates for every ``eps`` of the config; failures are recorded, not raised."""
    out = []
    for j, eps in enumerate(cfg.epsilons):
        try:
            est = estimate_mean_exit(cfg, eps, eps_index=j, backend=backend)
        except LevyExitError as exc:
            log.error("eps=%g failed: %s", eps, exc)
            est = ExitTimeEstimate(eps, math.nan, math.nan, math.nan, math.nan, cfg.n_paths,
                                   math.nan, error=str(exc))
        if progress is not None:
            progress(j, est)
        out.append(est)
    return out


def _fmt(x):
    return f"{x:.12g}"


def csv_rows(estimates: Sequence[ExitTimeEstimate], dt, seed):
    for e in estimates:
        yield (_fmt(e.epsilon), str(e.n_effective), _fmt(e.mean), _fmt(e.stderr),
               _fmt(e.ci95_low), _fmt(e.ci95_high), _fmt(e.censored_fraction), _fmt(dt),
               str(seed))


def write_csv(estimates, dt, seed, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(csv_rows(estimates, dt, seed))


def to_csv_text(estimates, dt, seed):
    buf = io.StringIO()
    write_csv(estimates, dt, seed, buf)
    return buf.getvalue()


def read_csv(fh):
    """Rows of a sweep CSV as ``(eps, mean, stderr)`` tuples; ``#`` lines skipped."""
    lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    missing = {"epsilon", "mean_exit", "stderr"} - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"sweep CSV lacks columns {sorted(missing)}")
    return [(float(r["epsilon"]), float(r["mean_exit"]), float(r["stderr"])) for r in reader]
