"""Numerical verification of the two analysis lemmas the error chain needs:
the interpolation inequality ||f||_inf^2 <= c ||f||_L2 ||f||_W1inf with a
constant independent of the cylinder period, and the integral-form Gronwall
lemma x(t) <= a + b int x  =>  x(t) <= a e^{bt}.

Probes are random trigonometric factors times polynomial bumps, so compact
support is exact and all derivatives are available analytically; sup-norms
are sampled on an oversampled grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PLANE_RATIO_BOUND",
    "CYLINDER_RATIO_BOUND",
    "SobolevProbe",
    "make_plane_probe",
    "make_cylinder_probe",
    "random_probe",
    "sobolev_ratio",
    "estimate_sobolev_constant",
    "SobolevTable",
    "GronwallInstance",
    "GronwallReport",
    "gronwall_check",
]

# Constants carried by the proofs: sqrt(12) on the (half-)plane against
# ||Df||_inf, inflated by 6 in the reduction to the periodic cylinder.
PLANE_RATIO_BOUND = math.sqrt(12.0)
CYLINDER_RATIO_BOUND = 6.0 * math.sqrt(12.0)


def _poly_bump(x):
    """(1 - x^2)^3 on [-1, 1], zero outside; C^2 with exact compact support."""
    y = np.clip(x, -1.0, 1.0)
    inside = np.abs(x) < 1.0
    return np.where(inside, (1.0 - y * y) ** 3, 0.0)


def _poly_bump_d(x):
    y = np.clip(x, -1.0, 1.0)
    inside = np.abs(x) < 1.0
    return np.where(inside, -6.0 * y * (1.0 - y * y) ** 2, 0.0)


@dataclass(frozen=True)
class SobolevProbe:
    """A sampled compactly supported function with analytic first derivatives.

    domain is one of "plane", "half_plane", "cylinder", "half_cylinder";
    cylinders carry their period n.  Norms are filled in by sobolev_ratio.
    """
    domain: str
    n: int                      # period for cylinder domains, 0 otherwise
    values: np.ndarray          # f on the sampling grid (ns, nt)
    dvalues_s: np.ndarray       # df/ds on the oversampled grid
    dvalues_t: np.ndarray
    cell: tuple[float, float]   # grid spacing of the value grid
    support_radius: float

    def l2_norm(self) -> float:
        return math.sqrt(float(np.sum(self.values ** 2)) * self.cell[0] * self.cell[1])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def grad_sup_norm(self) -> float:
        return float(np.max(np.sqrt(self.dvalues_s ** 2 + self.dvalues_t ** 2)))

    def w1inf_norm(self) -> float:
        return max(self.sup_norm(), self.grad_sup_norm())


def _evaluate(domain: str, n: int, amp: float, s_center: float, s_width: float,
              t_center: float, t_width: float, freq: int, phase: float,
              resolution: int) -> SobolevProbe:
    """Sample the probe on its support window only.

    The support is exactly compact, so norms over the full domain equal
    norms over the window; this keeps accuracy and cost independent of the
    cylinder period.
    """
    half = domain in ("half_plane", "half_cylinder")
    periodic = domain in ("cylinder", "half_cylinder")
    if periodic and 2 * t_width > n:
        raise ValueError("support does not fit inside one period")
    s_lo = max(0.0, s_center - s_width) if half else s_center - s_width
    s_hi = s_center + s_width

    def fields(ns, nt):
        s = np.linspace(s_lo, s_hi, ns)
        t = np.linspace(t_center - t_width, t_center + t_width, nt)
        S, T = np.meshgrid(s, t, indexing="ij")
        xs = (S - s_center) / s_width
        tau = T - t_center
        xt = tau / t_width
        trig = np.cos(2 * math.pi * freq * tau + phase)
        dtrig = -2 * math.pi * freq * np.sin(2 * math.pi * freq * tau + phase)
        f = amp * _poly_bump(xs) * _poly_bump(xt) * trig
        fs = amp * _poly_bump_d(xs) / s_width * _poly_bump(xt) * trig
        ft = amp * _poly_bump(xs) * (_poly_bump_d(xt) / t_width * trig
                                     + _poly_bump(xt) * dtrig)
        return f, fs, ft, s[1] - s[0], t[1] - t[0]

    f, _, _, ds, dt = fields(resolution, resolution)
    # derivative oversampling: sup-norms are the fragile ones
    _, fs4, ft4, _, _ = fields(4 * resolution, 4 * resolution)
    return SobolevProbe(domain, n if periodic else 0, f, fs4, ft4,
                        (ds, dt), max(s_width, t_width))


def make_plane_probe(amp: float = 1.0, width: float = 1.0, freq: int = 0,
                     phase: float = 0.0, half: bool = False,
                     resolution: int = 400) -> SobolevProbe:
    domain = "half_plane" if half else "plane"
    return _evaluate(domain, 0, amp, 1.2 * width if half else 0.0, width,
                     0.0, width, freq, phase, resolution)


def make_cylinder_probe(n: int, amp: float = 1.0, s_width: float = 1.0,
                        t_width: float = 0.45, t_center: float | None = None,
                        freq: int = 0, phase: float = 0.0, half: bool = False,
                        resolution: int = 400) -> SobolevProbe:
    if t_width > n / 2:
        raise ValueError("t support must fit inside one period")
    domain = "half_cylinder" if half else "cylinder"
    tc = n / 2.0 if t_center is None else t_center
    return _evaluate(domain, n, amp, 1.2 * s_width if half else 0.0, s_width,
                     tc, t_width, freq, phase, resolution)


def random_probe(n: int, rng: np.random.Generator, *, domain: str = "cylinder",
                 resolution: int = 160) -> SobolevProbe:
    """Random probe with shape parameters drawn independently of the period,
    so maxima over trials are comparable across n."""
    amp = rng.uniform(0.2, 3.0)
    s_width = rng.uniform(0.4, 2.0)
    t_width = rng.uniform(0.15, 0.45)
    freq = int(rng.integers(0, 5))
    phase = rng.uniform(0.0, 2 * math.pi)
    if domain in ("cylinder", "half_cylinder"):
        tc = rng.uniform(0.0, n)
        return make_cylinder_probe(n, amp, s_width, t_width, tc, freq, phase,
                                   half=domain == "half_cylinder",
                                   resolution=resolution)
    return make_plane_probe(amp, s_width, freq, phase,
                            half=domain == "half_plane", resolution=resolution)


def sobolev_ratio(probe: SobolevProbe, *, lemma12: bool = False) -> float:
    """Interpolation ratio ||f||_inf^2 / (||f||_L2 ||f||_W1inf).

    With lemma12=True (plane and half-plane only) the sharper plane ratio
    against ||Df||_inf alone is returned.
    """
    sup = probe.sup_norm()
    if sup == 0.0:
        raise ValueError("degenerate probe: f is identically zero")
    l2 = probe.l2_norm()
    if lemma12:
        if probe.domain not in ("plane", "half_plane"):
            raise ValueError("the plane ratio applies to plane domains only")
        return sup ** 2 / (l2 * probe.grad_sup_norm())
    return sup ** 2 / (l2 * probe.w1inf_norm())


@dataclass(frozen=True)
class SobolevTable:
    n_list: tuple[int, ...]
    max_ratio: dict
    mean_ratio: dict
    trials: int
    bound: float

    @property
    def all_below_bound(self) -> bool:
        return all(v <= self.bound for v in self.max_ratio.values())

    @property
    def max_spread(self) -> float:
        vals = list(self.max_ratio.values())
        return (max(vals) - min(vals)) / min(vals)

    def trend_upward(self) -> bool:
        vals = [self.max_ratio[n] for n in sorted(self.n_list)]
        return any(b > a * 1.10 for a, b in zip(vals, vals[1:]))


def estimate_sobolev_constant(n_list: list[int], trials: int, seed: int, *,
                              domain: str = "cylinder",
                              resolution: int = 160,
                              threads: int = 1) -> SobolevTable:
    """Worst interpolation ratios over random probes, per period.

    Trials are seeded per index, so the same shapes are drawn at every n and
    the per-period maxima are directly comparable (period independence shows
    up as near-identical columns).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    ratios = {n: np.empty(trials) for n in n_list}

    def one(n: int, k: int) -> float:
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        return sobolev_ratio(random_probe(n, rng, domain=domain,
                                          resolution=resolution))

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for n in n_list:
                for k, r in enumerate(pool.map(lambda k: one(n, k), range(trials))):
                    ratios[n][k] = r
    else:
        for n in n_list:
            for k in range(trials):
                ratios[n][k] = one(n, k)
    return SobolevTable(tuple(n_list),
                        {n: float(np.max(r)) for n, r in ratios.items()},
                        {n: float(np.mean(r)) for n, r in ratios.items()},
                        trials, CYLINDER_RATIO_BOUND)


# ---------------------------------------------------------------------------
# Gronwall
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GronwallInstance:
    times: np.ndarray           # increasing, starting at 0
    x: np.ndarray               # nonnegative samples
    a: float
    b: float

    def __post_init__(self) -> None:
        t, x = np.asarray(self.times), np.asarray(self.x)
        if t.ndim != 1 or t.shape != x.shape or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must increase from 0 and match x")
        if self.a < 0 or self.b < 0 or np.any(x < 0):
            raise ValueError("a, b and x must be nonnegative")


@dataclass(frozen=True)
class GronwallReport:
    hypothesis_ok: bool
    conclusion_ok: bool
    worst_hypothesis_violation: float
    min_conclusion_slack: float
    quad_tolerance: float


def gronwall_check(inst: GronwallInstance, *, rel_tol: float = 1e-9) -> GronwallReport:
    """Verify x(t) <= a + b int_0^t x, then the conclusion x(t) <= a e^{bt}.

    A hypothesis failure marks the instance invalid rather than a lemma
    failure; the conclusion is still evaluated for reporting.  Quadrature is
    the cumulative trapezoid on the given samples.
    """
    t, x = inst.times, inst.x
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (x[1:] + x[:-1]) * np.diff(t))])
    scale = float(np.max(x)) + inst.a + 1.0
    tol = rel_tol * scale
    hyp_gap = x - (inst.a + inst.b * cum)
    worst = float(np.max(hyp_gap))
    hypothesis_ok = worst <= tol
    concl = inst.a * np.exp(inst.b * t)
    slack = concl - x
    min_slack = float(np.min(slack))
    conclusion_ok = min_slack >= -tol
    return GronwallReport(hypothesis_ok, conclusion_ok, worst, min_slack, tol)
