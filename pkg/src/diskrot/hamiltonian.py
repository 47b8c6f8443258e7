"""Time-periodic Hamiltonians on the closed unit disk and their flows.

All families here are built so that H(t, .) is constant on the boundary
circle for every t (the induced vector field is tangent to the boundary)
and the origin is a rest point of every X_{H^t}; both hold exactly, not
just to tolerance.  Evaluators broadcast over numpy arrays of points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FlowConfig",
    "Trajectory",
    "HessianBound",
    "RotationNumberEstimate",
    "TimePeriodicHamiltonian",
    "RigidRotation",
    "BumpSpec",
    "PerturbedRotation",
    "StagedConjugation",
    "InverseHamiltonian",
    "IntegrationDriftError",
    "hamiltonian_vector_field",
    "flow_points",
    "flow_at_times",
    "flow",
    "time_one_map",
    "iterate",
    "boundary_rotation_number",
    "hessian_bound",
    "area_jacobian_error",
    "check_boundary_constancy",
    "check_origin_rest",
    "polar_grid",
]


class IntegrationDriftError(RuntimeError):
    """Raised when a trajectory leaves the closed disk beyond tolerance."""


@dataclass(frozen=True)
class FlowConfig:
    step: float = 1e-3
    disk_tolerance: float = 1e-6
    record_every: int = 0          # 0: record only endpoints in flow()


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray              # (N,)
    points: np.ndarray             # (N, 2)
    step: float
    order: int = 4


@dataclass(frozen=True)
class HessianBound:
    B: float
    raw_grid_max: float
    lipschitz_estimate: float
    grid_spacing: float
    resolution: tuple[int, int, int]


@dataclass(frozen=True)
class RotationNumberEstimate:
    value: float
    error_band: float
    n_max: int
    max_radial_drift: float


# ---------------------------------------------------------------------------
# Hamiltonian families
# ---------------------------------------------------------------------------

class TimePeriodicHamiltonian:
    """Interface: value/gradient/hessian, 1-periodic in t, broadcastable."""

    family: tuple = ("abstract",)

    def value(self, t, xy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, t, xy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, t, xy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class RigidRotation(TimePeriodicHamiltonian):
    """H = pi * alpha_hat * (x^2 + y^2); time-one map is rotation by 2 pi alpha_hat."""

    def __init__(self, alpha_hat: float):
        self.alpha_hat = float(alpha_hat)
        self.family = ("rigid", self.alpha_hat)

    def value(self, t, xy):
        r2 = xy[..., 0] ** 2 + xy[..., 1] ** 2
        return math.pi * self.alpha_hat * r2

    def gradient(self, t, xy):
        return (2 * math.pi * self.alpha_hat) * xy

    def hessian(self, t, xy):
        h = np.zeros(xy.shape[:-1] + (2, 2))
        h[..., 0, 0] = 2 * math.pi * self.alpha_hat
        h[..., 1, 1] = 2 * math.pi * self.alpha_hat
        return h


def _bump(u):
    """b(u) = u^2 (1-u)^3 with b, b', b'' vanishing at u=0 and u=1 in r."""
    return u * u * (1 - u) ** 3


def _bump_d1(u):
    return u * (1 - u) ** 2 * (2 - 5 * u)


def _bump_d2(u):
    return (1 - u) * (2 - 16 * u + 20 * u ** 2)


@dataclass(frozen=True)
class BumpSpec:
    """Angular harmonic, time frequency and phase of the perturbation term."""
    k: int = 2
    time_freq: int = 1
    phase: float = 0.0


class PerturbedRotation(TimePeriodicHamiltonian):
    """Rigid rotation plus eps * b(r^2) * Re((x+iy)^k) * cos(2 pi m t + phase).

    The radial factor b(u) = u^2(1-u)^3 and its first two derivatives vanish
    at r = 0 and r = 1, so boundary constancy and the origin rest point hold
    exactly; the angular factor is a harmonic polynomial, keeping the whole
    perturbation smooth.
    """

    def __init__(self, alpha_hat: float, epsilon: float, bump: BumpSpec = BumpSpec()):
        if bump.k < 1:
            raise ValueError("angular harmonic k must be >= 1")
        self.alpha_hat = float(alpha_hat)
        self.epsilon = float(epsilon)
        self.bump = bump
        self.family = ("perturbed", self.alpha_hat, self.epsilon,
                       (bump.k, bump.time_freq, bump.phase))
        self._rigid = RigidRotation(alpha_hat)

    def _tfactor(self, t):
        return np.cos(2 * math.pi * self.bump.time_freq * np.asarray(t) + self.bump.phase)

    def value(self, t, xy):
        x, y = xy[..., 0], xy[..., 1]
        u = x * x + y * y
        w = (x + 1j * y) ** self.bump.k
        f = _bump(u) * w.real * self._tfactor(t)
        return self._rigid.value(t, xy) + self.epsilon * f

    def gradient(self, t, xy):
        k = self.bump.k
        x, y = xy[..., 0], xy[..., 1]
        u = x * x + y * y
        z = x + 1j * y
        wk = z ** k
        wk1 = z ** (k - 1)
        P = wk.real
        gP = np.stack([k * wk1.real, -k * wk1.imag], axis=-1)
        g = (2 * _bump_d1(u) * P)[..., None] * xy + _bump(u)[..., None] * gP
        c = self._tfactor(t)
        return self._rigid.gradient(t, xy) + self.epsilon * np.asarray(c)[..., None] * g

    def hessian(self, t, xy):
        k = self.bump.k
        x, y = xy[..., 0], xy[..., 1]
        u = x * x + y * y
        z = x + 1j * y
        wk = z ** k
        wk1 = z ** (k - 1)
        wk2 = z ** (k - 2) if k >= 2 else np.zeros_like(z)
        P = wk.real
        gP = np.stack([k * wk1.real, -k * wk1.imag], axis=-1)
        hP = np.empty(xy.shape[:-1] + (2, 2))
        kk = k * (k - 1)
        hP[..., 0, 0] = kk * wk2.real
        hP[..., 0, 1] = -kk * wk2.imag
        hP[..., 1, 0] = -kk * wk2.imag
        hP[..., 1, 1] = -kk * wk2.real
        outer_xy = xy[..., :, None] * xy[..., None, :]
        cross = xy[..., :, None] * gP[..., None, :] + gP[..., :, None] * xy[..., None, :]
        eye = np.zeros_like(outer_xy)
        eye[..., 0, 0] = 1.0
        eye[..., 1, 1] = 1.0
        h = ((4 * _bump_d2(u) * P)[..., None, None] * outer_xy
             + (2 * _bump_d1(u) * P)[..., None, None] * eye
             + (2 * _bump_d1(u))[..., None, None] * cross
             + _bump(u)[..., None, None] * hP)
        c = self._tfactor(t)
        return self._rigid.hessian(t, xy) + self.epsilon * np.asarray(c)[..., None, None] * h


def _ramp_dot(x):
    """Derivative of the C-infinity ramp sigma(x) = phi(x)/(phi(x)+phi(1-x)).

    Vanishes to all orders at x = 0 and x = 1; peak value 2 at x = 1/2.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0) & (x < 1)
    xi = np.clip(x, 1e-12, 1 - 1e-12)
    a = np.exp(-1.0 / xi)
    b = np.exp(-1.0 / (1 - xi))
    da = a / xi ** 2
    db = b / (1 - xi) ** 2
    val = (da * b + a * db) / (a + b) ** 2
    out[inside] = val[inside]
    return out if out.shape else float(out)


class StagedConjugation(TimePeriodicHamiltonian):
    """Finite conjugation stage h . R . h^{-1} through one 1-periodic loop.

    The period splits into three slots run through a smooth time ramp:
    conjugator forward, rigid rotation, conjugator backward.  The
    conjugator is an autonomous bump Hamiltonian, so boundary constancy
    and the origin rest point are inherited exactly from the pieces.
    """

    def __init__(self, alpha_hat: float, conj_strength: float = 0.3, conj_k: int = 2):
        self.alpha_hat = float(alpha_hat)
        self.conj_strength = float(conj_strength)
        self.conj_k = int(conj_k)
        self.family = ("staged_conjugation", self.alpha_hat,
                       self.conj_strength, self.conj_k)
        # autonomous pieces, realized through PerturbedRotation internals
        self._conj = PerturbedRotation(0.0, conj_strength,
                                       BumpSpec(k=conj_k, time_freq=0, phase=0.0))
        self._rot = RigidRotation(alpha_hat)

    def _slot(self, t):
        tt = np.mod(np.asarray(t, dtype=float), 1.0)
        slot = np.minimum((tt * 3).astype(int), 2)
        local = tt * 3 - slot
        weight = 3.0 * _ramp_dot(local)
        sign = np.where(slot == 2, -1.0, 1.0)
        return slot, weight, sign

    def _combine(self, t, xy, f_conj, f_rot):
        slot, weight, sign = self._slot(t)
        use_rot = slot == 1
        w = np.broadcast_to(weight, np.broadcast_shapes(np.shape(weight), xy.shape[:-1]))
        s = np.broadcast_to(sign, w.shape)
        u = np.broadcast_to(use_rot, w.shape)
        return np.where(u, w * f_rot, s * w * f_conj)

    def value(self, t, xy):
        fc = self._conj.value(0.0, xy) - 0.0
        fr = self._rot.value(0.0, xy)
        return self._combine(t, xy, fc, fr)

    def gradient(self, t, xy):
        fc = self._conj.gradient(0.0, xy)
        fr = self._rot.gradient(0.0, xy)
        slot, weight, sign = self._slot(t)
        use_rot = slot == 1
        shape = np.broadcast_shapes(np.shape(weight), xy.shape[:-1])
        w = np.broadcast_to(weight, shape)[..., None]
        s = np.broadcast_to(sign, shape)[..., None]
        u = np.broadcast_to(use_rot, shape)[..., None]
        return np.where(u, w * fr, s * w * fc)

    def hessian(self, t, xy):
        fc = self._conj.hessian(0.0, xy)
        fr = self._rot.hessian(0.0, xy)
        slot, weight, sign = self._slot(t)
        use_rot = slot == 1
        shape = np.broadcast_shapes(np.shape(weight), xy.shape[:-1])
        w = np.broadcast_to(weight, shape)[..., None, None]
        s = np.broadcast_to(sign, shape)[..., None, None]
        u = np.broadcast_to(use_rot, shape)[..., None, None]
        return np.where(u, w * fr, s * w * fc)


class InverseHamiltonian(TimePeriodicHamiltonian):
    """Generates the inverse disk map: Hhat(t, p) = -H(-t, p)."""

    def __init__(self, inner: TimePeriodicHamiltonian):
        self.inner = inner
        self.family = ("inverse",) + tuple(inner.family)

    def value(self, t, xy):
        return -self.inner.value(-np.asarray(t), xy)

    def gradient(self, t, xy):
        return -self.inner.gradient(-np.asarray(t), xy)

    def hessian(self, t, xy):
        return -self.inner.hessian(-np.asarray(t), xy)


# ---------------------------------------------------------------------------
# Vector field and flows
# ---------------------------------------------------------------------------

def hamiltonian_vector_field(H: TimePeriodicHamiltonian, t, xy: np.ndarray) -> np.ndarray:
    """X_H = (-dH/dy, dH/dx), the field with omega0(X_H, .) = -dH."""
    g = H.gradient(t, xy)
    return np.stack([-g[..., 1], g[..., 0]], axis=-1)


def _rk4_step(H, t, pts, h):
    k1 = hamiltonian_vector_field(H, t, pts)
    k2 = hamiltonian_vector_field(H, t + h / 2, pts + (h / 2) * k1)
    k3 = hamiltonian_vector_field(H, t + h / 2, pts + (h / 2) * k2)
    k4 = hamiltonian_vector_field(H, t + h, pts + h * k3)
    return pts + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def flow_points(H: TimePeriodicHamiltonian, pts: np.ndarray, t0: float, t1: float,
                *, step: float = 1e-3, disk_tol: float = 1e-6,
                sample_times: list[float] | None = None):
    """Integrate dp/dt = X_H(t, p) for an array of points with classical RK4.

    Returns (final_points, samples) where samples maps each requested time
    to a snapshot.  Every snapshot (and the final state) is drift-checked
    against the closed disk.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float)).copy()
    span = t1 - t0
    if span == 0:
        return pts, {t0: pts.copy()} if sample_times else (pts, {})
    targets = sorted(set(sample_times or [])) if span > 0 else sorted(set(sample_times or []), reverse=True)
    samples: dict[float, np.ndarray] = {}
    nsteps = max(1, math.ceil(abs(span) / step))
    h = span / nsteps
    t = t0
    next_target = 0
    for i in range(nsteps):
        while (next_target < len(targets)
               and (targets[next_target] - t) * math.copysign(1, span) <= 1e-12):
            samples[targets[next_target]] = pts.copy()
            next_target += 1
        pts = _rk4_step(H, t, pts, h)
        t = t0 + (i + 1) * h
    while next_target < len(targets):
        samples[targets[next_target]] = pts.copy()
        next_target += 1
    radii = np.sqrt(np.sum(pts ** 2, axis=-1))
    overshoot = float(np.max(radii) - 1.0) if radii.size else 0.0
    if overshoot > disk_tol:
        raise IntegrationDriftError(
            f"trajectory left the closed disk by {overshoot:.3g} (> {disk_tol:.3g}); "
            "boundary tangency violated or step too large")
    return pts, samples


def flow_at_times(H: TimePeriodicHamiltonian, pts: np.ndarray, times: np.ndarray,
                  *, step: float = 1e-3) -> list[np.ndarray]:
    """Snapshots of the flow at exactly the requested increasing times from 0.

    Each interval is subdivided so every requested time is hit by a step
    boundary (no interpolation error on top of the integrator's own).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float)).copy()
    out = []
    t = 0.0
    for target in times:
        span = target - t
        if span > 0:
            nsteps = max(1, math.ceil(span / step))
            h = span / nsteps
            for i in range(nsteps):
                pts = _rk4_step(H, t + i * h, pts, h)
            t = target
        out.append(pts.copy())
    return out


def flow(H: TimePeriodicHamiltonian, p, t0: float, t1: float,
         config: FlowConfig | None = None) -> Trajectory:
    """Trajectory of a single point, densely recorded."""
    cfg = config or FlowConfig()
    p = np.asarray(p, dtype=float).reshape(1, 2)
    span = t1 - t0
    nsteps = max(1, math.ceil(abs(span) / cfg.step)) if span != 0 else 0
    every = max(1, cfg.record_every) if cfg.record_every else 1
    times = [t0]
    points = [p[0].copy()]
    pts = p.copy()
    h = span / nsteps if nsteps else 0.0
    for i in range(nsteps):
        pts = _rk4_step(H, t0 + i * h, pts, h)
        if (i + 1) % every == 0 or i + 1 == nsteps:
            times.append(t0 + (i + 1) * h)
            points.append(pts[0].copy())
    traj = Trajectory(np.asarray(times), np.asarray(points), cfg.step)
    radii = np.sqrt(np.sum(traj.points ** 2, axis=-1))
    overshoot = float(np.max(radii) - 1.0)
    if overshoot > cfg.disk_tolerance:
        raise IntegrationDriftError(
            f"trajectory left the closed disk by {overshoot:.3g}")
    return traj


def time_one_map(H: TimePeriodicHamiltonian, p, *, step: float = 1e-3) -> np.ndarray:
    out, _ = flow_points(H, p, 0.0, 1.0, step=step)
    return out[0] if np.asarray(p).ndim == 1 else out


def iterate(H: TimePeriodicHamiltonian, p, n: int, *, step: float = 1e-3) -> np.ndarray:
    """n-th iterate of the time-one map; negative n integrates backward."""
    single = np.asarray(p).ndim == 1
    if n == 0:
        out = np.atleast_2d(np.asarray(p, dtype=float)).copy()
    else:
        out, _ = flow_points(H, p, 0.0, float(n), step=step)
    return out[0] if single else out


def boundary_rotation_number(H: TimePeriodicHamiltonian, n_max: int, *,
                             step: float = 1e-3,
                             disk_tol: float = 1e-6) -> RotationNumberEstimate:
    """Average angular speed of the boundary trajectory from (1, 0).

    Returns (Theta(n_max) - Theta(0)) / (2 pi n_max) with the trivial
    averaging error band 1/n_max.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    pts = np.array([[1.0, 0.0]])
    nsteps = max(1, math.ceil(n_max / step))
    h = n_max / nsteps
    theta = 0.0
    prev = pts[0].copy()
    max_drift = 0.0
    for i in range(nsteps):
        pts = _rk4_step(H, i * h, pts, h)
        cur = pts[0]
        dtheta = math.atan2(prev[0] * cur[1] - prev[1] * cur[0],
                            prev[0] * cur[0] + prev[1] * cur[1])
        theta += dtheta
        prev = cur.copy()
        drift = abs(math.hypot(cur[0], cur[1]) - 1.0)
        if drift > max_drift:
            max_drift = drift
    if max_drift > disk_tol:
        raise IntegrationDriftError(
            f"boundary trajectory drifted radially by {max_drift:.3g}")
    return RotationNumberEstimate(theta / (2 * math.pi * n_max), 1.0 / n_max,
                                  n_max, max_drift)


# ---------------------------------------------------------------------------
# Hessian bound and sanity measurements
# ---------------------------------------------------------------------------

def polar_grid(h: float, include_origin: bool = True) -> np.ndarray:
    """Polar probe grid: ~1/h rings x ~2 pi/h angles, boundary circle included."""
    rings = max(2, round(1.0 / h))
    radii = np.linspace(1.0 / rings, 1.0, rings)
    nang = max(8, round(2 * math.pi / h))
    angles = np.linspace(0.0, 2 * math.pi, nang, endpoint=False)
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    pts = np.stack([rr * np.cos(aa), rr * np.sin(aa)], axis=-1).reshape(-1, 2)
    if include_origin:
        pts = np.vstack([[[0.0, 0.0]], pts])
    return pts


def _spectral_norm_sym(h: np.ndarray) -> np.ndarray:
    a, b, c = h[..., 0, 0], h[..., 0, 1], h[..., 1, 1]
    mean = (a + c) / 2
    rad = np.sqrt(((a - c) / 2) ** 2 + b ** 2)
    return np.maximum(np.abs(mean + rad), np.abs(mean - rad))


def hessian_bound(H: TimePeriodicHamiltonian,
                  resolution: tuple[int, int, int] = (48, 48, 96)) -> HessianBound:
    """Upper bound B on the spectral norm of Hess(H^t) over the disk.

    Grid maximum over (t, r, angle), inflated by a crude Lipschitz correction
    so the result is usable as an upper bound in the error chain.
    """
    nt, nr, na = resolution
    ts = np.linspace(0.0, 1.0, nt, endpoint=False)
    radii = np.linspace(0.0, 1.0, nr)
    angles = np.linspace(0.0, 2 * math.pi, na, endpoint=False)
    rr, aa = np.meshgrid(radii, angles, indexing="ij")
    xy = np.stack([rr * np.cos(aa), rr * np.sin(aa)], axis=-1)
    raw = 0.0
    lieps = 0.0
    spacing = max(1.0 / max(nr - 1, 1), 2 * math.pi / na, 1.0 / nt)
    prev_norms = None
    for t in ts:
        norms = _spectral_norm_sym(H.hessian(float(t), xy))
        raw = max(raw, float(np.max(norms)))
        # finite-difference estimate of the Hessian's variation (third derivatives)
        dr = np.max(np.abs(np.diff(norms, axis=0))) / max(1.0 / max(nr - 1, 1), 1e-12)
        da = np.max(np.abs(np.diff(norms, axis=1))) / (2 * math.pi / na)
        lieps = max(lieps, float(dr), float(da))
        if prev_norms is not None:
            dt = np.max(np.abs(norms - prev_norms)) / (1.0 / nt)
            lieps = max(lieps, float(dt))
        prev_norms = norms
    B = raw * (1.0 + (lieps * spacing / raw if raw > 0 else 0.0))
    return HessianBound(B, raw, lieps, spacing, resolution)


def area_jacobian_error(H: TimePeriodicHamiltonian, pts: np.ndarray, *,
                        delta: float = 1e-5, step: float = 1e-3) -> float:
    """max |det D(time-one map) - 1| on a point set, by central differences."""
    pts = np.asarray(pts, dtype=float)
    keep = np.sqrt(np.sum(pts ** 2, axis=-1)) < 1.0 - 2 * delta
    pts = pts[keep]
    ex = np.array([delta, 0.0])
    ey = np.array([0.0, delta])
    batches = [pts + ex, pts - ex, pts + ey, pts - ey]
    images = [flow_points(H, b, 0.0, 1.0, step=step, disk_tol=1e-3)[0] for b in batches]
    dx = (images[0] - images[1]) / (2 * delta)
    dy = (images[2] - images[3]) / (2 * delta)
    det = dx[:, 0] * dy[:, 1] - dx[:, 1] * dy[:, 0]
    return float(np.max(np.abs(det - 1.0)))


def check_boundary_constancy(H: TimePeriodicHamiltonian, nt: int = 16, na: int = 64) -> float:
    """max over sampled t of the spread of H(t, .) along the boundary circle."""
    angles = np.linspace(0.0, 2 * math.pi, na, endpoint=False)
    xy = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    worst = 0.0
    for t in np.linspace(0.0, 1.0, nt, endpoint=False):
        vals = H.value(float(t), xy)
        worst = max(worst, float(np.max(vals) - np.min(vals)))
    return worst


def check_origin_rest(H: TimePeriodicHamiltonian, nt: int = 32) -> float:
    """max over sampled t of |grad H(t, 0)|."""
    origin = np.zeros((1, 2))
    worst = 0.0
    for t in np.linspace(0.0, 1.0, nt, endpoint=False):
        g = H.gradient(float(t), origin)
        worst = max(worst, float(np.max(np.abs(g))))
    return worst
