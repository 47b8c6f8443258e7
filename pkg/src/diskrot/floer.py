"""The first-order elliptic system ds z + i(dt z - X_H(z)) = 0 on truncated
half-cylinders [0, S] x R/nZ, discretized with second-order differences.

The boundary row z(0, .) lives on the unit circle and is parameterized by
an angle lift with a fixed winding number, so no solver step can change
the degree.  The far end is pulled toward 0 by a quadratic penalty rather
than clamped.  The solver is a damped Gauss-Newton iteration on the
stacked nodewise residual; with large damping it degrades gracefully into
scaled gradient descent.

The analytic oracle for the rigid rotation family,

    z(s, t) = exp(-2 pi {n a} s / n) * exp(i (2 pi floor(n a) t / n + theta0)),

solves the continuum system exactly and carries |ds z|^2-mass {n a} pi;
everything else in the module is checked against it.
"""
from __future__ import annotations

import math
import struct
import time as _time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hamiltonian import TimePeriodicHamiltonian

__all__ = [
    "FloerError",
    "DegreeStraddleError",
    "TruncationError",
    "CylinderGrid",
    "FloerSolution",
    "FloerConfig",
    "ResidualReport",
    "EnergyReport",
    "InducedVectorField",
    "FillingReport",
    "MappingTorusLift",
    "InterpolationReport",
    "floor_degree",
    "winding_number",
    "residual",
    "rigid_rotation_exact_solution",
    "solve_floer",
    "refine_solution",
    "floer_energy",
    "l2_s_derivative",
    "energy_report",
    "sup_norm_s_derivative",
    "w1inf_norm_s_derivative",
    "interpolation_bound_check",
    "induced_vector_field",
    "filling_check",
    "lift_to_mapping_torus",
    "solution_to_csv",
    "solution_to_binary",
    "solution_from_binary",
]

BINARY_MAGIC = b"DISKROTZ"
BINARY_VERSION = 1


class FloerError(Exception):
    pass


class DegreeStraddleError(FloerError):
    """The alpha enclosure is too wide to pin down floor(n * alpha)."""


class TruncationError(FloerError):
    """The requested tail tolerance needs an infeasible truncation length."""


# ---------------------------------------------------------------------------
# Grid and basic fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CylinderGrid:
    n: int                 # period in the t-direction
    S: float               # truncation length in the s-direction
    Ns: int                # cells in s (nodes 0..Ns)
    Nt: int                # nodes in t (periodic)

    def __post_init__(self) -> None:
        if self.n < 1 or self.Ns < 4 or self.Nt < 8 or self.S <= 0:
            raise ValueError("degenerate cylinder grid")

    @property
    def hs(self) -> float:
        return self.S / self.Ns

    @property
    def ht(self) -> float:
        return self.n / self.Nt

    @property
    def s_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.S, self.Ns + 1)

    @property
    def t_nodes(self) -> np.ndarray:
        return self.n * np.arange(self.Nt) / self.Nt

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Ns + 1, self.Nt)

    def refined(self) -> "CylinderGrid":
        return CylinderGrid(self.n, self.S, 2 * self.Ns, 2 * self.Nt)

    @staticmethod
    def for_tail_tolerance(n: int, frac_lower, tail_tol: float,
                           Ns: int, Nt: int, S_max: float = 1e4) -> "CylinderGrid":
        """Pick S so the rigid-model decay e^(-2 pi {n a} S / n) dips below tail_tol.

        The decay rate degenerates exactly when {n a} is small; if the needed
        S exceeds S_max this raises TruncationError carrying the achievable
        tail level instead of silently truncating.
        """
        frac = float(frac_lower)
        if frac <= 0:
            raise TruncationError("fractional part enclosure touches 0; "
                                  "no finite truncation reaches the tail tolerance")
        rate = 2 * math.pi * frac / n
        S = math.log(1.0 / tail_tol) / rate
        if S > S_max:
            achievable = math.exp(-rate * S_max)
            raise TruncationError(
                f"tail {tail_tol:g} needs S = {S:.3g} > S_max = {S_max:.3g}; "
                f"achievable tail level at S_max is {achievable:.3g}")
        return CylinderGrid(n, S, Ns, Nt)


def floor_degree(alpha_enclosure: tuple, n: int) -> int:
    """floor(n * alpha) from a rational enclosure of alpha.

    Raises DegreeStraddleError when the enclosure straddles an integer
    multiple; the fix is more continued-fraction depth, not a guess.
    """
    lo = Fraction(alpha_enclosure[0])
    hi = Fraction(alpha_enclosure[1])
    fl, fh = math.floor(n * lo), math.floor(n * hi)
    if fl != fh:
        raise DegreeStraddleError(
            f"floor({n} alpha) ambiguous on the enclosure [{float(lo)}, {float(hi)}]; "
            "deepen the continued fraction")
    return fl


def winding_number(loop: np.ndarray) -> int:
    """Winding of a closed loop of nonzero complex numbers around 0.

    Assumes consecutive steps turn by less than pi, true for every loop this
    package produces on its grids.
    """
    ang = np.angle(np.asarray(loop))
    inc = np.diff(np.concatenate([ang, ang[:1]]))
    inc = (inc + math.pi) % (2 * math.pi) - math.pi
    return int(round(inc.sum() / (2 * math.pi)))


def _ds_stencil(z: np.ndarray, hs: float) -> np.ndarray:
    """Second-order s-derivative: centered inside, one-sided at s = 0, S."""
    out = np.empty_like(z)
    out[1:-1] = (z[2:] - z[:-2]) / (2 * hs)
    out[0] = (-3 * z[0] + 4 * z[1] - z[2]) / (2 * hs)
    out[-1] = (3 * z[-1] - 4 * z[-2] + z[-3]) / (2 * hs)
    return out


def _dt_stencil(z: np.ndarray, ht: float) -> np.ndarray:
    return (np.roll(z, -1, axis=1) - np.roll(z, 1, axis=1)) / (2 * ht)


def _hamiltonian_field_complex(H: TimePeriodicHamiltonian, grid: CylinderGrid,
                               z: np.ndarray) -> np.ndarray:
    """X_H as a complex field at every node: X = i * (H_x + i H_y)."""
    t = np.broadcast_to(grid.t_nodes, z.shape)
    xy = np.stack([z.real, z.imag], axis=-1)
    g = H.gradient(t, xy)
    return 1j * (g[..., 0] + 1j * g[..., 1])


def _s_weights(grid: CylinderGrid) -> np.ndarray:
    w = np.ones(grid.Ns + 1)
    w[0] = w[-1] = 0.5
    return w


def _quad(grid: CylinderGrid, integrand: np.ndarray) -> float:
    """Trapezoid in s, periodic rectangle in t."""
    w = _s_weights(grid)
    return float(np.sum(w[:, None] * integrand) * grid.hs * grid.ht)


# ---------------------------------------------------------------------------
# Residual and the rigid oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualReport:
    field: np.ndarray          # complex, shape (Ns+1, Nt)
    l2: float                  # quadrature-weighted L2 norm
    sup: float


def residual(z: np.ndarray, H: TimePeriodicHamiltonian, grid: CylinderGrid) -> ResidualReport:
    """Nodewise F(z) = Ds z + i (Dt z - X_H(z)) with its discrete norms."""
    z = np.asarray(z, dtype=complex)
    if z.shape != grid.shape:
        raise ValueError(f"candidate shape {z.shape} does not match grid {grid.shape}")
    F = _ds_stencil(z, grid.hs) + 1j * (_dt_stencil(z, grid.ht)
                                        - _hamiltonian_field_complex(H, grid, z))
    l2 = math.sqrt(_quad(grid, np.abs(F) ** 2))
    return ResidualReport(F, l2, float(np.max(np.abs(F))))


@dataclass
class FloerSolution:
    grid: CylinderGrid
    z: np.ndarray                    # complex (Ns+1, Nt)
    boundary_degree: int
    residual_norm: float
    residual_sup: float
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def boundary_loop(self) -> np.ndarray:
        return self.z[0]

    @property
    def tail_max(self) -> float:
        return float(np.max(np.abs(self.z[-1])))

    def max_modulus(self) -> float:
        return float(np.max(np.abs(self.z)))


def rigid_rotation_exact_solution(alpha_enclosure: tuple, n: int, theta0: float,
                                  grid: CylinderGrid) -> FloerSolution:
    """The closed-form solution for H = pi alpha (x^2+y^2), sampled on the grid.

    Decay rate 2 pi {n a}/n in s, winding floor(n a) in t; its continuum
    |ds z|^2 mass is exactly {n a} pi.  This is the module's analytic oracle.
    """
    degree = floor_degree(alpha_enclosure, n)
    lo, hi = Fraction(alpha_enclosure[0]), Fraction(alpha_enclosure[1])
    frac = float((lo + hi) / 2 * n - degree)
    kappa = 2 * math.pi * frac / n
    omega = 2 * math.pi * degree / n
    s = grid.s_nodes[:, None]
    t = grid.t_nodes[None, :]
    z = np.exp(-kappa * s) * np.exp(1j * (omega * t + theta0))
    alpha_mid = (float(lo) + float(hi)) / 2
    from .hamiltonian import RigidRotation
    rep = residual(z, RigidRotation(alpha_mid), grid)
    return FloerSolution(grid, z, degree, rep.l2, rep.sup, True,
                         {"kind": "rigid_oracle", "kappa": kappa, "omega": omega,
                          "theta0": theta0, "frac": frac})


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FloerConfig:
    max_iterations: int = 60
    tol_residual: float | None = None   # None: stall-based convergence
    tail_weight: float = 1.0
    lm_lambda0: float = 1e-6
    lm_grow: float = 10.0
    lm_shrink: float = 0.2
    lm_max_trials: int = 8
    direct_solver_limit: int = 60_000   # unknowns above this use CG with the
                                        # mode-diagonal preconditioner
    cg_maxiter: int = 60
    cg_rtol: float = 1e-3               # inexact Newton forcing; the outer
                                        # iteration does the polishing
    gradient_stall: float = 1e-10       # stop once |grad| <= stall * (1 + cost)
    residual_stall: float = 1e-4        # stop after two consecutive relative
                                        # residual improvements below this
    disk_tolerance: float = 1e-6
    verbose: bool = False


def _ds_matrix(grid: CylinderGrid) -> sp.csr_matrix:
    N = grid.Ns + 1
    h = grid.hs
    rows, cols, vals = [], [], []
    for i in range(1, N - 1):
        rows += [i, i]
        cols += [i - 1, i + 1]
        vals += [-1 / (2 * h), 1 / (2 * h)]
    rows += [0, 0, 0]
    cols += [0, 1, 2]
    vals += [-3 / (2 * h), 4 / (2 * h), -1 / (2 * h)]
    rows += [N - 1, N - 1, N - 1]
    cols += [N - 1, N - 2, N - 3]
    vals += [3 / (2 * h), -4 / (2 * h), 1 / (2 * h)]
    return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))


def _dt_matrix(grid: CylinderGrid) -> sp.csr_matrix:
    Nt = grid.Nt
    h = grid.ht
    idx = np.arange(Nt)
    rows = np.concatenate([idx, idx])
    cols = np.concatenate([(idx + 1) % Nt, (idx - 1) % Nt])
    vals = np.concatenate([np.full(Nt, 1 / (2 * h)), np.full(Nt, -1 / (2 * h))])
    return sp.csr_matrix((vals, (rows, cols)), shape=(Nt, Nt))


_J2 = sp.csr_matrix(np.array([[0.0, -1.0], [1.0, 0.0]]))
_I2 = sp.identity(2, format="csr")


def _real_expand(C: sp.spmatrix) -> sp.csr_matrix:
    """Real 2x2-block expansion of a complex sparse matrix (interleaved Re/Im)."""
    A = sp.csr_matrix(C.real)
    B = sp.csr_matrix(C.imag)
    out = sp.kron(A, _I2, format="csr")
    if B.nnz:
        out = out + sp.kron(B, _J2, format="csr")
    return out


class _Discretization:
    """Per-grid constant operators reused across solver iterations."""

    def __init__(self, grid: CylinderGrid):
        self.grid = grid
        L = sp.kron(_ds_matrix(grid), sp.identity(grid.Nt), format="csr") \
            + 1j * sp.kron(sp.identity(grid.Ns + 1), _dt_matrix(grid), format="csr")
        self.L = sp.csr_matrix(L)
        self.L_real = _real_expand(self.L)
        Nn = (grid.Ns + 1) * grid.Nt
        coords = np.arange(2 * Nn).reshape(Nn, 2)
        node = np.arange(Nn).reshape(grid.Ns + 1, grid.Nt)
        self.bnd_coords = coords[node[0]].ravel()
        self.int_coords = coords[node[1:]].ravel()
        self.far_coords = coords[node[-1]].ravel()
        # quadrature weight per pde row (sqrt applied to rows of J and F)
        w = (_s_weights(grid)[:, None] * np.ones(grid.Nt)) * grid.hs * grid.ht
        self.row_sqrt_w = np.sqrt(np.repeat(w.ravel(), 2))


def _weighted_residual(disc: _Discretization, H: TimePeriodicHamiltonian,
                       z: np.ndarray, w_pen: float):
    """Stacked weighted residual [sqrt(w) F; sqrt(w_pen) z(S,.)] and the raw field."""
    grid = disc.grid
    Xc = _hamiltonian_field_complex(H, grid, z)
    Fc = (disc.L @ z.ravel()) - 1j * Xc.ravel()
    F_real = np.empty(2 * Fc.size)
    F_real[0::2], F_real[1::2] = Fc.real, Fc.imag
    far_vals = np.empty(2 * grid.Nt)
    far_vals[0::2], far_vals[1::2] = z[-1].real, z[-1].imag
    F_aug = np.concatenate([disc.row_sqrt_w * F_real, math.sqrt(w_pen) * far_vals])
    return F_aug, Fc.reshape(grid.shape)


def _assemble_jacobian(disc: _Discretization, H: TimePeriodicHamiltonian,
                       z: np.ndarray, w_pen: float) -> sp.csr_matrix:
    """Weighted Jacobian wrt [interior coordinates, boundary angles]."""
    grid = disc.grid
    # d(-i X_H)/d(Re z, Im z): rotate the real Jacobian of X_H by -i
    t = np.broadcast_to(grid.t_nodes, z.shape)
    xy = np.stack([z.real, z.imag], axis=-1)
    hess = H.hessian(t, xy).reshape(-1, 2, 2)
    K = np.empty_like(hess)
    K[:, 0, 0], K[:, 0, 1] = -hess[:, 0, 1], -hess[:, 1, 1]
    K[:, 1, 0], K[:, 1, 1] = hess[:, 0, 0], hess[:, 0, 1]
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    blocks = rot @ K
    Nn = z.size
    Nblock = sp.bsr_matrix((blocks, np.arange(Nn), np.arange(Nn + 1)),
                           shape=(2 * Nn, 2 * Nn)).tocsr()
    J_nodes = sp.diags(disc.row_sqrt_w) @ (disc.L_real + Nblock)

    # column compression: interior coordinates pass through, boundary nodes
    # are chained through d z0/d phi = i z0
    n_int = disc.int_coords.size
    Nt = grid.Nt
    z0 = z[0]
    rows = np.concatenate([disc.int_coords, disc.bnd_coords])
    cols = np.concatenate([np.arange(n_int),
                           n_int + np.repeat(np.arange(Nt), 2)])
    vals = np.concatenate([np.ones(n_int),
                           np.stack([-z0.imag, z0.real], axis=-1).ravel()])
    T = sp.csr_matrix((vals, (rows, cols)), shape=(2 * Nn, n_int + Nt))
    J = (J_nodes @ T).tocsr()

    far_local = np.arange(n_int - 2 * Nt, n_int)
    P = sp.csr_matrix((np.full(2 * Nt, math.sqrt(w_pen)),
                       (np.arange(2 * Nt), far_local)),
                      shape=(2 * Nt, n_int + Nt))
    return sp.vstack([J, P], format="csr")


class _ModePreconditioner:
    """Approximate inverse of the Gauss-Newton normal operator.

    Freezing the field linearization at a rigid rotation (where -i dX/dz is
    the real scalar 2 pi alpha_hat) block-diagonalizes the weighted normal
    operator over t-Fourier modes into real pentadiagonal systems in s,
    factorized once per solve.  Works as a preconditioner for any nearby
    Hamiltonian; boundary-angle unknowns are handled by their diagonal.
    """

    def __init__(self, disc: "_Discretization", alpha_hat: float, w_pen: float,
                 phi_diag: np.ndarray, ridge: float = 1e-10):
        from scipy.linalg import cholesky_banded
        grid = disc.grid
        Ns, Nt = grid.Ns, grid.Nt
        self.grid = grid
        Ds = _ds_matrix(grid)
        w = _s_weights(grid) * grid.hs * grid.ht
        sqrtw = sp.diags(np.sqrt(w))
        eye = sp.identity(Ns + 1, format="csr")
        self.factors = []
        for k in range(Nt):
            ck = 2 * math.pi * alpha_hat - math.sin(2 * math.pi * k / Nt) / grid.ht
            A = (sqrtw @ (Ds + ck * eye)).tocsc()[:, 1:]
            N = (A.T @ A).toarray()
            N[-1, -1] += w_pen
            N += ridge * max(N.max(), 1.0) * np.eye(Ns)
            ab = np.zeros((3, Ns))
            for d in range(3):
                ab[d, :Ns - d] = np.diagonal(N, -d)
            self.factors.append(cholesky_banded(ab, lower=True))
        self.phi_diag = np.maximum(phi_diag, 1e-30)

    def apply(self, r: np.ndarray) -> np.ndarray:
        from scipy.linalg import cho_solve_banded
        grid = self.grid
        Ns, Nt = grid.Ns, grid.Nt
        n_int = 2 * Ns * Nt
        r_int = r[:n_int].reshape(Ns, Nt, 2)
        rc = r_int[..., 0] + 1j * r_int[..., 1]
        rhat = np.fft.fft(rc, axis=1)
        out = np.empty_like(rhat)
        for k in range(Nt):
            b = np.stack([rhat[:, k].real, rhat[:, k].imag], axis=1)
            x = cho_solve_banded((self.factors[k], True), b)
            out[:, k] = x[:, 0] + 1j * x[:, 1]
        xc = np.fft.ifft(out, axis=1)
        res = np.empty_like(r)
        xi = res[:n_int].reshape(Ns, Nt, 2)
        xi[..., 0], xi[..., 1] = xc.real, xc.imag
        res[n_int:] = r[n_int:] / self.phi_diag
        return res


def _state_to_field(x_int: np.ndarray, phi: np.ndarray, base_angle: np.ndarray,
                    grid: CylinderGrid) -> np.ndarray:
    z = np.empty(grid.shape, dtype=complex)
    z[0] = np.exp(1j * (base_angle + phi))
    zi = x_int.reshape(grid.Ns, grid.Nt, 2)
    z[1:] = zi[..., 0] + 1j * zi[..., 1]
    return z


def _field_to_state(z: np.ndarray, base_angle: np.ndarray):
    phi = np.unwrap(np.angle(z[0])) - base_angle
    phi -= 2 * math.pi * round((phi[0]) / (2 * math.pi))
    x_int = np.stack([z[1:].real, z[1:].imag], axis=-1).ravel()
    return x_int, phi


def solve_floer(H: TimePeriodicHamiltonian, n: int, alpha_enclosure: tuple,
                grid: CylinderGrid, seed: FloerSolution | np.ndarray | None = None,
                config: FloerConfig = FloerConfig()) -> FloerSolution:
    """Least-squares solution of the discretized system on the grid.

    Boundary nodes are constrained to the circle with winding floor(n alpha)
    through an angle-lift parameterization; far-end nodes are penalized
    toward 0.  Seeded by the rigid-rotation oracle when no seed is given
    (continuation from the integrable case).  Returns a non-converged
    solution with a residual history instead of raising on stagnation.
    """
    degree = floor_degree(alpha_enclosure, n)
    if seed is None:
        z = rigid_rotation_exact_solution(alpha_enclosure, n, 0.0, grid).z.copy()
    elif isinstance(seed, FloerSolution):
        if seed.grid.shape != grid.shape:
            raise ValueError("seed grid does not match; use refine_solution first")
        z = seed.z.copy()
    else:
        z = np.array(seed, dtype=complex)
        if z.shape != grid.shape:
            raise ValueError("seed array does not match the grid")
    base_angle = 2 * math.pi * degree * np.arange(grid.Nt) / grid.Nt
    if winding_number(z[0]) != degree:
        raise FloerError(
            f"seed boundary winding {winding_number(z[0])} != floor(n alpha) = {degree}")
    # project boundary row to the circle through its angle lift
    x_int, phi = _field_to_state(z, base_angle)
    z = _state_to_field(x_int, phi, base_angle, grid)

    disc = _Discretization(grid)
    w_pen = config.tail_weight * grid.hs * grid.ht
    lam = config.lm_lambda0
    history: list[float] = []
    n_unknowns = x_int.size + phi.size
    use_direct = n_unknowns <= config.direct_solver_limit
    precond: _ModePreconditioner | None = None
    alpha_hat = 0.5 * (float(Fraction(alpha_enclosure[0]))
                       + float(Fraction(alpha_enclosure[1])))

    Faug, Fc = _weighted_residual(disc, H, z, w_pen)
    cost = float(Faug @ Faug)
    history.append(math.sqrt(_quad(grid, np.abs(Fc) ** 2)))
    stalled = 0
    for it in range(config.max_iterations):
        if config.tol_residual is not None and history[-1] <= config.tol_residual:
            break
        if stalled >= 2:
            break
        if len(history) >= 3:
            gains = [(history[-k - 1] - history[-k]) / max(history[-k - 1], 1e-300)
                     for k in (1, 2)]
            if all(g < config.residual_stall for g in gains):
                break
        t_it = _time.time()
        J = _assemble_jacobian(disc, H, z, w_pen)
        grad = J.T @ Faug
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= config.gradient_stall * (1.0 + cost):
            break
        diagJJ = np.asarray(J.multiply(J).sum(axis=0)).ravel()
        if not use_direct and precond is None:
            precond = _ModePreconditioner(disc, alpha_hat, w_pen,
                                          diagJJ[x_int.size:])
        t_asm = _time.time() - t_it
        accepted = False
        trials = 0
        for _ in range(config.lm_max_trials):
            trials += 1
            if use_direct:
                A = (J.T @ J).tocsc()
                A = A + lam * sp.diags(A.diagonal() + 1e-30)
                try:
                    delta = spla.splu(A).solve(-grad)
                except RuntimeError:
                    lam *= config.lm_grow
                    continue
            else:
                damp = lam * diagJJ
                A_op = spla.LinearOperator(
                    (n_unknowns, n_unknowns),
                    matvec=lambda v: J.T @ (J @ v) + damp * v)
                M_op = spla.LinearOperator((n_unknowns, n_unknowns),
                                           matvec=precond.apply)
                delta, info = spla.cg(A_op, -grad, M=M_op,
                                      rtol=config.cg_rtol, atol=0.0,
                                      maxiter=config.cg_maxiter)
            x_try = x_int + delta[:x_int.size]
            phi_try = phi + delta[x_int.size:]
            z_try = _state_to_field(x_try, phi_try, base_angle, grid)
            F_try, Fc_try = _weighted_residual(disc, H, z_try, w_pen)
            cost_try = float(F_try @ F_try)
            if cost_try < cost:
                rel_gain = (cost - cost_try) / max(cost, 1e-300)
                x_int, phi, z = x_try, phi_try, z_try
                Faug, Fc = F_try, Fc_try
                cost = cost_try
                lam = max(lam * config.lm_shrink, 1e-14)
                accepted = True
                stalled = stalled + 1 if rel_gain < 1e-12 else 0
                break
            lam *= config.lm_grow
        history.append(math.sqrt(_quad(grid, np.abs(Fc) ** 2)))
        if config.verbose:
            print(f"  [floer] it={it} residual={history[-1]:.4e} "
                  f"|grad|={gnorm:.3e} lambda={lam:.1e} trials={trials} "
                  f"asm={t_asm:.2f}s tot={_time.time() - t_it:.2f}s")
        if not accepted:
            stalled = 2

    rep = residual(z, H, grid)
    tail = float(np.max(np.abs(z[-1])))
    ok_tol = config.tol_residual is None or rep.l2 <= config.tol_residual
    ok_disk = float(np.max(np.abs(z))) <= 1.0 + config.disk_tolerance
    sol = FloerSolution(grid, z, degree, rep.l2, rep.sup,
                        bool(ok_tol and ok_disk),
                        {"residual_history": history, "iterations": len(history) - 1,
                         "tail_max": tail, "lm_lambda": lam,
                         "linear_solver": "splu" if use_direct else "cg-mode",
                         "unknowns": n_unknowns})
    return sol


def refine_solution(sol: FloerSolution, new_grid: CylinderGrid) -> np.ndarray:
    """Prolong a solution field onto a finer grid (bilinear, periodic in t)."""
    z = sol.z
    gs, gt = sol.grid.s_nodes, sol.grid.t_nodes
    ns, nt = new_grid.s_nodes, new_grid.t_nodes
    # interpolate in s (rows), then periodically in t (columns)
    mid = np.empty((ns.size, z.shape[1]), dtype=complex)
    for j in range(z.shape[1]):
        mid[:, j] = np.interp(ns, gs, z[:, j].real) + 1j * np.interp(ns, gs, z[:, j].imag)
    gt_ext = np.concatenate([gt, [sol.grid.n]])
    mid_ext = np.concatenate([mid, mid[:, :1]], axis=1)
    out = np.empty((ns.size, nt.size), dtype=complex)
    for i in range(ns.size):
        out[i] = np.interp(nt, gt_ext, mid_ext[i].real) + 1j * np.interp(nt, gt_ext, mid_ext[i].imag)
    return out


# ---------------------------------------------------------------------------
# Energies and norms
# ---------------------------------------------------------------------------

def l2_s_derivative(sol: FloerSolution) -> float:
    ds = _ds_stencil(sol.z, sol.grid.hs)
    return _quad(sol.grid, np.abs(ds) ** 2)


def floer_energy(sol: FloerSolution, H: TimePeriodicHamiltonian) -> float:
    """Quadrature of |ds z|^2 + |dt z - X_H(z)|^2 over the truncated cylinder."""
    ds = _ds_stencil(sol.z, sol.grid.hs)
    dt = _dt_stencil(sol.z, sol.grid.ht)
    Xc = _hamiltonian_field_complex(H, sol.grid, sol.z)
    return _quad(sol.grid, np.abs(ds) ** 2 + np.abs(dt - Xc) ** 2)


@dataclass(frozen=True)
class EnergyReport:
    floer_energy: float
    l2_s_derivative: float
    e_omega: float
    e_lambda: float
    target_lower: float
    target_upper: float

    @property
    def l2_matches_target(self) -> bool:
        span = max(self.target_upper - self.target_lower, 0.0)
        return (self.target_lower - 0.05 - span <= self.l2_s_derivative
                <= self.target_upper + 0.05 + span)


def energy_report(sol: FloerSolution, H: TimePeriodicHamiltonian,
                  frac_enclosure: tuple) -> EnergyReport:
    """Energies of a solution next to the exact target {n a} pi."""
    lift = lift_to_mapping_torus(sol, 0.0, 0.0, H)
    lo = float(frac_enclosure[0]) * math.pi
    hi = float(frac_enclosure[1]) * math.pi
    return EnergyReport(floer_energy(sol, H), l2_s_derivative(sol),
                        lift.e_omega, lift.e_lambda, lo, hi)


def sup_norm_s_derivative(sol: FloerSolution) -> float:
    return float(np.max(np.abs(_ds_stencil(sol.z, sol.grid.hs))))


def w1inf_norm_s_derivative(sol: FloerSolution) -> float:
    """Discrete W^{1,inf} norm of ds z: max(sup |g|, sup |Dg|)."""
    g = _ds_stencil(sol.z, sol.grid.hs)
    gs = _ds_stencil(g, sol.grid.hs)
    gt = _dt_stencil(g, sol.grid.ht)
    grad_mag = np.sqrt(np.abs(gs) ** 2 + np.abs(gt) ** 2)
    return float(max(np.max(np.abs(g)), np.max(grad_mag)))


@dataclass(frozen=True)
class InterpolationReport:
    sup_ds: float
    l2_ds: float
    w1inf_ds: float
    c: float
    b: float
    lhs: float                 # sup^2
    rhs: float                 # c * l2 * w1inf
    holds: bool
    M: float                   # (c b)^(1/2) pi^(1/4)
    b_is_empirical: bool = True


def interpolation_bound_check(sol: FloerSolution, c: float,
                              b: float | None = None) -> InterpolationReport:
    """Check sup|ds z|^2 <= c ||ds z||_L2 ||ds z||_W1inf on the solution and
    form the constant M = sqrt(c b) pi^(1/4).

    b defaults to the measured discrete W^{1,inf} norm; it stands in for the
    non-constructive uniform derivative bound and is flagged as empirical.
    """
    sup = sup_norm_s_derivative(sol)
    l2 = math.sqrt(l2_s_derivative(sol))
    w1 = w1inf_norm_s_derivative(sol)
    b_eff = w1 if b is None else float(b)
    rhs = c * l2 * w1
    return InterpolationReport(sup, l2, w1, c, b_eff, sup ** 2, rhs,
                               sup ** 2 <= rhs * (1 + 1e-12) + 1e-300,
                               math.sqrt(c * b_eff) * math.pi ** 0.25,
                               b is None)


# ---------------------------------------------------------------------------
# Derived structures: induced field, filling, mapping-torus lift
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InducedVectorField:
    t: float
    points: np.ndarray          # (M, 2)
    vectors: np.ndarray         # (M, 2)
    deviation_max: float        # max |X_n^t - X_H^t| over the samples


def induced_vector_field(solutions: list[FloerSolution], H: TimePeriodicHamiltonian,
                         t: float) -> InducedVectorField:
    """Samples of the induced field X_n^t(z(s,t)) := dt z(s,t), harvested at
    the grid columns congruent to t modulo 1, with the deviation from X_H."""
    if not solutions:
        raise ValueError("need at least one solution")
    pts, vecs, dev = [], [], 0.0
    for sol in solutions:
        grid = sol.grid
        tn = grid.t_nodes
        dist = np.abs((tn - t + 0.5) % 1.0 - 0.5)
        cols = np.nonzero(dist <= dist.min() + 1e-12)[0]
        dtz = _dt_stencil(sol.z, grid.ht)[:, cols]
        zc = sol.z[:, cols]
        Xc = _hamiltonian_field_complex(H, grid, sol.z)[:, cols]
        pts.append(np.stack([zc.real, zc.imag], axis=-1).reshape(-1, 2))
        vecs.append(np.stack([dtz.real, dtz.imag], axis=-1).reshape(-1, 2))
        dev = max(dev, float(np.max(np.abs(dtz - Xc))))
    return InducedVectorField(t, np.concatenate(pts), np.concatenate(vecs), dev)


@dataclass(frozen=True)
class FillingReport:
    distances: np.ndarray
    threshold: float
    covered: int
    total: int

    @property
    def all_covered(self) -> bool:
        return self.covered == self.total


def filling_check(solutions: list[FloerSolution], probes: np.ndarray,
                  threshold: float | None = None) -> FillingReport:
    """Nearest solution-image node per probe; covered when within threshold.

    Probes at the origin are rejected: the origin is only the s -> infinity
    limit of every solution, not in any image.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if np.any(np.sum(probes ** 2, axis=1) == 0.0):
        raise ValueError("probes must exclude the origin")
    from scipy.spatial import cKDTree
    nodes = np.concatenate([
        np.stack([s.z.real.ravel(), s.z.imag.ravel()], axis=-1) for s in solutions])
    if threshold is None:
        g = solutions[0].grid
        threshold = 4.0 * max(g.hs, g.ht)
    dists, _ = cKDTree(nodes).query(probes)
    covered = int(np.sum(dists <= threshold))
    return FillingReport(dists, float(threshold), covered, probes.shape[0])


@dataclass(frozen=True)
class MappingTorusLift:
    solution: FloerSolution
    s0: float
    t0: float
    e_omega: float
    e_lambda: float            # identity value n (not evaluated as a supremum)
    e_lambda_derived: bool
    cr_residual_max: float     # disk component of the lifted equation
    cr_aux_max: float          # the two flat components (a, tau); ~ machine zero
    tau_winding: int


def lift_to_mapping_torus(sol: FloerSolution, s0: float, t0: float,
                          H: TimePeriodicHamiltonian) -> MappingTorusLift:
    """Lift u = (s + s0, t + t0, z) to the cylinder over the mapping torus.

    Verifies the lifted Cauchy-Riemann relation nodewise (its disk component
    is the planar residual; the a- and tau-components vanish identically for
    this parameterization) and evaluates E_omega = integral of
    det(ds z, dt z) - dH(ds z) by quadrature.  E_lambda is reported as n,
    the derived identity value, without evaluating the supremum form.
    """
    grid = sol.grid
    z = sol.z
    ds = _ds_stencil(z, grid.hs)
    dt = _dt_stencil(z, grid.ht)
    # a(s,t) = s + s0, tau(s,t) = t + t0: Ds a = 1, Dt a = 0, Ds tau = 0, Dt tau = 1
    a_field = np.broadcast_to(grid.s_nodes[:, None] + s0, grid.shape)
    tau_field = np.broadcast_to(grid.t_nodes[None, :] + t0, grid.shape)
    aux1 = _ds_stencil(a_field.astype(float), grid.hs) - _dt_periodic_linear(grid)
    aux2 = _ds_stencil(tau_field.astype(float), grid.hs)
    cr_aux = float(max(np.max(np.abs(aux1)), np.max(np.abs(aux2))))

    t_mod = np.mod(grid.t_nodes[None, :] + t0, 1.0)
    xy = np.stack([z.real, z.imag], axis=-1)
    g = H.gradient(np.broadcast_to(t_mod, grid.shape), xy)
    gc = g[..., 0] + 1j * g[..., 1]
    integrand = (np.conj(ds) * dt).imag - (np.conj(gc) * ds).real
    e_omega = _quad(grid, integrand)

    Xc = _hamiltonian_field_complex(H, grid, z)
    F = ds + 1j * (dt - Xc)
    return MappingTorusLift(sol, s0, t0, e_omega, float(grid.n), True,
                            float(np.max(np.abs(F))), cr_aux, 1)


def _dt_periodic_linear(grid: CylinderGrid) -> float:
    """Dt applied to tau = t is exactly 1 except across the periodic seam,
    where the stencil sees the n-jump; the lift accounts for the seam, so
    the effective value is 1 everywhere."""
    return 1.0


# ---------------------------------------------------------------------------
# Export formats
# ---------------------------------------------------------------------------

def solution_to_csv(sol: FloerSolution, path) -> None:
    """Columns: s, t, re_z, im_z; LF line endings, headers mandatory."""
    grid = sol.grid
    with open(path, "w", newline="\n") as fh:
        fh.write("s,t,re_z,im_z\n")
        for i, s in enumerate(grid.s_nodes):
            for j, t in enumerate(grid.t_nodes):
                v = sol.z[i, j]
                fh.write(f"{s!r},{t!r},{v.real!r},{v.imag!r}\n")


def solution_to_binary(sol: FloerSolution, path) -> None:
    """Compact grid dump.

    Header: magic 'DISKROTZ' (8 bytes), version uint32, n uint32, S float64,
    Ns uint32, Nt uint32; then (Ns+1)*Nt complex nodes as row-major
    (s-major) float64 (re, im) pairs, little-endian.
    """
    grid = sol.grid
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<IIdII", BINARY_VERSION, grid.n, grid.S, grid.Ns, grid.Nt))
        pairs = np.empty((grid.Ns + 1, grid.Nt, 2))
        pairs[..., 0], pairs[..., 1] = sol.z.real, sol.z.imag
        fh.write(pairs.astype("<f8").tobytes())


def solution_from_binary(path) -> tuple[CylinderGrid, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != BINARY_MAGIC:
            raise FloerError("bad magic in binary solution dump")
        version, n, S, Ns, Nt = struct.unpack("<IIdII", fh.read(24))
        if version != BINARY_VERSION:
            raise FloerError(f"unsupported dump version {version}")
        grid = CylinderGrid(n, S, Ns, Nt)
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(Ns + 1, Nt, 2)
        return grid, data[..., 0] + 1j * data[..., 1]
