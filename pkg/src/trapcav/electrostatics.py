"""Electrostatics of a planar electrode layout in the gapless approximation.

Every electrode is a rectangular patch at fixed voltage embedded in an
infinite grounded plane at z = 0; ions live in the half space z > 0. The
potential of one patch is the classic closed-form solid-angle solution

    phi(x, y, z) = V/(2 pi) * sum over corners of
                   (+/-) arctan[(xi - x)(yj - y) / (z r_ij)]

which is harmonic, goes to V on the patch and to zero far away. Fields are
analytic gradients of the same expression. Superposition over patches gives
the layout potential; the RF patches driven at the layout amplitude give the
RF field, and the ponderomotive (pseudo)potential follows as

    Phi_ps = e^2 |E_rf|^2 / (4 m Omega^2).

Coordinates: x runs along the trap/cavity axis, y is the transverse in-plane
coordinate, z is height above the chip. All lengths in meters.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .axial import AxialPotentialModel
from .constants import E_CHARGE, IonSpecies
from .errors import (
    ConfigError,
    ConvergenceError,
    PhysicsError,
    UnstableOperatingPointError,
)

MATHIEU_Q_MAX = 0.908          # lowest stability region
NULL_FIELD_TOL = 1e-3          # V/m, default |E_rf| residual at the null


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class RectPatch:
    """Axis-aligned rectangular electrode patch.

    x1 < x2 span the trap axis, y1 < y2 the transverse in-plane direction.
    ``voltage`` is the DC voltage; ``rf`` marks the patch as RF-driven (its RF
    drive amplitude lives on the layout).
    """

    x1: float
    x2: float
    y1: float
    y2: float
    voltage: float = 0.0
    rf: bool = False
    group: str = ""

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError("patch requires x1 < x2 and y1 < y2")

    def overlaps(self, other):
        return (self.x1 < other.x2 and other.x1 < self.x2
                and self.y1 < other.y2 and other.y1 < self.y2)


@dataclass(frozen=True)
class TrapLayout:
    """Set of voltage patches plus the RF drive parameters.

    Exactly one set of patches (one or more, sharing ``rf=True``) is driven at
    ``rf_amplitude`` (zero-to-peak volts) and angular frequency
    ``rf_frequency`` (rad/s). Everything outside the patches is grounded.
    """

    patches: tuple
    rf_amplitude: float
    rf_frequency: float
    name: str = ""
    notes: str = ""

    def __post_init__(self):
        if self.rf_frequency <= 0:
            raise ValueError("rf_frequency must be positive")
        patches = tuple(self.patches)
        object.__setattr__(self, "patches", patches)
        if not any(p.rf for p in patches):
            raise ValueError("layout needs at least one RF patch")
        for i, p in enumerate(patches):
            for q in patches[i + 1:]:
                if p.overlaps(q):
                    raise ValueError(
                        f"overlapping patches in groups {p.group!r} and {q.group!r}")
        object.__setattr__(self, "_rects", np.array(
            [(p.x1, p.x2, p.y1, p.y2) for p in patches]))
        object.__setattr__(self, "_voltages", np.array(
            [p.voltage for p in patches]))
        object.__setattr__(self, "_rf_mask", np.array(
            [p.rf for p in patches], dtype=bool))

    def groups(self):
        """Mapping group name -> patch indices."""
        out = {}
        for i, p in enumerate(self.patches):
            out.setdefault(p.group, []).append(i)
        return out

    def dc_voltages(self):
        """Voltage per group (single value; groups are tied electrodes)."""
        return {g: self.patches[idx[0]].voltage for g, idx in self.groups().items()}

    def with_voltages(self, voltages):
        """New layout with the given group voltages applied (others kept)."""
        unknown = set(voltages) - set(self.groups())
        if unknown:
            raise ConfigError(f"unknown electrode groups: {sorted(unknown)}")
        patches = tuple(
            replace(p, voltage=float(voltages.get(p.group, p.voltage)))
            for p in self.patches)
        return replace(self, patches=patches)

    def translated(self, delta):
        """Layout shifted in-plane by (dx, dy)."""
        dx, dy = float(delta[0]), float(delta[1])
        patches = tuple(
            replace(p, x1=p.x1 + dx, x2=p.x2 + dx, y1=p.y1 + dy, y2=p.y2 + dy)
            for p in self.patches)
        return replace(self, patches=patches)

    def scaled(self, s, rf_amplitude=None):
        """All lengths scaled by s (optionally with a new drive amplitude)."""
        patches = tuple(
            replace(p, x1=p.x1 * s, x2=p.x2 * s, y1=p.y1 * s, y2=p.y2 * s)
            for p in self.patches)
        amp = self.rf_amplitude if rf_amplitude is None else rf_amplitude
        return replace(self, patches=patches, rf_amplitude=amp)


# ---------------------------------------------------------------------------
# patch potential primitives


def _check_points(p):
    p = np.atleast_2d(np.asarray(p, dtype=float))
    if p.shape[-1] != 3:
        raise ValueError("points must have shape (..., 3)")
    if np.any(p[:, 2] <= 0.0):
        raise PhysicsError("field points must lie strictly above the plane (z > 0)")
    return p


def _unit_potential(rects, p):
    """Potential of each patch at unit voltage. rects (K,4), p (N,3) -> (N,K)."""
    x, y, z = p[:, 0:1], p[:, 1:2], p[:, 2:3]
    u1 = rects[:, 0][None, :] - x
    u2 = rects[:, 1][None, :] - x
    v1 = rects[:, 2][None, :] - y
    v2 = rects[:, 3][None, :] - y

    def f(u, v):
        r = np.sqrt(u * u + v * v + z * z)
        return np.arctan(u * v / (z * r))

    return (f(u2, v2) - f(u1, v2) - f(u2, v1) + f(u1, v1)) / (2.0 * np.pi)


def _unit_gradient(rects, p):
    """Gradient of the unit-voltage potential. Returns (N,K,3)."""
    x, y, z = p[:, 0:1], p[:, 1:2], p[:, 2:3]
    u1 = rects[:, 0][None, :] - x
    u2 = rects[:, 1][None, :] - x
    v1 = rects[:, 2][None, :] - y
    v2 = rects[:, 3][None, :] - y

    def terms(u, v):
        z2 = z * z
        uz = u * u + z2
        vz = v * v + z2
        r2 = u * u + v * v + z2
        r = np.sqrt(r2)
        fu = z * v / (r * uz)
        fv = z * u / (r * vz)
        fz = -u * v * (r2 + z2) / (r * uz * vz)
        return fu, fv, fz

    fu22, fv22, fz22 = terms(u2, v2)
    fu12, fv12, fz12 = terms(u1, v2)
    fu21, fv21, fz21 = terms(u2, v1)
    fu11, fv11, fz11 = terms(u1, v1)
    # d/dx = -d/du etc. because u = xi - x
    gx = -(fu22 - fu12 - fu21 + fu11) / (2.0 * np.pi)
    gy = -(fv22 - fv12 - fv21 + fv11) / (2.0 * np.pi)
    gz = (fz22 - fz12 - fz21 + fz11) / (2.0 * np.pi)
    return np.stack([gx, gy, gz], axis=-1)


def patch_potential(patch, p):
    """Potential (V) of a single patch at point(s) p above the plane."""
    pts = _check_points(p)
    rects = np.array([(patch.x1, patch.x2, patch.y1, patch.y2)])
    phi = patch.voltage * _unit_potential(rects, pts)[:, 0]
    return phi[0] if np.asarray(p).ndim == 1 else phi


def patch_field(patch, p):
    """Electric field E = -grad(phi) (V/m) of a single patch."""
    pts = _check_points(p)
    rects = np.array([(patch.x1, patch.x2, patch.y1, patch.y2)])
    e = -patch.voltage * _unit_gradient(rects, pts)[:, 0, :]
    return e[0] if np.asarray(p).ndim == 1 else e


def _weighted(layout, p, weights):
    pts = _check_points(p)
    phi = _unit_potential(layout._rects, pts) @ weights
    e = -np.einsum("nkc,k->nc", _unit_gradient(layout._rects, pts), weights)
    return pts, phi, e


def total_dc(layout, p):
    """DC potential (V) and field (V/m) of the full layout by superposition."""
    pts, phi, e = _weighted(layout, p, layout._voltages)
    if np.asarray(p).ndim == 1:
        return phi[0], e[0]
    return phi, e


def group_field(layout, group_names, p, volts=1.0):
    """Potential/field with ``volts`` on the named groups and 0 elsewhere."""
    names = {group_names} if isinstance(group_names, str) else set(group_names)
    missing = names - set(layout.groups())
    if missing:
        raise ConfigError(f"unknown electrode groups: {sorted(missing)}")
    w = np.array([volts if pa.group in names else 0.0 for pa in layout.patches])
    pts, phi, e = _weighted(layout, p, w)
    if np.asarray(p).ndim == 1:
        return phi[0], e[0]
    return phi, e


def rf_field(layout, p):
    """Amplitude vector (V/m, zero-to-peak) of the RF field."""
    w = np.where(layout._rf_mask, layout.rf_amplitude, 0.0)
    pts, _, e = _weighted(layout, p, w)
    return e[0] if np.asarray(p).ndim == 1 else e


def pseudopotential(layout, species, p):
    """Ponderomotive potential (eV): Q^2 |E_rf|^2 / (4 m Omega^2) / e."""
    e = np.atleast_2d(rf_field(layout, p))
    e2 = np.sum(e * e, axis=-1)
    u = species.charge**2 * e2 / (4.0 * species.mass * layout.rf_frequency**2)
    phi = u / E_CHARGE
    return phi[0] if np.asarray(p).ndim == 1 else phi


def _pseudo_energy(layout, species, p):
    """Pseudopotential energy in joules (vectorized, no FieldPoint overhead)."""
    e = np.atleast_2d(rf_field(layout, p))
    e2 = np.sum(e * e, axis=-1)
    return species.charge**2 * e2 / (4.0 * species.mass * layout.rf_frequency**2)


def total_energy(layout, species, p):
    """Static energy (J) seen by a slow ion: e*phi_dc + pseudopotential."""
    pts = _check_points(p)
    u = _pseudo_energy(layout, species, pts)
    if np.any(layout._voltages != 0.0):
        phi = _unit_potential(layout._rects, pts) @ layout._voltages
        u = u + species.charge * phi
    return u[0] if np.asarray(p).ndim == 1 else u


@dataclass(frozen=True)
class FieldPoint:
    """DC and RF field data at one point."""

    position: np.ndarray
    dc_potential: float          # V
    dc_field: np.ndarray         # V/m
    rf_field_amplitude: np.ndarray  # V/m zero-to-peak
    pseudopotential: float       # eV


def evaluate(layout, species, p):
    """Full FieldPoint at a single position."""
    p = np.asarray(p, dtype=float)
    phi, e = total_dc(layout, p)
    erf = rf_field(layout, p)
    return FieldPoint(
        position=p,
        dc_potential=float(phi),
        dc_field=e,
        rf_field_amplitude=erf,
        pseudopotential=float(pseudopotential(layout, species, p)),
    )


def field_map(layout, species, points):
    """Arrays (phi_dc, E, phips_eV) over points, for export or plotting."""
    pts = _check_points(points)
    phi, e = total_dc(layout, pts)
    phips = pseudopotential(layout, species, pts)
    return phi, e, phips


def export_field_map(layout, species, points, path):
    """CSV export with header x,y,z,phi_dc,Ex,Ey,Ez,phips_eV."""
    pts = _check_points(points)
    phi, e, phips = field_map(layout, species, pts)
    data = np.column_stack([pts, phi, e, phips])
    header = "x,y,z,phi_dc,Ex,Ey,Ez,phips_eV"
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.12g")


# ---------------------------------------------------------------------------
# RF null and characterization


def _rf_jacobian(layout, p, step=1e-7):
    """d E_rf_i / d x_j by central differences of the analytic field."""
    pts = []
    for j in range(3):
        dp = np.zeros(3)
        dp[j] = step
        pts.append(p + dp)
        pts.append(p - dp)
    e = rf_field(layout, np.array(pts))
    jac = np.empty((3, 3))
    for j in range(3):
        jac[:, j] = (e[2 * j] - e[2 * j + 1]) / (2.0 * step)
    return jac


def _geometry_scale(layout):
    rf_rects = layout._rects[layout._rf_mask]
    return float(np.median(np.abs(rf_rects[:, 2:4]).mean(axis=1)))


def find_rf_null(layout, seed=None, tol=NULL_FIELD_TOL, max_iter=80):
    """Locate a zero of |E_rf| above the plane.

    Gauss-Newton on the field vector from several seed heights on the layout
    midline; the rank-deficient axial direction is handled by the
    least-squares step. Raises ConvergenceError (with the best residual) if
    no start reaches ``tol``.
    """
    rf_rects = layout._rects[layout._rf_mask]
    x_mid = float(rf_rects[:, :2].mean())
    y_mid = float(rf_rects[:, 2:4].mean())
    scale = _geometry_scale(layout)
    if seed is not None:
        seeds = [np.asarray(seed, dtype=float)]
    else:
        seeds = [np.array([x_mid, y_mid, f * scale])
                 for f in (0.8, 0.5, 1.2, 0.3, 2.0)]

    best = None
    best_res = np.inf
    for p0 in seeds:
        p = p0.copy()
        for _ in range(max_iter):
            e = rf_field(layout, p)
            res = float(np.linalg.norm(e))
            if res < best_res:
                best_res, best = res, p.copy()
            if res < tol:
                return p
            jac = _rf_jacobian(layout, p, step=max(1e-9, 1e-4 * p[2]))
            step, *_ = np.linalg.lstsq(jac, -e, rcond=1e-12)
            nstep = np.linalg.norm(step)
            limit = 0.5 * p[2]
            if nstep > limit:
                step *= limit / nstep
            while p[2] + step[2] <= 0:
                step *= 0.5
            p = p + step
        e = rf_field(layout, p)
        if np.linalg.norm(e) < tol:
            return p
    raise ConvergenceError(
        f"RF null search did not reach |E| < {tol:g} V/m "
        f"(best residual {best_res:.3g} V/m)",
        residual=best_res, best=best)


def _energy_hessian(layout, species, p, step=1e-7):
    """3x3 Hessian of the static energy by central differences."""
    pts = [p]
    for i in range(3):
        for s in (+1, -1):
            d = np.zeros(3)
            d[i] = s * step
            pts.append(p + d)
    pairs = [(0, 1), (0, 2), (1, 2)]
    for i, j in pairs:
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            d = np.zeros(3)
            d[i], d[j] = si * step, sj * step
            pts.append(p + d)
    u = total_energy(layout, species, np.array(pts))
    h = np.empty((3, 3))
    u0 = u[0]
    for i in range(3):
        up, um = u[1 + 2 * i], u[2 + 2 * i]
        h[i, i] = (up - 2.0 * u0 + um) / step**2
    base = 7
    for k, (i, j) in enumerate(pairs):
        upp, upm, ump, umm = u[base + 4 * k: base + 4 * k + 4]
        h[i, j] = h[j, i] = (upp - upm - ump + umm) / (4.0 * step**2)
    return h


def _energy_gradient(layout, species, p, step=1e-8):
    pts = []
    for i in range(3):
        for s in (+1, -1):
            d = np.zeros(3)
            d[i] = s * step
            pts.append(p + d)
    u = total_energy(layout, species, np.array(pts))
    return np.array([(u[2 * i] - u[2 * i + 1]) / (2.0 * step) for i in range(3)])


def _minimize_energy(layout, species, p0, max_iter=60, gtol_rel=1e-9):
    """Damped Newton descent of the static energy from p0."""
    p = np.asarray(p0, dtype=float).copy()
    u_prev = float(total_energy(layout, species, p))
    g0 = None
    for _ in range(max_iter):
        g = _energy_gradient(layout, species, p)
        if g0 is None:
            g0 = max(np.linalg.norm(g), 1e-30)
        if np.linalg.norm(g) < gtol_rel * g0:
            return p
        h = _energy_hessian(layout, species, p)
        try:
            step = np.linalg.solve(h + 1e-12 * np.eye(3) * np.trace(h), -g)
        except np.linalg.LinAlgError:
            step = -g / np.linalg.norm(g) * 1e-7
        if step @ g > 0:     # not a descent direction; fall back to gradient
            step = -g / np.linalg.norm(g) * min(np.linalg.norm(step), 1e-6)
        alpha = 1.0
        for _ in range(30):
            trial = p + alpha * step
            if trial[2] > 0:
                u_trial = float(total_energy(layout, species, trial))
                if u_trial <= u_prev:
                    p, u_prev = trial, u_trial
                    break
            alpha *= 0.5
        else:
            return p
    return p


@dataclass(frozen=True)
class TrapCharacterization:
    """Operating point of a layout: null, axes, secular frequencies, q, depth.

    ``axes`` rows are unit vectors [axial, radial_1, radial_2];
    ``omega`` and ``mathieu_q_axes`` are aligned with those rows.
    ``mathieu_q_axes`` keeps the signed per-axis values (axial entry ~ 0);
    ``mathieu_q`` is the usual magnitude. ``depth`` is in eV along the weak
    radial escape direction away from the chip.
    """

    null_position: np.ndarray
    minimum_position: np.ndarray
    axes: np.ndarray
    omega: np.ndarray
    mathieu_q_axes: np.ndarray
    mathieu_q: float
    depth: float
    rf_field_residual: float

    @property
    def omega_radial(self):
        return float(self.omega[1]), float(self.omega[2])

    @property
    def omega_axial(self):
        return float(self.omega[0])


def trap_depth(layout, species, p_min, direction, n_steps=400, max_range=None):
    """Escape-path barrier (eV) along ``direction`` with transverse relaxation.

    Marches away from the minimum in fixed steps; at each step the energy is
    minimized in the plane orthogonal to the march direction (trust region
    around the previous transverse point), tracing the minimum-energy escape
    path. Depth = path maximum - minimum.
    """
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    if direction[2] < 0:
        direction = -direction
    # orthonormal transverse frame
    t1 = np.cross(direction, [1.0, 0.0, 0.0])
    if np.linalg.norm(t1) < 1e-8:
        t1 = np.cross(direction, [0.0, 1.0, 0.0])
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(direction, t1)

    h = p_min[2]
    if max_range is None:
        max_range = 8.0 * h
    ds = max_range / n_steps
    u0 = float(total_energy(layout, species, p_min))
    u_max = u0
    t = np.zeros(2)
    drop_trigger = None
    for k in range(1, n_steps + 1):
        s = k * ds
        base = p_min + s * direction

        def f(tv):
            q = base + tv[0] * t1 + tv[1] * t2
            if q[2] <= 0:
                return 1e6 * abs(u0 if u0 != 0.0 else 1.0) * (1.0 - q[2] / h)
            return float(total_energy(layout, species, q))

        r = optimize.minimize(
            f, t, method="L-BFGS-B",
            bounds=[(t[0] - 0.5 * h, t[0] + 0.5 * h),
                    (t[1] - 0.5 * h, t[1] + 0.5 * h)])
        t = r.x
        u = r.fun
        if u > u_max:
            u_max = u
        if drop_trigger is None and u_max > u0:
            drop_trigger = u0 + 0.5 * (u_max - u0)
        if drop_trigger is not None and u < drop_trigger and u_max > u0:
            break
    return (u_max - u0) / E_CHARGE


def characterize(layout, species, dc_voltages=None, with_depth=True):
    """Trap operating point: null, secular frequencies, Mathieu q, depth.

    ``dc_voltages`` (group -> V) is applied on top of the stored layout
    voltages. Raises UnstableOperatingPointError when the static energy has no
    positive-definite curvature at the minimum or q exceeds the stability
    bound.
    """
    lay = layout.with_voltages(dc_voltages) if dc_voltages else layout
    null = find_rf_null(lay)
    res = float(np.linalg.norm(rf_field(lay, null)))

    p_min = null
    if np.any(lay._voltages != 0.0):
        p_min = _minimize_energy(lay, species, null)

    # Mathieu parameters from the RF-field Jacobian at the null
    jac = _rf_jacobian(lay, null)
    jac = 0.5 * (jac + jac.T)
    lam, vec = np.linalg.eigh(jac)
    order = np.argsort(np.abs(lam))          # axial (smallest |gradient|) first
    lam, vec = lam[order], vec[:, order]
    q_axes = 2.0 * species.charge * lam / (species.mass * lay.rf_frequency**2)
    axes = vec.T.copy()
    for i in range(3):                       # fix sign convention
        j = int(np.argmax(np.abs(axes[i])))
        if axes[i, j] < 0:
            axes[i] = -axes[i]
    q = float(np.max(np.abs(q_axes)))
    if q >= MATHIEU_Q_MAX:
        raise UnstableOperatingPointError(
            f"Mathieu q = {q:.3f} outside the lowest stability region")

    hess = _energy_hessian(lay, species, p_min)
    curv = np.array([axes[i] @ hess @ axes[i] for i in range(3)])
    lam_h = np.linalg.eigvalsh(hess)
    tol = 1e-6 * np.max(np.abs(lam_h))
    if lam_h[0] < -tol or np.any(curv[1:] <= 0):
        raise UnstableOperatingPointError(
            "static energy has no stable minimum (saddle operating point)")
    omega = np.sqrt(np.maximum(curv, 0.0) / species.mass)

    depth = float("nan")
    if with_depth:
        # weak radial axis pointing away from the surface
        i_rad = 1 if abs(axes[1][2]) >= abs(axes[2][2]) else 2
        if omega[1] != omega[2]:
            i_weak = 1 if omega[1] < omega[2] else 2
            # prefer the weaker axis unless it is purely in-plane
            if abs(axes[i_weak][2]) > 0.1:
                i_rad = i_weak
        depth = trap_depth(lay, species, p_min, axes[i_rad])

    return TrapCharacterization(
        null_position=null,
        minimum_position=p_min,
        axes=axes,
        omega=omega,
        mathieu_q_axes=q_axes,
        mathieu_q=q,
        depth=depth,
        rf_field_residual=res,
    )


# ---------------------------------------------------------------------------
# periodic array potential


@dataclass(frozen=True)
class PeriodicPotentialFit:
    """Sampled axial array potential and its cosine + polynomial fit."""

    x: np.ndarray            # sample positions (m)
    phi: np.ndarray          # potential (V)
    model: AxialPotentialModel
    residual_rms: float      # V
    height: float            # m

    @property
    def period(self):
        return self.model.period

    @property
    def amplitude_v(self):
        return self.model.amplitude / E_CHARGE


INNER_GROUP = "array_inner"
OUTER_GROUPS = ("array_outer_top", "array_outer_bottom")


def _array_period_hint(layout):
    idx = layout.groups().get(INNER_GROUP)
    if not idx:
        raise ConfigError(f"layout has no {INNER_GROUP!r} electrode group")
    centers = sorted(0.5 * (layout.patches[i].x1 + layout.patches[i].x2)
                     for i in idx)
    if len(centers) < 2:
        raise ConfigError("periodic electrode group needs at least two fingers")
    return float(np.median(np.diff(centers)))


def periodic_axial_potential(layout, inner_v, outer_v, height,
                             n_periods=8, samples=1024, residual_warn=0.02):
    """Axial potential of the periodic electrodes alone, with cosine fit.

    Samples phi(x, 0, height) produced by the inner electrode at ``inner_v``
    and the outer pair at ``outer_v`` (all other electrodes grounded), then
    fits A*cos(2 pi x/d + phase) plus a quartic background. The returned
    AxialPotentialModel is in energy units for a singly charged ion.
    """
    d_hint = _array_period_hint(layout)
    groups = layout.groups()
    for g in OUTER_GROUPS:
        if g not in groups:
            raise ConfigError(f"layout has no {g!r} electrode group")
    w = np.zeros(len(layout.patches))
    for i, p in enumerate(layout.patches):
        if p.group == INNER_GROUP:
            w[i] = inner_v
        elif p.group in OUTER_GROUPS:
            w[i] = outer_v
    span = 0.5 * n_periods * d_hint
    x = np.linspace(-span, span, samples)
    pts = np.column_stack([x, np.zeros_like(x), np.full_like(x, height)])
    _, phi, _ = _weighted(layout, pts, w)

    # polynomial background + FFT seed for the oscillating part
    pbg = np.polynomial.Polynomial.fit(x, phi, 4)
    resid = phi - pbg(x)
    amp0 = 0.5 * float(np.ptp(resid))
    if amp0 < 1e-15:
        model = AxialPotentialModel(
            coeffs=tuple(E_CHARGE * c for c in pbg.convert().coef),
            amplitude=0.0, period=d_hint, phase=0.0)
        return PeriodicPotentialFit(x=x, phi=phi, model=model,
                                    residual_rms=float(np.std(resid)),
                                    height=height)

    spec = np.fft.rfft(resid * np.hanning(len(resid)))
    freqs = np.fft.rfftfreq(len(x), d=x[1] - x[0])
    k_pk = int(np.argmax(np.abs(spec[1:]))) + 1
    d0 = 1.0 / freqs[k_pk]
    ph0 = float(np.angle(spec[k_pk]))

    def fitfun(xv, a, d, ph, c0, c1, c2, c3, c4):
        return (a * np.cos(2.0 * np.pi * xv / d + ph)
                + c0 + c1 * xv + c2 * xv**2 + c3 * xv**3 + c4 * xv**4)

    c = pbg.convert().coef
    c = np.pad(c, (0, 5 - len(c)))
    p0 = np.array([amp0, d0, ph0, *c])
    scale = np.maximum(np.abs(p0), [amp0, d0, 1.0, 1e-12, 1e-9, 1e-6, 1e-3, 1.0])
    fit = optimize.least_squares(
        lambda prm: fitfun(x, *prm) - phi, p0, x_scale=scale, method="lm")
    popt = fit.x
    a, d, ph = popt[0], abs(popt[1]), popt[2]
    if popt[1] < 0:
        ph = -ph
    if a < 0:
        a, ph = -a, ph + np.pi
    ph = float(np.remainder(ph + np.pi, 2.0 * np.pi) - np.pi)

    fit = fitfun(x, *popt)
    rms = float(np.sqrt(np.mean((phi - fit) ** 2)))
    if rms > residual_warn * max(a, amp0):
        warnings.warn(
            f"periodic potential fit residual {rms:.3g} V exceeds "
            f"{residual_warn:.0%} of the modulation amplitude", stacklevel=2)

    model = AxialPotentialModel(
        coeffs=tuple(E_CHARGE * float(ck) for ck in popt[3:8]),
        amplitude=E_CHARGE * float(a),
        period=float(d),
        phase=ph,
    )
    return PeriodicPotentialFit(x=x, phi=phi, model=model,
                                residual_rms=rms, height=height)


def array_vertical_field(layout, inner_v, outer_v, point):
    """E_z at ``point`` produced by the periodic electrodes alone (V/m)."""
    w = np.zeros(len(layout.patches))
    for i, p in enumerate(layout.patches):
        if p.group == INNER_GROUP:
            w[i] = inner_v
        elif p.group in OUTER_GROUPS:
            w[i] = outer_v
    _, _, e = _weighted(layout, np.asarray(point, dtype=float), w)
    return float(e[0, 2])
