"""1D Coulomb crystals: equilibria, normal modes, lattice splitting, loading
statistics.

The chain energy is

    U(z) = sum_i V(z_i) + sum_{i<j} e^2 / (4 pi eps0 |z_i - z_j|)

with V an AxialPotentialModel (energy units). Equilibria come from a damped
Newton descent with an ordering-preserving line search; splitting tracks the
minimum quasi-statically while the lattice amplitude is ramped. Loading
statistics emulate repeated splitting of loaded samples with a controllable
fraction of dark (off-resonant isotope) ions that occupy chain positions but
are never counted.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .axial import AxialPotentialModel
from .constants import COULOMB, YB174
from .errors import (
    ConvergenceError,
    NonAdiabaticRampError,
    PhysicsError,
    UnphysicalConfigurationError,
)

MIN_PAIR_DISTANCE = 1e-9     # m; closer approaches are unphysical
GRAD_TOL_REL = 1e-12
MAX_NEWTON_ITER = 300


# ---------------------------------------------------------------------------
# energy and derivatives


def chain_energy(z, potential):
    z = np.asarray(z, dtype=float)
    u = float(np.sum(potential.energy(z)))
    dz = z[:, None] - z[None, :]
    iu = np.triu_indices(len(z), k=1)
    u += float(np.sum(COULOMB / np.abs(dz[iu])))
    return u

def chain_gradient(z, potential):
    z = np.asarray(z, dtype=float)
    g = potential.denergy(z).copy()
    dz = z[:, None] - z[None, :]
    np.fill_diagonal(dz, np.inf)
    g -= COULOMB * np.sum(np.sign(dz) / dz**2, axis=1)
    return g

def chain_hessian(z, potential):
    z = np.asarray(z, dtype=float)
    n = len(z)
    dz = z[:, None] - z[None, :]
    np.fill_diagonal(dz, np.inf)
    off = -2.0 * COULOMB / np.abs(dz) ** 3
    h = off.copy()
    np.fill_diagonal(h, potential.d2energy(z) - np.sum(off, axis=1))
    return h


# ---------------------------------------------------------------------------
# equilibrium


@dataclass(frozen=True)
class ChainConfig:
    """Converged chain: ordered positions plus convergence metadata."""

    positions: np.ndarray        # (n,), strictly increasing, m
    species: tuple               # IonSpecies per ion
    potential: AxialPotentialModel
    grad_norm: float             # J/m at the solution
    iterations: int
    energy_trace: tuple = field(default=(), repr=False)

    @property
    def n_ions(self):
        return len(self.positions)

    def energy(self):
        return chain_energy(self.positions, self.potential)


def coulomb_length(potential, species):
    """Length scale (2 e^2/(4 pi eps0 m omega^2))^(1/3) of the harmonic part."""
    k2 = potential.coeffs[2] if len(potential.coeffs) > 2 else 0.0
    if k2 <= 0:
        return 1e-5
    return (COULOMB / k2) ** (1.0 / 3.0)


def _initial_positions(n, potential, species):
    ell = coulomb_length(potential, species)
    # center on the single-particle minimum of the bare potential
    span = 4.0 * ell * max(n, 2) ** (2.0 / 3.0)
    zs = np.linspace(-span, span, 4001)
    z0 = zs[int(np.argmin(potential.energy(zs)))]
    half = 0.5 * ell * n ** (2.0 / 3.0)
    if n == 1:
        return np.array([z0])
    return z0 + np.linspace(-half, half, n)


def _ordered(z):
    return bool(np.all(np.diff(z) > 0))


def equilibrium(n_ions, potential, species=YB174, initial=None,
                max_iter=MAX_NEWTON_ITER):
    """Minimum-energy configuration of n ions in the given axial potential.

    Damped Newton with an ordering-preserving, monotone line search;
    Levenberg regularization (and finally a plain gradient step) when the
    Hessian is not positive definite. Deterministic: the initial guess is an
    equally spaced chain unless ``initial`` is given.
    """
    if n_ions < 1:
        raise PhysicsError("need at least one ion")
    per_ion = (tuple(species) if isinstance(species, (list, tuple))
               else (species,) * n_ions)
    if len(per_ion) != n_ions:
        raise PhysicsError("species list must match n_ions")
    z = (np.array(initial, dtype=float) if initial is not None
         else _initial_positions(n_ions, potential, per_ion[0]))
    if not _ordered(z) and n_ions > 1:
        raise PhysicsError("initial positions must be strictly increasing")

    ell = coulomb_length(potential, per_ion[0])
    f_char = max(COULOMB / ell**2, float(np.max(np.abs(
        chain_gradient(z, potential)))))
    gtol = GRAD_TOL_REL * f_char

    u = chain_energy(z, potential)
    trace = [u]
    for it in range(1, max_iter + 1):
        g = chain_gradient(z, potential)
        gn = float(np.max(np.abs(g)))
        if gn < gtol:
            return ChainConfig(positions=z, species=per_ion,
                               potential=potential, grad_norm=gn,
                               iterations=it - 1, energy_trace=tuple(trace))
        h = chain_hessian(z, potential)
        step = None
        lam = 0.0
        scale = float(np.mean(np.abs(np.diag(h)))) or 1.0
        for _ in range(12):
            try:
                step = np.linalg.solve(h + lam * np.eye(n_ions), -g)
                if step @ g < 0:
                    break
            except np.linalg.LinAlgError:
                pass
            lam = scale * 10.0 ** (-8 + _)
            step = None
        if step is None:
            step = -g / np.linalg.norm(g) * ell * 1e-3

        alpha, accepted = 1.0, False
        for _ in range(60):
            zt = z + alpha * step
            if n_ions == 1 or _ordered(zt):
                if n_ions > 1 and np.min(np.diff(zt)) < MIN_PAIR_DISTANCE:
                    raise UnphysicalConfigurationError(
                        "pair distance collapsed below 1 nm")
                ut = chain_energy(zt, potential)
                if ut <= u:
                    z, u, accepted = zt, ut, True
                    trace.append(u)
                    break
            alpha *= 0.5
        if not accepted:
            gn = float(np.max(np.abs(chain_gradient(z, potential))))
            if gn < 1e3 * gtol:     # stalled by rounding at the minimum
                return ChainConfig(positions=z, species=per_ion,
                                   potential=potential, grad_norm=gn,
                                   iterations=it, energy_trace=tuple(trace))
            raise ConvergenceError(
                "line search failed before reaching gradient tolerance",
                residual=gn)
    gn = float(np.max(np.abs(chain_gradient(z, potential))))
    raise ConvergenceError(
        f"equilibrium not converged in {max_iter} iterations", residual=gn)


# ---------------------------------------------------------------------------
# normal modes


def normal_modes(chain, tol=1e-8):
    """Axial normal modes of a converged chain.

    Returns (omega, vectors): frequencies (rad/s, ascending) and mass-weighted
    eigenvectors as columns. Raises PhysicsError for a saddle configuration.
    """
    z = chain.positions
    h = chain_hessian(z, chain.potential)
    masses = np.array([s.mass for s in chain.species])
    msqrt = np.sqrt(masses)
    d = h / np.outer(msqrt, msqrt)
    w2, vec = np.linalg.eigh(d)
    scale = max(abs(w2[0]), abs(w2[-1]), 1e-300)
    if w2[0] < -tol * scale:
        raise PhysicsError("saddle configuration: negative mode curvature")
    return np.sqrt(np.clip(w2, 0.0, None)), vec


# ---------------------------------------------------------------------------
# lattice splitting


def ramp_schedule(a_start, a_end, steps=200):
    """Linear amplitude schedule (J) with the given number of steps."""
    return np.linspace(a_start, a_end, steps)


def up_down(a_max, steps=200):
    up = np.linspace(0.0, a_max, steps // 2)
    return np.concatenate([up, up[::-1]])


@dataclass(frozen=True)
class SplitResult:
    chain: ChainConfig           # configuration at the end of the ramp
    assignment: np.ndarray       # lattice-well index per ion
    occupancy: dict              # well index -> ion count (bright-insensitive)


def split(chain, amplitudes, count_at_max=True):
    """Quasi-static splitting of a chain by ramping the lattice amplitude.

    Re-minimizes at every step of ``amplitudes`` (J), seeding from the
    previous configuration. The site assignment is the nearest lattice well
    per ion, taken at the maximum amplitude of the ramp (where the array is
    deepest) unless ``count_at_max`` is false, in which case the final step is
    used. Deterministic for a fixed initial chain.
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    if amplitudes.size == 0:
        raise PhysicsError("empty ramp schedule")
    current = chain
    assign = None
    k_max = int(np.argmax(amplitudes))
    for k, a in enumerate(amplitudes):
        model = current.potential.with_amplitude(a)
        try:
            current = equilibrium(chain.n_ions, model, chain.species,
                                  initial=current.positions)
        except (ConvergenceError, UnphysicalConfigurationError) as exc:
            raise NonAdiabaticRampError(
                f"quasi-static tracking failed at ramp step {k}: {exc}",
                step=k) from exc
        if not (_ordered(current.positions) or chain.n_ions == 1):
            raise NonAdiabaticRampError(
                f"ion ordering lost at ramp step {k}", step=k)
        if count_at_max and k == k_max and a > 0:
            assign = current.potential.nearest_well_index(current.positions)
    if assign is None:
        model = current.potential
        if model.amplitude == 0.0:
            model = model.with_amplitude(np.max(np.abs(amplitudes)) or 1.0)
        assign = model.nearest_well_index(current.positions)
    occupancy = {int(w): int(c) for w, c in
                 zip(*np.unique(assign, return_counts=True))}
    return SplitResult(chain=current, assignment=assign, occupancy=occupancy)


# ---------------------------------------------------------------------------
# loading statistics


def fano(samples):
    """Variance-to-mean ratio (unbiased variance) of a count sample."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise PhysicsError("Fano factor needs at least two samples")
    m = float(np.mean(x))
    if m == 0.0:
        raise PhysicsError("Fano factor undefined for zero mean")
    return float(np.var(x, ddof=1) / m)


@dataclass(frozen=True)
class LoadingStats:
    """Per-site occupation histograms over repeated load/split trials."""

    sites: np.ndarray            # well indices, sorted
    counts: np.ndarray           # (n_trials, n_sites) bright-ion counts
    n_trials: int
    seed: int

    @property
    def mean(self):
        return self.counts.mean(axis=0)

    @property
    def variance(self):
        return self.counts.var(axis=0, ddof=1)

    @property
    def fano(self):
        m = self.mean
        out = np.full_like(m, np.nan)
        nz = m > 0
        out[nz] = self.variance[nz] / m[nz]
        return out

    def histograms(self):
        """site -> {count: trials} occupation histograms."""
        out = {}
        for j, s in enumerate(self.sites):
            vals, cnt = np.unique(self.counts[:, j], return_counts=True)
            out[int(s)] = {int(v): int(c) for v, c in zip(vals, cnt)}
        return out

    def best_site(self):
        """Site with the smallest Fano factor among occupied sites."""
        f = self.fano
        ok = ~np.isnan(f)
        j = int(np.argmin(np.where(ok, f, np.inf)))
        return int(self.sites[j]), float(f[j])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["site", "mean", "variance", "fano"])
            for j, s in enumerate(self.sites):
                w.writerow([int(s), f"{self.mean[j]:.12g}",
                            f"{self.variance[j]:.12g}",
                            f"{self.fano[j]:.12g}"])

    def to_json(self, path):
        doc = {
            "n_trials": self.n_trials,
            "seed": self.seed,
            "sites": [int(s) for s in self.sites],
            "histograms": {str(k): v for k, v in self.histograms().items()},
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)


def loading_monte_carlo(mean_total, isotopic_purity, potential, amplitudes,
                        n_trials, seed, species=YB174, load="poisson",
                        impurity="binomial"):
    """Monte Carlo of array loading by repeated chain splitting.

    Per trial: draw a total ion number (``load``: "poisson" around
    ``mean_total``, or "fixed"), mark dark impurity ions (``impurity``:
    "binomial" marks each ion independently with probability 1 - purity;
    "fraction" fixes the dark count at round((1-purity) N) per trial, the
    composition of a prepared sample whose dark ions reshuffle between
    splittings), equilibrate, split along ``amplitudes`` and count bright
    ions per site. Dark ions occupy chain positions but are never counted.

    Site totals depend only on the total ion number (equilibria are
    mass-independent), so splits are cached per N; results are identical to
    the trial-by-trial computation.
    """
    if not 0.0 <= isotopic_purity <= 1.0:
        raise PhysicsError("purity must lie in [0, 1]")
    if n_trials < 1:
        raise PhysicsError("need at least one trial")
    if load not in ("poisson", "fixed"):
        raise PhysicsError(f"unknown load mode {load!r}")
    if impurity not in ("binomial", "fraction"):
        raise PhysicsError(f"unknown impurity mode {impurity!r}")

    rng = np.random.default_rng(seed)
    q_dark = 1.0 - isotopic_purity
    split_cache = {}
    trial_rows = []
    all_sites = set()

    for _ in range(n_trials):
        n = int(rng.poisson(mean_total)) if load == "poisson" else int(round(mean_total))
        if n == 0:
            trial_rows.append({})
            continue
        if n not in split_cache:
            chain = equilibrium(n, potential, species)
            split_cache[n] = split(chain, amplitudes).assignment
        assign = split_cache[n]
        if impurity == "binomial":
            dark = rng.random(n) < q_dark
        else:
            k = int(round(q_dark * n))
            dark = np.zeros(n, dtype=bool)
            if k:
                dark[rng.choice(n, size=k, replace=False)] = True
        bright_sites, counts = np.unique(assign[~dark], return_counts=True)
        row = {int(s): int(c) for s, c in zip(bright_sites, counts)}
        all_sites.update(int(s) for s in assign)
        trial_rows.append(row)

    sites = np.array(sorted(all_sites), dtype=int)
    counts = np.zeros((n_trials, len(sites)), dtype=int)
    index = {int(s): j for j, s in enumerate(sites)}
    for i, row in enumerate(trial_rows):
        for s, c in row.items():
            counts[i, index[s]] = c
    return LoadingStats(sites=sites, counts=counts, n_trials=n_trials,
                        seed=seed)


def iid_control(mean_total, n_sites, n_trials, seed):
    """Poisson reference: total load split over sites i.i.d. (no interactions).

    Bypasses the splitting step entirely; per-site counts are then exactly
    Poisson and the Fano factor is 1.
    """
    rng = np.random.default_rng(seed)
    sites = np.arange(n_sites) - n_sites // 2
    counts = np.empty((n_trials, n_sites), dtype=int)
    for i in range(n_trials):
        n = int(rng.poisson(mean_total))
        counts[i] = np.bincount(rng.integers(0, n_sites, size=n),
                                minlength=n_sites)
    return LoadingStats(sites=sites, counts=counts, n_trials=n_trials,
                        seed=seed)
