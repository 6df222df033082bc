"""Free massless scalar field on a time-compactified cylinder.

The field obeys ``phi_tt = phi_xx`` (c = 1) on a spatial circle of length
``L = M * T``.  Identifying ``t`` with ``t + T`` forces every solution to be
T-periodic in time, which on the spectral side keeps only wavenumbers
``k = 2*pi*n / T``, i.e. grid mode indices ``m`` divisible by ``M``.

Spectral conventions
--------------------
``phi_hat = fft(phi, norm="ortho")`` (unitary DFT) with ``k_m = 2*pi*m / L``.
Each nonzero mode evolves as::

    phi_hat(k, t) = F(k) exp(-i k t) + G(k) exp(+i k t)

so ``F = (phi_hat + i phi_t_hat / k) / 2`` and ``G = (phi_hat - i phi_t_hat / k) / 2``.
``F`` carries right-movers and ``G`` left-movers; real fields satisfy
``F(-k) = conj(F(k))`` and ``G(-k) = conj(G(k))``.  The k = 0 mode is the pair
(mean of phi, mean of phi_t) and evolves as ``mean + velocity * t``.

Arrays are kept in numpy FFT order; :attr:`SpectralState.modes` gives the
signed mode index of each slot.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .constraints import (
    ConstraintFunctional,
    TrajectoryProbe,
    uniform_times,
)
from .errors import NumericalError, UsageError

# Guards the relative norms against 0/0 on the zero state.
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class GridSpec:
    """Spatial circle of length ``L = M*T`` sampled at ``N`` points."""

    T: float = 1.0
    M: int = 4
    N: int = 256

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise UsageError(f"time circumference T must be positive, got {self.T!r}")
        if int(self.M) != self.M or self.M < 1:
            raise UsageError(f"repetition factor M must be a positive integer, got {self.M!r}")
        if int(self.N) != self.N or self.N < 1 or (int(self.N) & (int(self.N) - 1)):
            raise UsageError(f"N must be a power of two, got {self.N!r}")
        if self.N < 4 * self.M:
            raise UsageError(f"N={self.N} cannot resolve the allowed modes; need N >= 4*M={4 * self.M}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", float(self.T))

    @property
    def L(self) -> float:
        return self.M * self.T

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    @property
    def modes(self) -> np.ndarray:
        """Signed mode indices in FFT order (``-N/2 .. N/2-1``)."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N).astype(int)

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * self.modes / self.L

    @property
    def allowed(self) -> np.ndarray:
        """Mask of modes compatible with time period T."""
        return self.modes % self.M == 0


def _as_samples(values, n, name):
    arr = np.asarray(values, dtype=float)
    if arr.shape == ():
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise UsageError(f"{name} must have {n} samples, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contains non-finite samples")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FieldState:
    """Real-space samples of phi and its time derivative on a grid."""

    grid: GridSpec
    phi: np.ndarray
    phi_t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi", _as_samples(self.phi, self.grid.N, "phi"))
        object.__setattr__(self, "phi_t", _as_samples(self.phi_t, self.grid.N, "phi_t"))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "FieldState":
        return cls(grid, np.zeros(grid.N), np.zeros(grid.N))

    def sample(self, x: float) -> float:
        """Trigonometric interpolation of phi at an arbitrary (wrapped) position."""
        return _trig_interpolate(self.phi, self.grid.L, x)

    def norm(self) -> float:
        return float(math.sqrt(np.sum(self.phi ** 2) + np.sum(self.phi_t ** 2)))

    def to_csv(self, path) -> None:
        """Write ``x,phi,phi_t`` rows with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "phi", "phi_t"])
            for x, p, v in zip(self.grid.x, self.phi, self.phi_t):
                writer.writerow([f"{x:.17g}", f"{p:.17g}", f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path, grid: GridSpec) -> "FieldState":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(grid, data[:, 1], data[:, 2])


def _trig_interpolate(samples, L, x):
    n = samples.size
    c = np.fft.fft(samples) / n
    m = np.fft.fftfreq(n, d=1.0 / n)
    phase = np.exp(2j * np.pi * m * ((x % L) / L))
    if n % 2 == 0:
        # Nyquist term contributes as a cosine so the interpolant stays real.
        nyq = n // 2
        total = np.sum(c * phase) - c[nyq] * phase[nyq]
        total += c[nyq].real * np.cos(np.pi * n * (x % L) / L)
        return float(total.real)
    return float(np.sum(c * phase).real)


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Mode amplitudes of a solution: right-movers ``F_hat``, left-movers ``G_hat``.

    ``F_hat[0]`` and ``G_hat[0]`` are unused (zero); the k = 0 dynamics live in
    ``zero_mode_mean`` and ``zero_mode_velocity``.
    """

    grid: GridSpec
    F_hat: np.ndarray
    G_hat: np.ndarray
    zero_mode_mean: float = 0.0
    zero_mode_velocity: float = 0.0

    def __post_init__(self):
        for name in ("F_hat", "G_hat"):
            arr = np.asarray(getattr(self, name), dtype=complex).copy()
            if arr.shape != (self.grid.N,):
                raise UsageError(f"{name} must have {self.grid.N} modes")
            if not np.all(np.isfinite(arr)):
                raise NumericalError(f"{name} contains non-finite coefficients")
            arr[0] = 0.0
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "zero_mode_mean", float(self.zero_mode_mean))
        object.__setattr__(self, "zero_mode_velocity", float(self.zero_mode_velocity))

    @property
    def modes(self) -> np.ndarray:
        return self.grid.modes

    def coefficient_norm(self) -> float:
        return float(math.sqrt(np.sum(np.abs(self.F_hat) ** 2) + np.sum(np.abs(self.G_hat) ** 2)
                               + self.zero_mode_mean ** 2 + self.zero_mode_velocity ** 2))

    def to_dict(self) -> dict:
        g = self.grid
        order = np.argsort(g.modes, kind="stable")
        modes = []
        for i in order:
            m = int(g.modes[i])
            modes.append({
                "m": m,
                "k": float(g.k[i]),
                "Re_F": float(self.F_hat[i].real),
                "Im_F": float(self.F_hat[i].imag),
                "Re_G": float(self.G_hat[i].real),
                "Im_G": float(self.G_hat[i].imag),
            })
        return {
            "T": g.T, "M": g.M, "N": g.N,
            "zero_mode_mean": self.zero_mode_mean,
            "zero_mode_velocity": self.zero_mode_velocity,
            "modes": modes,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralState":
        grid = GridSpec(data["T"], data["M"], data["N"])
        F = np.zeros(grid.N, dtype=complex)
        G = np.zeros(grid.N, dtype=complex)
        for entry in data["modes"]:
            i = entry["m"] % grid.N
            F[i] = complex(entry["Re_F"], entry["Im_F"])
            G[i] = complex(entry["Re_G"], entry["Im_G"])
        return cls(grid, F, G, data.get("zero_mode_mean", 0.0), data.get("zero_mode_velocity", 0.0))


def analyze(f: FieldState) -> SpectralState:
    """Split real-space data into right- and left-moving mode amplitudes."""
    g = f.grid
    phi_hat = np.fft.fft(f.phi, norm="ortho")
    vel_hat = np.fft.fft(f.phi_t, norm="ortho")
    k = g.k
    nz = k != 0
    F = np.zeros(g.N, dtype=complex)
    G = np.zeros(g.N, dtype=complex)
    F[nz] = 0.5 * (phi_hat[nz] + 1j * vel_hat[nz] / k[nz])
    G[nz] = 0.5 * (phi_hat[nz] - 1j * vel_hat[nz] / k[nz])
    return SpectralState(g, F, G, float(np.mean(f.phi)), float(np.mean(f.phi_t)))


def _mode_values(s: SpectralState, t: float):
    k = s.grid.k
    right = s.F_hat * np.exp(-1j * k * t)
    left = s.G_hat * np.exp(1j * k * t)
    phi_hat = right + left
    vel_hat = -1j * k * (right - left)
    root_n = math.sqrt(s.grid.N)
    phi_hat[0] = root_n * (s.zero_mode_mean + s.zero_mode_velocity * t)
    vel_hat[0] = root_n * s.zero_mode_velocity
    return phi_hat, vel_hat


def synthesize(s: SpectralState, t: float = 0.0) -> FieldState:
    """Exact evolution to time ``t``: every mode picks up its own phase."""
    phi_hat, vel_hat = _mode_values(s, float(t))
    phi = np.fft.ifft(phi_hat, norm="ortho").real
    phi_t = np.fft.ifft(vel_hat, norm="ortho").real
    return FieldState(s.grid, phi, phi_t)


def evolve(f: FieldState, t: float) -> FieldState:
    return synthesize(analyze(f), t)


def project_periodic(s: SpectralState) -> SpectralState:
    """Orthogonal projection onto T-periodic solutions.

    Zeroes every mode whose index is not a multiple of ``M`` and the mean
    velocity (``a + b t`` is periodic only for ``b = 0``).
    """
    keep = s.grid.allowed
    return SpectralState(s.grid, np.where(keep, s.F_hat, 0), np.where(keep, s.G_hat, 0),
                         s.zero_mode_mean, 0.0)


def project_field(f: FieldState) -> FieldState:
    return synthesize(project_periodic(analyze(f)), 0.0)


def periodize(f: FieldState) -> FieldState:
    """Sum of the M translates of ``f`` by multiples of T.

    This is ``M`` times the orthogonal projection: the sum keeps the original
    amplitude of an isolated bump, while the projection averages it away.
    """
    p = project_field(f)
    M = f.grid.M
    return FieldState(f.grid, M * p.phi, M * p.phi_t)


def _pair_norm(phi, phi_t):
    return math.sqrt(float(np.sum(phi ** 2)) + float(np.sum(phi_t ** 2)))


def periodicity_residual(s: SpectralState) -> float:
    """Relative mismatch between the solution at t = T and at t = 0."""
    start = synthesize(s, 0.0)
    end = synthesize(s, s.grid.T)
    num = (np.linalg.norm(end.phi - start.phi) + np.linalg.norm(end.phi_t - start.phi_t))
    den = np.linalg.norm(start.phi) + np.linalg.norm(start.phi_t) + _TINY
    return float(num / den)


def spatial_repetition_residual(f: FieldState) -> float:
    """``||phi(x) - phi(x + T)|| / ||phi||`` via a cyclic shift of N/M samples."""
    g = f.grid
    if g.M < 2:
        raise UsageError("spatial repetition needs M >= 2")
    if g.N % g.M:
        raise UsageError(f"N={g.N} is not divisible by M={g.M}; T is not a grid shift")
    shifted = np.roll(f.phi, -(g.N // g.M))
    num = np.linalg.norm(f.phi - shifted)
    if num == 0.0:
        return 0.0
    return float(num / (np.linalg.norm(f.phi) + _TINY))


def support_width(f: FieldState) -> float:
    """Width of the smallest interval, centred on the domain midpoint, holding the data."""
    g = f.grid
    nonzero = (f.phi != 0) | (f.phi_t != 0)
    if not nonzero.any():
        return 0.0
    centre = g.L / 2
    return float(min(2 * (np.max(np.abs(g.x[nonzero] - centre)) + g.dx / 2), g.L))


def locality_window_check(bump: FieldState, window_halfwidth: float) -> float:
    """Sup-norm gap between the periodized bump and the bump near the centre.

    ``bump`` must be compactly supported around the domain midpoint, narrower
    than T, and the window must stay clear of the neighbouring copies.  The
    return value is the largest difference in phi or phi_t over the window;
    for compact data it is at roundoff level.
    """
    g = bump.grid
    w = support_width(bump)
    if w == 0.0:
        return 0.0
    if w >= g.T:
        raise UsageError(f"bump support {w:.6g} must be narrower than T={g.T:.6g}")
    if not window_halfwidth > 0:
        raise UsageError("window half-width must be positive")
    if window_halfwidth + w / 2 >= g.T:
        raise UsageError("window reaches a neighbouring copy of the bump")
    periodic = periodize(bump)
    inside = np.abs(g.x - g.L / 2) <= window_halfwidth
    diff = max(np.max(np.abs(periodic.phi - bump.phi)[inside]),
               np.max(np.abs(periodic.phi_t - bump.phi_t)[inside]))
    return float(diff)


def energy(f: FieldState) -> float:
    """``0.5 * sum(phi_t**2 + phi_x**2) * dx`` with phi_x taken spectrally.

    The gradient term is summed in mode space (Parseval), so the Nyquist mode
    keeps its ``k**2`` weight and exact evolution conserves the total.
    """
    g = f.grid
    phi_hat = np.fft.fft(f.phi, norm="ortho")
    grad2 = float(np.sum(g.k ** 2 * np.abs(phi_hat) ** 2))
    return 0.5 * g.dx * (float(np.sum(f.phi_t ** 2)) + grad2)


def _laplacian_fd(phi, dx):
    return (np.roll(phi, -1) - 2 * phi + np.roll(phi, 1)) / dx ** 2


def evolve_fd(f: FieldState, t: float, cfl: float = 0.5) -> FieldState:
    """Leapfrog integration of ``phi_tt = phi_xx`` with a 3-point Laplacian.

    Independent of the spectral path; second order in dx and dt.  The time
    step is ``cfl * dx`` shrunk slightly so that ``t`` is hit exactly.
    """
    if not (0 < cfl <= 1):
        raise UsageError(f"cfl must lie in (0, 1], got {cfl!r}")
    if not (math.isfinite(t) and t >= 0):
        raise UsageError(f"t must be a finite non-negative time, got {t!r}")
    if t == 0:
        return f
    g = f.grid
    n_steps = max(1, math.ceil(t / (cfl * g.dx)))
    dt = t / n_steps

    prev = f.phi.copy()
    cur = prev + dt * f.phi_t + 0.5 * dt ** 2 * _laplacian_fd(prev, g.dx)
    for _ in range(n_steps - 1):
        prev, cur = cur, 2 * cur - prev + dt ** 2 * _laplacian_fd(cur, g.dx)
    nxt = 2 * cur - prev + dt ** 2 * _laplacian_fd(cur, g.dx)
    phi_t = (nxt - prev) / (2 * dt)
    if not (np.all(np.isfinite(cur)) and np.all(np.isfinite(phi_t))):
        raise NumericalError("finite-difference evolution produced non-finite values")
    return FieldState(g, cur, phi_t)


# ---------------------------------------------------------------------------
# initial data


def smooth_bump(grid: GridSpec, width: float, center: float | None = None,
                amplitude: float = 1.0, moving: str = "static") -> FieldState:
    """C-infinity bump ``exp(1 - 1/(1 - r**2))`` supported on ``|x - center| < width/2``.

    ``moving="right"`` sets ``phi_t = -phi_x`` (a right-moving pulse);
    ``"static"`` leaves the field at rest.
    """
    if not (width > 0 and math.isfinite(width)):
        raise UsageError(f"bump width must be positive, got {width!r}")
    if width > grid.L:
        raise UsageError(f"bump width {width!r} exceeds the domain length {grid.L!r}")
    c = grid.L / 2 if center is None else float(center)
    x = grid.x
    r = 2 * (x - c) / width
    inside = np.abs(r) < 1
    phi = np.zeros(grid.N)
    phi_t = np.zeros(grid.N)
    ri = r[inside]
    core = np.exp(1 - 1 / (1 - ri ** 2))
    phi[inside] = amplitude * core
    if moving == "right":
        dphi_dx = amplitude * core * (-2 * ri / (1 - ri ** 2) ** 2) * (2 / width)
        phi_t[inside] = -dphi_dx
    elif moving != "static":
        raise UsageError(f"unknown bump motion {moving!r}")
    return FieldState(grid, phi, phi_t)


def single_mode(grid: GridSpec, m: int, amplitude: float = 1.0,
                direction: str = "standing") -> FieldState:
    """``amplitude * cos(k_m x)`` at rest, or travelling right/left."""
    k = 2 * np.pi * m / grid.L
    x = grid.x
    phi = amplitude * np.cos(k * x)
    if direction == "standing":
        phi_t = np.zeros(grid.N)
    elif direction == "right":
        phi_t = amplitude * k * np.sin(k * x)
    elif direction == "left":
        phi_t = -amplitude * k * np.sin(k * x)
    else:
        raise UsageError(f"unknown mode direction {direction!r}")
    return FieldState(grid, phi, phi_t)


def random_bandlimited(grid: GridSpec, seed: int, max_mode: int = 8,
                       decay: float = 1.0) -> FieldState:
    """Random smooth data using modes ``|m| <= max_mode`` with ``1/(1+|m|)**decay`` amplitudes."""
    if max_mode >= grid.N // 2:
        raise UsageError("max_mode must be below the Nyquist index")
    rng = np.random.default_rng(seed)
    m = np.arange(1, max_mode + 1)
    weights = 1.0 / (1.0 + m) ** decay
    x = grid.x
    k = 2 * np.pi * m / grid.L
    a, b, c, d = (rng.standard_normal(max_mode) * weights for _ in range(4))
    phase = np.outer(x, k)
    phi = np.cos(phase) @ a + np.sin(phase) @ b + rng.standard_normal()
    phi_t = np.cos(phase) @ (c * k) + np.sin(phase) @ (d * k) + rng.standard_normal()
    return FieldState(grid, phi, phi_t)


# ---------------------------------------------------------------------------
# hooks for the constraint audit


def spectral_trajectory(s: SpectralState, t_end: float, samples: int = 64) -> TrajectoryProbe:
    """Probe of exactly evolved states at ``samples`` uniform times in ``[0, t_end]``."""
    times = uniform_times(t_end, samples)
    return TrajectoryProbe(tuple(times), tuple(synthesize(s, t) for t in times))


def periodic_subspace_constraint() -> ConstraintFunctional:
    """Relative size of the part of a field that is not T-periodic."""

    def raw(f: FieldState) -> float:
        p = project_field(f)
        return _pair_norm(f.phi - p.phi, f.phi_t - p.phi_t)

    def scale(f: FieldState) -> float:
        return f.norm()

    return ConstraintFunctional("periodic-subspace", raw, scale)
