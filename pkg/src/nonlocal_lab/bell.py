"""EPR-Bohm experiment with hidden variables.

Two ingredients of Bell's theorem are kept separate so that either can be
dropped on its own:

* **strong locality** is structural: a :class:`HiddenVariableModel` has a
  response ``response_A(a)`` that never sees ``b`` or the far outcome, and
  likewise for ``B``.  The per-state correlation is the product
  ``A(a, lam) * B(b, lam)``.
* **statistical independence** is a property of the data: it holds when
  ``conditional(a, b)`` returns the same distribution over ``lam`` for every
  setting pair.

Hidden-variable spaces are finite so correlators are exact sums.  Outcome
pairs are indexed ``0 -> +1`` and ``1 -> -1``; joint tables are 2x2 arrays
``p[A_index, B_index]``.

CHSH uses ``S = E(a1,b1) + E(a1,b2) + E(a2,b1) - E(a2,b2)``; setting pairs are
always ordered ``(a1,b1), (a1,b2), (a2,b1), (a2,b2)``.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import UsageError

TWO_PI = 2 * math.pi
OUTCOMES = (1, -1)
CANONICAL_MENU = (0.0, math.pi / 2, math.pi / 4, -math.pi / 4)
PAIR_LABELS = ("a1b1", "a1b2", "a2b1", "a2b2")
PAIR_SIGNS = (1, 1, 1, -1)
SAWTOOTH_ATOMS = 2 ** 16
# Angles closer than this (on the circle) count as the same detector setting.
ANGLE_TOL = 1e-9

_SIGNS = np.array([[1.0, -1.0], [-1.0, 1.0]])  # A*B for each outcome pair


def normalize_angle(angle: float) -> float:
    """Map an angle into ``[0, 2*pi)``."""
    a = math.fmod(float(angle), TWO_PI)
    if a < 0:
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


@dataclass(frozen=True)
class Setting:
    """A detector orientation in the measurement plane."""

    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", normalize_angle(self.angle))

    def __float__(self):
        return self.angle


def _angle(x) -> float:
    return normalize_angle(float(x))


def _same_angle(a: float, b: float) -> bool:
    d = abs(_angle(a) - _angle(b))
    return min(d, TWO_PI - d) <= ANGLE_TOL


def _menu_pairs(menu) -> list[tuple[float, float]]:
    if len(menu) != 4:
        raise UsageError("a setting menu is four angles: a1, a2, b1, b2")
    a1, a2, b1, b2 = (_angle(x) for x in menu)
    return [(a1, b1), (a1, b2), (a2, b1), (a2, b2)]


def parse_menu(text: str) -> tuple[float, float, float, float]:
    """Parse ``"a1,a2,b1,b2"`` (radians)."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise UsageError(f"menu needs four comma-separated angles, got {text!r}")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"bad menu {text!r}: {exc}") from None
    if not all(math.isfinite(v) for v in values):
        raise UsageError(f"menu angles must be finite, got {text!r}")
    return values


def _check_distribution(p, what, tol=1e-12):
    if np.any(p < 0) or abs(float(np.sum(p)) - 1.0) > tol:
        raise UsageError(f"{what} is not a probability vector")


def _check_response(r, n, what):
    r = np.asarray(r, dtype=float)
    if r.shape != (n,):
        raise UsageError(f"{what} must have one entry per hidden state")
    if np.any(np.abs(r) > 1):
        raise UsageError(f"{what} must lie in [-1, 1]")
    return r


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True, eq=False)
class HiddenVariableModel:
    """Factorizable model over a finite hidden-state space.

    ``response_A(a)`` returns the vector of expected outcomes ``A(a, lam)``
    over all hidden states (values in [-1, 1]); ``response_B(b)`` likewise.
    ``conditional(a, b)`` is ``P(lam | a, b)``; leaving it ``None`` means the
    model is statistically independent and uses ``prior`` for every pair.
    """

    name: str
    prior: np.ndarray
    response_A: Callable[[float], np.ndarray]
    response_B: Callable[[float], np.ndarray]
    conditional: Callable[[float, float], np.ndarray] | None = None

    def __post_init__(self):
        prior = np.array(self.prior, dtype=float)
        if prior.ndim != 1 or prior.size == 0:
            raise UsageError("prior must be a non-empty vector")
        _check_distribution(prior, "prior")
        prior.flags.writeable = False
        object.__setattr__(self, "prior", prior)

    @property
    def lambda_count(self) -> int:
        return self.prior.size

    def distribution(self, a, b) -> np.ndarray:
        """``P(lam | a, b)``, validated."""
        if self.conditional is None:
            return self.prior
        p = np.asarray(self.conditional(_angle(a), _angle(b)), dtype=float)
        if p.shape != self.prior.shape:
            raise UsageError("conditional has the wrong number of hidden states")
        _check_distribution(p, f"P(lambda | {a}, {b})")
        return p

    def mean_A(self, a) -> np.ndarray:
        return _check_response(self.response_A(_angle(a)), self.lambda_count, "response_A")

    def mean_B(self, b) -> np.ndarray:
        return _check_response(self.response_B(_angle(b)), self.lambda_count, "response_B")


@dataclass(frozen=True, eq=False)
class JointModel:
    """Arbitrary (possibly non-factorizable) outcome statistics ``p(A, B | a, b)``."""

    name: str
    joint: Callable[[float, float], np.ndarray]

    def table(self, a, b) -> np.ndarray:
        p = np.asarray(self.joint(_angle(a), _angle(b)), dtype=float)
        if p.shape != (2, 2):
            raise UsageError("joint table must be 2x2")
        _check_distribution(p.ravel(), f"p(A, B | {a}, {b})")
        return p


def expectation_exact(m: HiddenVariableModel, a, b) -> float:
    """``E(a, b) = sum_lam P(lam|a,b) A(a,lam) B(b,lam)``."""
    return float(np.sum(m.distribution(a, b) * m.mean_A(a) * m.mean_B(b)))


def correlator(model, a, b) -> float:
    """Exact ``E(a, b)`` for either model kind."""
    if isinstance(model, HiddenVariableModel):
        return expectation_exact(model, a, b)
    if isinstance(model, JointModel):
        return float(np.sum(_SIGNS * model.table(a, b)))
    raise TypeError(f"not a model: {model!r}")


@dataclass(frozen=True)
class ChshResult:
    E11: float
    E12: float
    E21: float
    E22: float

    @property
    def S(self) -> float:
        return self.E11 + self.E12 + self.E21 - self.E22

    def to_dict(self) -> dict:
        return {"E11": self.E11, "E12": self.E12, "E21": self.E21, "E22": self.E22, "S": self.S}


def chsh(model, a1, a2, b1, b2) -> ChshResult:
    E = [correlator(model, a, b) for a, b in _menu_pairs((a1, a2, b1, b2))]
    return ChshResult(*E)


def quantum_singlet() -> JointModel:
    """Singlet statistics ``p(A, B | a, b) = (1 - A B cos(a - b)) / 4``."""

    def joint(a, b):
        c = math.cos(a - b)
        return (1 - _SIGNS * c) / 4

    return JointModel("quantum", joint)


# Spin-1/2 operators in the z basis; measurements lie in the x-z plane.
_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PLUS_X = np.array([1, 1], dtype=complex) / math.sqrt(2)
_MINUS_X = np.array([1, -1], dtype=complex) / math.sqrt(2)
SINGLET = (np.kron(_PLUS_X, _MINUS_X) - np.kron(_MINUS_X, _PLUS_X)) / math.sqrt(2)


def _spin_projector(theta, outcome):
    sigma = math.cos(theta) * _SIGMA_Z + math.sin(theta) * _SIGMA_X
    return (np.eye(2) + outcome * sigma) / 2


def statevector_oracle(a, b) -> np.ndarray:
    """Born-rule outcome table computed from the two-spin singlet amplitudes."""
    a, b = float(a), float(b)
    p = np.empty((2, 2))
    for i, A in enumerate(OUTCOMES):
        for j, B in enumerate(OUTCOMES):
            proj = np.kron(_spin_projector(a, A), _spin_projector(b, B))
            p[i, j] = float(np.real(np.vdot(SINGLET, proj @ SINGLET)))
    return p


def _menu_lookup(angle, values, side):
    for i, v in enumerate(values):
        if _same_angle(angle, v):
            return i
    raise UsageError(f"setting {angle!r} for {side} is not on this model's menu")


def superdet_quantum(a1=CANONICAL_MENU[0], a2=CANONICAL_MENU[1],
                     b1=CANONICAL_MENU[2], b2=CANONICAL_MENU[3]) -> HiddenVariableModel:
    """Local, deterministic model that matches the singlet by violating SI.

    Hidden states are the four outcome pairs ``(A, B)``; each side simply reads
    its own entry.  The distribution of hidden states given the settings is the
    quantum joint table for those settings, so the model is only defined on the
    four-setting menu it was built for.  It is a kinematic construction, not a
    mechanism for how such correlations arise.
    """
    a_values = (_angle(a1), _angle(a2))
    b_values = (_angle(b1), _angle(b2))
    q = quantum_singlet()
    tables = {(i, j): q.table(a, b).ravel()
              for i, a in enumerate(a_values) for j, b in enumerate(b_values)}
    prior = np.mean(list(tables.values()), axis=0)
    read_A = np.array([1.0, 1.0, -1.0, -1.0])
    read_B = np.array([1.0, -1.0, 1.0, -1.0])

    def conditional(a, b):
        return tables[_menu_lookup(a, a_values, "A"), _menu_lookup(b, b_values, "B")]

    def response_A(a):
        _menu_lookup(a, a_values, "A")
        return read_A

    def response_B(b):
        _menu_lookup(b, b_values, "B")
        return read_B

    return HiddenVariableModel("superdet", prior, response_A, response_B, conditional)


# Deterministic outcome table of the three-state toy model.
TOY_RESPONSE_A = np.array([[1.0, -1.0, 1.0],    # a1
                           [1.0, 1.0, -1.0]])   # a2
TOY_RESPONSE_B = np.array([[-1.0, 1.0, -1.0],   # b1
                           [-1.0, -1.0, 1.0]])  # b2


def toy_three_state(a1=CANONICAL_MENU[0], a2=CANONICAL_MENU[1],
                    b1=CANONICAL_MENU[2], b2=CANONICAL_MENU[3]) -> HiddenVariableModel:
    """Three hidden states, the third of which never accompanies setting ``a2``.

    With ``a1`` the states are equally likely; with ``a2`` the third state is
    excluded and the other two share its weight.  Outcomes follow
    :data:`TOY_RESPONSE_A` / :data:`TOY_RESPONSE_B`.
    """
    a_values = (_angle(a1), _angle(a2))
    b_values = (_angle(b1), _angle(b2))
    uniform = np.full(3, 1 / 3)
    without_third = np.array([0.5, 0.5, 0.0])

    def conditional(a, b):
        _menu_lookup(b, b_values, "B")
        return uniform if _menu_lookup(a, a_values, "A") == 0 else without_third

    def response_A(a):
        return TOY_RESPONSE_A[_menu_lookup(a, a_values, "A")]

    def response_B(b):
        return TOY_RESPONSE_B[_menu_lookup(b, b_values, "B")]

    return HiddenVariableModel("toy3", uniform, response_A, response_B, conditional)


def local_sawtooth(atoms: int = SAWTOOTH_ATOMS) -> HiddenVariableModel:
    """Common-cause model: a shared random axis ``lam`` on the circle.

    ``A = sign(cos(lam - a))`` and ``B = -sign(cos(lam - b))`` with ``lam``
    uniform over ``atoms`` cell midpoints.  Its correlation is the straight line
    ``-1 + 2*theta/pi`` for ``theta = |a - b|`` in ``[0, pi]``, exact whenever
    ``theta`` is a multiple of ``2*pi/atoms``.
    """
    lam = (np.arange(atoms) + 0.5) * (TWO_PI / atoms)
    prior = np.full(atoms, 1.0 / atoms)

    def response_A(a):
        return np.where(np.cos(lam - a) >= 0, 1.0, -1.0)

    def response_B(b):
        return np.where(np.cos(lam - b) >= 0, -1.0, 1.0)

    return HiddenVariableModel("sawtooth", prior, response_A, response_B)


def constant_model(A: float = 1.0, B: float = -1.0) -> HiddenVariableModel:
    """Single hidden state with fixed expected outcomes."""
    return HiddenVariableModel("constant", [1.0], lambda a: np.array([A]), lambda b: np.array([B]))


def random_si_model(seed: int, lambda_count: int) -> HiddenVariableModel:
    """Random statistically independent model for sampling the Bell bound.

    The prior is drawn from the flat Dirichlet distribution.  Responses are
    uniform in [-1, 1], drawn independently for every (side, setting) from a
    generator keyed by ``(seed, side, setting)``, so any setting menu can be
    evaluated and the same setting always gets the same responses.
    """
    if not 1 <= lambda_count <= 16:
        raise UsageError(f"lambda_count must be in 1..16, got {lambda_count}")
    if seed < 0:
        raise UsageError("seed must be non-negative")
    prior = np.random.default_rng([seed, 0]).dirichlet(np.ones(lambda_count))
    cache: dict[tuple[int, int], np.ndarray] = {}

    def draw(side, angle):
        key = (side, int(round(angle / TWO_PI * 2 ** 40)) % 2 ** 40)
        if key not in cache:
            cache[key] = np.random.default_rng([seed, *key]).uniform(-1, 1, lambda_count)
        return cache[key]

    return HiddenVariableModel(f"random-si[{seed}]", prior,
                               lambda a: draw(1, a), lambda b: draw(2, b))


MODEL_FACTORIES = {
    "quantum": lambda menu: quantum_singlet(),
    "sawtooth": lambda menu: local_sawtooth(),
    "toy3": lambda menu: toy_three_state(*menu),
    "superdet": lambda menu: superdet_quantum(*menu),
}


def build_model(name: str, menu=CANONICAL_MENU):
    try:
        factory = MODEL_FACTORIES[name]
    except KeyError:
        raise UsageError(f"unknown model {name!r}; choose from {', '.join(MODEL_FACTORIES)}") from None
    return factory(tuple(menu))


# ---------------------------------------------------------------------------
# statistical independence


@dataclass(frozen=True)
class SiReport:
    tv_max: float
    mutual_info: float
    reference: str = "averaged"

    def to_dict(self) -> dict:
        return {"tv_max": self.tv_max, "mutual_info": self.mutual_info, "reference": self.reference}


def si_report(m: HiddenVariableModel, menu=CANONICAL_MENU, reference: str = "averaged") -> SiReport:
    """Quantify how far ``P(lam | a, b)`` moves with the settings.

    ``tv_max`` is the largest total-variation distance between a conditional
    and the reference distribution: the average of the four conditionals
    (``reference="averaged"``) or the model's ``prior`` (``"prior"``).
    ``mutual_info`` is the information (bits) ``lam`` carries about a setting
    pair drawn uniformly from the menu.
    """
    conds = np.array([m.distribution(a, b) for a, b in _menu_pairs(menu)])
    marginal = conds.mean(axis=0)
    if reference == "averaged":
        ref = marginal
    elif reference == "prior":
        ref = m.prior
    else:
        raise UsageError(f"unknown reference {reference!r}")
    tv = 0.5 * np.abs(conds - ref).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(conds > 0, conds * np.log2(conds / marginal), 0.0)
    mi = max(0.0, float(terms.sum() / len(conds)))
    return SiReport(float(tv.max()), mi, reference)


# ---------------------------------------------------------------------------
# Monte Carlo


CHUNK = 1 << 16
POLICIES = ("coins", "round_robin", "fixed")
THREADS_ENV = "NONLOCAL_LAB_THREADS"


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class ExperimentRecord:
    """Tallies of a simulated run.

    ``counts[p][i][j]`` is the number of runs with setting pair ``p`` (order of
    :data:`PAIR_LABELS`) and outcomes ``(OUTCOMES[i], OUTCOMES[j])``.  A pair
    that received no runs has estimate and stderr ``None`` and is listed in
    ``unavailable``.
    """

    seed: int
    n_runs: int
    policy: str
    menu: tuple[float, float, float, float]
    counts: tuple
    estimates: tuple
    stderrs: tuple
    unavailable: tuple[str, ...] = field(default=())
    stream: int = 0

    @property
    def pair_runs(self) -> tuple[int, ...]:
        return tuple(int(np.sum(c)) for c in self.counts)

    @property
    def S(self) -> float | None:
        if self.unavailable:
            return None
        return float(sum(s * e for s, e in zip(PAIR_SIGNS, self.estimates)))

    @property
    def S_stderr(self) -> float | None:
        if self.unavailable:
            return None
        return float(math.sqrt(sum(se ** 2 for se in self.stderrs)))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "stream": self.stream,
            "n_runs": self.n_runs,
            "policy": self.policy,
            "menu": list(self.menu),
            "pairs": list(PAIR_LABELS),
            "counts": [[list(row) for row in c] for c in self.counts],
            "estimates": list(self.estimates),
            "stderrs": list(self.stderrs),
            "unavailable": list(self.unavailable),
            "S": self.S,
            "S_stderr": self.S_stderr,
        }


def _sampling_tables(model, pairs):
    if isinstance(model, JointModel):
        cdfs = np.array([np.cumsum(model.table(a, b).ravel()) for a, b in pairs])
        return ("joint", cdfs)
    if isinstance(model, HiddenVariableModel):
        cdfs = np.array([np.cumsum(model.distribution(a, b)) for a, b in pairs])
        means_A = np.array([model.mean_A(a) for a, _ in pairs])
        means_B = np.array([model.mean_B(b) for _, b in pairs])
        return ("hidden", cdfs, means_A, means_B)
    raise TypeError(f"not a model: {model!r}")


def _choose_pairs(u, run_index, policy):
    if policy == "coins":
        return 2 * (u[:, 0] >= 0.5) + (u[:, 1] >= 0.5)
    if policy == "round_robin":
        return run_index % 4
    return np.zeros(run_index.size, dtype=np.int64)


def _simulate_chunk(tables, policy, seed, stream, chunk, n_runs):
    start = chunk * CHUNK
    size = min(CHUNK, n_runs - start)
    # Row r of the draw is run (start + r); it depends only on (seed, stream, run).
    bitgen = np.random.Philox(key=[seed, stream], counter=[0, 0, 0, chunk])
    u = np.random.Generator(bitgen).random((size, 5))
    run_index = np.arange(start, start + size)
    pair = _choose_pairs(u, run_index, policy)

    A_idx = np.empty(size, dtype=np.int64)
    B_idx = np.empty(size, dtype=np.int64)
    cdfs = tables[1]
    for p in range(4):
        sel = pair == p
        if not sel.any():
            continue
        cdf = cdfs[p]
        k = np.searchsorted(cdf, u[sel, 2] * cdf[-1], side="right")
        k = np.minimum(k, cdf.size - 1)
        if tables[0] == "joint":
            A_idx[sel], B_idx[sel] = np.divmod(k, 2)
        else:
            means_A, means_B = tables[2][p], tables[3][p]
            A_idx[sel] = np.where(u[sel, 3] < (1 + means_A[k]) / 2, 0, 1)
            B_idx[sel] = np.where(u[sel, 4] < (1 + means_B[k]) / 2, 0, 1)
    flat = pair * 4 + A_idx * 2 + B_idx
    return np.bincount(flat, minlength=16)


def monte_carlo(model, menu=CANONICAL_MENU, policy: str = "coins", n_runs: int = 100_000,
                seed: int = 0, workers: int | None = None, stream: int = 0) -> ExperimentRecord:
    """Simulate ``n_runs`` runs of the experiment.

    Each run picks a setting pair by ``policy`` (``"coins"``: an independent
    fair coin per side; ``"round_robin"``: run ``i`` uses pair ``i % 4``;
    ``"fixed"``: always ``(a1, b1)``), draws a hidden state from
    ``P(lam | a, b)`` (or an outcome pair directly for a :class:`JointModel`),
    then draws each outcome as +1 with probability ``(1 + mean) / 2``.

    Random numbers come from a Philox counter-based generator keyed by
    ``(seed, stream)``; run ``i`` always consumes the same draws, so the
    record is identical for any number of ``workers``.
    """
    if n_runs < 1:
        raise UsageError("n_runs must be at least 1")
    if policy not in POLICIES:
        raise UsageError(f"unknown policy {policy!r}; choose from {', '.join(POLICIES)}")
    if seed < 0 or stream < 0:
        raise UsageError("seed and stream must be non-negative")
    pairs = _menu_pairs(menu)
    tables = _sampling_tables(model, pairs)
    workers = default_workers() if workers is None else max(1, int(workers))

    n_chunks = -(-n_runs // CHUNK)
    job = lambda c: _simulate_chunk(tables, policy, seed, stream, c, n_runs)  # noqa: E731
    if workers == 1 or n_chunks == 1:
        parts = [job(c) for c in range(n_chunks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(n_chunks)))
    tally = np.sum(parts, axis=0).reshape(4, 2, 2)

    estimates, stderrs, unavailable = [], [], []
    for p in range(4):
        n = int(tally[p].sum())
        if n == 0:
            estimates.append(None)
            stderrs.append(None)
            unavailable.append(PAIR_LABELS[p])
            continue
        E = float(np.sum(_SIGNS * tally[p])) / n
        estimates.append(E)
        stderrs.append(math.sqrt(max(0.0, 1 - E * E) / n))
    counts = tuple(tuple(tuple(int(v) for v in row) for row in tally[p]) for p in range(4))
    return ExperimentRecord(int(seed), int(n_runs), policy, tuple(float(x) for x in menu), counts,
                            tuple(estimates), tuple(stderrs), tuple(unavailable), int(stream))


def sample_correlator(model, a, b, n_runs: int, seed: int = 0, stream: int = 0,
                      workers: int | None = None) -> tuple[float, float]:
    """Monte Carlo estimate and standard error of ``E(a, b)``."""
    rec = monte_carlo(model, (a, a, b, b), "fixed", n_runs, seed, workers, stream)
    return rec.estimates[0], rec.stderrs[0]


def correlation_sweep(model, thetas: Sequence[float], n_runs: int, seed: int = 0,
                      a: float = 0.0, workers: int | None = None) -> list[dict]:
    """Exact and sampled ``E(a, a + theta)`` for each angle difference."""
    rows = []
    for i, theta in enumerate(thetas):
        b = a + theta
        E_mc, se = sample_correlator(model, a, b, n_runs, seed, stream=i, workers=workers)
        rows.append({"theta": float(theta), "E_exact": correlator(model, a, b),
                     "E_mc": E_mc, "stderr": se, "n": int(n_runs)})
    return rows


def sweep_to_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta", "E_exact", "E_mc", "stderr", "n"])
        for r in rows:
            writer.writerow([f"{r['theta']:.17g}", f"{r['E_exact']:.17g}", f"{r['E_mc']:.17g}",
                             f"{r['stderr']:.17g}", r["n"]])
