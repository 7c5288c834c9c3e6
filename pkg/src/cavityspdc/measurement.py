"""Polarization-entanglement characterization: interference visibility,
CHSH correlations, tomography count simulation, maximum-likelihood state
reconstruction, fidelity, and Poisson bootstrap errors."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .polarization import TwoPhotonState

_SQ2 = math.sqrt(2.0)

#: Single-qubit analyzer kets by label.
KETS = {
    "H": np.array([1.0, 0.0], dtype=complex),
    "V": np.array([0.0, 1.0], dtype=complex),
    "D": np.array([1.0, 1.0], dtype=complex) / _SQ2,
    "A": np.array([1.0, -1.0], dtype=complex) / _SQ2,
    "R": np.array([1.0, -1.0j], dtype=complex) / _SQ2,
    "L": np.array([1.0, 1.0j], dtype=complex) / _SQ2,
}

#: Canonical informationally complete tomography set, 16 product settings.
TOMOGRAPHY_LABELS = tuple(
    (a, b) for a in ("H", "V", "D", "R") for b in ("H", "V", "D", "R")
)


class TomographyError(RuntimeError):
    pass


def _linear_ket(angle_deg: float) -> np.ndarray:
    a = math.radians(angle_deg)
    return np.array([math.cos(a), math.sin(a)], dtype=complex)


@dataclass(frozen=True, eq=False)
class ProjectorSetting:
    """Product projector |ket0> x |ket1>, one analyzer state per arm."""

    ket0: np.ndarray
    ket1: np.ndarray
    label_a: str = ""
    label_b: str = ""

    def __post_init__(self):
        for name in ("ket0", "ket1"):
            ket = np.asarray(getattr(self, name), dtype=complex).reshape(2)
            if abs(np.linalg.norm(ket) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be normalized")
            object.__setattr__(self, name, ket)

    @classmethod
    def linear(cls, alpha_deg: float, beta_deg: float) -> "ProjectorSetting":
        return cls(
            _linear_ket(alpha_deg),
            _linear_ket(beta_deg),
            label_a=f"{alpha_deg:g}deg",
            label_b=f"{beta_deg:g}deg",
        )

    @classmethod
    def from_labels(cls, label_a: str, label_b: str) -> "ProjectorSetting":
        try:
            return cls(KETS[label_a], KETS[label_b], label_a, label_b)
        except KeyError as exc:
            raise ValueError(f"unknown analyzer label {exc.args[0]!r}") from exc

    def product_ket(self) -> np.ndarray:
        return np.kron(self.ket0, self.ket1)


def _as_rho(state) -> np.ndarray:
    if isinstance(state, TwoPhotonState):
        return state.rho
    rho = np.asarray(state, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("expected a TwoPhotonState or a 4x4 matrix")
    return rho


def coincidence_prob(state, setting: ProjectorSetting) -> float:
    """Born-rule coincidence probability <ab|rho|ab>, clipped to [0, 1]."""
    ket = setting.product_ket()
    p = float(np.real(ket.conj() @ _as_rho(state) @ ket))
    return min(max(p, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Interference curves


@dataclass(frozen=True)
class InterferenceCurve:
    alpha_deg: float
    beta_deg: np.ndarray
    probs: np.ndarray
    visibility: float
    degenerate: bool  # constant curve, visibility forced to zero
    offset: float
    amplitude: float


def interference_curve(state, alpha_deg: float, beta_grid_deg) -> InterferenceCurve:
    """Coincidence probabilities over a grid of second-arm analyzer angles.

    Visibility comes from a fitted sinusoid p = O + A cos 2b + B sin 2b,
    which is exact for any density matrix, rather than from raw extrema.
    """
    beta = np.asarray(beta_grid_deg, dtype=float)
    if beta.size < 8 or np.ptp(beta) < 180.0 - 1e-9:
        raise ValueError("need >= 8 analyzer angles covering >= 180 degrees")
    probs = np.array(
        [coincidence_prob(state, ProjectorSetting.linear(alpha_deg, b)) for b in beta]
    )
    two_b = 2.0 * np.radians(beta)
    design = np.column_stack([np.ones_like(two_b), np.cos(two_b), np.sin(two_b)])
    (offset, a_cos, b_sin), *_ = np.linalg.lstsq(design, probs, rcond=None)
    amplitude = math.hypot(a_cos, b_sin)
    if offset <= 0.0 or amplitude / max(offset, 1e-300) < 1e-9:
        return InterferenceCurve(alpha_deg, beta, probs, 0.0, True, offset, amplitude)
    return InterferenceCurve(
        alpha_deg, beta, probs, amplitude / offset, False, offset, amplitude
    )


# ---------------------------------------------------------------------------
# CHSH


@dataclass(frozen=True)
class BellSettings:
    a_deg: float
    a_prime_deg: float
    b_deg: float
    b_prime_deg: float

    def as_tuple(self):
        return (self.a_deg, self.a_prime_deg, self.b_deg, self.b_prime_deg)


#: Settings maximizing S for the ideal (|HH> - |VV>)/sqrt(2) target family.
PHI_SETTINGS = BellSettings(0.0, -45.0, 22.5, 67.5)


def correlation_E(state, a_deg: float, b_deg: float) -> float:
    """Polarization correlation from the four projector combinations."""
    probs = [
        coincidence_prob(state, ProjectorSetting.linear(a_deg + da, b_deg + db))
        for da, db in ((0, 0), (90, 90), (0, 90), (90, 0))
    ]
    total = sum(probs)
    if total <= 0.0:
        raise ValueError("projector probabilities sum to zero")
    return (probs[0] + probs[1] - probs[2] - probs[3]) / total


def chsh_S(state, settings: BellSettings) -> float:
    """S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|."""
    a, ap, b, bp = settings.as_tuple()
    return abs(
        correlation_E(state, a, b)
        - correlation_E(state, a, bp)
        + correlation_E(state, ap, b)
        + correlation_E(state, ap, bp)
    )


@dataclass(frozen=True)
class ChshResult:
    s_value: float
    settings: BellSettings


def _linear_correlation_block(rho: np.ndarray) -> np.ndarray:
    """2x2 correlation block over the (z, x) Pauli components.

    Linear analyzers at angle a measure cos(2a) sz + sin(2a) sx, so
    E(a, b) = u(a)^T K u(b) with u = (cos 2a, sin 2a).
    """
    sz = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    ops = (sz, sx)
    k = np.empty((2, 2))
    for i, si in enumerate(ops):
        for j, sj in enumerate(ops):
            k[i, j] = float(np.real(np.trace(rho @ np.kron(si, sj))))
    return k


def _grid_chsh(k_block: np.ndarray, step_deg: float):
    """Exhaustive maximum of S over a uniform four-angle grid.

    The maximum over (a, a') factorizes at fixed (b, b'), so the full
    grid^4 search reduces to two row maxima per (b, b') pair.
    """
    angles = np.arange(0.0, 180.0, step_deg)
    u = np.stack([np.cos(2 * np.radians(angles)), np.sin(2 * np.radians(angles))], 1)
    e = u @ k_block @ u.T  # e[i, j] = E(a_i, b_j)
    best = -np.inf
    best_idx = (0, 0, 0, 0)
    for jb in range(angles.size):
        col = e[:, jb][:, None]
        diff = col - e  # E(a, b) - E(a, b')
        summ = col + e  # E(a', b) + E(a', b')
        ia = diff.argmax(axis=0)
        iap = summ.argmax(axis=0)
        tot = diff[ia, np.arange(angles.size)] + summ[iap, np.arange(angles.size)]
        jbp = int(tot.argmax())
        if tot[jbp] > best:
            best = float(tot[jbp])
            best_idx = (int(ia[jbp]), int(iap[jbp]), jb, jbp)
    ia, iap, jb, jbp = best_idx
    return best, (angles[ia], angles[iap], angles[jb], angles[jbp])


def chsh_max(state, grid_step_deg: float = 0.5, refine: bool = True) -> ChshResult:
    """Maximize S over all four analyzer angles.

    A 0.5 degree exhaustive grid search locates the global maximum; a local
    simplex refinement then polishes the angles to 0.01 degree.
    """
    rho = _as_rho(state)
    k_block = _linear_correlation_block(rho)
    s_grid, angles = _grid_chsh(k_block, grid_step_deg)

    def neg_s(x):
        ua = np.array([math.cos(2 * math.radians(x[0])), math.sin(2 * math.radians(x[0]))])
        uap = np.array([math.cos(2 * math.radians(x[1])), math.sin(2 * math.radians(x[1]))])
        ub = np.array([math.cos(2 * math.radians(x[2])), math.sin(2 * math.radians(x[2]))])
        ubp = np.array([math.cos(2 * math.radians(x[3])), math.sin(2 * math.radians(x[3]))])
        return -abs(
            ua @ k_block @ ub - ua @ k_block @ ubp + uap @ k_block @ ub + uap @ k_block @ ubp
        )

    best_s, best_angles = s_grid, angles
    if refine:
        res = minimize(
            neg_s,
            np.array(angles),
            method="Nelder-Mead",
            options={"xatol": 0.01, "fatol": 1e-12, "maxiter": 2000},
        )
        if -res.fun > best_s:
            best_s, best_angles = -float(res.fun), tuple(res.x)
    return ChshResult(best_s, BellSettings(*best_angles))


def bell_projector_settings(settings: BellSettings) -> list[ProjectorSetting]:
    """The 16 projector pairs probed in a four-setting CHSH measurement."""
    out = []
    for a in (settings.a_deg, settings.a_prime_deg):
        for b in (settings.b_deg, settings.b_prime_deg):
            for da, db in ((0, 0), (90, 90), (0, 90), (90, 0)):
                out.append(ProjectorSetting.linear(a + da, b + db))
    return out


def chsh_from_counts(counts) -> float:
    """S estimated from 16 counts ordered as bell_projector_settings."""
    counts = np.asarray(counts, dtype=float).reshape(4, 4)
    e_values = []
    for row in counts:
        total = row.sum()
        if total <= 0:
            raise ValueError("zero total counts in one basis pair")
        e_values.append((row[0] + row[1] - row[2] - row[3]) / total)
    e_ab, e_abp, e_apb, e_apbp = e_values
    return abs(e_ab - e_abp + e_apb + e_apbp)


# ---------------------------------------------------------------------------
# Tomography


@dataclass(frozen=True)
class TomoEntry:
    setting: ProjectorSetting
    seconds: float
    counts: int

    def __post_init__(self):
        if self.seconds <= 0.0:
            raise ValueError("integration time must be > 0")
        if self.counts < 0:
            raise ValueError("counts must be non-negative")


class TomographyRecord:
    """Sixteen projector settings with integration times and counts."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        entries = tuple(entries)
        if len(entries) != 16:
            raise ValueError(f"need exactly 16 entries, got {len(entries)}")
        self.entries = entries
        if not _settings_complete([e.setting for e in entries]):
            raise TomographyError("projector settings are not informationally complete")

    def counts(self) -> np.ndarray:
        return np.array([e.counts for e in self.entries], dtype=float)

    def with_counts(self, counts) -> "TomographyRecord":
        return TomographyRecord(
            TomoEntry(e.setting, e.seconds, int(c))
            for e, c in zip(self.entries, counts)
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("setting_a", "setting_b", "seconds", "counts"))
            for e in self.entries:
                writer.writerow((e.setting.label_a, e.setting.label_b, e.seconds, e.counts))

    @classmethod
    def from_csv(cls, path) -> "TomographyRecord":
        entries = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                setting = ProjectorSetting.from_labels(row["setting_a"], row["setting_b"])
                entries.append(
                    TomoEntry(setting, float(row["seconds"]), int(row["counts"]))
                )
        return cls(entries)


def _projector_stack(settings) -> np.ndarray:
    kets = np.stack([s.product_ket() for s in settings])
    return np.einsum("ki,kj->kij", kets, kets.conj())


def _settings_complete(settings) -> bool:
    stack = _projector_stack(settings).reshape(len(settings), 16)
    return np.linalg.matrix_rank(stack, tol=1e-9) == 16


def tomo_simulate_counts(
    state, n_per_setting: float, seed, seconds: float = 1.0
) -> TomographyRecord:
    """Poisson counts for the canonical 16-setting tomography."""
    if n_per_setting <= 0:
        raise ValueError("n_per_setting must be > 0")
    rng = np.random.default_rng(seed)
    entries = []
    for label_a, label_b in TOMOGRAPHY_LABELS:
        setting = ProjectorSetting.from_labels(label_a, label_b)
        lam = n_per_setting * coincidence_prob(state, setting)
        entries.append(TomoEntry(setting, seconds, int(rng.poisson(lam))))
    return TomographyRecord(entries)


def tomo_linear(rec: TomographyRecord) -> np.ndarray:
    """Direct linear inversion of the measured frequencies.

    Returns a Hermitian unit-trace matrix that may have negative
    eigenvalues; it seeds the likelihood maximization and demonstrates why
    the constrained estimate is needed.
    """
    stack = _projector_stack([e.setting for e in rec.entries]).reshape(16, 16)
    counts = rec.counts()
    # the {H,V} x {H,V} block is a complete projective measurement, so its
    # total estimates the per-setting flux
    labels = [(e.setting.label_a, e.setting.label_b) for e in rec.entries]
    hv_total = sum(
        c
        for c, lab in zip(counts, labels)
        if lab[0] in ("H", "V") and lab[1] in ("H", "V")
    )
    scale = hv_total if hv_total > 0 else counts.sum() / 4.0
    if scale <= 0:
        raise TomographyError("record contains no counts")
    freqs = counts / scale
    rho_vec, *_ = np.linalg.lstsq(stack.conj(), freqs.astype(complex), rcond=None)
    rho = rho_vec.reshape(4, 4)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


_TRIU = np.triu_indices(4, 1)


def _triangular_from_params(x: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    t[np.diag_indices(4)] = x[:4]
    t[_TRIU] = x[4::2] + 1j * x[5::2]
    return t


def _params_from_triangular(t: np.ndarray) -> np.ndarray:
    x = np.empty(16)
    x[:4] = np.real(np.diag(t))
    x[4::2] = t[_TRIU].real
    x[5::2] = t[_TRIU].imag
    return x


def tomo_mle(
    rec: TomographyRecord, max_iter: int = 10_000, grad_tol: float = 1e-8
) -> TwoPhotonState:
    """Maximum-likelihood reconstruction over physical density matrices.

    The state is parameterized as rho = T^dag T / tr(T^dag T) with an
    upper-triangular T (16 real parameters), which keeps every iterate
    positive semidefinite.  The Poisson log-likelihood with the overall
    flux profiled out analytically is maximized by quasi-Newton ascent;
    convergence requires the projected gradient below grad_tol or an
    optimizer-reported line-search success.
    """
    projectors = _projector_stack([e.setting for e in rec.entries])
    proj_flat = projectors.transpose(0, 2, 1).reshape(16, 16)  # q = proj_flat @ vec(M)
    counts = rec.counts()
    total = counts.sum()
    if total <= 0:
        raise TomographyError("record contains no counts")

    rho0 = tomo_linear(rec)
    eigval, eigvec = np.linalg.eigh(rho0)
    eigval = np.clip(eigval, 1e-6, None)
    rho0 = (eigvec * eigval) @ eigvec.conj().T
    rho0 /= np.trace(rho0).real
    x0 = _params_from_triangular(np.linalg.cholesky(rho0).conj().T)
    eye4 = np.eye(4)

    def objective(x):
        t = _triangular_from_params(x)
        m = t.conj().T @ t
        trace = np.trace(m).real
        q = np.real(proj_flat @ m.ravel())
        p = np.clip(q / trace, 1e-300, None)
        p_sum = p.sum()
        f = -(counts @ np.log(p)) / total + math.log(p_sum)
        # d f / d p_k, then chain rule through p = q / tr(M)
        u = -counts / p / total + 1.0 / p_sum
        g_mat = (u @ proj_flat).reshape(4, 4).T - (u @ p) * eye4
        tg = t @ (g_mat / trace)
        grad = np.empty(16)
        grad[:4] = 2.0 * np.real(np.diag(tg))
        grad[4::2] = 2.0 * tg[_TRIU].real
        grad[5::2] = 2.0 * tg[_TRIU].imag
        return f, grad

    res = minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "ftol": 1e-15, "gtol": grad_tol},
    )
    grad_norm = float(np.max(np.abs(res.jac)))
    if not res.success and grad_norm > 1e-5:
        raise TomographyError(
            f"likelihood maximization did not converge: {res.message} "
            f"(iterations={res.nit}, |grad|={grad_norm:.3e})"
        )
    t = _triangular_from_params(res.x)
    m = t.conj().T @ t
    rho = m / np.trace(m).real
    rho = 0.5 * (rho + rho.conj().T)
    return TwoPhotonState(rho)


# ---------------------------------------------------------------------------
# Fidelity and bootstrap


def fidelity(state, target_ket) -> float:
    """Overlap <psi|rho|psi> with a pure target state."""
    ket = np.asarray(target_ket, dtype=complex).reshape(4)
    norm = np.linalg.norm(ket)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("target state must be normalized")
    return float(np.real(ket.conj() @ _as_rho(state) @ ket))


def state_fidelity(state_a, state_b) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(a) b sqrt(a)))^2 for mixed states."""
    rho = _as_rho(state_a)
    sigma = _as_rho(state_b)
    eigval, eigvec = np.linalg.eigh(rho)
    eigval = np.clip(eigval, 0.0, None)
    sqrt_rho = (eigvec * np.sqrt(eigval)) @ eigvec.conj().T
    inner = sqrt_rho @ sigma @ sqrt_rho
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.sum(np.sqrt(vals)) ** 2)


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    std: float
    resamples: int


def bootstrap_errors(
    rec: TomographyRecord, resamples: int, statistic, seed=None
) -> BootstrapResult:
    """Poisson-resample the counts and propagate a statistic through.

    Each resample draws counts ~ Poisson(observed) and reevaluates
    statistic(record); returns the sample mean and standard deviation.
    """
    if resamples < 100:
        raise ValueError("need at least 100 resamples")
    observed = rec.counts()
    values = np.empty(resamples)
    children = np.random.SeedSequence(seed).spawn(resamples)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        values[i] = statistic(rec.with_counts(rng.poisson(observed)))
    return BootstrapResult(float(values.mean()), float(values.std(ddof=1)), resamples)


def rho_to_json_payload(state) -> dict:
    rho = _as_rho(state)
    return {
        "basis": ["HH", "HV", "VH", "VV"],
        "rho_re": np.real(rho).tolist(),
        "rho_im": np.imag(rho).tolist(),
    }


def rho_from_json_payload(payload: dict) -> np.ndarray:
    return np.asarray(payload["rho_re"], dtype=float) + 1j * np.asarray(
        payload["rho_im"], dtype=float
    )
