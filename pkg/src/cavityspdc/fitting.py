"""Nonlinear least-squares estimators: Lorentzian resonance lines,
two-sided-exponential correlation decays, and the CAR-versus-power curve.

All three fitters share one damped least-squares engine with a
multiplicative damping schedule and finite-difference Jacobians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .biphoton import FWHM_FACTOR

_FD_REL_STEP = 1e-6
_MAX_ITER = 200


@dataclass
class FitResult:
    parameters: dict[str, float]
    errors: dict[str, float]
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""
    derived: dict[str, float] = field(default_factory=dict)

    def to_json_payload(self) -> dict:
        return {
            "parameters": self.parameters,
            "errors": self.errors,
            "covariance": self.covariance.tolist(),
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "message": self.message,
            "derived": self.derived,
        }


def _fd_jacobian(residual_fn, params: np.ndarray, r0: np.ndarray) -> np.ndarray:
    jac = np.empty((r0.size, params.size))
    for j in range(params.size):
        step = _FD_REL_STEP * max(abs(params[j]), 1.0)
        trial = params.copy()
        trial[j] += step
        jac[:, j] = (residual_fn(trial) - r0) / step
    return jac


def damped_least_squares(
    residual_fn,
    p0,
    max_iter: int = _MAX_ITER,
    gtol: float = 1e-10,
    ftol: float = 1e-12,
    xtol: float = 1e-10,
):
    """Minimize 0.5*||r(p)||^2 with multiplicative damping.

    The damping factor grows tenfold on a rejected step and shrinks
    tenfold on an accepted one.  Returns (params, covariance, cost,
    converged, iterations, message); covariance is the usual
    s^2 (J^T J)^-1 estimate at the solution and is None when the final
    Jacobian is rank deficient.
    """
    params = np.asarray(p0, dtype=float).copy()
    residual = residual_fn(params)
    if not np.all(np.isfinite(residual)):
        raise ValueError("residuals must be finite at the initial guess")
    cost = 0.5 * float(residual @ residual)
    lam = 1e-3
    converged = False
    message = "iteration limit reached"
    iteration = 0

    def _gradient_cosine(jac, grad):
        # largest cosine between the residual and any Jacobian column;
        # vanishes at a least-squares stationary point regardless of scale
        col_norms = np.linalg.norm(jac, axis=0)
        r_norm = math.sqrt(2.0 * cost)
        denom = np.maximum(col_norms * r_norm, 1e-300)
        return float(np.max(np.abs(grad) / denom))

    for iteration in range(1, max_iter + 1):
        jac = _fd_jacobian(residual_fn, params, residual)
        grad = jac.T @ residual
        jtj = jac.T @ jac
        if not np.all(np.isfinite(jtj)):
            message = "non-finite Jacobian"
            break
        if np.max(np.abs(grad)) < gtol or _gradient_cosine(jac, grad) < gtol:
            converged = True
            message = "gradient below tolerance"
            break
        diag = np.diag(jtj).copy()
        diag[diag <= 0.0] = 1e-30
        accepted = False
        while lam < 1e12:
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + delta
            trial_residual = residual_fn(trial)
            if np.all(np.isfinite(trial_residual)):
                trial_cost = 0.5 * float(trial_residual @ trial_residual)
                if trial_cost < cost:
                    step_small = np.max(
                        np.abs(delta) / np.maximum(np.abs(params), 1.0)
                    ) < xtol
                    cost_small = (cost - trial_cost) <= ftol * max(cost, 1e-300)
                    params, residual, cost = trial, trial_residual, trial_cost
                    lam = max(lam / 10.0, 1e-14)
                    accepted = True
                    if step_small or cost_small:
                        converged = True
                        message = "step below tolerance"
                    break
            lam *= 10.0
        if not accepted:
            if _gradient_cosine(jac, grad) < 1e-6:
                converged = True
                message = "stationary point: no improving step exists"
            else:
                message = "damping exhausted without an acceptable step"
            break
        if converged:
            break

    jac = _fd_jacobian(residual_fn, params, residual)
    jtj = jac.T @ jac
    covariance = None
    if np.linalg.matrix_rank(jac) < params.size:
        converged = False
        message = "rank-deficient Jacobian at the solution"
    else:
        dof = max(residual.size - params.size, 1)
        sigma_sq = 2.0 * cost / dof
        try:
            covariance = sigma_sq * np.linalg.inv(jtj)
        except np.linalg.LinAlgError:
            converged = False
            message = "singular normal equations at the solution"
    return params, covariance, cost, converged, iteration, message


def _finalize(names, params, covariance, cost, converged, iterations, message,
              transform=None):
    """Package engine output; transform maps internal params to reported ones."""
    values = params if transform is None else transform(params)
    if covariance is None:
        cov = np.full((len(names), len(names)), np.nan)
        errors = {name: math.nan for name in names}
    else:
        if transform is None:
            cov = covariance
        else:
            # delta method for element-wise reparameterizations
            jac_diag = np.array(transform(params, jacobian=True))
            cov = covariance * np.outer(jac_diag, jac_diag)
        errors = {
            name: math.sqrt(max(cov[i, i], 0.0)) for i, name in enumerate(names)
        }
    return FitResult(
        parameters=dict(zip(names, map(float, values))),
        errors=errors,
        covariance=cov,
        residual_norm=math.sqrt(2.0 * cost),
        converged=converged,
        iterations=iterations,
        message=message,
    )


# ---------------------------------------------------------------------------
# Lorentzian resonance line


def lorentzian(x, center: float, fwhm: float, amplitude: float, offset: float):
    half_sq = (0.5 * abs(fwhm)) ** 2
    return amplitude * half_sq / ((np.asarray(x, dtype=float) - center) ** 2 + half_sq) + offset


def lorentzian_gradient(x, center: float, fwhm: float, amplitude: float, offset: float):
    """Analytic partials (d/dcenter, d/dfwhm, d/damplitude, d/doffset)."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * abs(fwhm)
    denom = (x - center) ** 2 + half**2
    d_center = amplitude * half**2 * 2.0 * (x - center) / denom**2
    d_fwhm = amplitude * (half * denom - half**3) / denom**2 * np.sign(fwhm)
    d_amp = half**2 / denom
    d_off = np.ones_like(x)
    return np.stack([d_center, d_fwhm, d_amp, d_off], axis=1)


def _half_max_width(x, y, offset, peak_idx) -> float:
    half = offset + 0.5 * (y[peak_idx] - offset)
    above = y >= half
    left = peak_idx
    while left > 0 and above[left - 1]:
        left -= 1
    right = peak_idx
    while right < y.size - 1 and above[right + 1]:
        right += 1
    width = abs(x[right] - x[left])
    if width <= 0.0:
        width = abs(x[1] - x[0]) if x.size > 1 else 1.0
    return width


def fit_lorentzian(x, y, init_guess=None) -> FitResult:
    """Fit y = A*(G/2)^2 / ((x-x0)^2 + (G/2)^2) + B.

    Parameters are reported as center, fwhm, amplitude, offset with
    standard errors; the center initializes at the sample maximum and the
    width at the half-maximum crossing distance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 5:
        raise ValueError("need at least 5 samples")
    if init_guess is None:
        offset0 = float(np.min(y))
        peak = int(np.argmax(y))
        amp0 = float(y[peak] - offset0)
        width0 = _half_max_width(x, y, offset0, peak)
        p0 = np.array([x[peak], width0, amp0, offset0])
    else:
        p0 = np.asarray(init_guess, dtype=float)
    if np.ptp(x) < 2.0 * abs(p0[1]):
        raise ValueError("samples must span at least two linewidths")

    def residual(p):
        return lorentzian(x, *p) - y

    params, cov, cost, ok, iters, msg = damped_least_squares(residual, p0)
    params[1] = abs(params[1])
    return _finalize(("center", "fwhm", "amplitude", "offset"),
                     params, cov, cost, ok, iters, msg)


# ---------------------------------------------------------------------------
# Correlation-peak decay


def exp_decay(t_ns, gamma_ghz: float, amplitude: float, floor: float):
    return amplitude * np.exp(
        -2.0 * np.pi * abs(gamma_ghz) * np.abs(np.asarray(t_ns, dtype=float))
    ) + floor


def fit_exp_g2(hist) -> FitResult:
    """Fit amplitude * exp(-2*pi*gamma*|t|) + floor to a delay histogram.

    Two passes: a plain least-squares fit seeds Poisson weights taken from
    the fitted model, and the weighted refit supplies the reported
    parameters.  Model-based weights keep the decay estimate anchored to
    the exponential wings, which detector jitter leaves untouched, instead
    of the convolution-rounded core.  Reports gamma in GHz plus the implied
    correlation FWHM t_fwhm = 1.39 / (2*pi*gamma) in the derived values.
    """
    centers_ps = np.asarray(hist.bin_centers_ps, dtype=float)
    counts = np.asarray(hist.counts, dtype=float)
    if centers_ps.size < 20:
        raise ValueError("need at least 20 bins")
    if abs(centers_ps[0] + centers_ps[-1]) > 0.51 * abs(centers_ps[1] - centers_ps[0]):
        raise ValueError("histogram range must be symmetric about zero delay")
    t_ns = centers_ps * 1e-3

    floor0 = float(np.median(np.concatenate([counts[:3], counts[-3:]])))
    amp0 = float(np.max(counts) - floor0)
    decayed = np.nonzero(counts - floor0 <= 0.5 * amp0)[0]
    right = decayed[decayed > np.argmax(counts)]
    t_half = abs(t_ns[right[0]]) if right.size else max(abs(t_ns[-1]) / 4.0, 1e-3)
    gamma0 = math.log(2.0) / (2.0 * math.pi * max(t_half, 1e-6))
    p0 = np.array([gamma0, max(amp0, 1e-12), floor0])

    def residual_plain(p):
        return exp_decay(t_ns, *p) - counts

    p1, *_ = damped_least_squares(residual_plain, p0)
    weights = 1.0 / np.sqrt(np.maximum(exp_decay(t_ns, *p1), 1.0))

    def residual(p):
        return (exp_decay(t_ns, *p) - counts) * weights

    params, cov, cost, ok, iters, msg = damped_least_squares(residual, p1)
    params[0] = abs(params[0])
    result = _finalize(("gamma_ghz", "amplitude", "floor"),
                       params, cov, cost, ok, iters, msg)
    gamma = result.parameters["gamma_ghz"]
    if gamma > 0.0 and ok:
        t_fwhm = FWHM_FACTOR / (2.0 * math.pi * gamma)
        result.derived["t_fwhm_ns"] = t_fwhm
        result.derived["t_fwhm_err_ns"] = (
            t_fwhm / gamma * result.errors["gamma_ghz"]
            if math.isfinite(result.errors["gamma_ghz"])
            else math.nan
        )
    return result


# ---------------------------------------------------------------------------
# CAR versus pump power


def car_curve(power_mw, norm_per_mw: float, knee_s_mw: float, knee_i_mw: float):
    """Identifiable reduction of the CAR model over pump power.

    CAR(P) = P / (norm * (P + knee_s) * (P + knee_i)); the knees are the
    dark-rate-to-detected-rate crossover powers of the two arms and norm
    is the generated-rate-times-window scale.
    """
    p = np.asarray(power_mw, dtype=float)
    return p / (norm_per_mw * (p + knee_s_mw) * (p + knee_i_mw))


def car_curve_reference(source, chain):
    """True reduced parameters implied by a source/detection description."""
    k = source.brightness_per_s_mw_mhz * source.bandwidth_mhz  # pairs/s/mW
    norm = k * chain.window_ns * 1e-9
    knee_s = chain.dark_s_per_s / (chain.eta_s * k)
    knee_i = chain.dark_i_per_s / (chain.eta_i * k)
    return norm, knee_s, knee_i


def fit_car_curve(powers_mw, cars) -> FitResult:
    """Fit the reduced CAR curve and report its peak.

    The physical parameter set (efficiency-rate products and dark rates)
    is only identifiable up to the three-parameter shape of car_curve, and
    the two knees become exactly degenerate when they coincide, so the fit
    runs on the log denominator coefficients of
    CAR = P / (c2 P^2 + c1 P + c0), which stay independent everywhere.
    The knees are recovered as the roots of the denominator and the peak as
    peak_power = sqrt(c0/c2), peak_car = 1/(c1 + 2 sqrt(c0 c2)).
    """
    powers = np.asarray(powers_mw, dtype=float)
    cars = np.asarray(cars, dtype=float)
    if powers.size != cars.size or powers.size < 5:
        raise ValueError("need at least 5 (power, CAR) points")
    if np.ptp(cars) == 0.0:
        raise ValueError("degenerate data: all CAR values equal")
    if np.any(powers <= 0.0) or np.any(cars <= 0.0):
        raise ValueError("powers and CAR values must be > 0")

    peak = int(np.argmax(cars))
    p_star = powers[peak]
    norm0 = 1.0 / (cars[peak] * 4.0 * p_star)
    q0 = np.log(np.array([norm0 * p_star**2, 2.0 * norm0 * p_star, norm0]))

    def residual(q):
        c0, c1, c2 = np.exp(q)
        # relative residuals: CAR spans decades
        return powers / (c2 * powers**2 + c1 * powers + c0) / cars - 1.0

    q, cov, cost, ok, iters, msg = damped_least_squares(residual, q0)
    c0, c1, c2 = np.exp(q)

    disc = c1 * c1 - 4.0 * c0 * c2
    root = math.sqrt(max(disc, 0.0))
    knee_s = (c1 - root) / (2.0 * c2)
    knee_i = (c1 + root) / (2.0 * c2)
    peak_power = math.sqrt(c0 / c2)
    peak_car = 1.0 / (c1 + 2.0 * math.sqrt(c0 * c2))

    def derived_values(qv):
        d0, d1, d2 = np.exp(qv)
        r = math.sqrt(max(d1 * d1 - 4.0 * d0 * d2, 0.0))
        return np.array(
            [
                d2,
                (d1 - r) / (2.0 * d2),
                (d1 + r) / (2.0 * d2),
                math.sqrt(d0 / d2),
                1.0 / (d1 + 2.0 * math.sqrt(d0 * d2)),
            ]
        )

    values = derived_values(q)
    if cov is not None:
        # delta method; knee errors blow up as the discriminant closes, which
        # reflects a genuine loss of identifiability
        jac = np.empty((5, 3))
        for j in range(3):
            step = 1e-6
            qp = q.copy()
            qp[j] += step
            jac[:, j] = (derived_values(qp) - values) / step
        dcov = jac @ cov @ jac.T
        sigmas = np.sqrt(np.clip(np.diag(dcov), 0.0, None))
    else:
        sigmas = np.full(5, math.nan)
    if disc <= 1e-9 * c1 * c1:
        sigmas[1] = sigmas[2] = math.nan

    result = FitResult(
        parameters={
            "norm_per_mw": float(c2),
            "knee_s_mw": float(knee_s),
            "knee_i_mw": float(knee_i),
        },
        errors={
            "norm_per_mw": float(sigmas[0]),
            "knee_s_mw": float(sigmas[1]),
            "knee_i_mw": float(sigmas[2]),
        },
        covariance=cov if cov is not None else np.full((3, 3), np.nan),
        residual_norm=math.sqrt(2.0 * cost),
        converged=ok,
        iterations=iters,
        message=msg,
        derived={
            "peak_power_mw": float(peak_power),
            "peak_power_err_mw": float(sigmas[3]),
            "peak_car": float(peak_car),
            "peak_car_err": float(sigmas[4]),
        },
    )
    return result
