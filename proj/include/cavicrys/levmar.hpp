#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "cavicrys/errors.hpp"

namespace cavicrys {

struct LevMarOptions {
    int max_iterations = 200;
    double rel_step_tol = 1e-8;   ///< converged when every |dp|/(|p|+eps) is below
    double lambda0 = 1e-3;
    /// true: covariance scaled by SSR/(n-p) (unknown noise scale);
    /// false: residuals are already sigma-scaled, covariance used as-is.
    bool scale_covariance = true;
};

struct LevMarResult {
    std::vector<double> params;
    std::vector<double> std_errors;
    double residual_norm = 0.0;  ///< sqrt(sum of squared residuals) at optimum
    int iterations = 0;
    bool converged = false;
};

namespace detail {

/// Cholesky solve of (A + lambda diag(A)) x = b for small dense A.
/// Returns false if the damped matrix is not positive definite.
inline bool solve_damped(std::vector<double> a, std::vector<double> b, double lambda,
                         std::size_t p, std::vector<double>& x) {
    for (std::size_t i = 0; i < p; ++i) a[i * p + i] *= (1.0 + lambda);
    // in-place Cholesky A = L L^T
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * p + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
            if (i == j) {
                if (!(s > 0.0)) return false;
                a[i * p + i] = std::sqrt(s);
            } else {
                a[i * p + j] = s / a[j * p + j];
            }
        }
    }
    // forward then backward substitution
    for (std::size_t i = 0; i < p; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * p + k] * b[k];
        b[i] = s / a[i * p + i];
    }
    x.assign(p, 0.0);
    for (std::size_t ii = p; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < p; ++k) s -= a[k * p + ii] * x[k];
        x[ii] = s / a[ii * p + ii];
    }
    return true;
}

/// Inverse of a small SPD matrix via Cholesky; returns false if singular.
inline bool spd_inverse(std::vector<double> a, std::size_t p, std::vector<double>& inv) {
    inv.assign(p * p, 0.0);
    for (std::size_t c = 0; c < p; ++c) inv[c * p + c] = 1.0;
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * p + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
            if (i == j) {
                if (!(s > 0.0)) return false;
                a[i * p + i] = std::sqrt(s);
            } else {
                a[i * p + j] = s / a[j * p + j];
            }
        }
    }
    for (std::size_t c = 0; c < p; ++c) {
        double* col = &inv[c * p];
        for (std::size_t i = 0; i < p; ++i) {
            double s = col[i];
            for (std::size_t k = 0; k < i; ++k) s -= a[i * p + k] * col[k];
            col[i] = s / a[i * p + i];
        }
        for (std::size_t ii = p; ii-- > 0;) {
            double s = col[ii];
            for (std::size_t k = ii + 1; k < p; ++k) s -= a[k * p + ii] * col[k];
            col[ii] = s / a[ii * p + ii];
        }
    }
    // col-major of the inverse of a symmetric matrix == row-major
    return true;
}

}  // namespace detail

/// Dense Levenberg-Marquardt for few-parameter least squares.
/// `eval(p, r, J)` fills the residual vector r (length n) and the row-major
/// n x p Jacobian dr/dp. Standard errors come from the local quadratic
/// model at the optimum: cov = (J^T J)^(-1), optionally scaled by the
/// reduced sum of squares.
inline LevMarResult levmar_fit(
    const std::function<void(const std::vector<double>&, std::vector<double>&,
                             std::vector<double>&)>& eval,
    std::vector<double> p0, std::size_t n, const LevMarOptions& opt = {}) {
    const std::size_t np = p0.size();
    std::vector<double> r(n), jac(n * np);
    std::vector<double> jtj(np * np), jtr(np), step, trial_r(n), trial_jac(n * np);

    auto ssq = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return s;
    };

    eval(p0, r, jac);
    double chi2 = ssq(r);
    double lambda = opt.lambda0;

    LevMarResult res;
    res.params = p0;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        // normal equations at current point
        for (std::size_t a = 0; a < np; ++a) {
            jtr[a] = 0.0;
            for (std::size_t b = 0; b <= a; ++b) jtj[a * np + b] = 0.0;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double* ji = &jac[i * np];
            for (std::size_t a = 0; a < np; ++a) {
                jtr[a] += ji[a] * r[i];
                for (std::size_t b = 0; b <= a; ++b) jtj[a * np + b] += ji[a] * ji[b];
            }
        }
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = a + 1; b < np; ++b) jtj[a * np + b] = jtj[b * np + a];

        bool moved = false;
        for (int tries = 0; tries < 24; ++tries) {
            std::vector<double> rhs(np);
            for (std::size_t a = 0; a < np; ++a) rhs[a] = -jtr[a];
            if (!detail::solve_damped(jtj, rhs, lambda, np, step)) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> trial(res.params);
            for (std::size_t a = 0; a < np; ++a) trial[a] += step[a];
            eval(trial, trial_r, trial_jac);
            double trial_chi2 = ssq(trial_r);
            if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
                double max_rel = 0.0;
                for (std::size_t a = 0; a < np; ++a)
                    max_rel = std::max(max_rel, std::abs(step[a]) /
                                                    (std::abs(trial[a]) + 1e-300));
                res.params = trial;
                r.swap(trial_r);
                jac.swap(trial_jac);
                chi2 = trial_chi2;
                lambda = std::max(lambda * 0.1, 1e-14);
                moved = true;
                if (max_rel < opt.rel_step_tol) {
                    res.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (res.converged) break;
        if (!moved) {
            // no downhill step found at any damping: treat as stationary
            res.converged = true;
            break;
        }
    }
    res.iterations = it + 1;
    res.residual_norm = std::sqrt(chi2);

    // rebuild undamped J^T J at the optimum for the covariance
    for (std::size_t a = 0; a < np; ++a)
        for (std::size_t b = 0; b < np; ++b) jtj[a * np + b] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* ji = &jac[i * np];
        for (std::size_t a = 0; a < np; ++a)
            for (std::size_t b = 0; b < np; ++b) jtj[a * np + b] += ji[a] * ji[b];
    }
    std::vector<double> cov;
    res.std_errors.assign(np, 0.0);
    if (detail::spd_inverse(jtj, np, cov)) {
        double scale = 1.0;
        if (opt.scale_covariance && n > np) scale = chi2 / static_cast<double>(n - np);
        for (std::size_t a = 0; a < np; ++a)
            res.std_errors[a] = std::sqrt(std::max(0.0, cov[a * np + a] * scale));
    }
    return res;
}

}  // namespace cavicrys
