// Copyright 2026 The icontrol Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace icontrol {

struct LmOptions {
    int max_iterations = 500;
    double relative_tol = 1e-14;  // on the residual sum of squares
    double step_tol = 1e-13;      // relative parameter step
    double initial_lambda = 1e-3;
};

struct LmResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;  // NaN when the normal matrix is singular
    double rss = std::numeric_limits<double>::infinity();
    int dof = 0;
    int iterations = 0;
    bool converged = false;
};

/// Writes residuals r (size m) and Jacobian J (m x n) at p.
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j)>;

/// Levenberg-Marquardt with Marquardt's diagonal scaling. The covariance is
/// (J^T J)^-1 * rss / (m - n) at the solution.
inline LmResult levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd p0, const LmOptions& opt = {}) {
    LmResult res;
    res.params = std::move(p0);
    const Eigen::Index n = res.params.size();
    Eigen::VectorXd r, rn;
    Eigen::MatrixXd j, jn;
    fn(res.params, r, j);
    const Eigen::Index m = r.size();
    res.dof = static_cast<int>(m - n);
    double rss = r.squaredNorm();
    double lambda = opt.initial_lambda;

    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it + 1;
        const Eigen::MatrixXd jtj = j.transpose() * j;
        const Eigen::VectorXd jtr = j.transpose() * r;
        if (jtr.lpNorm<Eigen::Infinity>() <= 1e-300 || rss == 0.0) {
            res.converged = true;
            break;
        }
        bool improved = false;
        for (int tries = 0; tries < 60; ++tries) {
            Eigen::MatrixXd a = jtj;
            for (Eigen::Index k = 0; k < n; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-300);
            const Eigen::VectorXd step = a.ldlt().solve(-jtr);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd pn = res.params + step;
            fn(pn, rn, jn);
            const double rss_new = rn.allFinite() ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
            if (rss_new <= rss) {
                const double drop = rss - rss_new;
                const double rel_step = step.norm() / (res.params.norm() + 1e-30);
                res.params = pn;
                r.swap(rn);
                j.swap(jn);
                lambda = std::max(lambda / 3.0, 1e-12);
                improved = true;
                if (drop <= opt.relative_tol * rss || rel_step <= opt.step_tol) res.converged = true;
                rss = rss_new;
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e16) break;
        }
        if (!improved) {
            // No downhill step at any damping: a stationary point to precision.
            res.converged = true;
            break;
        }
        if (res.converged) break;
    }
    res.rss = rss;

    const Eigen::MatrixXd jtj = j.transpose() * j;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    if (res.dof > 0 && lu.isInvertible()) {
        res.covariance = lu.inverse() * (rss / res.dof);
    } else {
        res.covariance = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
    }
    return res;
}

}  // namespace icontrol
