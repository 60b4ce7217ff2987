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

#include <cmath>
#include <functional>
#include <limits>

namespace icontrol {

struct BfgsOptions {
    int max_iterations = 2000;
    double gradient_tol = 1e-8;  // on the Euclidean norm
    double armijo_c1 = 1e-4;
    int max_backtracks = 60;
    int stall_iterations = 20;  // consecutive iterations without relative progress
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    double gradient_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Objective: returns f(x) and writes the gradient into g.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& g)>;

/// Quasi-Newton descent with an inverse-Hessian BFGS update and Armijo
/// backtracking. The inverse Hessian is reset to identity whenever the
/// update would lose positive definiteness or the direction is not descent.
inline BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& opt) {
    const Eigen::Index n = x0.size();
    BfgsResult res;
    res.x = std::move(x0);
    Eigen::VectorXd g(n);
    double fx = f(res.x, g);
    res.evaluations = 1;

    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd xn(n), gn(n);
    int stalled = 0;

    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        if (g.norm() <= opt.gradient_tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd p = -(h * g);
        double slope = g.dot(p);
        if (!(slope < 0.0)) {
            h.setIdentity();
            p = -g;
            slope = g.dot(p);
        }

        double alpha = 1.0;
        bool accepted = false;
        double fn = fx;
        for (int ls = 0; ls < opt.max_backtracks; ++ls) {
            xn = res.x + alpha * p;
            fn = f(xn, gn);
            ++res.evaluations;
            if (std::isfinite(fn) && fn <= fx + opt.armijo_c1 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (h.isIdentity()) break;  // steepest descent also failed
            h.setIdentity();
            continue;
        }

        const Eigen::VectorXd s = xn - res.x;
        const Eigen::VectorXd y = gn - g;
        const double sy = s.dot(y);
        const double progress = fx - fn;
        res.x = xn;
        g = gn;
        fx = fn;

        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = h * y;
            // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded.
            h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) -
                 rho * (hy * s.transpose() + s * hy.transpose());
        } else {
            h.setIdentity();
        }

        stalled = progress <= 1e-15 * std::max(1.0, std::abs(fx)) ? stalled + 1 : 0;
        if (stalled >= opt.stall_iterations) break;
    }
    res.iterations = it;
    res.value = fx;
    res.gradient_norm = g.norm();
    if (res.gradient_norm <= opt.gradient_tol) res.converged = true;
    return res;
}

}  // namespace icontrol
