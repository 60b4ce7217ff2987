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

// Reference propagators built without the closed form: the generator
// H = (Omega0 (cos phi sx + sin phi sy) + delta sz) / 2 is exponentiated by
// scaling and squaring of a truncated Taylor series.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

using Mat = Eigen::Matrix2cd;

inline Mat sigma_x() { return (Mat() << 0, 1, 1, 0).finished(); }
inline Mat sigma_y() {
    return (Mat() << std::complex<double>(0, 0), std::complex<double>(0, 1), std::complex<double>(0, -1),
            std::complex<double>(0, 0))
        .finished();
}
inline Mat sigma_z() { return (Mat() << -1, 0, 0, 1).finished(); }

/// exp(a) by scaling and squaring with an 18-term Taylor series.
inline Mat expm(const Mat& a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Mat b = a / std::pow(2.0, squarings);
    Mat term = Mat::Identity();
    Mat sum = Mat::Identity();
    for (int k = 1; k <= 18; ++k) {
        term = term * b / static_cast<double>(k);
        sum += term;
    }
    for (int i = 0; i < squarings; ++i) sum = sum * sum;
    return sum;
}

/// exp(-i H t) for one square segment. Rates in rad/s.
inline Mat segment(double duration, double rabi, double phase, double detuning) {
    const Mat h = 0.5 * (rabi * (std::cos(phase) * sigma_x() + std::sin(phase) * sigma_y()) + detuning * sigma_z());
    return expm(std::complex<double>(0, -duration) * h);
}

struct Seg {
    double duration, rabi, phase;
};

inline Mat train(const std::vector<Seg>& segs, double detuning) {
    Mat u = Mat::Identity();
    for (const auto& s : segs) u = segment(s.duration, s.rabi, s.phase, detuning) * u;
    return u;
}

}  // namespace oracle
