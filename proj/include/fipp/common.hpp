// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace fipp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file contents; the message carries the line number.
class ParseError : public Error {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid arguments or configuration (shape mismatch, out-of-range parameter).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Divergence, non-convergence or factorization failure.
class NumericalError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) {
        throw ConfigError(what);
    }
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ConfigError(std::string(where) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
    }
}

/// Flip each column so its largest-magnitude entry is positive (first index wins ties).
inline void fix_column_signs(Matrix& m) {
    for (Index j = 0; j < m.cols(); ++j) {
        Index best = 0;
        double best_abs = -1.0;
        for (Index i = 0; i < m.rows(); ++i) {
            const double a = std::abs(m(i, j));
            if (a > best_abs) {
                best_abs = a;
                best = i;
            }
        }
        if (m.rows() > 0 && m(best, j) < 0.0) {
            m.col(j) = -m.col(j);
        }
    }
}

} // namespace detail

} // namespace fipp
