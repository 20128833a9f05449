/*
 Copyright 2026 The empc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#ifndef EMPC_TYPES_HPP
#define EMPC_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace empc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Trajectory = std::vector<Vector>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatches, out-of-range values, bad text.
class InputError : public Error {
public:
    using Error::Error;
};

/// A computation produced a non-finite value or failed to converge.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, int coordinate = -1)
        : Error(what), coordinate_(coordinate) {}

    /// Offending vector coordinate, or -1 when not applicable.
    int coordinate() const noexcept { return coordinate_; }

private:
    int coordinate_;
};

/// A linear system that is singular in the sense required by a Lyapunov or
/// Riccati solve.
class NotSchurAdmissible : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Failure inside one stage of terminal-ingredient synthesis.
class SynthesisError : public Error {
public:
    SynthesisError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace empc

#endif  // EMPC_TYPES_HPP
