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
#ifndef EMPC_SAMPLING_HPP
#define EMPC_SAMPLING_HPP

#include "empc/dynamics.hpp"

#include <cstdint>
#include <random>

namespace empc {

/// Reproducible random stream identified by (seed, stream). Independent of
/// the standard library's distribution implementations.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream);

    /// Uniform on [0, 1).
    double uniform();
    /// Uniform on the box; zero-width coordinates return the bound exactly.
    Vector uniform_in(const Box& box);

private:
    std::mt19937_64 engine_;
};

/// Component `dim` of the Halton point with the given index (radical
/// inverse in the dim-th prime base). index >= 1.
double halton(std::uint64_t index, int dim);

}  // namespace empc

#endif  // EMPC_SAMPLING_HPP
