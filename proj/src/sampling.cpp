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
#include "empc/sampling.hpp"

#include <array>

namespace empc {

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
    engine_.seed(seq);
}

double RandomStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

Vector RandomStream::uniform_in(const Box& box) {
    Vector v(box.dim());
    for (int i = 0; i < box.dim(); ++i) {
        const double r = uniform();
        v[i] = box.lower[i] == box.upper[i] ? box.lower[i] + 0.0 : box.lower[i] + (box.upper[i] - box.lower[i]) * r;
    }
    return v;
}

double halton(std::uint64_t index, int dim) {
    static constexpr std::array<std::uint64_t, 16> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    if (dim < 0 || dim >= static_cast<int>(kPrimes.size())) throw InputError("halton: dimension out of range");
    const std::uint64_t base = kPrimes[static_cast<std::size_t>(dim)];
    double f = 1.0;
    double r = 0.0;
    while (index > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

}  // namespace empc
