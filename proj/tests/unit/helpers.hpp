#pragma once

#include <random>

#include "types.hpp"

namespace lqtest {

inline lesionquant::Frame random_frame(std::mt19937_64& rng, int w, int h, int levels = 0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    lesionquant::Frame f(w, h);
    for (auto& v : f.pixels) {
        v = levels > 1 ? static_cast<float>(std::uniform_int_distribution<int>(0, levels - 1)(rng)) / (levels - 1)
                       : static_cast<float>(u(rng));
    }
    return f;
}

inline lesionquant::BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double p = 0.5) {
    std::bernoulli_distribution b(p);
    lesionquant::BinaryMask m(w, h);
    for (auto& v : m.bits) v = b(rng);
    return m;
}

}  // namespace lqtest
