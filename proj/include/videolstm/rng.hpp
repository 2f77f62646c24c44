#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "videolstm/tensor.hpp"

namespace vlsm {

// Seeded RNG used everywhere randomness is needed. One engine per concern
// (init, sampling, dropout, data generation) keeps runs reproducible when a
// single knob changes.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    // Inclusive bounds.
    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(engine_);
    }

    uint64_t next_seed() { return engine_(); }

    Tensor uniform_tensor(std::vector<int> shape, double lo, double hi) {
        Tensor t(std::move(shape));
        for (int i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
        return t;
    }

    std::string state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void restore(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
        if (!is) throw FormatError("Rng::restore: bad engine state");
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace vlsm
