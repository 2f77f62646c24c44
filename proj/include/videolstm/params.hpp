#pragma once

#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "videolstm/autodiff.hpp"
#include "videolstm/rng.hpp"

namespace vlsm {

// Ordered collection of named parameter tensors. Registration order is the
// canonical order for gradient reduction and for checkpoint layout, so it
// must be deterministic per model configuration.
class ParamStore {
public:
    int add(std::string name, Tensor value) {
        names_.push_back(std::move(name));
        values_.push_back(std::move(value));
        return static_cast<int>(values_.size()) - 1;
    }

    int count() const { return static_cast<int>(values_.size()); }
    const std::string& name(int i) const { return names_[static_cast<size_t>(i)]; }
    Tensor& value(int i) { return values_[static_cast<size_t>(i)]; }
    const Tensor& value(int i) const { return values_[static_cast<size_t>(i)]; }

    int index_of(const std::string& name) const {
        for (size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return static_cast<int>(i);
        return -1;
    }

    // Named sections in the TNSR dump format.
    void save(std::ostream& os) const {
        for (int i = 0; i < count(); ++i) {
            os << "PARAM " << names_[static_cast<size_t>(i)] << '\n';
            values_[static_cast<size_t>(i)].dump(os);
        }
    }

    // Loads into an already-registered store; names, order and shapes must
    // match the model that will consume the values.
    void load(std::istream& is) {
        for (int i = 0; i < count(); ++i) {
            std::string line;
            if (!std::getline(is, line)) throw FormatError("checkpoint: missing PARAM section");
            const std::string expect = "PARAM " + names_[static_cast<size_t>(i)];
            if (line != expect)
                throw FormatError("checkpoint: expected '" + expect + "', found '" + line + "'");
            Tensor t = Tensor::load(is);
            if (!t.same_shape(values_[static_cast<size_t>(i)]))
                throw FormatError("checkpoint: shape mismatch for " +
                                  names_[static_cast<size_t>(i)]);
            values_[static_cast<size_t>(i)] = std::move(t);
        }
    }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
};

// Per-evaluation graph leaves for every parameter, in store order. Each clip
// of a batch binds its own leaves, so forward/backward across clips never
// shares mutable graph state.
struct BoundParams {
    std::vector<ad::Var> leaves;

    explicit BoundParams(const ParamStore& store, bool requires_grad = true) {
        leaves.reserve(static_cast<size_t>(store.count()));
        for (int i = 0; i < store.count(); ++i)
            leaves.push_back(ad::leaf(store.value(i), requires_grad));
    }

    const ad::Var& operator[](int i) const { return leaves[static_cast<size_t>(i)]; }
};

// Uniform ±sqrt(6/(fan_in+fan_out)) init.
inline Tensor glorot_tensor(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    return rng.uniform_tensor(std::move(shape), -bound, bound);
}

inline Tensor glorot_matrix(int rows, int cols, Rng& rng) {
    return glorot_tensor({rows, cols}, rows, cols, rng);
}

inline Tensor glorot_kernel(int k, int cin, int cout, Rng& rng) {
    return glorot_tensor({k, k, cin, cout}, k * k * cin, k * k * cout, rng);
}

}  // namespace vlsm
