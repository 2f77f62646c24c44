#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "videolstm/errors.hpp"

namespace vlsm {

// Dense real tensor, row-major, channels-last. Extents are positive ints;
// a scalar is represented as shape {1}. All cell math, gradients and
// checkpoints live in these.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, double fill = 0.0)
        : shape_(std::move(shape)) {
        int n = 1;
        for (int e : shape_) {
            if (e <= 0) throw ShapeError("Tensor: extents must be positive");
            n *= e;
        }
        data_.assign(static_cast<size_t>(n), fill);
    }

    static Tensor scalar(double v) {
        Tensor t({1});
        t.data_[0] = v;
        return t;
    }

    static Tensor zeros_like(const Tensor& o) { return Tensor(o.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int size() const { return static_cast<int>(data_.size()); }
    int extent(int d) const { return shape_[static_cast<size_t>(d)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<size_t>(i)]; }

    // Row-major indexed access. at(i,j) for H×W, at(i,j,c) for H×W×C,
    // at(u,v,ci,co) for k×k×Cin×Cout kernels.
    double& at(int i, int j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
    double at(int i, int j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }

    double& at(int i, int j, int c) {
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + c)];
    }
    double at(int i, int j, int c) const {
        return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + c)];
    }

    double& at(int i, int j, int k, int l) {
        return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
    }
    double at(int i, int j, int k, int l) const {
        return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

    double abs_max() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::fabs(v));
        return m;
    }

    Tensor reshaped(std::vector<int> new_shape) const {
        Tensor t(std::move(new_shape));
        if (t.size() != size())
            throw ShapeError("Tensor::reshaped: element count mismatch");
        t.data_ = data_;
        return t;
    }

    // TNSR dump: text header "TNSR <ndim> <extents...>\n" followed by the
    // values as little-endian 64-bit floats in row-major order.
    void dump(std::ostream& os) const {
        os << "TNSR " << ndim();
        for (int e : shape_) os << ' ' << e;
        os << '\n';
        static_assert(sizeof(double) == 8);
        os.write(reinterpret_cast<const char*>(data_.data()),
                 static_cast<std::streamsize>(data_.size() * sizeof(double)));
        if (!os) throw IoError("Tensor::dump: write failed");
    }

    static Tensor load(std::istream& is) {
        std::string header;
        if (!std::getline(is, header)) throw FormatError("TNSR: missing header");
        std::istringstream hs(header);
        std::string magic;
        hs >> magic;
        if (magic != "TNSR") throw FormatError("TNSR: bad magic '" + magic + "'");
        int nd = 0;
        if (!(hs >> nd) || nd <= 0) throw FormatError("TNSR: bad ndim");
        std::vector<int> shape(static_cast<size_t>(nd));
        for (int& e : shape) {
            if (!(hs >> e) || e <= 0) throw FormatError("TNSR: bad extent");
        }
        Tensor t(std::move(shape));
        is.read(reinterpret_cast<char*>(t.data_.data()),
                static_cast<std::streamsize>(t.data_.size() * sizeof(double)));
        if (is.gcount() != static_cast<std::streamsize>(t.data_.size() * sizeof(double)))
            throw FormatError("TNSR: truncated payload");
        return t;
    }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

inline std::string shape_str(const Tensor& t) {
    std::string s = "(";
    for (int d = 0; d < t.ndim(); ++d) {
        if (d) s += "x";
        s += std::to_string(t.extent(d));
    }
    return s + ")";
}

}  // namespace vlsm
