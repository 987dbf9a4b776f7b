#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dscnn {

namespace detail {
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

/// Dense row-major tensor of 32-bit floats. Shapes are lists of positive
/// extents; rank 0 is an empty (unallocated) tensor.
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, float fill = 0.0f) : shape_(std::move(shape)) {
        std::size_t n = 1;
        for (int d : shape_) {
            if (d <= 0) throw std::invalid_argument("Tensor: extents must be positive, got " + shape_str(shape_));
            n *= static_cast<std::size_t>(d);
        }
        data_.assign(n, fill);
    }

    Tensor(std::vector<int> shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
        std::size_t n = 1;
        for (int d : shape_) {
            if (d <= 0) throw std::invalid_argument("Tensor: extents must be positive, got " + shape_str(shape_));
            n *= static_cast<std::size_t>(d);
        }
        if (n != data_.size())
            throw std::invalid_argument("Tensor: " + std::to_string(data_.size()) + " values for shape " +
                                        shape_str(shape_));
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    float& operator[](std::size_t i) { return data_[i]; }
    const float& operator[](std::size_t i) const { return data_[i]; }

    // rank-2 access (rows x cols)
    float& at(int r, int c) { return data_[static_cast<std::size_t>(r) * dim(1) + c]; }
    const float& at(int r, int c) const { return data_[static_cast<std::size_t>(r) * dim(1) + c]; }

    // rank-3 access (channel, row, col)
    float& at(int c, int y, int x) {
        return data_[(static_cast<std::size_t>(c) * dim(1) + y) * dim(2) + x];
    }
    const float& at(int c, int y, int x) const {
        return data_[(static_cast<std::size_t>(c) * dim(1) + y) * dim(2) + x];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    /// Flatten to rank 1 without copying the payload.
    Tensor reshaped(std::vector<int> shape) const {
        Tensor t;
        t.shape_ = std::move(shape);
        std::size_t n = 1;
        for (int d : t.shape_) n *= static_cast<std::size_t>(d);
        if (n != data_.size())
            throw std::invalid_argument("reshape: " + shape_str(t.shape_) + " incompatible with " +
                                        std::to_string(data_.size()) + " elements");
        t.data_ = data_;
        return t;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }

  private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

inline std::string shape_str(const Tensor& t) { return Tensor::shape_str(t.shape()); }

inline bool all_finite(const Tensor& t) {
    for (float v : t.values())
        if (!std::isfinite(v)) return false;
    return true;
}

/// Concatenate rank-1 tensors in argument order.
inline Tensor concat(const Tensor& a, const Tensor& b) {
    Tensor out({static_cast<int>(a.size() + b.size())});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

}  // namespace dscnn
