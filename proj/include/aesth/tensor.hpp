#ifndef AESTH_TENSOR_HPP_
#define AESTH_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "aesth/errors.hpp"
#include "aesth/rng.hpp"

namespace aesth {

/// Dense n-dimensional float32 array, row-major, order <= 4 (N x C x H x W).
///
/// Tensors are plain values: operations never mutate their inputs, so a tensor
/// handed to another thread stays valid and constant.
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor of the given dims. Every dim must be positive.
    explicit Tensor(std::vector<int> dims);

    static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }
    static Tensor full(std::vector<int> dims, float value);
    static Tensor from_data(std::vector<int> dims, std::vector<float> data);

    /// He-style fan-in scaled normal init: stddev = sqrt(2 / fan_in).
    static Tensor he_normal(std::vector<int> dims, int fan_in, SeededRng& rng);

    int ndim() const { return static_cast<int>(dims_.size()); }
    const std::vector<int>& dims() const { return dims_; }
    int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    float& at(int a) { return data_[offset({a})]; }
    float at(int a) const { return data_[offset({a})]; }
    float& at(int a, int b) { return data_[offset({a, b})]; }
    float at(int a, int b) const { return data_[offset({a, b})]; }
    float& at(int a, int b, int c) { return data_[offset({a, b, c})]; }
    float at(int a, int b, int c) const { return data_[offset({a, b, c})]; }
    float& at(int a, int b, int c, int d) { return data_[offset({a, b, c, d})]; }
    float at(int a, int b, int c, int d) const { return data_[offset({a, b, c, d})]; }

    bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }
    bool all_finite() const;

    /// "2x3x8x8" style rendering for error messages.
    std::string dims_string() const;

private:
    std::size_t offset(std::initializer_list<int> idx) const;

    std::vector<int> dims_;
    std::vector<float> data_;
};

/// Binary snapshot: magic "TNSR", u32 version=1, u32 ndim, ndim x u32 dims,
/// then product(dims) little-endian float32 values.
void save_tensor(std::ostream& out, const Tensor& t);
Tensor load_tensor(std::istream& in);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace aesth

#endif  // AESTH_TENSOR_HPP_
