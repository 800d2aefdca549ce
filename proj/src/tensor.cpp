#include "aesth/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace aesth {

namespace {

std::size_t checked_product(const std::vector<int>& dims) {
    if (dims.empty() || dims.size() > 4) {
        throw ShapeError("tensor order must be between 1 and 4, got " +
                         std::to_string(dims.size()));
    }
    std::size_t n = 1;
    for (int d : dims) {
        if (d <= 0) throw ShapeError("tensor dims must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::uint32_t to_le32(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) return std::byteswap(v);
    return v;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    std::uint32_t le = to_le32(v);
    out.write(reinterpret_cast<const char*>(&le), 4);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw FormatError(std::string("truncated tensor snapshot while reading ") + what);
    return to_le32(v);
}

}  // namespace

Tensor::Tensor(std::vector<int> dims) {
    std::size_t n = checked_product(dims);
    dims_ = std::move(dims);
    data_.assign(n, 0.0f);
}

Tensor Tensor::full(std::vector<int> dims, float value) {
    Tensor t(std::move(dims));
    for (float& x : t.data_) x = value;
    return t;
}

Tensor Tensor::from_data(std::vector<int> dims, std::vector<float> data) {
    std::size_t n = checked_product(dims);
    if (n != data.size()) {
        throw ShapeError("data length " + std::to_string(data.size()) +
                         " does not match dims product " + std::to_string(n));
    }
    Tensor t;
    t.dims_ = std::move(dims);
    t.data_ = std::move(data);
    return t;
}

Tensor Tensor::he_normal(std::vector<int> dims, int fan_in, SeededRng& rng) {
    Tensor t(std::move(dims));
    double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) {
        t.data_[i] = static_cast<float>(rng.normal(0.0, stddev));
    }
    return t;
}

bool Tensor::all_finite() const {
    for (float x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Tensor::dims_string() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << 'x';
        os << dims_[i];
    }
    return os.str();
}

std::size_t Tensor::offset(std::initializer_list<int> idx) const {
    if (idx.size() != dims_.size()) {
        throw ShapeError("indexing " + std::to_string(idx.size()) + "-d into " +
                         dims_string() + " tensor");
    }
    std::size_t off = 0;
    std::size_t i = 0;
    for (int v : idx) {
        off = off * static_cast<std::size_t>(dims_[i]) + static_cast<std::size_t>(v);
        ++i;
    }
    return off;
}

void save_tensor(std::ostream& out, const Tensor& t) {
    out.write("TNSR", 4);
    write_u32(out, 1);
    write_u32(out, static_cast<std::uint32_t>(t.ndim()));
    for (int d : t.dims()) write_u32(out, static_cast<std::uint32_t>(d));
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(float)));
    } else {
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, &t.data()[i], 4);
            write_u32(out, bits);
        }
    }
    if (!out) throw FormatError("failed writing tensor snapshot");
}

Tensor load_tensor(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TNSR", 4) != 0) {
        throw FormatError("bad tensor snapshot magic");
    }
    std::uint32_t version = read_u32(in, "version");
    if (version != 1) throw FormatError("unsupported tensor snapshot version " + std::to_string(version));
    std::uint32_t ndim = read_u32(in, "ndim");
    if (ndim < 1 || ndim > 4) throw FormatError("tensor snapshot ndim out of range");
    std::vector<int> dims(ndim);
    for (std::uint32_t i = 0; i < ndim; ++i) {
        std::uint32_t d = read_u32(in, "dims");
        if (d == 0 || d > (1u << 24)) throw FormatError("tensor snapshot dim out of range");
        dims[i] = static_cast<int>(d);
    }
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    std::vector<float> data(n);
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(float)));
        if (!in) throw FormatError("truncated tensor snapshot while reading data");
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t bits = read_u32(in, "data");
            std::memcpy(&data[i], &bits, 4);
        }
    }
    return Tensor::from_data(std::move(dims), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    save_tensor(out, t);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return load_tensor(in);
}

}  // namespace aesth
