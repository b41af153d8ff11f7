#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gendd {

/// Dense row-major double tensor. Small and deliberately boring; all math
/// that matters for throughput goes through Eigen maps over `data`.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel(shape), 0.0);
    }
    Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
        data.assign(numel(shape), fill);
    }

    static std::size_t numel(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<std::size_t> s, double v) { return Tensor(std::move(s), v); }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    std::size_t dim(std::size_t i) const { return shape.at(i); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // [N, C, H, W] addressing
    double& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    double at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    // [N, K] addressing
    double& at2(std::size_t n, std::size_t k) { return data[n * shape[1] + k]; }
    double at2(std::size_t n, std::size_t k) const { return data[n * shape[1] + k]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(double v) { data.assign(data.size(), v); }

    std::string shape_str() const;
};

void check_same_shape(const Tensor& a, const Tensor& b, const char* where);

bool all_finite(const Tensor& t);

/// FNV-1a over the raw parameter bytes; used for frozen-weight assertions.
std::uint64_t tensor_checksum(const Tensor& t);

} // namespace gendd
