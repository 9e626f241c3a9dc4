#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace meca {

// Image geometry, channel-major (C x H x W).
struct Shape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    [[nodiscard]] std::size_t size() const { return channels * height * width; }
    [[nodiscard]] std::size_t plane() const { return height * width; }
    [[nodiscard]] std::vector<std::size_t> dims() const { return {channels, height, width}; }
    [[nodiscard]] std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense row-major tensor of doubles. product(dims) == data.size() always holds.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
    Tensor(std::vector<std::size_t> dims, std::vector<double> data);
    explicit Tensor(const Shape& shape, double fill = 0.0) : Tensor(shape.dims(), fill) {}

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.dims_); }

    [[nodiscard]] const std::vector<std::size_t>& dims() const { return dims_; }
    [[nodiscard]] std::size_t rank() const { return dims_.size(); }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    [[nodiscard]] std::span<double> values() { return data_; }
    [[nodiscard]] std::span<const double> values() const { return data_; }
    [[nodiscard]] double* data() { return data_.data(); }
    [[nodiscard]] const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Index into a rank-3 (C, H, W) tensor.
    double& at(std::size_t c, std::size_t h, std::size_t w) {
        return data_[(c * dims_[1] + h) * dims_[2] + w];
    }
    [[nodiscard]] double at(std::size_t c, std::size_t h, std::size_t w) const {
        return data_[(c * dims_[1] + h) * dims_[2] + w];
    }

    [[nodiscard]] bool all_finite() const;
    [[nodiscard]] double sum() const;
    void fill(double v);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<double> data_;
};

std::size_t product(std::span<const std::size_t> dims);
std::string dims_str(std::span<const std::size_t> dims);

// Elementwise clamp into [lo, hi].
void clip(Tensor& t, double lo = 0.0, double hi = 1.0);

}  // namespace meca
