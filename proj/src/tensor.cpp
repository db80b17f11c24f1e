#include "qsnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qsnn {

const char* domain_name(Domain d) {
    return d == Domain::Real ? "real" : "int32";
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

namespace {

std::size_t checked_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw std::invalid_argument("tensor dimension must be positive, got " +
                                        shape_to_string(shape));
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

} // namespace

Tensor Tensor::zeros(std::vector<int> shape, Domain domain) {
    Tensor t;
    t.size_ = checked_size(shape);
    t.shape_ = std::move(shape);
    t.domain_ = domain;
    if (domain == Domain::Real) {
        t.real_.assign(t.size_, 0.0);
    } else {
        t.int_.assign(t.size_, 0);
    }
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t = zeros(std::move(shape), Domain::Real);
    std::fill(t.real_.begin(), t.real_.end(), value);
    return t;
}

Tensor Tensor::from_real(std::vector<int> shape, std::vector<double> data) {
    Tensor t;
    t.size_ = checked_size(shape);
    if (data.size() != t.size_) {
        throw std::invalid_argument("element count " + std::to_string(data.size()) +
                                    " does not match shape " + shape_to_string(shape));
    }
    t.shape_ = std::move(shape);
    t.domain_ = Domain::Real;
    t.real_ = std::move(data);
    return t;
}

Tensor Tensor::from_int(std::vector<int> shape, std::vector<std::int32_t> data) {
    Tensor t;
    t.size_ = checked_size(shape);
    if (data.size() != t.size_) {
        throw std::invalid_argument("element count " + std::to_string(data.size()) +
                                    " does not match shape " + shape_to_string(shape));
    }
    t.shape_ = std::move(shape);
    t.domain_ = Domain::Int32;
    t.int_ = std::move(data);
    return t;
}

int Tensor::dim(std::size_t i) const {
    if (i >= shape_.size()) {
        throw std::out_of_range("dim " + std::to_string(i) + " out of range for rank " +
                                std::to_string(shape_.size()) + " tensor");
    }
    return shape_[i];
}

void Tensor::check_real(const char* op) const {
    if (domain_ != Domain::Real) {
        throw std::invalid_argument(std::string(op) + ": tensor is int32, expected real domain");
    }
}

void Tensor::check_int(const char* op) const {
    if (domain_ != Domain::Int32) {
        throw std::invalid_argument(std::string(op) + ": tensor is real, expected int32 domain");
    }
}

std::span<double> Tensor::real() {
    check_real("real()");
    return real_;
}

std::span<const double> Tensor::real() const {
    check_real("real()");
    return real_;
}

std::span<std::int32_t> Tensor::ints() {
    check_int("ints()");
    return int_;
}

std::span<const std::int32_t> Tensor::ints() const {
    check_int("ints()");
    return int_;
}

std::size_t Tensor::index(int n, int c, int h, int w) const {
    if (shape_.size() != 4) {
        throw std::invalid_argument("index(n,c,h,w) requires a 4-D tensor, shape is " +
                                    shape_str());
    }
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
}

std::string Tensor::shape_str() const {
    return shape_to_string(shape_);
}

double Tensor::abs_max() const {
    double m = 0.0;
    if (domain_ == Domain::Real) {
        for (double v : real_) m = std::max(m, std::fabs(v));
    } else {
        for (std::int32_t v : int_) m = std::max(m, std::fabs(static_cast<double>(v)));
    }
    return m;
}

double Tensor::max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    if (domain_ == Domain::Real) {
        for (double v : real_) m = std::max(m, v);
    } else {
        for (std::int32_t v : int_) m = std::max(m, static_cast<double>(v));
    }
    return m;
}

Tensor Tensor::to_real() const {
    if (domain_ == Domain::Real) return *this;
    std::vector<double> out(int_.begin(), int_.end());
    return from_real(shape_, std::move(out));
}

} // namespace qsnn
