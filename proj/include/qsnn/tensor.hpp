#ifndef QSNN_TENSOR_HPP
#define QSNN_TENSOR_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qsnn {

/// Element domain of a tensor. One domain per tensor; mixing domains in an
/// arithmetic op is a contract error, not a silent promotion.
enum class Domain : std::uint8_t { Real, Int32 };

const char* domain_name(Domain d);

/// Dense row-major N-D array holding either 64-bit reals or 32-bit signed
/// integers. 4-D tensors follow (batch, channels, height, width).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, Domain domain = Domain::Real);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from_real(std::vector<int> shape, std::vector<double> data);
    static Tensor from_int(std::vector<int> shape, std::vector<std::int32_t> data);

    const std::vector<int>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    int dim(std::size_t i) const;
    std::size_t size() const { return size_; }
    Domain domain() const { return domain_; }
    bool is_real() const { return domain_ == Domain::Real; }
    bool is_int() const { return domain_ == Domain::Int32; }

    std::span<double> real();
    std::span<const double> real() const;
    std::span<std::int32_t> ints();
    std::span<const std::int32_t> ints() const;

    /// Flat offset of a 4-D index. The tensor must be 4-D.
    std::size_t index(int n, int c, int h, int w) const;

    double real_at(int n, int c, int h, int w) const { return real()[index(n, c, h, w)]; }
    std::int32_t int_at(int n, int c, int h, int w) const { return ints()[index(n, c, h, w)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    /// Max |element| over the tensor, as a double in either domain.
    double abs_max() const;
    /// Max element (signed) over the tensor.
    double max_value() const;

    /// Elementwise conversion Int32 -> Real (codes become doubles).
    Tensor to_real() const;

private:
    std::vector<int> shape_;
    std::size_t size_ = 0;
    Domain domain_ = Domain::Real;
    std::vector<double> real_;
    std::vector<std::int32_t> int_;

    void check_real(const char* op) const;
    void check_int(const char* op) const;
};

std::string shape_to_string(const std::vector<int>& shape);

} // namespace qsnn

#endif
