#ifndef QSNN_SYNTHETIC_HPP
#define QSNN_SYNTHETIC_HPP

#include "qsnn/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qsnn {

/// Image with a bright Gaussian blob; target is the blob center normalized
/// to [0, 1] x [0, 1]. Deterministic per (seed, index).
struct BlobSample {
    Tensor image;                // (1, c, h, w), values in [0, 1]
    std::vector<double> target;  // {row, col} normalized
};

class BlobTask {
public:
    BlobTask(int channels, int height, int width, std::uint64_t seed)
        : channels_(channels), height_(height), width_(width), seed_(seed) {}

    BlobSample sample(std::uint64_t index) const;

    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }

private:
    int channels_;
    int height_;
    int width_;
    std::uint64_t seed_;
};

/// Deterministic calibration/eval images in [0, 1] for a given shape.
/// The first image always contains an exact 1.0 pixel so the measured
/// input maximum is 1.
std::vector<Tensor> synthetic_images(std::uint64_t seed, int count, int channels, int height,
                                     int width);

/// Parse a "synthetic:<seed>" data spec; returns false if it is a path.
bool parse_synthetic_spec(const std::string& spec, std::uint64_t& seed);

} // namespace qsnn

#endif
