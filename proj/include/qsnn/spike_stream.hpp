#ifndef QSNN_SPIKE_STREAM_HPP
#define QSNN_SPIKE_STREAM_HPP

#include "qsnn/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qsnn {

/// SPKS stream file: magic "SPKS", version u16, frame shape as four u32,
/// frame count u64 (all little-endian), then one bit-packed frame after
/// another, row-major, LSB-first within each byte.
inline constexpr std::uint16_t kSpikeStreamVersion = 1;

void write_spike_stream(const std::string& path, std::span<const Tensor> frames);

std::vector<Tensor> read_spike_stream(const std::string& path);

/// Seeded Bernoulli spike frames for an image in [0, 1]; spike probability
/// per pixel equals the pixel value.
std::vector<Tensor> bernoulli_stream(const Tensor& image, int frame_count, std::uint64_t seed);

} // namespace qsnn

#endif
