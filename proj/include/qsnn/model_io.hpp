#ifndef QSNN_MODEL_IO_HPP
#define QSNN_MODEL_IO_HPP

#include "qsnn/graph.hpp"
#include "qsnn/snn_model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qsnn {

enum class ModelKind : std::uint8_t { Qann, Snn };

/// Models are stored as <path> (JSON manifest) plus <path>.bin (weight blob,
/// little-endian, CRC32-checked). Weights: f32 for QANNs, packed integers
/// (two 4-bit codes per byte, low nibble first) for SNNs; biases 32-bit.
void save_model(const LayerGraph& graph, const std::string& path);
void save_model(const SnnModel& model, const std::string& path);

struct LoadedModel {
    ModelKind kind = ModelKind::Qann;
    LayerGraph qann;
    SnnModel snn;
};

LoadedModel load_model(const std::string& path);
LayerGraph load_qann(const std::string& path);
SnnModel load_snn(const std::string& path);

/// Two's-complement packing of integer codes. Widths up to 4 pack two codes
/// per byte (low nibble = earlier element); 5..8 take one byte; 9..16 and
/// 17..32 take 2 and 4 little-endian bytes.
std::vector<std::uint8_t> pack_codes(std::span<const std::int32_t> codes, int bit_width);
std::vector<std::int32_t> unpack_codes(std::span<const std::uint8_t> bytes, std::size_t count,
                                       int bit_width);

/// Storage width for a code span: the smallest of {4, 8, 16, 32} that fits
/// both the values and the declared width.
int storage_width(std::span<const std::int32_t> codes, int declared_bits);

struct SizeSection {
    std::string name;
    std::uint64_t bytes = 0;
};

struct SizeReport {
    std::vector<SizeSection> sections; // blob sections, in file order
    std::uint64_t manifest_bytes = 0;
    std::uint64_t blob_bytes = 0;
    std::uint64_t total() const { return manifest_bytes + blob_bytes; }
    std::uint64_t weight_bytes() const; // sum of */weights sections
    std::uint64_t bias_bytes() const;
    std::string table() const;
};

SizeReport model_size_report(const LayerGraph& graph);
SizeReport model_size_report(const SnnModel& model);

/// Raw tensor container (magic QTEN): domain byte, rank, u32 dims, then
/// f64 or i32 payload, all little-endian.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

} // namespace qsnn

#endif
