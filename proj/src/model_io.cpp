#include "qsnn/model_io.hpp"

#include <json.hpp>
#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qsnn {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
    return static_cast<std::uint32_t>(in[at]) | (static_cast<std::uint32_t>(in[at + 1]) << 8) |
           (static_cast<std::uint32_t>(in[at + 2]) << 16) |
           (static_cast<std::uint32_t>(in[at + 3]) << 24);
}

float get_f32(std::span<const std::uint8_t> in, std::size_t at) {
    const std::uint32_t bits = get_u32(in, at);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::uint32_t blob_crc32(std::span<const std::uint8_t> blob) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, blob.data(), static_cast<uInt>(blob.size()));
    return static_cast<std::uint32_t>(crc);
}

// Accumulates blob sections and their manifest records.
struct BlobWriter {
    std::vector<std::uint8_t> bytes;
    json sections = json::array();

    void add(const std::string& name, const std::string& encoding, std::size_t count,
             std::vector<std::uint8_t> payload) {
        json s;
        s["name"] = name;
        s["encoding"] = encoding;
        s["offset"] = bytes.size();
        s["bytes"] = payload.size();
        s["count"] = count;
        sections.push_back(std::move(s));
        bytes.insert(bytes.end(), payload.begin(), payload.end());
    }

    void add_f32(const std::string& name, std::span<const double> values) {
        std::vector<std::uint8_t> payload;
        payload.reserve(values.size() * 4);
        for (double v : values) put_f32(payload, static_cast<float>(v));
        add(name, "f32", values.size(), std::move(payload));
    }
};

struct BlobReader {
    std::vector<std::uint8_t> bytes;
    const json* sections = nullptr;

    const json& find(const std::string& name) const {
        for (const json& s : *sections) {
            if (s.at("name").get<std::string>() == name) return s;
        }
        throw std::runtime_error("model blob is missing section '" + name + "'");
    }

    std::span<const std::uint8_t> payload(const json& s) const {
        const std::size_t offset = s.at("offset").get<std::size_t>();
        const std::size_t size = s.at("bytes").get<std::size_t>();
        if (offset + size > bytes.size()) {
            throw std::runtime_error("truncated blob: section '" +
                                     s.at("name").get<std::string>() + "' ends past the blob");
        }
        return std::span<const std::uint8_t>(bytes).subspan(offset, size);
    }

    std::vector<double> read_f32(const std::string& name) const {
        const json& s = find(name);
        if (s.at("encoding") != "f32") {
            throw std::runtime_error("section '" + name + "' has unexpected encoding");
        }
        auto p = payload(s);
        const std::size_t count = s.at("count").get<std::size_t>();
        if (p.size() != count * 4) {
            throw std::runtime_error("truncated blob: section '" + name + "' size mismatch");
        }
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = get_f32(p, i * 4);
        return out;
    }

    std::vector<std::int32_t> read_codes(const std::string& name) const {
        const json& s = find(name);
        const std::string enc = s.at("encoding").get<std::string>();
        int width;
        if (enc == "int4") width = 4;
        else if (enc == "int8") width = 8;
        else if (enc == "int16") width = 16;
        else if (enc == "int32") width = 32;
        else throw std::runtime_error("section '" + name + "' has unexpected encoding " + enc);
        return unpack_codes(payload(s), s.at("count").get<std::size_t>(), width);
    }
};

std::filesystem::path blob_path_for(const std::string& manifest_path, const std::string& blob) {
    return std::filesystem::path(manifest_path).parent_path() / blob;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw std::runtime_error("write failed for '" + path.string() + "'");
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) {
        throw std::runtime_error("read failed for '" + path.string() + "'");
    }
    return bytes;
}

LayerKind parse_layer_kind(const std::string& s) {
    if (s == "conv") return LayerKind::Conv;
    if (s == "strided-conv") return LayerKind::StridedConv;
    if (s == "transpose-conv") return LayerKind::TransposeConv;
    if (s == "max-pool") return LayerKind::MaxPool;
    if (s == "upsample") return LayerKind::Upsample;
    throw std::runtime_error("unknown layer kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
    if (s == "none") return Activation::None;
    if (s == "relu") return Activation::Relu;
    if (s == "qrelu") return Activation::QRelu;
    throw std::runtime_error("unknown activation '" + s + "'");
}

ConvKind parse_conv_kind(const std::string& s) {
    if (s == "conv") return ConvKind::Conv;
    if (s == "strided-conv") return ConvKind::StridedConv;
    if (s == "transpose-conv") return ConvKind::TransposeConv;
    throw std::runtime_error("unknown conv kind '" + s + "'");
}

NeuronKind parse_neuron_kind(const std::string& s) {
    if (s == "if") return NeuronKind::IF;
    if (s == "fewdif") return NeuronKind::FewdIF;
    throw std::runtime_error("unknown neuron kind '" + s + "'");
}

json qann_manifest(const LayerGraph& graph, BlobWriter& blob) {
    json m;
    m["kind"] = "qann";
    m["input"] = {{"channels", graph.in_channels}, {"height", graph.in_h}, {"width", graph.in_w}};
    m["weight_bits"] = graph.weight_bits;
    json layers = json::array();
    for (std::size_t l = 0; l < graph.layers.size(); ++l) {
        const GraphLayer& layer = graph.layers[l];
        json j;
        j["kind"] = layer_kind_name(layer.kind);
        if (layer.kind == LayerKind::MaxPool || layer.kind == LayerKind::Upsample) {
            layers.push_back(std::move(j));
            continue;
        }
        const std::string base = "layer" + std::to_string(l);
        j["out_channels"] = layer.conv.out_channels();
        j["in_channels"] = layer.conv.in_channels();
        j["kernel_h"] = layer.conv.kernel_h();
        j["kernel_w"] = layer.conv.kernel_w();
        j["stride"] = layer.conv.stride;
        j["padding"] = layer.conv.padding;
        j["activation"] = activation_name(layer.act);
        j["qrelu_ceiling"] = layer.qrelu_ceiling;
        j["act_bits"] = layer.act_bits;
        blob.add_f32(base + "/weights", layer.conv.kernel.real());
        blob.add_f32(base + "/bias", layer.conv.bias.real());
        if (layer.has_bn) {
            j["bn_epsilon"] = layer.bn.epsilon;
            blob.add_f32(base + "/bn_gamma", layer.bn.gamma);
            blob.add_f32(base + "/bn_beta", layer.bn.beta);
            blob.add_f32(base + "/bn_mean", layer.bn.running_mean);
            blob.add_f32(base + "/bn_var", layer.bn.running_var);
        }
        layers.push_back(std::move(j));
    }
    m["layers"] = std::move(layers);
    return m;
}

LayerGraph qann_from_manifest(const json& m, const BlobReader& blob) {
    LayerGraph graph;
    graph.in_channels = m.at("input").at("channels").get<int>();
    graph.in_h = m.at("input").at("height").get<int>();
    graph.in_w = m.at("input").at("width").get<int>();
    graph.weight_bits = m.at("weight_bits").get<int>();
    std::size_t l = 0;
    for (const json& j : m.at("layers")) {
        GraphLayer layer;
        layer.kind = parse_layer_kind(j.at("kind").get<std::string>());
        if (layer.kind == LayerKind::MaxPool || layer.kind == LayerKind::Upsample) {
            graph.layers.push_back(std::move(layer));
            ++l;
            continue;
        }
        const std::string base = "layer" + std::to_string(l);
        const int out_c = j.at("out_channels").get<int>();
        const int in_c = j.at("in_channels").get<int>();
        const int kh = j.at("kernel_h").get<int>();
        const int kw = j.at("kernel_w").get<int>();
        layer.conv.kernel = Tensor::from_real({out_c, in_c, kh, kw},
                                              blob.read_f32(base + "/weights"));
        layer.conv.bias = Tensor::from_real({out_c}, blob.read_f32(base + "/bias"));
        layer.conv.stride = j.at("stride").get<int>();
        layer.conv.padding = j.at("padding").get<int>();
        layer.act = parse_activation(j.at("activation").get<std::string>());
        layer.qrelu_ceiling = j.at("qrelu_ceiling").get<double>();
        layer.act_bits = j.at("act_bits").get<int>();
        if (j.contains("bn_epsilon")) {
            layer.has_bn = true;
            layer.bn.epsilon = j.at("bn_epsilon").get<double>();
            layer.bn.gamma = blob.read_f32(base + "/bn_gamma");
            layer.bn.beta = blob.read_f32(base + "/bn_beta");
            layer.bn.running_mean = blob.read_f32(base + "/bn_mean");
            layer.bn.running_var = blob.read_f32(base + "/bn_var");
        }
        graph.layers.push_back(std::move(layer));
        ++l;
    }
    return graph;
}

json snn_manifest(const SnnModel& model, BlobWriter& blob) {
    json m;
    m["kind"] = "snn";
    m["v_th"] = model.v_th;
    m["input_max"] = model.input_max;
    m["weight_bits"] = model.weight_bits;
    json layers = json::array();
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const SnnLayer& layer = model.layers[l];
        const std::string base = "layer" + std::to_string(l);
        json j;
        j["kind"] = conv_kind_name(layer.kind);
        j["stride"] = layer.stride;
        j["padding"] = layer.padding;
        j["out_channels"] = layer.int_weights.dim(0);
        j["in_channels"] = layer.int_weights.dim(1);
        j["kernel_h"] = layer.int_weights.dim(2);
        j["kernel_w"] = layer.int_weights.dim(3);
        j["min_gap_s"] = layer.min_gap_s;
        j["scale_S"] = layer.scale_S;
        j["int_threshold"] = layer.int_threshold;
        j["neuron"] = neuron_kind_name(layer.neuron);
        j["n_max"] = layer.n_max;
        j["n_min"] = layer.n_min;
        auto codes = layer.int_weights.ints();
        const int width = storage_width(codes, model.weight_bits);
        const std::string enc = "int" + std::to_string(width);
        blob.add(base + "/weights", enc, codes.size(), pack_codes(codes, width));
        blob.add(base + "/bias", "int32", layer.int_bias.size(),
                 pack_codes(layer.int_bias, 32));
        layers.push_back(std::move(j));
    }
    m["layers"] = std::move(layers);
    return m;
}

SnnModel snn_from_manifest(const json& m, const BlobReader& blob) {
    SnnModel model;
    model.v_th = m.at("v_th").get<double>();
    model.input_max = m.at("input_max").get<double>();
    model.weight_bits = m.at("weight_bits").get<int>();
    std::size_t l = 0;
    for (const json& j : m.at("layers")) {
        const std::string base = "layer" + std::to_string(l);
        SnnLayer layer;
        layer.kind = parse_conv_kind(j.at("kind").get<std::string>());
        layer.stride = j.at("stride").get<int>();
        layer.padding = j.at("padding").get<int>();
        layer.int_weights = Tensor::from_int(
            {j.at("out_channels").get<int>(), j.at("in_channels").get<int>(),
             j.at("kernel_h").get<int>(), j.at("kernel_w").get<int>()},
            blob.read_codes(base + "/weights"));
        layer.int_bias = blob.read_codes(base + "/bias");
        layer.min_gap_s = j.at("min_gap_s").get<double>();
        layer.scale_S = j.at("scale_S").get<double>();
        layer.int_threshold = j.at("int_threshold").get<std::int64_t>();
        layer.neuron = parse_neuron_kind(j.at("neuron").get<std::string>());
        layer.n_max = j.at("n_max").get<double>();
        layer.n_min = j.at("n_min").get<double>();
        model.layers.push_back(std::move(layer));
        ++l;
    }
    return model;
}

void check_sections(const json& sections, std::size_t blob_size) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (const json& s : sections) {
        const std::size_t off = s.at("offset").get<std::size_t>();
        const std::size_t sz = s.at("bytes").get<std::size_t>();
        if (off + sz > blob_size) {
            throw std::runtime_error("truncated blob: section '" +
                                     s.at("name").get<std::string>() +
                                     "' extends past the end of the blob");
        }
        ranges.emplace_back(off, off + sz);
    }
    std::sort(ranges.begin(), ranges.end());
    for (std::size_t i = 1; i < ranges.size(); ++i) {
        if (ranges[i].first < ranges[i - 1].second) {
            throw std::runtime_error("model manifest has overlapping blob sections");
        }
    }
}

void write_model_files(const json& manifest_body, BlobWriter& blob, const std::string& path) {
    json m = manifest_body;
    const std::string blob_name = std::filesystem::path(path).filename().string() + ".bin";
    m["format_version"] = kFormatVersion;
    m["blob"] = blob_name;
    m["blob_bytes"] = blob.bytes.size();
    m["blob_crc32"] = blob_crc32(blob.bytes);
    m["sections"] = blob.sections;
    const std::string text = m.dump(1) + "\n";
    write_file(path, std::span<const std::uint8_t>(
                         reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    write_file(blob_path_for(path, blob_name), blob.bytes);
}

std::pair<json, BlobReader> read_model_files(const std::string& path) {
    const std::vector<std::uint8_t> manifest_bytes = read_file(path);
    json m;
    try {
        m = json::parse(manifest_bytes.begin(), manifest_bytes.end());
    } catch (const json::exception& e) {
        throw std::runtime_error("bad model manifest '" + path + "': " + e.what());
    }
    const int version = m.at("format_version").get<int>();
    if (version != kFormatVersion) {
        throw std::runtime_error("unsupported format version " + std::to_string(version) +
                                 " in '" + path + "' (expected " +
                                 std::to_string(kFormatVersion) + ")");
    }
    BlobReader reader;
    reader.bytes = read_file(blob_path_for(path, m.at("blob").get<std::string>()));
    if (reader.bytes.size() < m.at("blob_bytes").get<std::size_t>()) {
        throw std::runtime_error("truncated blob for '" + path + "': expected " +
                                 std::to_string(m.at("blob_bytes").get<std::size_t>()) +
                                 " bytes, found " + std::to_string(reader.bytes.size()));
    }
    if (blob_crc32(reader.bytes) != m.at("blob_crc32").get<std::uint32_t>()) {
        throw std::runtime_error("checksum mismatch for '" + path +
                                 "': the weight blob does not match its manifest");
    }
    check_sections(m.at("sections"), reader.bytes.size());
    return {std::move(m), std::move(reader)};
}

SizeReport report_from(const json& manifest_body, const BlobWriter& blob) {
    json m = manifest_body;
    m["format_version"] = kFormatVersion;
    m["blob"] = "model.bin";
    m["blob_bytes"] = blob.bytes.size();
    m["blob_crc32"] = blob_crc32(blob.bytes);
    m["sections"] = blob.sections;
    SizeReport report;
    report.manifest_bytes = m.dump(1).size() + 1;
    report.blob_bytes = blob.bytes.size();
    for (const json& s : blob.sections) {
        report.sections.push_back(
            {s.at("name").get<std::string>(), s.at("bytes").get<std::uint64_t>()});
    }
    return report;
}

} // namespace

int storage_width(std::span<const std::int32_t> codes, int declared_bits) {
    std::int64_t m = 0;
    for (std::int32_t c : codes) {
        m = std::max<std::int64_t>(m, std::llabs(static_cast<std::int64_t>(c)));
    }
    int needed = 2;
    while (needed < 32 && m > (std::int64_t(1) << (needed - 1)) - 1) ++needed;
    needed = std::max(needed, declared_bits);
    if (needed <= 4) return 4;
    if (needed <= 8) return 8;
    if (needed <= 16) return 16;
    return 32;
}

std::vector<std::uint8_t> pack_codes(std::span<const std::int32_t> codes, int bit_width) {
    std::vector<std::uint8_t> out;
    if (bit_width <= 4) {
        const std::int32_t lo = -(1 << (bit_width - 1)), hi = (1 << (bit_width - 1)) - 1;
        out.resize((codes.size() + 1) / 2, 0);
        for (std::size_t i = 0; i < codes.size(); ++i) {
            if (codes[i] < lo || codes[i] > hi) {
                throw std::invalid_argument("code " + std::to_string(codes[i]) +
                                            " does not fit " + std::to_string(bit_width) +
                                            " bits");
            }
            const std::uint8_t nibble = static_cast<std::uint8_t>(codes[i]) & 0x0f;
            if (i % 2 == 0) {
                out[i / 2] = nibble;
            } else {
                out[i / 2] |= static_cast<std::uint8_t>(nibble << 4);
            }
        }
    } else if (bit_width <= 8) {
        out.reserve(codes.size());
        for (std::int32_t c : codes) {
            if (c < -128 || c > 127) {
                throw std::invalid_argument("code " + std::to_string(c) + " does not fit 8 bits");
            }
            out.push_back(static_cast<std::uint8_t>(c) & 0xff);
        }
    } else if (bit_width <= 16) {
        out.reserve(codes.size() * 2);
        for (std::int32_t c : codes) {
            if (c < -32768 || c > 32767) {
                throw std::invalid_argument("code " + std::to_string(c) + " does not fit 16 bits");
            }
            const std::uint16_t u = static_cast<std::uint16_t>(c);
            put_u16(out, u);
        }
    } else {
        out.reserve(codes.size() * 4);
        for (std::int32_t c : codes) put_u32(out, static_cast<std::uint32_t>(c));
    }
    return out;
}

std::vector<std::int32_t> unpack_codes(std::span<const std::uint8_t> bytes, std::size_t count,
                                       int bit_width) {
    std::vector<std::int32_t> out(count);
    if (bit_width <= 4) {
        if (bytes.size() < (count + 1) / 2) {
            throw std::runtime_error("truncated blob: packed 4-bit section too short");
        }
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint8_t b = bytes[i / 2];
            const std::uint8_t nibble = i % 2 == 0 ? (b & 0x0f) : (b >> 4);
            out[i] = static_cast<std::int32_t>((nibble ^ 0x08) - 0x08); // sign-extend
        }
    } else if (bit_width <= 8) {
        if (bytes.size() < count) {
            throw std::runtime_error("truncated blob: int8 section too short");
        }
        for (std::size_t i = 0; i < count; ++i) {
            out[i] = static_cast<std::int8_t>(bytes[i]);
        }
    } else if (bit_width <= 16) {
        if (bytes.size() < count * 2) {
            throw std::runtime_error("truncated blob: int16 section too short");
        }
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint16_t u = static_cast<std::uint16_t>(bytes[i * 2]) |
                                    (static_cast<std::uint16_t>(bytes[i * 2 + 1]) << 8);
            out[i] = static_cast<std::int16_t>(u);
        }
    } else {
        if (bytes.size() < count * 4) {
            throw std::runtime_error("truncated blob: int32 section too short");
        }
        for (std::size_t i = 0; i < count; ++i) {
            out[i] = static_cast<std::int32_t>(get_u32(bytes, i * 4));
        }
    }
    return out;
}

void save_model(const LayerGraph& graph, const std::string& path) {
    BlobWriter blob;
    const json m = qann_manifest(graph, blob);
    write_model_files(m, blob, path);
}

void save_model(const SnnModel& model, const std::string& path) {
    BlobWriter blob;
    const json m = snn_manifest(model, blob);
    write_model_files(m, blob, path);
}

LoadedModel load_model(const std::string& path) {
    auto [m, reader] = read_model_files(path);
    reader.sections = &m.at("sections");
    LoadedModel loaded;
    const std::string kind = m.at("kind").get<std::string>();
    if (kind == "qann") {
        loaded.kind = ModelKind::Qann;
        loaded.qann = qann_from_manifest(m, reader);
    } else if (kind == "snn") {
        loaded.kind = ModelKind::Snn;
        loaded.snn = snn_from_manifest(m, reader);
    } else {
        throw std::runtime_error("unknown model kind '" + kind + "' in '" + path + "'");
    }
    return loaded;
}

LayerGraph load_qann(const std::string& path) {
    LoadedModel loaded = load_model(path);
    if (loaded.kind != ModelKind::Qann) {
        throw std::runtime_error("'" + path + "' is an SNN model, expected a QANN");
    }
    return std::move(loaded.qann);
}

SnnModel load_snn(const std::string& path) {
    LoadedModel loaded = load_model(path);
    if (loaded.kind != ModelKind::Snn) {
        throw std::runtime_error("'" + path + "' is a QANN model, expected an SNN");
    }
    return std::move(loaded.snn);
}

std::uint64_t SizeReport::weight_bytes() const {
    std::uint64_t total = 0;
    for (const SizeSection& s : sections) {
        if (s.name.ends_with("/weights")) total += s.bytes;
    }
    return total;
}

std::uint64_t SizeReport::bias_bytes() const {
    std::uint64_t total = 0;
    for (const SizeSection& s : sections) {
        if (s.name.ends_with("/bias")) total += s.bytes;
    }
    return total;
}

std::string SizeReport::table() const {
    std::ostringstream os;
    for (const SizeSection& s : sections) {
        os << s.name << '\t' << s.bytes << "\n";
    }
    os << "manifest\t" << manifest_bytes << "\n";
    os << "total\t" << total() << "\n";
    return os.str();
}

SizeReport model_size_report(const LayerGraph& graph) {
    BlobWriter blob;
    const json m = qann_manifest(graph, blob);
    return report_from(m, blob);
}

SizeReport model_size_report(const SnnModel& model) {
    BlobWriter blob;
    const json m = snn_manifest(model, blob);
    return report_from(m, blob);
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::vector<std::uint8_t> out;
    out.push_back('Q');
    out.push_back('T');
    out.push_back('E');
    out.push_back('N');
    out.push_back(t.is_real() ? 0 : 1);
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    if (t.is_real()) {
        for (double v : t.real()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            put_u32(out, static_cast<std::uint32_t>(bits & 0xffffffffULL));
            put_u32(out, static_cast<std::uint32_t>(bits >> 32));
        }
    } else {
        for (std::int32_t v : t.ints()) put_u32(out, static_cast<std::uint32_t>(v));
    }
    write_file(path, out);
}

Tensor load_tensor(const std::string& path) {
    const std::vector<std::uint8_t> in = read_file(path);
    if (in.size() < 6 || in[0] != 'Q' || in[1] != 'T' || in[2] != 'E' || in[3] != 'N') {
        throw std::runtime_error("'" + path + "' is not a QTEN tensor file");
    }
    const bool is_real = in[4] == 0;
    const std::size_t rank = in[5];
    std::size_t at = 6;
    if (in.size() < at + rank * 4) {
        throw std::runtime_error("truncated tensor file '" + path + "'");
    }
    std::vector<int> shape(rank);
    std::size_t count = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        shape[i] = static_cast<int>(get_u32(in, at));
        count *= static_cast<std::size_t>(shape[i]);
        at += 4;
    }
    if (is_real) {
        if (in.size() < at + count * 8) {
            throw std::runtime_error("truncated tensor file '" + path + "'");
        }
        std::vector<double> data(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint64_t bits = static_cast<std::uint64_t>(get_u32(in, at)) |
                                       (static_cast<std::uint64_t>(get_u32(in, at + 4)) << 32);
            std::memcpy(&data[i], &bits, 8);
            at += 8;
        }
        return Tensor::from_real(std::move(shape), std::move(data));
    }
    if (in.size() < at + count * 4) {
        throw std::runtime_error("truncated tensor file '" + path + "'");
    }
    std::vector<std::int32_t> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        data[i] = static_cast<std::int32_t>(get_u32(in, at));
        at += 4;
    }
    return Tensor::from_int(std::move(shape), std::move(data));
}

} // namespace qsnn
