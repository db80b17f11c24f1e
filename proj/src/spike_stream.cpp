#include "qsnn/spike_stream.hpp"

#include "qsnn/rng.hpp"

#include <fstream>
#include <stdexcept>

namespace qsnn {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
    return static_cast<std::uint32_t>(in[at]) | (static_cast<std::uint32_t>(in[at + 1]) << 8) |
           (static_cast<std::uint32_t>(in[at + 2]) << 16) |
           (static_cast<std::uint32_t>(in[at + 3]) << 24);
}

} // namespace

void write_spike_stream(const std::string& path, std::span<const Tensor> frames) {
    if (frames.empty()) {
        throw std::invalid_argument("write_spike_stream: no frames");
    }
    const Tensor& first = frames.front();
    if (first.rank() != 4) {
        throw std::invalid_argument("spike frames must be 4-D, got " + first.shape_str());
    }

    std::vector<std::uint8_t> out;
    out.push_back('S');
    out.push_back('P');
    out.push_back('K');
    out.push_back('S');
    out.push_back(kSpikeStreamVersion & 0xff);
    out.push_back((kSpikeStreamVersion >> 8) & 0xff);
    for (int i = 0; i < 4; ++i) put_u32(out, static_cast<std::uint32_t>(first.dim(i)));
    const std::uint64_t count = frames.size();
    for (int i = 0; i < 8; ++i) out.push_back((count >> (8 * i)) & 0xff);

    const std::size_t frame_bytes = (first.size() + 7) / 8;
    for (const Tensor& frame : frames) {
        if (!frame.same_shape(first)) {
            throw std::invalid_argument("spike frames must share one shape; got " +
                                        frame.shape_str() + " after " + first.shape_str());
        }
        std::vector<std::uint8_t> packed(frame_bytes, 0);
        auto pack_bit = [&](std::size_t i, bool on) {
            if (on) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        };
        if (frame.is_real()) {
            auto d = frame.real();
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (d[i] != 0.0 && d[i] != 1.0) {
                    throw std::invalid_argument("spike frame value " + std::to_string(d[i]) +
                                                " is not binary");
                }
                pack_bit(i, d[i] == 1.0);
            }
        } else {
            auto d = frame.ints();
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (d[i] != 0 && d[i] != 1) {
                    throw std::invalid_argument("spike frame value " + std::to_string(d[i]) +
                                                " is not binary");
                }
                pack_bit(i, d[i] == 1);
            }
        }
        out.insert(out.end(), packed.begin(), packed.end());
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw std::runtime_error("write failed for '" + path + "'");
    }
}

std::vector<Tensor> read_spike_stream(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> in(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(in.data()), size);
    if (!f) {
        throw std::runtime_error("read failed for '" + path + "'");
    }

    if (in.size() < 30 || in[0] != 'S' || in[1] != 'P' || in[2] != 'K' || in[3] != 'S') {
        throw std::runtime_error("'" + path + "' is not an SPKS spike stream");
    }
    const std::uint16_t version = static_cast<std::uint16_t>(in[4]) |
                                  (static_cast<std::uint16_t>(in[5]) << 8);
    if (version != kSpikeStreamVersion) {
        throw std::runtime_error("unsupported spike stream version " + std::to_string(version));
    }
    std::vector<int> shape(4);
    std::size_t numel = 1;
    for (int i = 0; i < 4; ++i) {
        shape[i] = static_cast<int>(get_u32(in, 6 + 4 * static_cast<std::size_t>(i)));
        numel *= static_cast<std::size_t>(shape[i]);
    }
    std::uint64_t count = 0;
    for (int i = 0; i < 8; ++i) {
        count |= static_cast<std::uint64_t>(in[22 + static_cast<std::size_t>(i)]) << (8 * i);
    }

    const std::size_t frame_bytes = (numel + 7) / 8;
    if (in.size() < 30 + count * frame_bytes) {
        throw std::runtime_error("truncated spike stream '" + path + "'");
    }

    std::vector<Tensor> frames;
    frames.reserve(count);
    std::size_t at = 30;
    for (std::uint64_t fidx = 0; fidx < count; ++fidx) {
        Tensor frame = Tensor::zeros(shape, Domain::Real);
        auto d = frame.real();
        for (std::size_t i = 0; i < numel; ++i) {
            d[i] = (in[at + i / 8] >> (i % 8)) & 1u ? 1.0 : 0.0;
        }
        frames.push_back(std::move(frame));
        at += frame_bytes;
    }
    return frames;
}

std::vector<Tensor> bernoulli_stream(const Tensor& image, int frame_count, std::uint64_t seed) {
    if (frame_count <= 0) {
        throw std::invalid_argument("bernoulli_stream: frame count must be positive");
    }
    for (double v : image.real()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("bernoulli_stream: image value " + std::to_string(v) +
                                        " outside [0, 1]");
        }
    }
    Rng rng(seed);
    std::vector<Tensor> frames;
    frames.reserve(static_cast<std::size_t>(frame_count));
    auto p = image.real();
    for (int t = 0; t < frame_count; ++t) {
        Tensor frame = Tensor::zeros(image.shape(), Domain::Real);
        auto d = frame.real();
        for (std::size_t i = 0; i < p.size(); ++i) {
            d[i] = rng.bernoulli(p[i]) ? 1.0 : 0.0;
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

} // namespace qsnn
