#include "qsnn/synthetic.hpp"

#include "qsnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qsnn {

BlobSample BlobTask::sample(std::uint64_t index) const {
    Rng rng(seed_ ^ (0xa0761d6478bd642fULL + index * 0xe7037ed1a0b428dbULL));
    const double row = rng.uniform(0.15, 0.85) * (height_ - 1);
    const double col = rng.uniform(0.15, 0.85) * (width_ - 1);
    const double sigma = 0.08 * std::max(height_, width_) + rng.uniform(0.0, 0.5);

    Tensor img = Tensor::zeros({1, channels_, height_, width_});
    auto d = img.real();
    for (int c = 0; c < channels_; ++c) {
        const double gain = 0.7 + 0.3 * rng.uniform();
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                const double dy = (y - row) / sigma;
                const double dx = (x - col) / sigma;
                const double v = gain * std::exp(-0.5 * (dy * dy + dx * dx)) +
                                 0.02 * rng.uniform();
                d[img.index(0, c, y, x)] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return {std::move(img), {row / (height_ - 1), col / (width_ - 1)}};
}

std::vector<Tensor> synthetic_images(std::uint64_t seed, int count, int channels, int height,
                                     int width) {
    if (count <= 0) {
        throw std::invalid_argument("synthetic_images: count must be positive");
    }
    BlobTask task(channels, height, width, seed);
    std::vector<Tensor> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Tensor img = task.sample(static_cast<std::uint64_t>(i)).image;
        if (i == 0) {
            // Pin the dataset maximum so input normalization is the identity.
            img.real()[img.index(0, 0, height / 2, width / 2)] = 1.0;
        }
        out.push_back(std::move(img));
    }
    return out;
}

bool parse_synthetic_spec(const std::string& spec, std::uint64_t& seed) {
    const std::string prefix = "synthetic:";
    if (spec.rfind(prefix, 0) != 0) return false;
    const std::string tail = spec.substr(prefix.size());
    if (tail.empty()) {
        throw std::invalid_argument("synthetic data spec needs a seed, e.g. synthetic:42");
    }
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(tail, &pos);
    if (pos != tail.size()) {
        throw std::invalid_argument("bad synthetic seed '" + tail + "'");
    }
    seed = static_cast<std::uint64_t>(v);
    return true;
}

} // namespace qsnn
