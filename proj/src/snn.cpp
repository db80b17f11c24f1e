#include "qsnn/snn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qsnn {

NeuronState make_neuron_state(const std::vector<int>& shape, NeuronKind kind, double threshold,
                              double n_max, double n_min) {
    if (threshold <= 0.0) {
        throw std::invalid_argument("neuron threshold must be positive");
    }
    NeuronState s;
    s.v = Tensor::zeros(shape, Domain::Real);
    s.kind = kind;
    s.threshold = threshold;
    if (kind == NeuronKind::FewdIF) {
        if (n_max <= n_min) {
            throw std::invalid_argument("fewdif bounds require n_max > n_min");
        }
        s.v_max = n_max * threshold;
        s.v_min = n_min * threshold;
    }
    return s;
}

NeuronState make_int_neuron_state(const std::vector<int>& shape, NeuronKind kind,
                                  std::int32_t threshold, double n_max, double n_min) {
    if (threshold < 1) {
        throw std::invalid_argument("integer neuron threshold must be >= 1");
    }
    NeuronState s;
    s.v = Tensor::zeros(shape, Domain::Int32);
    s.kind = kind;
    s.int_threshold = threshold;
    if (kind == NeuronKind::FewdIF) {
        if (n_max <= n_min) {
            throw std::invalid_argument("fewdif bounds require n_max > n_min");
        }
        s.int_v_max = std::llround(n_max * threshold);
        s.int_v_min = std::llround(n_min * threshold);
    }
    return s;
}

namespace {

void check_same_shape(const NeuronState& state, const Tensor& u) {
    if (!state.v.same_shape(u)) {
        throw std::invalid_argument("neuron step: input " + u.shape_str() +
                                    " does not match state " + state.v.shape_str());
    }
    if (state.v.domain() != u.domain()) {
        throw std::invalid_argument(std::string("neuron step: input domain ") +
                                    domain_name(u.domain()) + " does not match state domain " +
                                    domain_name(state.v.domain()));
    }
}

Tensor step_impl(NeuronState& state, const Tensor& u, bool clamp) {
    check_same_shape(state, u);
    if (state.v.is_real()) {
        Tensor out = Tensor::zeros(state.v.shape(), Domain::Real);
        auto v = state.v.real();
        auto in = u.real();
        auto o = out.real();
        const double th = state.threshold;
        for (std::size_t i = 0; i < v.size(); ++i) {
            double m = v[i] + in[i];
            if (m >= th) {
                o[i] = 1.0;
                m -= th;
            }
            if (clamp) m = std::clamp(m, state.v_min, state.v_max);
            v[i] = m;
        }
        return out;
    }
    Tensor out = Tensor::zeros(state.v.shape(), Domain::Int32);
    auto v = state.v.ints();
    auto in = u.ints();
    auto o = out.ints();
    const std::int64_t th = state.int_threshold;
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::int64_t m = static_cast<std::int64_t>(v[i]) + in[i];
        if (m >= th) {
            o[i] = 1;
            m -= th;
        }
        if (clamp) m = std::clamp(m, state.int_v_min, state.int_v_max);
        if (m > std::numeric_limits<std::int32_t>::max() ||
            m < std::numeric_limits<std::int32_t>::min()) {
            throw std::overflow_error("membrane potential " + std::to_string(m) +
                                      " exceeds int32");
        }
        v[i] = static_cast<std::int32_t>(m);
    }
    return out;
}

} // namespace

Tensor if_step(NeuronState& state, const Tensor& u) {
    return step_impl(state, u, false);
}

Tensor fewdif_step(NeuronState& state, const Tensor& u) {
    if (state.kind != NeuronKind::FewdIF) {
        throw std::invalid_argument("fewdif_step: state kind is IF");
    }
    return step_impl(state, u, true);
}

Tensor neuron_step(NeuronState& state, const Tensor& u) {
    return state.kind == NeuronKind::FewdIF ? step_impl(state, u, true)
                                            : step_impl(state, u, false);
}

InputEncoder::InputEncoder(Tensor image, Encoding mode, std::uint64_t seed)
    : image_(std::move(image)), mode_(mode), rng_(seed) {
    for (double v : image_.real()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("encode_input: image value " + std::to_string(v) +
                                        " outside [0, 1]");
        }
    }
    if (mode_ == Encoding::Bernoulli) {
        frame_ = Tensor::zeros(image_.shape(), Domain::Real);
    }
}

const Tensor& InputEncoder::next() {
    if (mode_ == Encoding::AnalogCurrent) return image_;
    auto p = image_.real();
    auto f = frame_.real();
    for (std::size_t i = 0; i < p.size(); ++i) {
        f[i] = rng_.bernoulli(p[i]) ? 1.0 : 0.0;
    }
    return frame_;
}

void RateAccumulator::add(const Tensor& spike_frame) {
    const Tensor& fr = spike_frame;
    if (counts.size() == 0) {
        counts = Tensor::zeros(fr.shape(), Domain::Int32);
    }
    auto c = counts.ints();
    auto add_frame = [&](auto vals, std::int32_t sign) {
        for (std::size_t i = 0; i < c.size(); ++i) {
            c[i] += sign * static_cast<std::int32_t>(vals[i] != 0 ? 1 : 0);
        }
    };
    if (fr.is_real()) {
        add_frame(fr.real(), 1);
    } else {
        add_frame(fr.ints(), 1);
    }
    ++steps;
    if (window > 0) {
        recent.push_back(spike_frame);
        if (recent.size() > window) {
            const Tensor& old = recent.front();
            if (old.is_real()) {
                add_frame(old.real(), -1);
            } else {
                add_frame(old.ints(), -1);
            }
            recent.pop_front();
        }
    }
}

Tensor RateAccumulator::rates() const {
    if (steps == 0 || counts.size() == 0) {
        throw std::logic_error("rates() before any frame was added");
    }
    const double denom = window > 0 ? static_cast<double>(std::min<std::int64_t>(
                                          steps, static_cast<std::int64_t>(window)))
                                    : static_cast<double>(steps);
    Tensor out = Tensor::zeros(counts.shape(), Domain::Real);
    auto o = out.real();
    auto c = counts.ints();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = c[i] / denom;
    return out;
}

namespace {

ConvSpec real_spec_of(const SnnLayer& layer, RealWeights mode) {
    ConvSpec spec;
    spec.kind = layer.kind;
    spec.stride = layer.stride;
    spec.padding = layer.padding;
    const double factor = mode == RealWeights::Physical ? layer.min_gap_s : 1.0;
    auto codes = layer.int_weights.ints();
    std::vector<double> w(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) w[i] = codes[i] * factor;
    spec.kernel = Tensor::from_real(layer.int_weights.shape(), std::move(w));
    std::vector<double> b(layer.int_bias.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = layer.int_bias[i] * factor;
    spec.bias = Tensor::from_real({static_cast<int>(layer.int_bias.size())}, std::move(b));
    return spec;
}

Tensor apply_conv(const ConvSpec& spec, const Tensor& in, std::size_t layer_idx) {
    try {
        return spec.kind == ConvKind::TransposeConv ? transpose_conv2d(in, spec)
                                                    : conv2d(in, spec);
    } catch (const std::overflow_error& e) {
        throw std::overflow_error("layer " + std::to_string(layer_idx) + ": " + e.what());
    }
}

} // namespace

Session::Session(const SnnModel& model, RealWeights mode) {
    if (model.layers.empty()) {
        throw std::invalid_argument("session: model has no layers");
    }
    for (const SnnLayer& layer : model.layers) {
        specs_.push_back(real_spec_of(layer, mode));
        kinds_.push_back(layer.neuron);
        if (mode == RealWeights::Physical) {
            thresholds_.push_back(model.v_th);
            bounds_.emplace_back(layer.n_max * model.v_th, layer.n_min * model.v_th);
        } else {
            const double th = static_cast<double>(layer.int_threshold);
            thresholds_.push_back(th);
            // Mirror of the integer datapath's clamp bounds, kept exact.
            bounds_.emplace_back(static_cast<double>(std::llround(layer.n_max * th)),
                                 static_cast<double>(std::llround(layer.n_min * th)));
        }
    }
}

void Session::prime(const Tensor& current) {
    states_.clear();
    spikes_.clear();
    Tensor shape_probe = current;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        NeuronState st;
        st.v = Tensor::zeros(shape_probe.shape(), Domain::Real);
        st.kind = kinds_[l];
        st.threshold = thresholds_[l];
        if (st.kind == NeuronKind::FewdIF) {
            st.v_max = bounds_[l].first;
            st.v_min = bounds_[l].second;
        }
        states_.push_back(std::move(st));
        spikes_.push_back(Tensor::zeros(shape_probe.shape(), Domain::Real));
        if (l + 1 < specs_.size()) {
            shape_probe = apply_conv(specs_[l + 1], shape_probe, l + 1);
        }
    }
    primed_ = true;
}

void Session::set_input(const Tensor& frame) {
    input_current_ = apply_conv(specs_[0], frame, 0);
    if (!primed_) prime(input_current_);
}

void Session::reset() {
    for (NeuronState& st : states_) {
        std::fill(st.v.real().begin(), st.v.real().end(), 0.0);
    }
}

const Tensor& Session::step() {
    if (!primed_) {
        throw std::logic_error("session step() before set_input()");
    }
    spikes_[0] = neuron_step(states_[0], input_current_);
    for (std::size_t l = 1; l < specs_.size(); ++l) {
        const Tensor u = apply_conv(specs_[l], spikes_[l - 1], l);
        spikes_[l] = neuron_step(states_[l], u);
    }
    return spikes_.back();
}

IntSession::IntSession(const SnnModel& model) : model_(&model) {
    if (model.layers.empty()) {
        throw std::invalid_argument("session: model has no layers");
    }
    for (const SnnLayer& layer : model.layers) {
        if (layer.int_threshold > std::numeric_limits<std::int32_t>::max()) {
            throw std::overflow_error("integer threshold " + std::to_string(layer.int_threshold) +
                                      " exceeds int32; the model cannot run integer-only");
        }
        ConvSpec spec;
        spec.kind = layer.kind;
        spec.stride = layer.stride;
        spec.padding = layer.padding;
        spec.kernel = layer.int_weights;
        spec.bias = Tensor::from_int({static_cast<int>(layer.int_bias.size())},
                                     std::vector<std::int32_t>(layer.int_bias.begin(),
                                                               layer.int_bias.end()));
        specs_.push_back(std::move(spec));
    }
}

void IntSession::prime(const Tensor& current) {
    states_.clear();
    spikes_.clear();
    Tensor shape_probe = current;
    for (std::size_t l = 0; l < specs_.size(); ++l) {
        const SnnLayer& layer = model_->layers[l];
        states_.push_back(make_int_neuron_state(
            shape_probe.shape(), layer.neuron,
            static_cast<std::int32_t>(layer.int_threshold), layer.n_max, layer.n_min));
        spikes_.push_back(Tensor::zeros(shape_probe.shape(), Domain::Int32));
        if (l + 1 < specs_.size()) {
            shape_probe = apply_conv(specs_[l + 1], shape_probe, l + 1);
        }
    }
    primed_ = true;
}

void IntSession::set_input(const Tensor& int_current) {
    if (!int_current.is_int()) {
        throw std::invalid_argument("integer session needs an int32 input current");
    }
    input_current_ = int_current;
    if (!primed_) prime(input_current_);
}

void IntSession::set_input_spikes(const Tensor& spike_frame) {
    set_input(apply_conv(specs_[0], spike_frame, 0));
}

void IntSession::reset() {
    for (NeuronState& st : states_) {
        std::fill(st.v.ints().begin(), st.v.ints().end(), 0);
    }
}

const Tensor& IntSession::step() {
    if (!primed_) {
        throw std::logic_error("session step() before set_input()");
    }
    try {
        spikes_[0] = neuron_step(states_[0], input_current_);
    } catch (const std::overflow_error& e) {
        throw std::overflow_error("layer 0: " + std::string(e.what()));
    }
    for (std::size_t l = 1; l < specs_.size(); ++l) {
        const Tensor u = apply_conv(specs_[l], spikes_[l - 1], l);
        try {
            spikes_[l] = neuron_step(states_[l], u);
        } catch (const std::overflow_error& e) {
            throw std::overflow_error("layer " + std::to_string(l) + ": " + e.what());
        }
    }
    return spikes_.back();
}

Tensor normalize_input(const SnnModel& model, const Tensor& image) {
    Tensor out = image;
    if (model.input_max != 1.0) {
        for (double& v : out.real()) v /= model.input_max;
    }
    return out;
}

Tensor integer_input_current(const SnnModel& model, const Tensor& image) {
    const SnnLayer& first = model.layers.front();
    ConvSpec spec;
    spec.kind = first.kind;
    spec.stride = first.stride;
    spec.padding = first.padding;
    spec.kernel = first.int_weights.to_real();
    std::vector<double> b(first.int_bias.begin(), first.int_bias.end());
    spec.bias = Tensor::from_real({static_cast<int>(first.int_bias.size())}, std::move(b));

    const Tensor norm = normalize_input(model, image);
    const Tensor real_current = spec.kind == ConvKind::TransposeConv
                                    ? transpose_conv2d(norm, spec)
                                    : conv2d(norm, spec);
    auto r = real_current.real();
    std::vector<std::int32_t> q(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        const long long v = std::llround(r[i]);
        if (v > std::numeric_limits<std::int32_t>::max() ||
            v < std::numeric_limits<std::int32_t>::min()) {
            throw std::overflow_error("layer 0: encoded input current " + std::to_string(v) +
                                      " exceeds int32");
        }
        q[i] = static_cast<std::int32_t>(v);
    }
    return Tensor::from_int(real_current.shape(), std::move(q));
}

WindowedResult run_windowed(const SnnModel& model, const Tensor& image, int steps,
                            Encoding encoding, std::uint64_t seed) {
    if (steps < 1) {
        throw std::invalid_argument("run_windowed: steps must be >= 1");
    }
    Session session(model);
    InputEncoder encoder(normalize_input(model, image), encoding, seed);

    std::vector<RateAccumulator> acc(model.layers.size());
    if (encoding == Encoding::AnalogCurrent) {
        session.set_input(encoder.next());
    }
    for (int t = 0; t < steps; ++t) {
        if (encoding == Encoding::Bernoulli) {
            session.set_input(encoder.next());
        }
        session.step();
        for (std::size_t l = 0; l < acc.size(); ++l) {
            acc[l].add(session.layer_spikes()[l]);
        }
    }

    WindowedResult result;
    result.steps = steps;
    for (auto& a : acc) result.layer_rates.push_back(a.rates());
    result.output_rates = result.layer_rates.back();
    return result;
}

WindowedResult run_integer(const SnnModel& model, const Tensor& image, int steps) {
    if (steps < 1) {
        throw std::invalid_argument("run_integer: steps must be >= 1");
    }
    IntSession session(model);
    session.set_input(integer_input_current(model, image));

    std::vector<RateAccumulator> acc(model.layers.size());
    for (int t = 0; t < steps; ++t) {
        session.step();
        for (std::size_t l = 0; l < acc.size(); ++l) {
            acc[l].add(session.layer_spikes()[l]);
        }
    }

    WindowedResult result;
    result.steps = steps;
    for (auto& a : acc) result.layer_rates.push_back(a.rates());
    result.output_rates = result.layer_rates.back();
    return result;
}

ContinuousResult run_continuous(const SnnModel& model, std::span<const Tensor> frames,
                                const ContinuousOptions& opts) {
    if (opts.warmup < 1) {
        throw std::invalid_argument("run_continuous: warmup must be >= 1");
    }
    const std::size_t window = opts.window > 0 ? static_cast<std::size_t>(opts.window)
                                               : static_cast<std::size_t>(opts.warmup);

    Session session(model);
    RateAccumulator out_acc;
    out_acc.window = window;
    Rng seed_stream(opts.seed);

    ContinuousResult result;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (opts.frames_are_spikes) {
            session.set_input(frames[i].is_int() ? frames[i].to_real() : frames[i]);
        } else {
            InputEncoder encoder(normalize_input(model, frames[i]), opts.encoding,
                                 seed_stream.next_u64());
            session.set_input(encoder.next());
        }
        session.step();
        out_acc.add(session.layer_spikes().back());
        ++result.steps_total;
        if (result.steps_total > opts.warmup) {
            result.rates.push_back(out_acc.rates());
            ++result.outputs;
        }
    }
    return result;
}

} // namespace qsnn
