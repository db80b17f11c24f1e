#ifndef QSNN_SNN_HPP
#define QSNN_SNN_HPP

#include "qsnn/rng.hpp"
#include "qsnn/snn_model.hpp"

#include <deque>
#include <limits>
#include <vector>

namespace qsnn {

enum class Encoding : std::uint8_t { AnalogCurrent, Bernoulli };

/// Membrane state of one layer of neurons. The v tensor's domain selects the
/// datapath: real reference or 32-bit-integer arithmetic.
struct NeuronState {
    Tensor v;
    NeuronKind kind = NeuronKind::IF;
    double threshold = 1.0;
    double v_max = std::numeric_limits<double>::infinity();
    double v_min = -std::numeric_limits<double>::infinity();
    std::int32_t int_threshold = 1;
    std::int64_t int_v_max = std::numeric_limits<std::int64_t>::max();
    std::int64_t int_v_min = std::numeric_limits<std::int64_t>::min();
};

NeuronState make_neuron_state(const std::vector<int>& shape, NeuronKind kind, double threshold,
                              double n_max, double n_min);
NeuronState make_int_neuron_state(const std::vector<int>& shape, NeuronKind kind,
                                  std::int32_t threshold, double n_max, double n_min);

/// Soft-reset integrate-and-fire step: v += u, spike where v >= threshold,
/// then subtract the threshold once per spike. Returns the binary frame.
Tensor if_step(NeuronState& state, const Tensor& u);

/// if_step followed by the membrane clamp to [n_min*th, n_max*th].
Tensor fewdif_step(NeuronState& state, const Tensor& u);

/// Dispatch on state.kind.
Tensor neuron_step(NeuronState& state, const Tensor& u);

/// Per-step input generator. The image must already be normalized to [0, 1].
/// Analog mode hands the image back every step; Bernoulli mode draws a
/// seeded binary frame with per-pixel spike probability equal to the value.
class InputEncoder {
public:
    InputEncoder(Tensor image, Encoding mode, std::uint64_t seed = 0);
    const Tensor& next();
    Encoding mode() const { return mode_; }

private:
    Tensor image_;
    Encoding mode_;
    Rng rng_;
    Tensor frame_;
};

/// Spike counter with an optional sliding window over recent frames.
struct RateAccumulator {
    Tensor counts; // int32, allocated on first frame
    std::int64_t steps = 0;
    std::size_t window = 0; // 0 = cumulative counts over all steps
    std::deque<Tensor> recent;

    void add(const Tensor& spike_frame);
    Tensor rates() const; // counts / steps (or the window average)
};

/// How a real-datapath session derives its per-layer parameters.
enum class RealWeights : std::uint8_t {
    Physical,      // weights int_w * s_l, threshold v_th: the converted model
    IntegerScaled, // weights = the integer codes as doubles, threshold = int_threshold;
                   // the Eq.-8-scaled twin of the integer datapath, exact in doubles
};

/// One inference session: owns mutable neuron state over an immutable model.
class Session {
public:
    Session(const SnnModel& model, RealWeights mode = RealWeights::Physical);

    void reset();
    /// Set the layer-1 drive from an input frame (normalized image or binary
    /// spike frame). The resulting current is reused by step() until changed.
    void set_input(const Tensor& frame);
    /// Advance every layer one step; returns the output layer's spike frame.
    const Tensor& step();

    const std::vector<Tensor>& layer_spikes() const { return spikes_; }
    std::size_t layer_count() const { return specs_.size(); }
    const NeuronState& state(std::size_t l) const { return states_[l]; }

private:
    std::vector<ConvSpec> specs_;
    std::vector<NeuronState> states_;
    std::vector<Tensor> spikes_;
    Tensor input_current_;
    std::vector<NeuronKind> kinds_;
    std::vector<double> thresholds_;
    std::vector<std::pair<double, double>> bounds_;
    bool primed_ = false;

    void prime(const Tensor& current);
};

/// Integer-arithmetic-only session (Fig-3b-style datapath): all state and
/// accumulation in checked 32-bit integers.
class IntSession {
public:
    explicit IntSession(const SnnModel& model);

    void reset();
    void set_input(const Tensor& int_current);         // precomputed layer-1 current
    void set_input_spikes(const Tensor& spike_frame);  // binary int32 frame
    const Tensor& step();

    const std::vector<Tensor>& layer_spikes() const { return spikes_; }
    const NeuronState& state(std::size_t l) const { return states_[l]; }

private:
    const SnnModel* model_;
    std::vector<ConvSpec> specs_;
    std::vector<NeuronState> states_;
    std::vector<Tensor> spikes_;
    Tensor input_current_;
    bool primed_ = false;

    void prime(const Tensor& current);
    Tensor layer_current(std::size_t l, const Tensor& in);
};

/// Layer-1 stationary current of an analog-encoded image on the integer
/// datapath: the real conv output, rounded once to the integer grid.
Tensor integer_input_current(const SnnModel& model, const Tensor& image);

/// Normalize a raw [0, 1] image by the model's calibration input maximum.
Tensor normalize_input(const SnnModel& model, const Tensor& image);

struct WindowedResult {
    std::vector<Tensor> layer_rates; // one real tensor per layer
    Tensor output_rates;
    std::int64_t steps = 0;
};

/// Reset-and-accumulate inference: T steps, rate decode at the end.
WindowedResult run_windowed(const SnnModel& model, const Tensor& image, int steps,
                            Encoding encoding = Encoding::AnalogCurrent, std::uint64_t seed = 0);

/// Integer-datapath variant of run_windowed (analog encoding).
WindowedResult run_integer(const SnnModel& model, const Tensor& image, int steps);

struct ContinuousOptions {
    int warmup = 200;
    int window = 0;               // 0 -> same as warmup
    bool frames_are_spikes = false;
    Encoding encoding = Encoding::AnalogCurrent;
    std::uint64_t seed = 0;
};

struct ContinuousResult {
    std::vector<Tensor> rates;    // one output-rate tensor per post-warmup frame
    std::int64_t steps_total = 0;
    std::int64_t outputs = 0;
};

/// Never-reset streaming inference: one network step per incoming frame, one
/// sliding-window output per frame once the warmup has elapsed.
ContinuousResult run_continuous(const SnnModel& model, std::span<const Tensor> frames,
                                const ContinuousOptions& opts);

} // namespace qsnn

#endif
