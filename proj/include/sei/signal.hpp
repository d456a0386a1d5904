#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace sei {

using cplx = std::complex<double>;

/// Complex baseband samples plus the labels that travel with them.
class IqSignal {
public:
    IqSignal(std::vector<cplx> samples, double sample_rate_hz,
             std::optional<int> emitter_id = std::nullopt,
             std::optional<double> snr_db = std::nullopt);

    std::span<const cplx> samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    double sample_rate_hz() const noexcept { return sample_rate_hz_; }
    std::optional<int> emitter_id() const noexcept { return emitter_id_; }
    std::optional<double> snr_db() const noexcept { return snr_db_; }

    friend bool operator==(const IqSignal&, const IqSignal&) = default;

private:
    std::vector<cplx> samples_;
    double sample_rate_hz_;
    std::optional<int> emitter_id_;
    std::optional<double> snr_db_;
};

/// Transmitter impairments that make one emitter distinguishable from another
/// transmitting identical content.
struct EmitterProfile {
    int emitter_id = 0;
    // Memoryless polynomial a1*u + a2*u^2 + a3*u^3 on the complex envelope.
    std::array<double, 3> poly_coeffs{1.0, 0.0, 0.0};
    double iq_gain_imbalance = 1.0;
    double iq_phase_skew_rad = 0.0;
    cplx dc_offset{};

    /// Throws std::invalid_argument on non-finite fields or a zero linear term.
    void validate() const;
};

/// Deterministic set of `count` mutually distinct profiles.
std::vector<EmitterProfile> default_emitter_profiles(int count);

struct SubsampleSpec {
    std::size_t length_points = 1120;
    std::uint64_t rng_seed = 0;
    // Without replacement, draws map to non-overlapping slots of a fixed
    // random permutation.
    bool replacement = true;
};

// Nominal rate for synthesized signals (one 802.11a channel).
inline constexpr double kSynthSampleRateHz = 20.0e6;
// Recorded length implied by 1120 points being 56 ppm of a signal. Inferred,
// not measured.
inline constexpr std::size_t kInferredRecordingLength = 20'000'000;
inline constexpr std::size_t kMinSynthLength = 1120;

/// Frequency-domain Hilbert transform (-i*sign(f) multiplier, DC and Nyquist
/// bins zeroed).
std::vector<double> hilbert_transform(std::span<const double> x);

/// I/Q demodulation of a real passband signal about center frequency f0_hz.
IqSignal demodulate_iq(std::span<const double> x, double f0_hz, double sample_rate_hz);

struct SynthesisParts {
    std::vector<cplx> baseline;  // emitter-independent waveform
    std::vector<cplx> clean;     // baseline after impairments
    std::vector<cplx> noise;     // additive noise (all zero when snr is +inf)
};

/// Builds the three stages separately; the emitted signal is clean + noise.
SynthesisParts synthesize_emitter_parts(const EmitterProfile& profile, std::size_t num_points,
                                        double snr_db, std::uint64_t rng_seed);

IqSignal synthesize_emitter_signal(const EmitterProfile& profile, std::size_t num_points,
                                   double snr_db, std::uint64_t rng_seed);

/// Start index of window `draw_index` for a signal of `signal_length` points.
std::size_t subsample_start(std::size_t signal_length, const SubsampleSpec& spec,
                            std::uint64_t draw_index);

IqSignal extract_subsample(const IqSignal& signal, const SubsampleSpec& spec,
                           std::uint64_t draw_index);

// iq32: little-endian float32 I/Q pairs, with a JSON sidecar at <path>.json.
std::filesystem::path iq32_sidecar_path(const std::filesystem::path& path);
void write_iq32(const std::filesystem::path& path, const IqSignal& signal);
IqSignal read_iq32(const std::filesystem::path& path);

}  // namespace sei
