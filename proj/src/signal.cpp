#include "sei/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "byteio.hpp"
#include "sei/error.hpp"
#include "sei/fft.hpp"
#include "sei/rng.hpp"

namespace sei {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Baseline multicarrier layout. Carriers sit at k/56 cycles per sample so a
// window of any multiple of 56 points holds whole periods. The indices are odd
// (no carrier equals a sum of two carriers, so the undistorted waveform has
// no bispectrum) and pairwise sums are distinct (each second-order product
// lands on its own bin with a phase-independent magnitude). QPSK phases are
// redrawn every 4480 points.
constexpr std::size_t kCarrierPeriod = 56;
constexpr std::array<int, 5> kCarriers{1, 3, 7, 15, 25};
constexpr std::size_t kSymbolLength = 80 * kCarrierPeriod;

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

std::vector<cplx> baseline_waveform(std::size_t num_points, std::uint64_t rng_seed) {
    // carrier_table[c][t] = exp(2 pi i k_c t / 56)
    std::array<std::array<cplx, kCarrierPeriod>, kCarriers.size()> carrier_table{};
    for (std::size_t c = 0; c < kCarriers.size(); ++c) {
        for (std::size_t t = 0; t < kCarrierPeriod; ++t) {
            carrier_table[c][t] = std::polar(1.0, kTwoPi * kCarriers[c] * static_cast<double>(t) / kCarrierPeriod);
        }
    }
    const double norm = 1.0 / std::sqrt(static_cast<double>(kCarriers.size()));
    static constexpr std::array<cplx, 4> kQpsk{
        cplx{std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2},
        cplx{-std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2},
        cplx{-std::numbers::sqrt2 / 2, -std::numbers::sqrt2 / 2},
        cplx{std::numbers::sqrt2 / 2, -std::numbers::sqrt2 / 2},
    };

    std::vector<cplx> out(num_points);
    const std::size_t num_symbols = (num_points + kSymbolLength - 1) / kSymbolLength;
    std::array<cplx, kCarriers.size()> symbols{};
    for (std::size_t s = 0; s < num_symbols; ++s) {
        auto rng = CounterRng::keyed(rng_seed, StreamPurpose::Baseline, s);
        for (auto& sym : symbols) sym = kQpsk[rng() >> 62] * norm;
        const std::size_t begin = s * kSymbolLength;
        const std::size_t end = std::min(begin + kSymbolLength, num_points);
        for (std::size_t t = begin; t < end; ++t) {
            const std::size_t phase = t % kCarrierPeriod;
            cplx acc{};
            for (std::size_t c = 0; c < symbols.size(); ++c) acc += symbols[c] * carrier_table[c][phase];
            out[t] = acc;
        }
    }
    return out;
}

cplx impair(const EmitterProfile& p, cplx u) {
    const auto& a = p.poly_coeffs;
    const cplx u2 = u * u;
    const cplx y = a[0] * u + a[1] * u2 + a[2] * (u2 * u);
    const double i_out = y.real();
    const double q_out = p.iq_gain_imbalance *
                         (y.imag() * std::cos(p.iq_phase_skew_rad) + y.real() * std::sin(p.iq_phase_skew_rad));
    return cplx{i_out, q_out} + p.dc_offset;
}

}  // namespace

IqSignal::IqSignal(std::vector<cplx> samples, double sample_rate_hz, std::optional<int> emitter_id,
                   std::optional<double> snr_db)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz), emitter_id_(emitter_id), snr_db_(snr_db) {
    if (samples_.empty()) throw std::invalid_argument("IqSignal: no samples");
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) {
        throw std::invalid_argument("IqSignal: sample_rate_hz must be positive and finite");
    }
    if (!std::all_of(samples_.begin(), samples_.end(), finite)) {
        throw std::invalid_argument("IqSignal: non-finite sample value");
    }
}

void EmitterProfile::validate() const {
    const bool ok = std::all_of(poly_coeffs.begin(), poly_coeffs.end(), [](double v) { return std::isfinite(v); }) &&
                    std::isfinite(iq_gain_imbalance) && std::isfinite(iq_phase_skew_rad) && finite(dc_offset);
    if (!ok) throw std::invalid_argument("EmitterProfile " + std::to_string(emitter_id) + ": non-finite field");
    if (poly_coeffs[0] == 0.0) {
        throw std::invalid_argument("EmitterProfile " + std::to_string(emitter_id) + ": linear coefficient is zero");
    }
}

std::vector<EmitterProfile> default_emitter_profiles(int count) {
    if (count < 1) throw std::invalid_argument("default_emitter_profiles: count must be >= 1");
    std::vector<EmitterProfile> out;
    out.reserve(static_cast<std::size_t>(count));
    // Four base signatures: quadratic only, plus cubic, plus I/Q imbalance,
    // and a weaker mixture. Later emitters repeat them with a stronger a2.
    struct Signature {
        double a2, a3, gain, skew;
    };
    static constexpr std::array<Signature, 4> kBase{{
        {0.5, 0.0, 1.0, 0.0},
        {0.5, 0.4, 1.0, 0.0},
        {0.5, 0.0, 1.3, 0.3},
        {0.25, 0.2, 1.15, 0.15},
    }};
    for (int i = 0; i < count; ++i) {
        const Signature& sig = kBase[static_cast<std::size_t>(i % 4)];
        EmitterProfile p;
        p.emitter_id = i;
        p.poly_coeffs = {1.0, sig.a2 * (1.0 + 0.25 * (i / 4)), sig.a3};
        p.iq_gain_imbalance = sig.gain;
        p.iq_phase_skew_rad = sig.skew;
        p.dc_offset = cplx{0.002 * (i % 3), -0.002 * (i % 2)};
        out.push_back(p);
    }
    return out;
}

std::vector<double> hilbert_transform(std::span<const double> x) {
    if (x.size() < 2) throw std::invalid_argument("hilbert_transform: need at least 2 samples");
    if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); })) {
        throw std::invalid_argument("hilbert_transform: non-finite input");
    }
    const std::size_t n = x.size();
    std::vector<cplx> spectrum = fft::forward(std::vector<cplx>(x.begin(), x.end()));
    const cplx minus_i{0.0, -1.0};
    for (std::size_t k = 0; k < n; ++k) {
        if (k == 0 || 2 * k == n) {
            spectrum[k] = 0.0;
        } else if (2 * k < n) {
            spectrum[k] *= minus_i;
        } else {
            spectrum[k] *= -minus_i;
        }
    }
    const auto time = fft::inverse(spectrum);
    std::vector<double> out(n);
    std::transform(time.begin(), time.end(), out.begin(), [](cplx z) { return z.real(); });
    return out;
}

IqSignal demodulate_iq(std::span<const double> x, double f0_hz, double sample_rate_hz) {
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
        throw std::invalid_argument("demodulate_iq: sample_rate_hz must be positive");
    }
    if (!(f0_hz > 0.0 && f0_hz < sample_rate_hz / 2.0)) {
        throw std::invalid_argument("demodulate_iq: f0_hz must lie in (0, sample_rate_hz/2)");
    }
    const auto h = hilbert_transform(x);
    std::vector<cplx> iq(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double phase = kTwoPi * f0_hz * static_cast<double>(t) / sample_rate_hz;
        const double c = std::cos(phase);
        const double s = std::sin(phase);
        iq[t] = {x[t] * c + h[t] * s, h[t] * c - x[t] * s};
    }
    return IqSignal(std::move(iq), sample_rate_hz);
}

SynthesisParts synthesize_emitter_parts(const EmitterProfile& profile, std::size_t num_points, double snr_db,
                                        std::uint64_t rng_seed) {
    profile.validate();
    if (num_points < kMinSynthLength) {
        throw std::invalid_argument("synthesize_emitter_signal: num_points must be >= " +
                                    std::to_string(kMinSynthLength));
    }
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("synthesize_emitter_signal: snr_db must be a number or +inf");
    }
    SynthesisParts parts;
    parts.baseline = baseline_waveform(num_points, rng_seed);
    parts.clean.resize(num_points);
    std::transform(parts.baseline.begin(), parts.baseline.end(), parts.clean.begin(),
                   [&](cplx u) { return impair(profile, u); });
    parts.noise.assign(num_points, cplx{});
    if (std::isfinite(snr_db)) {
        double power = 0.0;
        for (const auto& v : parts.clean) power += std::norm(v);
        power /= static_cast<double>(num_points);
        const double noise_power = power / std::pow(10.0, snr_db / 10.0);
        std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));
        auto rng = CounterRng::keyed(rng_seed, StreamPurpose::Noise, static_cast<std::uint64_t>(profile.emitter_id));
        for (auto& v : parts.noise) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            v = {re, im};
        }
    }
    return parts;
}

IqSignal synthesize_emitter_signal(const EmitterProfile& profile, std::size_t num_points, double snr_db,
                                   std::uint64_t rng_seed) {
    auto parts = synthesize_emitter_parts(profile, num_points, snr_db, rng_seed);
    for (std::size_t t = 0; t < num_points; ++t) parts.clean[t] += parts.noise[t];
    std::optional<double> snr;
    if (std::isfinite(snr_db)) snr = snr_db;
    return IqSignal(std::move(parts.clean), kSynthSampleRateHz, profile.emitter_id, snr);
}

std::size_t subsample_start(std::size_t signal_length, const SubsampleSpec& spec, std::uint64_t draw_index) {
    if (spec.length_points == 0) throw std::invalid_argument("extract_subsample: length_points must be positive");
    if (spec.length_points > signal_length) {
        throw std::invalid_argument("extract_subsample: window of " + std::to_string(spec.length_points) +
                                    " points exceeds signal length " + std::to_string(signal_length));
    }
    if (spec.replacement) {
        auto rng = CounterRng::keyed(spec.rng_seed, StreamPurpose::SubsampleStart, draw_index);
        return static_cast<std::size_t>(rng.below(signal_length - spec.length_points + 1));
    }
    const std::size_t slots = signal_length / spec.length_points;
    if (draw_index >= slots) {
        throw std::invalid_argument("extract_subsample: draw " + std::to_string(draw_index) +
                                    " exceeds the " + std::to_string(slots) + " non-overlapping windows");
    }
    // Partial Fisher-Yates: only positions up to draw_index are needed.
    std::vector<std::size_t> perm(slots);
    for (std::size_t i = 0; i < slots; ++i) perm[i] = i;
    auto rng = CounterRng::keyed(spec.rng_seed, StreamPurpose::SubsampleStart, ~std::uint64_t{0});
    for (std::size_t i = 0; i <= draw_index; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(slots - i));
        std::swap(perm[i], perm[j]);
    }
    return perm[draw_index] * spec.length_points;
}

IqSignal extract_subsample(const IqSignal& signal, const SubsampleSpec& spec, std::uint64_t draw_index) {
    const std::size_t start = subsample_start(signal.size(), spec, draw_index);
    auto src = signal.samples().subspan(start, spec.length_points);
    return IqSignal(std::vector<cplx>(src.begin(), src.end()), signal.sample_rate_hz(), signal.emitter_id(),
                    signal.snr_db());
}

std::filesystem::path iq32_sidecar_path(const std::filesystem::path& path) {
    auto p = path;
    p += ".json";
    return p;
}

void write_iq32(const std::filesystem::path& path, const IqSignal& signal) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(path.string(), "cannot open for writing");
    for (const auto& v : signal.samples()) {
        detail::put_f32(os, static_cast<float>(v.real()));
        detail::put_f32(os, static_cast<float>(v.imag()));
    }
    if (!os) throw IoError(path.string(), "write failed");

    nlohmann::json meta;
    meta["sample_rate_hz"] = signal.sample_rate_hz();
    meta["emitter_id"] = signal.emitter_id() ? nlohmann::json(*signal.emitter_id()) : nlohmann::json(nullptr);
    meta["snr_db"] = signal.snr_db() ? nlohmann::json(*signal.snr_db()) : nlohmann::json(nullptr);
    meta["num_samples"] = signal.size();
    const auto sidecar = iq32_sidecar_path(path);
    std::ofstream ms(sidecar);
    if (!ms) throw IoError(sidecar.string(), "cannot open for writing");
    ms << meta.dump(2) << '\n';
}

IqSignal read_iq32(const std::filesystem::path& path) {
    const auto sidecar = iq32_sidecar_path(path);
    std::ifstream ms(sidecar);
    if (!ms) throw IoError(sidecar.string(), "file not found");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ms);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(sidecar.string(), std::string("malformed sidecar: ") + e.what());
    }
    for (const char* key : {"sample_rate_hz", "num_samples"}) {
        if (!meta.contains(key)) throw IoError(sidecar.string(), std::string("missing field ") + key);
    }
    const auto num_samples = meta.at("num_samples").get<std::uint64_t>();

    std::error_code ec;
    const auto bytes = std::filesystem::file_size(path, ec);
    if (ec) throw IoError(path.string(), "file not found");
    if (bytes != num_samples * 8) {
        throw IoError(path.string(), "size " + std::to_string(bytes) + " bytes does not match num_samples " +
                                         std::to_string(num_samples) + " (8 bytes each)");
    }
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path.string(), "cannot open for reading");
    std::vector<cplx> samples(num_samples);
    for (auto& v : samples) {
        const float re = detail::get_f32(is);
        const float im = detail::get_f32(is);
        v = {re, im};
    }
    if (!is) throw IoError(path.string(), "short read");

    std::optional<int> emitter;
    if (meta.contains("emitter_id") && !meta["emitter_id"].is_null()) emitter = meta["emitter_id"].get<int>();
    std::optional<double> snr;
    if (meta.contains("snr_db") && !meta["snr_db"].is_null()) snr = meta["snr_db"].get<double>();
    return IqSignal(std::move(samples), meta.at("sample_rate_hz").get<double>(), emitter, snr);
}

}  // namespace sei
