#include "sei/bispectrum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#ifdef SEI_HAVE_PNG
#include <png.h>
#endif

#include "sei/error.hpp"
#include "sei/fft.hpp"

namespace sei {
namespace {

std::vector<cplx> centered(std::span<const cplx> sample) {
    cplx mean{};
    for (const auto& v : sample) mean += v;
    mean /= static_cast<double>(sample.size());
    std::vector<cplx> out(sample.begin(), sample.end());
    for (auto& v : out) v -= mean;
    return out;
}

void require_finite(std::span<const cplx> sample, const char* op) {
    for (const auto& v : sample) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            throw std::invalid_argument(std::string(op) + ": non-finite sample value");
        }
    }
}

constexpr std::array<char, 4> kBspMagic{'B', 'S', 'P', '1'};
constexpr std::size_t kBspHeaderBytes = 12;

void put_u16(std::vector<std::uint8_t>& out, std::size_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

std::size_t get_u16(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return static_cast<std::size_t>(bytes[offset]) | (static_cast<std::size_t>(bytes[offset + 1]) << 8);
}

}  // namespace

BispectrumGrid bispectrum_fft(std::span<const cplx> sample) {
    const std::size_t n = sample.size();
    if (n < 4) throw std::invalid_argument("bispectrum_fft: sample length must be >= 4, got " + std::to_string(n));
    require_finite(sample, "bispectrum_fft");
    const auto spectrum = fft::forward(centered(sample));
    const double inv_n = 1.0 / static_cast<double>(n);

    BispectrumGrid grid(n);
    for (std::size_t k1 = 0; k1 < n; ++k1) {
        const cplx x1 = spectrum[k1] * inv_n;
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            std::size_t k3 = k1 + k2;
            if (k3 >= n) k3 -= n;
            grid(k1, k2) = x1 * spectrum[k2] * std::conj(spectrum[k3]);
        }
    }
    return grid;
}

BispectrumGrid bispectrum_fft(const IqSignal& sample) { return bispectrum_fft(sample.samples()); }

BispectrumGrid bispectrum_lag_oracle(std::span<const cplx> sample) {
    const std::size_t n = sample.size();
    if (n < 1) throw std::invalid_argument("bispectrum_lag_oracle: empty sample");
    if (n > kLagOracleMaxPoints) {
        throw std::invalid_argument("bispectrum_lag_oracle: refusing N=" + std::to_string(n) + " (limit " +
                                    std::to_string(kLagOracleMaxPoints) + ")");
    }
    const auto x = centered(sample);

    // c(tau1, tau2) = (1/N) sum_t conj(x(t)) x(t+tau1) x(t+tau2), circular lags
    std::vector<cplx> moment(n * n);
    for (std::size_t tau1 = 0; tau1 < n; ++tau1) {
        for (std::size_t tau2 = 0; tau2 < n; ++tau2) {
            cplx acc{};
            for (std::size_t t = 0; t < n; ++t) {
                acc += std::conj(x[t]) * x[(t + tau1) % n] * x[(t + tau2) % n];
            }
            moment[tau1 * n + tau2] = acc / static_cast<double>(n);
        }
    }

    BispectrumGrid grid(n);
    const double w = 2.0 * std::numbers::pi / static_cast<double>(n);
    for (std::size_t k1 = 0; k1 < n; ++k1) {
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            cplx acc{};
            for (std::size_t tau1 = 0; tau1 < n; ++tau1) {
                for (std::size_t tau2 = 0; tau2 < n; ++tau2) {
                    // reduce the phase index mod N to keep the angle small
                    const std::size_t m = (k1 * tau1 + k2 * tau2) % n;
                    acc += std::polar(1.0, -w * static_cast<double>(m)) * moment[tau1 * n + tau2];
                }
            }
            grid(k1, k2) = acc;
        }
    }
    return grid;
}

BispectrumGrid bispectrum_lag_oracle(const IqSignal& sample) { return bispectrum_lag_oracle(sample.samples()); }

PowerGrid downsample_power(const BispectrumGrid& grid, std::size_t block) {
    const std::size_t n = grid.side();
    if (block == 0 || n % block != 0) {
        throw std::invalid_argument("downsample_power: grid side " + std::to_string(n) + "x" + std::to_string(n) +
                                    " is not divisible by block " + std::to_string(block));
    }
    PowerGrid out;
    out.rows = out.cols = n / block;
    out.values.assign(out.rows * out.cols, 0.0);
    for (std::size_t k1 = 0; k1 < n; ++k1) {
        double* row = &out.values[(k1 / block) * out.cols];
        for (std::size_t k2 = 0; k2 < n; ++k2) row[k2 / block] += std::norm(grid(k1, k2));
    }
    return out;
}

ByteGrid quantize_rescale(const PowerGrid& power, PowerScale scale) {
    if (power.values.size() != power.rows * power.cols) {
        throw std::invalid_argument("quantize_rescale: grid shape does not match value count");
    }
    for (double v : power.values) {
        if (std::isnan(v)) throw std::invalid_argument("quantize_rescale: NaN in input");
        if (!std::isfinite(v) || v < 0.0) {
            throw std::invalid_argument("quantize_rescale: values must be finite and non-negative");
        }
    }
    ByteGrid out{power.rows, power.cols, std::vector<std::uint8_t>(power.values.size(), 0)};
    if (power.values.empty()) return out;

    std::vector<double> v = power.values;
    if (scale == PowerScale::Log) {
        const double peak = *std::max_element(v.begin(), v.end());
        if (peak == 0.0) return out;
        const double floor = peak * 1e-12;
        for (auto& x : v) x = std::log10(x + floor);
    }
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (hi == lo) return out;
    const double span = hi - lo;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double q = std::round(255.0 * (v[i] - lo) / span);
        out.values[i] = static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
    }
    return out;
}

BispectrumImage apply_colormap(const ByteGrid& q) {
    if (q.values.size() != q.rows * q.cols) {
        throw std::invalid_argument("apply_colormap: grid shape does not match value count");
    }
    // Channel c at intensity v = q/255 is clamp(min(4v + lo_c, -4v + hi_c), 0, 1).
    // Multiplying through by 255 keeps every intermediate a half-integer, so the
    // rounding is exact.
    static constexpr std::array<std::array<double, 2>, 3> kShifts{{{-1.5, 4.5}, {-0.5, 3.5}, {0.5, 2.5}}};
    std::array<std::array<std::uint8_t, 3>, 256> lut{};
    for (int level = 0; level < 256; ++level) {
        for (std::size_t c = 0; c < 3; ++c) {
            const double up = 4.0 * level + kShifts[c][0] * 255.0;
            const double down = -4.0 * level + kShifts[c][1] * 255.0;
            const double scaled = std::clamp(std::min(up, down), 0.0, 255.0);
            lut[static_cast<std::size_t>(level)][c] = static_cast<std::uint8_t>(std::round(scaled));
        }
    }
    BispectrumImage img;
    img.width = q.cols;
    img.height = q.rows;
    img.pixels.resize(q.values.size() * BispectrumImage::kChannels);
    for (std::size_t i = 0; i < q.values.size(); ++i) {
        const auto& rgb = lut[q.values[i]];
        std::copy(rgb.begin(), rgb.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(i * 3));
    }
    return img;
}

BispectrumImage featurize(const IqSignal& sample, const FeaturizeOptions& options) {
    if (options.block == 0 || sample.size() % options.block != 0) {
        throw std::invalid_argument("featurize: sample length " + std::to_string(sample.size()) +
                                    " is not divisible by block " + std::to_string(options.block));
    }
    auto image = apply_colormap(quantize_rescale(downsample_power(bispectrum_fft(sample), options.block), options.scale));
    image.source_emitter = sample.emitter_id();
    return image;
}

std::vector<std::uint8_t> encode_bsp(const BispectrumImage& image) {
    constexpr std::size_t kMax = std::numeric_limits<std::uint16_t>::max();
    if (image.width > kMax || image.height > kMax) throw std::invalid_argument("encode_bsp: image too large");
    if (image.pixels.size() != image.width * image.height * BispectrumImage::kChannels) {
        throw std::invalid_argument("encode_bsp: pixel count does not match dimensions");
    }
    std::vector<std::uint8_t> out(kBspMagic.begin(), kBspMagic.end());
    out.reserve(kBspHeaderBytes + image.pixels.size());
    put_u16(out, image.width);
    put_u16(out, image.height);
    put_u16(out, BispectrumImage::kChannels);
    put_u16(out, 0);
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

BispectrumImage decode_bsp(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kBspHeaderBytes || !std::equal(kBspMagic.begin(), kBspMagic.end(), bytes.begin())) {
        throw std::invalid_argument("decode_bsp: missing BSP1 header");
    }
    BispectrumImage img;
    img.width = get_u16(bytes, 4);
    img.height = get_u16(bytes, 6);
    const std::size_t channels = get_u16(bytes, 8);
    if (channels != BispectrumImage::kChannels) {
        throw std::invalid_argument("decode_bsp: expected 3 channels, got " + std::to_string(channels));
    }
    const std::size_t expected = img.width * img.height * channels;
    if (bytes.size() != kBspHeaderBytes + expected) {
        throw std::invalid_argument("decode_bsp: payload is " + std::to_string(bytes.size() - kBspHeaderBytes) +
                                    " bytes, expected " + std::to_string(expected));
    }
    img.pixels.assign(bytes.begin() + kBspHeaderBytes, bytes.end());
    return img;
}

void write_bsp(const std::filesystem::path& path, const BispectrumImage& image) {
    const auto bytes = encode_bsp(image);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(path.string(), "cannot open for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError(path.string(), "write failed");
}

BispectrumImage read_bsp(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path.string(), "file not found");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    try {
        return decode_bsp(bytes);
    } catch (const std::invalid_argument& e) {
        throw IoError(path.string(), e.what());
    }
}

bool png_export_available() noexcept {
#ifdef SEI_HAVE_PNG
    return true;
#else
    return false;
#endif
}

void write_png(const std::filesystem::path& path, const BispectrumImage& image) {
#ifdef SEI_HAVE_PNG
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    if (png_image_write_to_file(&png, path.string().c_str(), 0, image.pixels.data(), 0, nullptr) == 0) {
        throw IoError(path.string(), std::string("PNG write failed: ") + png.message);
    }
#else
    (void)image;
    throw std::runtime_error("write_png(" + path.string() + "): built without libpng");
#endif
}

}  // namespace sei
