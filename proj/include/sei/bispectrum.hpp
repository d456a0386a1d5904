#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sei/signal.hpp"

namespace sei {

/// Full N x N bispectrum, row index k1, column index k2.
class BispectrumGrid {
public:
    explicit BispectrumGrid(std::size_t n) : n_(n), values_(n * n) {}

    std::size_t side() const noexcept { return n_; }
    cplx& operator()(std::size_t k1, std::size_t k2) { return values_[k1 * n_ + k2]; }
    const cplx& operator()(std::size_t k1, std::size_t k2) const { return values_[k1 * n_ + k2]; }
    std::span<const cplx> values() const noexcept { return values_; }
    std::span<cplx> values() noexcept { return values_; }

private:
    std::size_t n_;
    std::vector<cplx> values_;
};

/// Row-major real grid (summed bispectral power per cell).
struct PowerGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Row-major 8-bit intensity grid.
struct ByteGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> values;

    std::uint8_t at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Height x width x 3 RGB image, row-major with interleaved channels.
struct BispectrumImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;
    std::optional<int> source_emitter;

    static constexpr std::size_t kChannels = 3;

    std::uint8_t at(std::size_t row, std::size_t col, std::size_t channel) const {
        return pixels[(row * width + col) * kChannels + channel];
    }
    bool operator==(const BispectrumImage&) const = default;
};

enum class PowerScale { Linear, Log };

struct FeaturizeOptions {
    std::size_t block = 5;
    PowerScale scale = PowerScale::Linear;
};

/// Mean-removed, circular-lag bispectrum via one DFT:
/// B(k1,k2) = X(k1) X(k2) conj(X(k1+k2 mod N)) / N.
BispectrumGrid bispectrum_fft(std::span<const cplx> sample);
BispectrumGrid bispectrum_fft(const IqSignal& sample);

inline constexpr std::size_t kLagOracleMaxPoints = 32;

/// Direct transcription of the lag-domain definition: third-order moment over
/// circular lags followed by a 2-D DFT. O(N^4); refuses N > 32.
BispectrumGrid bispectrum_lag_oracle(std::span<const cplx> sample);
BispectrumGrid bispectrum_lag_oracle(const IqSignal& sample);

/// Sum of |B|^2 over each block x block tile.
PowerGrid downsample_power(const BispectrumGrid& grid, std::size_t block = 5);

/// Per-image min-max map onto 0..255 (round half away from zero). A constant
/// grid maps to all zeros. PowerScale::Log applies log10 before the map.
ByteGrid quantize_rescale(const PowerGrid& power, PowerScale scale = PowerScale::Linear);

/// Piecewise-linear "jet" colormap: red for high, green for medium and blue
/// for low intensity.
BispectrumImage apply_colormap(const ByteGrid& q);

BispectrumImage featurize(const IqSignal& sample, const FeaturizeOptions& options = {});

// BSP1 feature file: "BSP1", u16 width, u16 height, u16 channels, u16 reserved,
// then row-major channel-interleaved bytes.
void write_bsp(const std::filesystem::path& path, const BispectrumImage& image);
BispectrumImage read_bsp(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_bsp(const BispectrumImage& image);
BispectrumImage decode_bsp(std::span<const std::uint8_t> bytes);

bool png_export_available() noexcept;
/// Throws std::runtime_error when built without libpng.
void write_png(const std::filesystem::path& path, const BispectrumImage& image);

}  // namespace sei
