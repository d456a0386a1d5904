#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <utility>

#include "sei/bispectrum.hpp"
#include "sei/error.hpp"
#include "support/oracles.hpp"

using namespace sei;

namespace {

double max_abs(const BispectrumGrid& g) {
    double m = 0.0;
    for (const auto& v : g.values()) m = std::max(m, std::abs(v));
    return m;
}

double relative_error(const BispectrumGrid& a, const BispectrumGrid& b) {
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        diff = std::max(diff, std::abs(a.values()[i] - b.values()[i]));
        ref = std::max(ref, std::abs(b.values()[i]));
    }
    return ref == 0.0 ? diff : diff / ref;
}

std::vector<cplx> zero_mean(std::vector<cplx> x) {
    cplx mean{};
    for (const auto& v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (auto& v : x) v -= mean;
    return x;
}

// Jet channel times 255, doubled so every value is an integer:
// 2*255*(4v + s) = 8q + 510 s.
std::uint8_t jet_oracle(int q, int channel) {
    static constexpr int kLo2[3] = {-765, -255, 255};   // 510 * (-1.5, -0.5, 0.5)
    static constexpr int kHi2[3] = {2295, 1785, 1275};  // 510 * (4.5, 3.5, 2.5)
    const int twice = std::clamp(std::min(8 * q + kLo2[channel], -8 * q + kHi2[channel]), 0, 510);
    return static_cast<std::uint8_t>((twice + 1) / 2);  // half away from zero
}

}  // namespace

TEST_CASE("zero input gives an all-zero grid") {
    const std::vector<cplx> zeros(16);
    CHECK(max_abs(bispectrum_fft(zeros)) == 0.0);
    CHECK(max_abs(bispectrum_lag_oracle(zeros)) == 0.0);
}

TEST_CASE("fft bispectrum matches the lag oracle") {
    for (std::size_t n : {4u, 8u, 16u, 32u}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto x = testing::random_complex(n, 1000 * n + seed);
            CHECK(relative_error(bispectrum_fft(x), bispectrum_lag_oracle(x)) <= 1e-9);
        }
    }
}

TEST_CASE("a single complex exponential has no bispectrum") {
    const std::size_t n = 64;
    for (std::size_t k0 : {1u, 7u, 31u, 50u}) {
        std::vector<cplx> x(n);
        for (std::size_t t = 0; t < n; ++t) x[t] = std::polar(1.0, 2.0 * std::numbers::pi * k0 * t / n);
        // X(k0) = N; any surviving entry is rounding noise far below N^2.
        CHECK(max_abs(bispectrum_fft(x)) <= 1e-9 * n * n);
    }
}

TEST_CASE("constant input is removed by centering") {
    const std::vector<cplx> c(12, cplx{1.5, -2.0});
    CHECK(max_abs(bispectrum_fft(c)) == 0.0);
    CHECK(max_abs(bispectrum_lag_oracle(c)) == 0.0);
}

TEST_CASE("length limits") {
    CHECK_THROWS_AS(bispectrum_fft(std::vector<cplx>(3)), std::invalid_argument);
    CHECK_THROWS_AS(bispectrum_lag_oracle(std::vector<cplx>(33)), std::invalid_argument);
    CHECK_NOTHROW(bispectrum_lag_oracle(std::vector<cplx>(32)));
}

TEST_CASE("scaling by c multiplies entries by |c|^2 c") {
    const auto x = zero_mean(testing::random_complex(48, 3));
    const cplx c{0.7, -1.3};
    std::vector<cplx> y(x);
    for (auto& v : y) v *= c;
    const auto bx = bispectrum_fft(x);
    const auto by = bispectrum_fft(y);
    BispectrumGrid expected(bx.side());
    for (std::size_t i = 0; i < bx.values().size(); ++i) expected.values()[i] = bx.values()[i] * std::norm(c) * c;
    CHECK(relative_error(by, expected) <= 1e-12);
}

TEST_CASE("averaging suppresses the bispectrum of Gaussian noise") {
    const std::size_t n = 64, m = 200;
    BispectrumGrid mean(n);
    double single = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        auto x = testing::random_complex(n, 500 + r);
        for (auto& v : x) v /= std::sqrt(2.0);  // unit variance
        const auto b = bispectrum_fft(x);
        for (std::size_t i = 0; i < b.values().size(); ++i) mean.values()[i] += b.values()[i] / static_cast<double>(m);
        if (r == 0) {
            for (const auto& v : b.values()) single += std::abs(v);
            single /= static_cast<double>(b.values().size());
        }
    }
    double averaged = 0.0;
    for (const auto& v : mean.values()) averaged += std::abs(v);
    averaged /= static_cast<double>(mean.values().size());
    CHECK(single / averaged >= 5.0);
}

TEST_CASE("quadratic phase coupling peaks at the coupled pair") {
    const std::size_t n = 64;
    const std::size_t k1 = 5, k2 = 11, k3 = k1 + k2;
    const double p1 = 0.4, p2 = 1.9;
    std::vector<cplx> x(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(t) / n;
        x[t] = std::cos(w * k1 + p1) + std::cos(w * k2 + p2) + std::cos(w * k3 + p1 + p2);
    }
    const auto b = bispectrum_fft(x);
    std::size_t best = 0;
    for (std::size_t i = 1; i < b.values().size(); ++i) {
        if (std::abs(b.values()[i]) > std::abs(b.values()[best])) best = i;
    }
    // Images of the coupling under the symmetries of a real signal.
    std::set<std::pair<std::size_t, std::size_t>> images;
    const std::vector<long> freqs{long(k1), long(k2), long(k3), -long(k1), -long(k2), -long(k3)};
    for (long a : freqs) {
        for (long c : freqs) {
            const long s = a + c;
            if (std::find(freqs.begin(), freqs.end(), s) != freqs.end()) {
                images.insert({static_cast<std::size_t>((a + long(n)) % long(n)), static_cast<std::size_t>((c + long(n)) % long(n))});
            }
        }
    }
    CHECK(images.count({best / n, best % n}) == 1);
    CHECK(images.count({k1, k2}) == 1);
}

TEST_CASE("downsample of a 1120 all-ones grid") {
    BispectrumGrid g(1120);
    std::fill(g.values().begin(), g.values().end(), cplx{1.0, 0.0});
    const auto p = downsample_power(g);
    CHECK(p.rows == 224);
    CHECK(p.cols == 224);
    CHECK(std::all_of(p.values.begin(), p.values.end(), [](double v) { return v == 25.0; }));
}

TEST_CASE("downsample places a single entry in its block") {
    BispectrumGrid g(20);
    g(7, 12) = cplx{0.0, 2.0};
    const auto p = downsample_power(g, 5);
    for (std::size_t r = 0; r < p.rows; ++r) {
        for (std::size_t c = 0; c < p.cols; ++c) CHECK(p.at(r, c) == (r == 1 && c == 2 ? 4.0 : 0.0));
    }
}

TEST_CASE("downsample conserves total power") {
    BispectrumGrid g(40);
    std::mt19937 gen(4);
    std::uniform_int_distribution<int> d(-8, 8);
    for (auto& v : g.values()) v = {double(d(gen)), double(d(gen))};
    double in = 0.0;
    for (const auto& v : g.values()) in += std::norm(v);
    for (std::size_t block : {1u, 2u, 4u, 5u, 8u, 40u}) {
        const auto p = downsample_power(g, block);
        double out = 0.0;
        for (double v : p.values) out += v;
        CHECK(out == in);  // integer-valued powers: exact
    }
    const auto random = bispectrum_fft(testing::random_complex(40, 8));
    double rin = 0.0;
    for (const auto& v : random.values()) rin += std::norm(v);
    double rout = 0.0;
    for (double v : downsample_power(random, 5).values) rout += v;
    CHECK(rout == doctest::Approx(rin).epsilon(1e-13));
}

TEST_CASE("downsample names the dimensions when the side is not divisible") {
    BispectrumGrid g(1121);
    try {
        downsample_power(g, 5);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("1121x1121") != std::string::npos);
        CHECK(std::string(e.what()).find("block 5") != std::string::npos);
    }
}

TEST_CASE("quantize_rescale endpoints, midpoint and degenerate input") {
    CHECK(quantize_rescale(PowerGrid{1, 3, {0.0, 100.0, 50.0}}).values == std::vector<std::uint8_t>{0, 255, 128});
    const auto flat = quantize_rescale(PowerGrid{2, 2, {7.0, 7.0, 7.0, 7.0}});
    CHECK(std::all_of(flat.values.begin(), flat.values.end(), [](auto v) { return v == 0; }));
    std::mt19937 gen(2);
    std::uniform_real_distribution<double> d(0.0, 10.0);
    PowerGrid p{8, 8, std::vector<double>(64)};
    for (auto& v : p.values) v = d(gen);
    for (auto scale : {PowerScale::Linear, PowerScale::Log}) {
        const auto q = quantize_rescale(p, scale);
        const auto lo = std::min_element(p.values.begin(), p.values.end()) - p.values.begin();
        const auto hi = std::max_element(p.values.begin(), p.values.end()) - p.values.begin();
        CHECK(q.values[static_cast<std::size_t>(lo)] == 0);
        CHECK(q.values[static_cast<std::size_t>(hi)] == 255);
    }
}

TEST_CASE("quantize_rescale rejects NaN and negative power") {
    CHECK_THROWS_AS(quantize_rescale(PowerGrid{1, 2, {1.0, std::nan("")}}), std::invalid_argument);
    CHECK_THROWS_AS(quantize_rescale(PowerGrid{1, 2, {1.0, -1.0}}), std::invalid_argument);
}

TEST_CASE("log scale spreads small values that linear scale crushes") {
    const PowerGrid p{1, 4, {0.0, 1e-6, 1e-3, 1.0}};
    const auto lin = quantize_rescale(p, PowerScale::Linear);
    const auto lg = quantize_rescale(p, PowerScale::Log);
    CHECK(lin.values[1] == 0);
    CHECK(lg.values[1] > 64);
    CHECK(lg.values[1] < lg.values[2]);
}

TEST_CASE("colormap fixed points") {
    const auto img = apply_colormap(ByteGrid{1, 3, {0, 255, 128}});
    CHECK(img.at(0, 0, 0) == 0);
    CHECK(img.at(0, 0, 1) == 0);
    CHECK(img.at(0, 0, 2) == 128);
    CHECK(img.at(0, 1, 0) == 128);
    CHECK(img.at(0, 1, 1) == 0);
    CHECK(img.at(0, 1, 2) == 0);
    CHECK(img.at(0, 2, 0) == 130);
    CHECK(img.at(0, 2, 1) == 255);
    CHECK(img.at(0, 2, 2) == 126);
}

TEST_CASE("colormap matches the integer jet oracle at every level") {
    ByteGrid all{16, 16, std::vector<std::uint8_t>(256)};
    for (int q = 0; q < 256; ++q) all.values[static_cast<std::size_t>(q)] = static_cast<std::uint8_t>(q);
    const auto img = apply_colormap(all);
    for (int q = 0; q < 256; ++q) {
        for (int c = 0; c < 3; ++c) {
            CHECK(img.pixels[static_cast<std::size_t>(q * 3 + c)] == jet_oracle(q, c));
        }
    }
}

TEST_CASE("featurize shapes and the zero sample") {
    const auto x = testing::random_complex(1120, 77);
    const auto img = featurize(IqSignal(x, 1.0, 4));
    CHECK(img.width == 224);
    CHECK(img.height == 224);
    CHECK(img.pixels.size() == 224u * 224u * 3u);
    CHECK(img.source_emitter == 4);
    CHECK(img == featurize(IqSignal(x, 1.0, 4)));

    const auto zero = featurize(IqSignal(std::vector<cplx>(280), 1.0));
    CHECK(zero.width == 56);
    for (std::size_t i = 0; i < zero.pixels.size(); i += 3) {
        CHECK(zero.pixels[i] == 0);
        CHECK(zero.pixels[i + 1] == 0);
        CHECK(zero.pixels[i + 2] == 128);
    }
    CHECK_THROWS_AS(featurize(IqSignal(std::vector<cplx>(281), 1.0)), std::invalid_argument);
}

TEST_CASE("BSP1 encode/decode round trip and header checks") {
    auto img = featurize(IqSignal(testing::random_complex(280, 5), 1.0));
    const auto bytes = encode_bsp(img);
    CHECK(bytes.size() == 12 + 56 * 56 * 3);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "BSP1");
    CHECK(bytes[4] == 56);
    CHECK(bytes[5] == 0);
    CHECK(decode_bsp(bytes) == img);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_bsp(bad), std::invalid_argument);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(decode_bsp(truncated), std::invalid_argument);

    testing::TempDir dir("bsp");
    write_bsp(dir / "a.bsp", img);
    CHECK(read_bsp(dir / "a.bsp") == img);
    CHECK_THROWS_AS(read_bsp(dir / "missing.bsp"), IoError);
}

TEST_CASE("png export when available") {
    if (!png_export_available()) return;
    testing::TempDir dir("png");
    write_png(dir / "a.png", featurize(IqSignal(testing::random_complex(280, 5), 1.0)));
    CHECK(std::filesystem::file_size(dir / "a.png") > 8);
}
