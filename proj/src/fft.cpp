#include "sei/fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace sei::fft {
namespace {

// FFTW's planner is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct Plan {
    std::size_t n = 0;
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
    fftw_plan plan = nullptr;

    Plan(std::size_t size, int sign) : n(size) {
        std::lock_guard lock(planner_mutex());
        in = fftw_alloc_complex(n);
        out = fftw_alloc_complex(n);
        if (in == nullptr || out == nullptr) {
            fftw_free(in);
            fftw_free(out);
            throw std::bad_alloc();
        }
        plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign, FFTW_ESTIMATE);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    ~Plan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
        fftw_free(in);
        fftw_free(out);
    }
};

Plan& cached_plan(std::size_t n, int sign) {
    thread_local std::map<std::pair<std::size_t, int>, std::unique_ptr<Plan>> cache;
    auto& slot = cache[{n, sign}];
    if (!slot) slot = std::make_unique<Plan>(n, sign);
    return *slot;
}

std::vector<cplx> run(std::span<const cplx> x, int sign) {
    if (x.empty()) throw std::invalid_argument("fft: empty input");
    Plan& p = cached_plan(x.size(), sign);
    for (std::size_t i = 0; i < p.n; ++i) {
        p.in[i][0] = x[i].real();
        p.in[i][1] = x[i].imag();
    }
    fftw_execute(p.plan);
    std::vector<cplx> y(p.n);
    for (std::size_t i = 0; i < p.n; ++i) y[i] = {p.out[i][0], p.out[i][1]};
    return y;
}

}  // namespace

std::vector<cplx> forward(std::span<const cplx> x) { return run(x, FFTW_FORWARD); }

std::vector<cplx> inverse(std::span<const cplx> x) {
    auto y = run(x, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(y.size());
    for (auto& v : y) v *= scale;
    return y;
}

}  // namespace sei::fft
