#include "sparsect/fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace sparsect {

namespace {
std::mutex g_plan_mutex;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_power_of_two(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

RealFft::RealFft(int n) : n_(n) {
    if (!is_power_of_two(n)) throw std::invalid_argument("FFT length must be a power of two, got " + std::to_string(n));
    std::vector<double> re(n);
    std::vector<std::complex<double>> cp(n / 2 + 1);
    // FFTW_UNALIGNED lets the cached plan execute on arbitrary caller
    // buffers via the new-array interface, which is thread-safe.
    plan_fwd_ = fftw_plan_dft_r2c_1d(n, re.data(), reinterpret_cast<fftw_complex*>(cp.data()),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_PRESERVE_INPUT);
    plan_inv_ = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(cp.data()), re.data(),
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan_fwd_ || !plan_inv_) throw std::runtime_error("FFTW plan creation failed");
}

const RealFft& RealFft::of_size(int n) {
    static std::map<int, std::unique_ptr<RealFft>> cache;
    std::scoped_lock lock(g_plan_mutex);
    auto& slot = cache[n];
    if (!slot) slot.reset(new RealFft(n));
    return *slot;
}

void RealFft::forward(const double* in, std::complex<double>* out) const {
    fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_fwd_), const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
}

void RealFft::inverse(const std::complex<double>* in, double* out) const {
    // c2r destroys its input, so copy the spectrum first
    std::vector<std::complex<double>> tmp(in, in + n_bins());
    fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_inv_),
                         reinterpret_cast<fftw_complex*>(tmp.data()), out);
    const double inv_n = 1.0 / n_;
    for (int i = 0; i < n_; ++i) out[i] *= inv_n;
}

}  // namespace sparsect
