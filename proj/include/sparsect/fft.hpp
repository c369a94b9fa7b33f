#pragma once

#include <complex>

namespace sparsect {

/// Real FFT of a fixed power-of-two length with cached FFTW plans.
/// forward: n reals -> n/2+1 complex bins (unnormalized).
/// inverse: n/2+1 bins -> n reals, scaled by 1/n so inverse(forward(x)) == x.
/// Execution is thread-safe; plan creation is serialized internally.
class RealFft {
public:
    static const RealFft& of_size(int n);

    void forward(const double* in, std::complex<double>* out) const;
    void inverse(const std::complex<double>* in, double* out) const;

    int size() const { return n_; }
    int n_bins() const { return n_ / 2 + 1; }

private:
    explicit RealFft(int n);
    int n_;
    void* plan_fwd_;
    void* plan_inv_;
};

bool is_power_of_two(int n);
int next_power_of_two(int n);

}  // namespace sparsect
