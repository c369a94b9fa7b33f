#include "sparsect/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sparsect {

namespace {
void check_same_shape(const Image& a, const Image& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("image shapes differ: " + std::to_string(a.rows) + "x" +
                                    std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                                    "x" + std::to_string(b.cols));
}
constexpr int kSsimWindow = 7;
}  // namespace

double psnr(const Image& x, const Image& ref, double data_range) {
    check_same_shape(x, ref);
    if (!(data_range > 0.0)) throw std::invalid_argument("data_range must be > 0");
    double mse = 0.0;
    for (size_t i = 0; i < x.data.size(); ++i) {
        double d = x.data[i] - ref.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const Image& x, const Image& ref, double data_range) {
    check_same_shape(x, ref);
    if (x.rows < kSsimWindow || x.cols < kSsimWindow)
        throw std::invalid_argument("image smaller than the " + std::to_string(kSsimWindow) +
                                    "x" + std::to_string(kSsimWindow) + " SSIM window");
    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);
    const int n = kSsimWindow * kSsimWindow;
    double total = 0.0;
    long count = 0;
    for (int r = 0; r + kSsimWindow <= x.rows; ++r) {
        for (int c = 0; c + kSsimWindow <= x.cols; ++c) {
            double sx = 0, sy = 0;
            for (int i = 0; i < kSsimWindow; ++i)
                for (int j = 0; j < kSsimWindow; ++j) {
                    sx += x.at(r + i, c + j);
                    sy += ref.at(r + i, c + j);
                }
            double mx = sx / n, my = sy / n;
            double vx = 0, vy = 0, cov = 0;
            for (int i = 0; i < kSsimWindow; ++i)
                for (int j = 0; j < kSsimWindow; ++j) {
                    double dx = x.at(r + i, c + j) - mx;
                    double dy = ref.at(r + i, c + j) - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cov += dx * dy;
                }
            vx /= n - 1;
            vy /= n - 1;
            cov /= n - 1;
            double s = ((2 * mx * my + c1) * (2 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
            total += s;
            ++count;
        }
    }
    return total / count;
}

Image hu_window(const Image& x, double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("window hi must exceed lo");
    Image out(x.rows, x.cols, x.pixel_spacing, ValueUnit::display);
    const double inv = 1.0 / (hi - lo);
    for (size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = std::clamp((x.data[i] - lo) * inv, 0.0, 1.0);
    return out;
}

}  // namespace sparsect
