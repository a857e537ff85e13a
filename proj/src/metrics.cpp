#include "combi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace combi {

namespace {

constexpr int kWin = 11;
constexpr int kHalf = kWin / 2;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_shapes(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("metrics: image shape mismatch");
    if (a.width == 0 || a.height == 0) throw std::invalid_argument("metrics: empty image");
}

}  // namespace

double psnr(const Image& img, const Image& ref) {
    check_shapes(img, ref);
    double mse = 0;
    for (std::size_t k = 0; k < img.data.size(); ++k) {
        double d = img.data[k] - ref.data[k];
        mse += d * d;
    }
    mse /= static_cast<double>(img.data.size());
    if (mse < 1e-10) return 99.0;
    return -10.0 * std::log10(mse);
}

double ssim(const Image& img, const Image& ref) {
    check_shapes(img, ref);
    double kernel[kWin];
    for (int k = 0; k < kWin; ++k) {
        double x = k - kHalf;
        kernel[k] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    }
    double total = 0;
    for (int c = 0; c < 3; ++c) {
        double channel = 0;
        for (int j = 0; j < img.height; ++j) {
            for (int i = 0; i < img.width; ++i) {
                double wsum = 0, mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int dj = -kHalf; dj <= kHalf; ++dj) {
                    int jj = j + dj;
                    if (jj < 0 || jj >= img.height) continue;
                    for (int di = -kHalf; di <= kHalf; ++di) {
                        int ii = i + di;
                        if (ii < 0 || ii >= img.width) continue;
                        double w = kernel[dj + kHalf] * kernel[di + kHalf];
                        double x = img.at(ii, jj, c), y = ref.at(ii, jj, c);
                        wsum += w;
                        mx += w * x;
                        my += w * y;
                        mxx += w * x * x;
                        myy += w * y * y;
                        mxy += w * x * y;
                    }
                }
                mx /= wsum;
                my /= wsum;
                double vx = mxx / wsum - mx * mx;
                double vy = myy / wsum - my * my;
                double cov = mxy / wsum - mx * my;
                channel += ((2 * mx * my + kC1) * (2 * cov + kC2)) /
                           ((mx * mx + my * my + kC1) * (vx + vy + kC2));
            }
        }
        total += channel / (static_cast<double>(img.width) * img.height);
    }
    return total / 3.0;
}

double average_metric(double psnr_db, double ssim_value) {
    double mse = std::pow(10.0, -psnr_db / 10.0);
    double structural = std::max(std::sqrt(std::max(1.0 - ssim_value, 0.0)), 1e-10);
    return std::sqrt(mse * structural);
}

}  // namespace combi
