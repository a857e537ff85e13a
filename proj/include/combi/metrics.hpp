#pragma once

#include "combi/image.hpp"

namespace combi {

// -10*log10(MSE) over all pixels and channels, capped at 99 dB when
// MSE < 1e-10.
double psnr(const Image& img, const Image& ref);

// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
// C1=0.01^2, C2=0.03^2, averaged over the map and the three channels.
// Windows are truncated and renormalized at image borders.
double ssim(const Image& img, const Image& ref);

// Geometric mean of 10^(-PSNR/10) and max(sqrt(1-SSIM), 1e-10). Lower is
// better; reports carry a note that the perceptual term of the usual
// three-way mean is not included.
double average_metric(double psnr_db, double ssim_value);

inline constexpr char kAverageMetricNote[] =
    "average metric = geometric mean of MSE and sqrt(1-SSIM); no perceptual term";

}  // namespace combi
