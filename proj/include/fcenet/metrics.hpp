#pragma once

#include "fcenet/tensor.hpp"

namespace fcenet {

inline constexpr double kPsnrCap = 100.0;

// Peak signal-to-noise ratio in dB, capped at kPsnrCap when the images match.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double peak = 1.0;

    void validate() const;
};

// Gaussian-weighted SSIM averaged over every valid window position and channel.
// Inputs may be signed; no range shifting is applied.
double ssim(const Tensor& a, const Tensor& b, const SsimParams& params = {});

}  // namespace fcenet
