#pragma once

#include "nlos/tensor/tensor.hpp"

namespace nlos::training {

/// Value reported by psnr() for identical images.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(range^2 / mse), capped at kPsnrCap.
double psnr(const Tensor& a, const Tensor& b, double data_range = 1.0);

/// Mean SSIM over all fully contained 11x11 Gaussian (sigma 1.5) windows of
/// two [H x W] images. Images smaller than 11 pixels use the largest odd
/// window that fits.
double ssim(const Tensor& a, const Tensor& b, double data_range = 1.0);

double rmse(const Tensor& a, const Tensor& b);
/// Mean absolute difference.
double mad(const Tensor& a, const Tensor& b);

/// Elementwise clamp into [lo, hi].
Tensor clamp(const Tensor& x, double lo, double hi);

}  // namespace nlos::training
