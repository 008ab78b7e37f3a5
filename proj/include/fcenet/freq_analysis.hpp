#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcenet/metrics.hpp"
#include "fcenet/tensor.hpp"

namespace fcenet {

struct CorrelationCurve {
    std::vector<double> cutoffs;
    std::vector<double> similarities;
    std::string label;

    void validate() const;
};

// SSIM between the high-passed target and the high-passed reference.
double band_similarity(const Tensor& target, const Tensor& gt, double cutoff, const SsimParams& params = {});

CorrelationCurve correlation_curve(const Tensor& target, const Tensor& gt, std::span<const double> cutoffs,
                                   std::string label = {}, const SsimParams& params = {});

// 0.05, 0.10, ..., 0.60.
std::vector<double> standard_cutoff_grid();

// Rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

// Pointwise mean of curves sharing one cutoff grid.
CorrelationCurve mean_curve(std::span<const CorrelationCurve> curves, std::string label);

std::string format_curves_csv(std::span<const CorrelationCurve> curves);
// Atomic write: the target is replaced only once the whole file is on disk.
void export_curve_csv(std::span<const CorrelationCurve> curves, const std::filesystem::path& path);
std::vector<CorrelationCurve> parse_curves_csv(const std::filesystem::path& path);

}  // namespace fcenet
