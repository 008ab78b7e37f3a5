#include "fcenet/freq_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fcenet/file_util.hpp"
#include "fcenet/spectral.hpp"

namespace fcenet {

void CorrelationCurve::validate() const {
    if (cutoffs.size() != similarities.size()) throw std::invalid_argument("curve: length mismatch");
    for (std::size_t i = 1; i < cutoffs.size(); ++i) {
        if (!(cutoffs[i] > cutoffs[i - 1])) throw std::invalid_argument("curve: cutoffs must be strictly increasing");
    }
}

double band_similarity(const Tensor& target, const Tensor& gt, double cutoff, const SsimParams& params) {
    require_same_shape(target, gt, "band_similarity");
    const FilterTensor hp = ideal_high_pass(target.height(), target.width(), cutoff);
    const Tensor a = idft2d(apply_filter(dft2d(target), hp));
    const Tensor b = idft2d(apply_filter(dft2d(gt), hp));
    return ssim(a, b, params);
}

CorrelationCurve correlation_curve(const Tensor& target, const Tensor& gt, std::span<const double> cutoffs,
                                   std::string label, const SsimParams& params) {
    CorrelationCurve curve;
    curve.label = std::move(label);
    curve.cutoffs.assign(cutoffs.begin(), cutoffs.end());
    for (std::size_t i = 1; i < cutoffs.size(); ++i) {
        if (!(cutoffs[i] > cutoffs[i - 1])) throw std::invalid_argument("curve: cutoffs must be strictly increasing");
    }
    require_same_shape(target, gt, "correlation_curve");
    // Transform once; each cutoff only re-masks.
    const Spectrum ft = dft2d(target);
    const Spectrum fg = dft2d(gt);
    for (double c : cutoffs) {
        const FilterTensor hp = ideal_high_pass(target.height(), target.width(), c);
        curve.similarities.push_back(ssim(idft2d(apply_filter(ft, hp)), idft2d(apply_filter(fg, hp)), params));
    }
    return curve;
}

std::vector<double> standard_cutoff_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 12; ++i) grid.push_back(0.05 * i);
    return grid;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length series");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

CorrelationCurve mean_curve(std::span<const CorrelationCurve> curves, std::string label) {
    if (curves.empty()) throw std::invalid_argument("mean_curve: no curves");
    CorrelationCurve out;
    out.label = std::move(label);
    out.cutoffs = curves.front().cutoffs;
    out.similarities.assign(out.cutoffs.size(), 0.0);
    for (const auto& c : curves) {
        if (c.cutoffs != out.cutoffs) throw std::invalid_argument("mean_curve: cutoff grids differ");
        for (std::size_t i = 0; i < c.similarities.size(); ++i) out.similarities[i] += c.similarities[i];
    }
    for (double& s : out.similarities) s /= static_cast<double>(curves.size());
    return out;
}

std::string format_curves_csv(std::span<const CorrelationCurve> curves) {
    if (curves.empty()) throw std::invalid_argument("export_curve_csv: no curves");
    for (const auto& c : curves) {
        c.validate();
        if (c.cutoffs != curves.front().cutoffs) throw std::invalid_argument("export_curve_csv: cutoff grids differ");
    }
    std::string out = "cutoff";
    for (const auto& c : curves) out += "," + c.label;
    out += "\n";
    char buf[64];
    for (std::size_t i = 0; i < curves.front().cutoffs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6f", curves.front().cutoffs[i]);
        out += buf;
        for (const auto& c : curves) {
            std::snprintf(buf, sizeof buf, ",%.6f", c.similarities[i]);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

void export_curve_csv(std::span<const CorrelationCurve> curves, const std::filesystem::path& path) {
    write_file_atomic(path, format_curves_csv(curves));
}

std::vector<CorrelationCurve> parse_curves_csv(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw IoError("curve csv is empty: " + path.string());
    std::vector<CorrelationCurve> curves;
    {
        std::istringstream header(line);
        std::string field;
        std::getline(header, field, ',');
        if (field != "cutoff") throw IoError("curve csv header must start with 'cutoff'");
        while (std::getline(header, field, ',')) curves.push_back({{}, {}, field});
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::getline(row, field, ',');
        const double cutoff = std::stod(field);
        for (auto& c : curves) {
            if (!std::getline(row, field, ',')) throw IoError("curve csv row has too few columns");
            c.cutoffs.push_back(cutoff);
            c.similarities.push_back(std::stod(field));
        }
    }
    return curves;
}

}  // namespace fcenet
