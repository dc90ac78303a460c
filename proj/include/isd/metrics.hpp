#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "isd/data.hpp"

namespace isd {

// Peak signal-to-noise ratio in dB over every voxel of the given volumes,
// capped at 100 dB (the documented value for zero error).
double psnr(const Volume& a, const Volume& b, double data_range);

// Mean single-scale SSIM over all 2D slices: 11x11 Gaussian window
// (sigma 1.5), C1=(0.01 r)^2, C2=(0.03 r)^2, valid-window coverage. The
// window shrinks to the largest odd size that fits for tiny slices.
double ssim(const Volume& a, const Volume& b, double data_range);
double ssim_slice(const Tensor& a, const Tensor& b, double data_range);

// Variants restricted to generated slice positions (d % ratio != 0).
double psnr_generated(const Volume& a, const Volume& b, double data_range, int ratio);
double ssim_generated(const Volume& a, const Volume& b, double data_range, int ratio);

// data_range convention: 2 for normalized volumes, max-min of the reference
// otherwise.
double default_data_range(const Volume& reference);

struct MetricsReport {
    std::string label;
    int ratio = 0;
    std::vector<double> psnr_per_volume;
    std::vector<double> ssim_per_volume;

    double psnr_mean() const;
    double psnr_std() const;
    double ssim_mean() const;
    double ssim_std() const;
};

// Scores generated slice positions only; kept slices pass through unchanged
// and would inflate both metrics.
MetricsReport evaluate(const Volume& sr, const Volume& gt, const std::string& label, int ratio);
MetricsReport evaluate(const std::vector<Volume>& sr, const std::vector<Volume>& gt,
                       const std::string& label, int ratio);

std::string report_csv_row(const MetricsReport& r);
void print_report(std::ostream& os, const std::vector<MetricsReport>& rows);

} // namespace isd
