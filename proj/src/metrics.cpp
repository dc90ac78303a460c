#include "isd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>

#include "isd/errors.hpp"

namespace isd {

namespace {

void check_compatible(const Volume& a, const Volume& b, const char* where) {
    if (a.depth != b.depth || a.height != b.height || a.width != b.width)
        throw DimError(std::string(where) + ": volume shapes differ");
}

// pooled MSE over the selected slices; ratio = 0 selects all
double mse_slices(const Volume& a, const Volume& b, int ratio) {
    long long hw = static_cast<long long>(a.height) * a.width;
    double s = 0.0;
    long long n = 0;
    for (int d = 0; d < a.depth; ++d) {
        if (ratio > 1 && d % ratio == 0) continue;
        const double* pa = a.voxels.data() + static_cast<size_t>(d) * hw;
        const double* pb = b.voxels.data() + static_cast<size_t>(d) * hw;
        for (long long i = 0; i < hw; ++i) {
            double diff = pa[i] - pb[i];
            s += diff * diff;
        }
        n += hw;
    }
    if (n == 0) throw DataError("metrics: no slices selected");
    return s / static_cast<double>(n);
}

double psnr_from_mse(double mse, double data_range) {
    if (data_range <= 0.0) throw ConfigError("psnr: data_range must be > 0");
    if (mse == 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(data_range * data_range / mse));
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<size_t>(size));
    int r = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        double x = i - r;
        w[static_cast<size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
        sum += w[static_cast<size_t>(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// separable weighted blur, valid region only; input {H,W}, output {Hv,Wv}
void blur_valid(const std::vector<double>& img, int h, int w, const std::vector<double>& win,
                std::vector<double>& tmp, std::vector<double>& out) {
    int k = static_cast<int>(win.size());
    int wv = w - k + 1, hv = h - k + 1;
    tmp.assign(static_cast<size_t>(h) * wv, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wv; ++x) {
            double s = 0.0;
            for (int i = 0; i < k; ++i) s += win[static_cast<size_t>(i)] * img[static_cast<size_t>(y) * w + x + i];
            tmp[static_cast<size_t>(y) * wv + x] = s;
        }
    out.assign(static_cast<size_t>(hv) * wv, 0.0);
    for (int y = 0; y < hv; ++y)
        for (int x = 0; x < wv; ++x) {
            double s = 0.0;
            for (int i = 0; i < k; ++i) s += win[static_cast<size_t>(i)] * tmp[static_cast<size_t>(y + i) * wv + x];
            out[static_cast<size_t>(y) * wv + x] = s;
        }
}

double mean_std(const std::vector<double>& xs, double* out_std) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= static_cast<double>(xs.size());
    if (out_std) *out_std = std::sqrt(v);
    return m;
}

double ssim_volume(const Volume& a, const Volume& b, double data_range, int ratio) {
    check_compatible(a, b, "ssim");
    double acc = 0.0;
    int n = 0;
    for (int d = 0; d < a.depth; ++d) {
        if (ratio > 1 && d % ratio == 0) continue;
        acc += ssim_slice(a.slice(d), b.slice(d), data_range);
        ++n;
    }
    if (n == 0) throw DataError("ssim: no slices selected");
    return acc / n;
}

} // namespace

double psnr(const Volume& a, const Volume& b, double data_range) {
    check_compatible(a, b, "psnr");
    return psnr_from_mse(mse_slices(a, b, 0), data_range);
}

double psnr_generated(const Volume& a, const Volume& b, double data_range, int ratio) {
    check_compatible(a, b, "psnr");
    return psnr_from_mse(mse_slices(a, b, ratio), data_range);
}

double ssim_slice(const Tensor& a, const Tensor& b, double data_range) {
    nn::check_same_shape(a, b, "ssim_slice");
    if (a.rank() != 2) throw DimError("ssim_slice: expected {H,W}");
    int h = a.dim(0), w = a.dim(1);

    int win_size = 11;
    int smallest = std::min(h, w);
    if (smallest < win_size) win_size = smallest % 2 ? smallest : smallest - 1;
    if (win_size < 3) throw DimError("ssim_slice: slice too small for any window");
    auto win = gaussian_window(win_size, 1.5);

    double c1 = 0.01 * data_range, c2 = 0.03 * data_range;
    c1 *= c1;
    c2 *= c2;

    std::vector<double> aa(a.data), bb(b.data), ab(a.data.size());
    for (size_t i = 0; i < ab.size(); ++i) {
        ab[i] = a.data[i] * b.data[i];
        aa[i] = a.data[i] * a.data[i];
        bb[i] = b.data[i] * b.data[i];
    }

    std::vector<double> tmp, mu_a, mu_b, m_aa, m_bb, m_ab;
    blur_valid(a.data, h, w, win, tmp, mu_a);
    blur_valid(b.data, h, w, win, tmp, mu_b);
    blur_valid(aa, h, w, win, tmp, m_aa);
    blur_valid(bb, h, w, win, tmp, m_bb);
    blur_valid(ab, h, w, win, tmp, m_ab);

    double acc = 0.0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
        double ma = mu_a[i], mb = mu_b[i];
        double va = m_aa[i] - ma * ma;
        double vb = m_bb[i] - mb * mb;
        double cov = m_ab[i] - ma * mb;
        double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        acc += num / den;
    }
    return acc / static_cast<double>(mu_a.size());
}

double ssim(const Volume& a, const Volume& b, double data_range) {
    return ssim_volume(a, b, data_range, 0);
}

double ssim_generated(const Volume& a, const Volume& b, double data_range, int ratio) {
    return ssim_volume(a, b, data_range, ratio);
}

double default_data_range(const Volume& reference) {
    if (reference.range == Volume::Range::Normalized) return 2.0;
    auto [mn, mx] = std::minmax_element(reference.voxels.begin(), reference.voxels.end());
    double r = *mx - *mn;
    return r > 0.0 ? r : 1.0;
}

double MetricsReport::psnr_mean() const {
    return mean_std(psnr_per_volume, nullptr);
}
double MetricsReport::psnr_std() const {
    double s = 0.0;
    mean_std(psnr_per_volume, &s);
    return s;
}
double MetricsReport::ssim_mean() const {
    return mean_std(ssim_per_volume, nullptr);
}
double MetricsReport::ssim_std() const {
    double s = 0.0;
    mean_std(ssim_per_volume, &s);
    return s;
}

MetricsReport evaluate(const Volume& sr, const Volume& gt, const std::string& label, int ratio) {
    return evaluate(std::vector<Volume>{sr}, std::vector<Volume>{gt}, label, ratio);
}

MetricsReport evaluate(const std::vector<Volume>& sr, const std::vector<Volume>& gt,
                       const std::string& label, int ratio) {
    if (sr.size() != gt.size() || sr.empty())
        throw DataError("evaluate: prediction/reference lists must match and be nonempty");
    MetricsReport r;
    r.label = label;
    r.ratio = ratio;
    for (size_t i = 0; i < sr.size(); ++i) {
        double range = default_data_range(gt[i]);
        r.psnr_per_volume.push_back(psnr_generated(sr[i], gt[i], range, ratio));
        r.ssim_per_volume.push_back(ssim_generated(sr[i], gt[i], range, ratio));
    }
    return r;
}

std::string report_csv_row(const MetricsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%d,%.4f,%.4f,%.6f,%.6f", r.label.c_str(), r.ratio,
                  r.psnr_mean(), r.psnr_std(), r.ssim_mean(), r.ssim_std());
    return buf;
}

void print_report(std::ostream& os, const std::vector<MetricsReport>& rows) {
    os << "# scores cover generated slice positions only (kept slices are\n"
          "# pass-through by construction and are excluded)\n";
    os << "method,R,psnr_mean,psnr_std,ssim_mean,ssim_std\n";
    for (const auto& r : rows) os << report_csv_row(r) << "\n";
    os << "\n";
    os << std::left << std::setw(16) << "method" << std::right << std::setw(4) << "R"
       << std::setw(18) << "PSNR (dB)" << std::setw(20) << "SSIM" << "\n";
    for (const auto& r : rows) {
        char psnr_s[64], ssim_s[64];
        std::snprintf(psnr_s, sizeof(psnr_s), "%.2f +/- %.2f", r.psnr_mean(), r.psnr_std());
        std::snprintf(ssim_s, sizeof(ssim_s), "%.4f +/- %.4f", r.ssim_mean(), r.ssim_std());
        os << std::left << std::setw(16) << r.label << std::right << std::setw(4) << r.ratio
           << std::setw(18) << psnr_s << std::setw(20) << ssim_s << "\n";
    }
}

} // namespace isd
