#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "isd/metrics.hpp"
#include "isd/nn/rng.hpp"
#include "test_util.hpp"

using namespace isd;
using isd::nn::Rng;

namespace {

Volume rand_volume(uint64_t seed, int d, int h, int w, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    Volume v(d, h, w);
    for (auto& x : v.voxels) x = lo + (hi - lo) * rng.uniform();
    return v;
}

// direct (non-separable) windowed SSIM oracle over one slice
double ssim_oracle(const Tensor& a, const Tensor& b, double range) {
    int h = a.dim(0), w = a.dim(1);
    const int k = 11;
    const double sigma = 1.5;
    double win[k][k];
    double sum = 0.0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            double dy = i - k / 2, dx = j - k / 2;
            win[i][j] = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
            sum += win[i][j];
        }
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) win[i][j] /= sum;

    double c1 = 0.01 * range, c2 = 0.03 * range;
    c1 *= c1;
    c2 *= c2;

    double acc = 0.0;
    int n = 0;
    for (int y = 0; y + k <= h; ++y)
        for (int x = 0; x + k <= w; ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    double va = a.at(y + i, x + j), vb = b.at(y + i, x + j);
                    ma += win[i][j] * va;
                    mb += win[i][j] * vb;
                    saa += win[i][j] * va * va;
                    sbb += win[i][j] * vb * vb;
                    sab += win[i][j] * va * vb;
                }
            double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
            acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                   ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
            ++n;
        }
    return acc / n;
}

} // namespace

TEST_CASE("psnr closed forms") {
    Volume a = rand_volume(1, 4, 16, 16);
    CHECK(psnr(a, a, 2.0) == 100.0);

    Volume c0(4, 16, 16), c1(4, 16, 16);
    for (auto& x : c1.voxels) x = 0.5;
    double got = psnr(c0, c1, 1.0);
    CHECK(std::abs(got - 10.0 * std::log10(1.0 / 0.25)) < 1e-9);
    CHECK(std::abs(got - 6.0206) < 1e-3);

    // two-pass scalar MSE oracle on a random pair
    Volume b = rand_volume(2, 4, 16, 16);
    double mse = 0.0;
    for (size_t i = 0; i < a.voxels.size(); ++i) {
        double d = a.voxels[i] - b.voxels[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.voxels.size());
    double want = 10.0 * std::log10(4.0 / mse);
    CHECK(std::abs(psnr(a, b, 2.0) - want) < 1e-9);

    CHECK_THROWS_AS(psnr(a, rand_volume(3, 4, 8, 8), 2.0), DimError);
    CHECK_THROWS_AS(psnr(a, b, 0.0), ConfigError);
}

TEST_CASE("psnr strictly decreases with growing noise amplitude") {
    Volume gt = rand_volume(5, 3, 24, 24);
    Rng rng(17);
    std::vector<double> noise(gt.voxels.size());
    for (auto& x : noise) x = rng.normal();

    double prev = 1e9;
    for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2}) {
        Volume noisy = gt;
        for (size_t i = 0; i < noisy.voxels.size(); ++i) noisy.voxels[i] += amp * noise[i];
        double p = psnr(noisy, gt, 2.0);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim identity, symmetry, bounds") {
    Volume a = rand_volume(11, 3, 32, 32);
    CHECK(ssim(a, a, 2.0) == 1.0);

    Volume b = rand_volume(12, 3, 32, 32);
    double sab = ssim(a, b, 2.0);
    double sba = ssim(b, a, 2.0);
    CHECK(std::abs(sab - sba) < 1e-12);
    CHECK(sab >= -1.0);
    CHECK(sab <= 1.0);
}

TEST_CASE("ssim matches the direct windowed oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 3; ++trial) {
        Tensor a({32, 32}), b({32, 32});
        for (auto& v : a.data) v = 2.0 * rng.uniform() - 1.0;
        for (auto& v : b.data) v = 2.0 * rng.uniform() - 1.0;
        double got = ssim_slice(a, b, 2.0);
        double want = ssim_oracle(a, b, 2.0);
        CHECK(std::abs(got - want) < 1e-9);
    }

    // a vs -a on zero-mean slices stays below 1 and matches the oracle
    Tensor a({32, 32});
    for (auto& v : a.data) v = 2.0 * rng.uniform() - 1.0;
    double mean = 0.0;
    for (double v : a.data) mean += v;
    mean /= static_cast<double>(a.size());
    for (auto& v : a.data) v -= mean;
    Tensor na = a;
    for (auto& v : na.data) v = -v;
    double got = ssim_slice(a, na, 2.0);
    CHECK(got < 1.0);
    CHECK(std::abs(got - ssim_oracle(a, na, 2.0)) < 1e-9);
}

TEST_CASE("metric values ignore slice iteration order") {
    Volume a = rand_volume(31, 6, 16, 16), b = rand_volume(32, 6, 16, 16);
    // permute slices consistently in both volumes; per-slice metrics must
    // aggregate to the same values
    std::vector<int> perm = {3, 0, 5, 1, 4, 2};
    Volume ap(6, 16, 16), bp(6, 16, 16);
    for (int d = 0; d < 6; ++d) {
        ap.set_slice(d, a.slice(perm[static_cast<size_t>(d)]));
        bp.set_slice(d, b.slice(perm[static_cast<size_t>(d)]));
    }
    CHECK(std::abs(ssim(a, b, 2.0) - ssim(ap, bp, 2.0)) < 1e-12);
    CHECK(std::abs(psnr(a, b, 2.0) - psnr(ap, bp, 2.0)) < 1e-12);
}

TEST_CASE("generated-only scoring excludes kept slices") {
    Volume gt = rand_volume(41, 9, 16, 16);
    Volume pred = gt;
    // corrupt only the kept slices; generated-position scores must be perfect
    for (int d = 0; d < 9; d += 4)
        for (int h = 0; h < 16; ++h)
            for (int w = 0; w < 16; ++w) pred.at(d, h, w) += 0.5;
    CHECK(psnr_generated(pred, gt, 2.0, 4) == 100.0);
    CHECK(ssim_generated(pred, gt, 2.0, 4) == 1.0);
    CHECK(psnr(pred, gt, 2.0) < 100.0);
}

TEST_CASE("evaluate aggregates per-volume scores") {
    Volume gt = rand_volume(51, 9, 32, 32);
    MetricsReport single = evaluate(gt, gt, "self", 4);
    CHECK(single.psnr_per_volume.size() == 1);
    CHECK(single.psnr_std() == 0.0);
    CHECK(single.ssim_std() == 0.0);
    CHECK(single.psnr_mean() == 100.0);
    CHECK(single.ssim_mean() == 1.0);

    std::string row = report_csv_row(single);
    CHECK(row == "self,4,100.0000,0.0000,1.000000,0.000000");

    // identity dominates interpolation in both metrics
    Volume vol = make_phantom_volume(99, 17, 32, 32);
    Volume interp = trilinear_interpolate(downsample_volume(vol, 4), 4);
    MetricsReport ident = evaluate(vol, vol, "gt", 4);
    MetricsReport inter = evaluate(interp, vol, "interp", 4);
    CHECK(ident.psnr_mean() > inter.psnr_mean());
    CHECK(ident.ssim_mean() > inter.ssim_mean());

    std::ostringstream os;
    print_report(os, {ident, inter});
    CHECK(os.str().find("generated slice positions only") != std::string::npos);
    CHECK(os.str().find("method,R,psnr_mean") != std::string::npos);
}
