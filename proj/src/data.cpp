#include "isd/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "isd/errors.hpp"
#include "isd/nn/rng.hpp"

namespace isd {

namespace {

double smoothstep01(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void put_f32_le(std::ostream& os, float f) {
    uint32_t u = std::bit_cast<uint32_t>(f);
    char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                 static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
    os.write(b, 4);
}

float get_f32_le(const unsigned char* b) {
    uint32_t u = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                 (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    return std::bit_cast<float>(u);
}

} // namespace

Tensor Volume::slice(int d) const {
    if (d < 0 || d >= depth) throw DimError("volume: slice index out of range");
    Tensor t({height, width});
    std::memcpy(t.ptr(), voxels.data() + static_cast<size_t>(d) * height * width,
                sizeof(double) * static_cast<size_t>(height) * width);
    return t;
}

void Volume::set_slice(int d, const Tensor& t) {
    if (d < 0 || d >= depth) throw DimError("volume: slice index out of range");
    long long hw = static_cast<long long>(height) * width;
    if (t.size() != hw) throw DimError("volume: slice size mismatch");
    std::memcpy(voxels.data() + static_cast<size_t>(d) * hw, t.ptr(),
                sizeof(double) * static_cast<size_t>(hw));
}

Volume make_phantom_volume(uint64_t seed, int depth, int height, int width) {
    if (depth < 8 || height < 8 || width < 8)
        throw ConfigError("phantom: all dimensions must be >= 8");

    nn::Rng rng(nn::splitmix64(seed));
    Volume v(depth, height, width);
    v.spacing = {0.7, 0.7, 0.7};

    int shells = 3 + rng.uniform_int(0, 5);
    std::vector<std::array<double, 3>> centers(static_cast<size_t>(shells));
    std::vector<std::array<double, 3>> axes(static_cast<size_t>(shells));
    std::vector<double> intensity(static_cast<size_t>(shells));
    std::vector<double> edge_vox(static_cast<size_t>(shells));

    for (int a = 0; a < 3; ++a) {
        centers[0][static_cast<size_t>(a)] = 0.5 + 0.2 * (rng.uniform() - 0.5);
        axes[0][static_cast<size_t>(a)] = 0.28 + 0.12 * rng.uniform();
    }
    double prev_i = 0.08; // background
    for (int j = 0; j < shells; ++j) {
        if (j > 0) {
            double f = 0.62 + 0.20 * rng.uniform();
            for (int a = 0; a < 3; ++a) {
                size_t ai = static_cast<size_t>(a);
                axes[static_cast<size_t>(j)][ai] = axes[static_cast<size_t>(j - 1)][ai] * f;
                double slack =
                    axes[static_cast<size_t>(j - 1)][ai] - axes[static_cast<size_t>(j)][ai];
                centers[static_cast<size_t>(j)][ai] =
                    centers[static_cast<size_t>(j - 1)][ai] +
                    0.8 * slack * (rng.uniform() - 0.5);
            }
        }
        double cand = 0.0;
        for (int tries = 0; tries < 32; ++tries) {
            cand = 0.2 + 0.75 * rng.uniform();
            if (std::abs(cand - prev_i) >= 0.15) break;
        }
        intensity[static_cast<size_t>(j)] = cand;
        prev_i = cand;
        edge_vox[static_cast<size_t>(j)] = 1.0 + rng.uniform();
    }

    // smooth low-amplitude field, slowly varying through-plane
    constexpr int kWaves = 5;
    double amp[kWaves], phase[kWaves];
    double freq[kWaves][3];
    for (int m = 0; m < kWaves; ++m) {
        amp[m] = 0.03 * rng.uniform() / (1.0 + m);
        freq[m][0] = 1.5 * rng.uniform();
        freq[m][1] = 3.0 * rng.uniform();
        freq[m][2] = 3.0 * rng.uniform();
        phase[m] = 2.0 * M_PI * rng.uniform();
    }

    std::array<double, 3> extent = {static_cast<double>(depth), static_cast<double>(height),
                                    static_cast<double>(width)};
    for (int d = 0; d < depth; ++d) {
        double pd = (d + 0.5) / depth;
        for (int h = 0; h < height; ++h) {
            double ph = (h + 0.5) / height;
            for (int w = 0; w < width; ++w) {
                double pw = (w + 0.5) / width;
                double val = 0.08;
                for (int j = 0; j < shells; ++j) {
                    size_t js = static_cast<size_t>(j);
                    double dd = (pd - centers[js][0]) / axes[js][0];
                    double dh = (ph - centers[js][1]) / axes[js][1];
                    double dw = (pw - centers[js][2]) / axes[js][2];
                    double rho = std::sqrt(dd * dd + dh * dh + dw * dw);
                    double rad_vox = (axes[js][0] * extent[0] + axes[js][1] * extent[1] +
                                      axes[js][2] * extent[2]) /
                                     3.0;
                    double dist_vox = (1.0 - rho) * rad_vox;
                    double wgt = smoothstep01(0.5 + dist_vox / (2.0 * edge_vox[js]));
                    val += (intensity[js] - val) * wgt;
                }
                for (int m = 0; m < kWaves; ++m)
                    val += amp[m] * std::cos(2.0 * M_PI * (freq[m][0] * pd + freq[m][1] * ph +
                                                           freq[m][2] * pw) +
                                             phase[m]);
                v.at(d, h, w) = std::clamp(val, 0.0, 1.0);
            }
        }
    }
    return v;
}

Volume normalize_volume(const Volume& v) {
    auto [mn_it, mx_it] = std::minmax_element(v.voxels.begin(), v.voxels.end());
    double mn = *mn_it, mx = *mx_it;
    Volume out = v;
    out.range = Volume::Range::Normalized;
    out.orig_min = mn;
    out.orig_max = mx;
    if (mx == mn) {
        std::fill(out.voxels.begin(), out.voxels.end(), 0.0);
        return out;
    }
    double s = 2.0 / (mx - mn);
    for (auto& x : out.voxels) x = (x - mn) * s - 1.0;
    return out;
}

Volume denormalize_volume(const Volume& v) {
    if (v.range != Volume::Range::Normalized)
        throw ConfigError("denormalize: volume is not normalized");
    Volume out = v;
    out.range = Volume::Range::Raw;
    double half = 0.5 * (v.orig_max - v.orig_min);
    for (auto& x : out.voxels) x = (x + 1.0) * half + v.orig_min;
    out.orig_min = out.orig_max = 0.0;
    return out;
}

Volume downsample_volume(const Volume& hr, int ratio) {
    if (ratio < 2) throw ConfigError("downsample: ratio must be >= 2");
    int d_lr = (hr.depth - 1) / ratio + 1;
    Volume lr(d_lr, hr.height, hr.width);
    lr.spacing = hr.spacing;
    lr.spacing[0] *= ratio;
    lr.range = hr.range;
    lr.orig_min = hr.orig_min;
    lr.orig_max = hr.orig_max;
    long long hw = static_cast<long long>(hr.height) * hr.width;
    for (int m = 0; m < d_lr; ++m)
        std::memcpy(lr.voxels.data() + static_cast<size_t>(m) * hw,
                    hr.voxels.data() + static_cast<size_t>(m) * ratio * hw,
                    sizeof(double) * static_cast<size_t>(hw));
    return lr;
}

Volume trilinear_interpolate(const Volume& lr, int ratio) {
    if (ratio < 2) throw ConfigError("interpolate: ratio must be >= 2");
    if (lr.depth < 2) throw DataError("interpolate: need at least 2 slices");
    int d_hr = (lr.depth - 1) * ratio + 1;
    Volume hr(d_hr, lr.height, lr.width);
    hr.spacing = lr.spacing;
    hr.spacing[0] /= ratio;
    hr.range = lr.range;
    hr.orig_min = lr.orig_min;
    hr.orig_max = lr.orig_max;
    long long hw = static_cast<long long>(lr.height) * lr.width;
    for (int m = 0; m < lr.depth; ++m)
        std::memcpy(hr.voxels.data() + static_cast<size_t>(m) * ratio * hw,
                    lr.voxels.data() + static_cast<size_t>(m) * hw,
                    sizeof(double) * static_cast<size_t>(hw));
    for (int m = 0; m + 1 < lr.depth; ++m) {
        const double* lo = lr.voxels.data() + static_cast<size_t>(m) * hw;
        const double* hi = lr.voxels.data() + static_cast<size_t>(m + 1) * hw;
        for (int j = 1; j < ratio; ++j) {
            double k = static_cast<double>(j) / ratio;
            double* dst = hr.voxels.data() + (static_cast<size_t>(m) * ratio + j) * hw;
            for (long long i = 0; i < hw; ++i) dst[i] = (1.0 - k) * lo[i] + k * hi[i];
        }
    }
    return hr;
}

Volume crop_depth(const Volume& v, int new_depth) {
    if (new_depth < 1 || new_depth > v.depth) throw DimError("crop_depth: bad depth");
    Volume out = v;
    out.depth = new_depth;
    out.voxels.resize(static_cast<size_t>(new_depth) * v.height * v.width);
    return out;
}

Volume pad_hw_to_multiple(const Volume& v, int multiple) {
    if (multiple < 1) throw ConfigError("pad: multiple must be >= 1");
    auto round_up = [multiple](int x) { return ((x + multiple - 1) / multiple) * multiple; };
    int nh = round_up(v.height), nw = round_up(v.width);
    if (nh == v.height && nw == v.width) return v;
    Volume out(v.depth, nh, nw);
    out.spacing = v.spacing;
    out.range = v.range;
    out.orig_min = v.orig_min;
    out.orig_max = v.orig_max;
    for (int d = 0; d < v.depth; ++d)
        for (int h = 0; h < nh; ++h)
            for (int w = 0; w < nw; ++w)
                out.at(d, h, w) = v.at(d, std::min(h, v.height - 1), std::min(w, v.width - 1));
    return out;
}

void write_volume(const std::string& path, const Volume& v) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "ISDV1\n";
    os << v.depth << ' ' << v.height << ' ' << v.width << ' ' << fmt_double(v.spacing[0]) << ' '
       << fmt_double(v.spacing[1]) << ' ' << fmt_double(v.spacing[2]) << ' '
       << (v.range == Volume::Range::Normalized ? "normalized" : "raw") << '\n';
    for (double x : v.voxels) put_f32_le(os, static_cast<float>(x));
    if (!os) throw IoError("write failed: " + path);
}

Volume read_volume(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);

    std::string magic;
    std::getline(is, magic);
    if (magic != "ISDV1") throw IoError("not an ISDV1 file: " + path);

    std::string header;
    std::getline(is, header);
    std::istringstream hs(header);
    int d = 0, h = 0, w = 0;
    double sx = 0, sy = 0, sz = 0;
    std::string tag;
    if (!(hs >> d >> h >> w >> sx >> sy >> sz >> tag))
        throw IoError("bad ISDV1 header: " + path);
    if (d < 1 || h < 1 || w < 1 || sx <= 0 || sy <= 0 || sz <= 0)
        throw IoError("bad ISDV1 dimensions: " + path);
    if (tag != "raw" && tag != "normalized") throw IoError("bad ISDV1 range tag: " + path);

    long long count = static_cast<long long>(d) * h * w;
    std::vector<unsigned char> buf(static_cast<size_t>(count) * 4);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() != static_cast<std::streamsize>(buf.size()))
        throw IoError("truncated ISDV1 payload: " + path);
    if (is.peek() != std::char_traits<char>::eof())
        throw IoError("ISDV1 payload longer than declared D*H*W: " + path);

    Volume v(d, h, w);
    v.spacing = {sx, sy, sz};
    v.range = tag == "normalized" ? Volume::Range::Normalized : Volume::Range::Raw;
    for (long long i = 0; i < count; ++i)
        v.voxels[static_cast<size_t>(i)] = get_f32_le(buf.data() + i * 4);
    return v;
}

void export_slice_pgm(const Tensor& slice, const std::string& path) {
    const Tensor* s = &slice;
    Tensor tmp;
    if (slice.rank() == 3 && slice.dim(0) == 1) {
        tmp = nn::reshaped(slice, {slice.dim(1), slice.dim(2)});
        s = &tmp;
    }
    if (s->rank() != 2) throw DimError("pgm: expected {H,W} slice");

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "P5\n" << s->dim(1) << ' ' << s->dim(0) << "\n255\n";
    for (long long i = 0; i < s->size(); ++i) {
        double v = ((*s)[i] + 1.0) * 0.5 * 255.0;
        int b = static_cast<int>(std::floor(v + 0.5)); // round half up
        os.put(static_cast<char>(std::clamp(b, 0, 255)));
    }
    if (!os) throw IoError("write failed: " + path);
}

} // namespace isd
