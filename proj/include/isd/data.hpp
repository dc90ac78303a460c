#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "isd/nn/tensor.hpp"

namespace isd {

using nn::Tensor;

// 3D intensity grid, slice-major along the first axis (the axis whose
// spacing gets reduced by super-resolution).
struct Volume {
    int depth = 0, height = 0, width = 0;
    std::array<double, 3> spacing = {1.0, 1.0, 1.0}; // mm along (d,h,w)
    enum class Range { Raw, Normalized } range = Range::Raw;
    double orig_min = 0.0, orig_max = 0.0; // recorded by normalize_volume
    std::vector<double> voxels;            // depth*height*width

    Volume() = default;
    Volume(int d, int h, int w) : depth(d), height(h), width(w),
        voxels(static_cast<size_t>(d) * h * w, 0.0) {}

    long long size() const { return static_cast<long long>(voxels.size()); }
    double& at(int d, int h, int w) {
        return voxels[(static_cast<size_t>(d) * height + h) * width + w];
    }
    double at(int d, int h, int w) const {
        return voxels[(static_cast<size_t>(d) * height + h) * width + w];
    }

    Tensor slice(int d) const;            // {H,W}
    void set_slice(int d, const Tensor&); // accepts {H,W} or {1,H,W}
};

// Deterministic synthetic volume: 3-8 smooth nested ellipsoid shells with
// distinct intensities plus a low-amplitude smooth field, values in [0,1].
Volume make_phantom_volume(uint64_t seed, int depth, int height, int width);

// Affine min-max map to [-1,1]; original (min,max) kept for inversion.
// Constant volumes map to all zeros.
Volume normalize_volume(const Volume& v);
Volume denormalize_volume(const Volume& v);

// Keep slices 0, R, 2R, ... along the first axis; spacing multiplied by R.
Volume downsample_volume(const Volume& hr, int ratio);

// Linear interpolation along the first axis between kept slices; in-plane
// grid unchanged. Same output geometry as diffusion super-resolution.
Volume trilinear_interpolate(const Volume& lr, int ratio);

Volume crop_depth(const Volume& v, int new_depth);

// Pad H and W up to a multiple of `multiple` by edge replication.
Volume pad_hw_to_multiple(const Volume& v, int multiple);

// ISDV1 container: "ISDV1\n", one ASCII header line
// "D H W sx sy sz range_tag\n", then D*H*W little-endian float32 values in
// slice-major order.
void write_volume(const std::string& path, const Volume& v);
Volume read_volume(const std::string& path);

// 8-bit binary PGM (P5); values mapped linearly from [-1,1] to [0,255] with
// round-half-up.
void export_slice_pgm(const Tensor& slice, const std::string& path);

} // namespace isd
