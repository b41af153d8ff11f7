#pragma once

#include "gendd/types.hpp"

namespace gendd {

/// Resizes a square batch to target x target. Downscaling uses antialiased
/// area (box) resampling; upscaling uses bilinear. Equal sizes are a no-op
/// returning the input bitwise. Value range is preserved.
ImageBatch resample_square(const ImageBatch& batch, std::size_t target);

/// Single-plane resample used by the batch version; `src` is h*w row-major.
void resample_plane(const double* src, std::size_t src_h, std::size_t src_w,
                    double* dst, std::size_t dst_h, std::size_t dst_w);

} // namespace gendd
