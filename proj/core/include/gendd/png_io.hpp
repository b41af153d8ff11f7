#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gendd {

/// Decoded image: row-major, `channels` interleaved, values in [0,1] on the
/// 16-bit grid (8-bit files are promoted to the 16-bit grid by replication).
struct PngImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;  // 1 or 3
    std::vector<double> pixels; // h * w * channels
};

/// Writes a 16-bit gray or RGB PNG. Values are clamped to [0,1] and rounded
/// to the 16-bit grid.
void write_png16(const std::string& path, const PngImage& img);

PngImage read_png(const std::string& path);

} // namespace gendd
