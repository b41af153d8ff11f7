#include "gendd/types.hpp"

#include <cmath>

namespace gendd {

ImageBatch to_symmetric(const ImageBatch& b) {
    if (b.range == ValueRange::Symmetric) return b;
    ImageBatch out = b;
    out.range = ValueRange::Symmetric;
    for (double& v : out.data.data) v = v * 2.0 - 1.0;
    return out;
}

ImageBatch to_unit(const ImageBatch& b) {
    if (b.range == ValueRange::Unit) return b;
    ImageBatch out = b;
    out.range = ValueRange::Unit;
    for (double& v : out.data.data) {
        v = (v + 1.0) * 0.5;
        v = std::min(1.0, std::max(0.0, v));
    }
    return out;
}

void quantize_unit16(ImageBatch& b) {
    if (b.range != ValueRange::Unit)
        throw std::invalid_argument("quantize_unit16: batch must be in unit range");
    for (double& v : b.data.data) {
        v = std::round(v * 65535.0) / 65535.0;
    }
}

} // namespace gendd
