#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gendd/tensor.hpp"

namespace gendd {

enum class ValueRange { Unit, Symmetric };       // [0,1] vs [-1,1]
enum class DtypeHint { FullPrecision, HalfPrecision };
enum class Provenance { Generated, Augmented };

inline const char* to_string(ValueRange r) { return r == ValueRange::Unit ? "unit" : "symmetric"; }
inline const char* to_string(Provenance p) { return p == Provenance::Generated ? "generated" : "augmented"; }

inline Provenance provenance_from_string(const std::string& s) {
    if (s == "generated") return Provenance::Generated;
    if (s == "augmented") return Provenance::Augmented;
    throw std::invalid_argument("unknown provenance tag: '" + s + "'");
}

/// Dense [N, C, H, W] image tensor with its declared value range.
/// The canonical in-pipeline range is unit [0,1]; symmetric [-1,1] appears
/// only inside the diffusion modules.
struct ImageBatch {
    Tensor data;                      // [N, C, H, W]
    ValueRange range = ValueRange::Unit;
    DtypeHint dtype_hint = DtypeHint::FullPrecision;

    std::size_t count() const { return data.shape.empty() ? 0 : data.shape[0]; }
    std::size_t channels() const { return data.shape[1]; }
    std::size_t height() const { return data.shape[2]; }
    std::size_t width() const { return data.shape[3]; }

    void validate() const {
        if (data.shape.size() != 4) throw std::invalid_argument("ImageBatch: expected 4-d tensor");
        std::size_t c = data.shape[1];
        if (c != 1 && c != 3) throw std::invalid_argument("ImageBatch: channels must be 1 or 3");
        if (count() > 0 && (height() == 0 || width() == 0))
            throw std::invalid_argument("ImageBatch: spatial dims must be positive");
        double lo = range == ValueRange::Unit ? 0.0 : -1.0;
        for (double v : data.data) {
            if (!(v >= lo && v <= 1.0))
                throw std::invalid_argument("ImageBatch: value outside declared range");
        }
    }

    static ImageBatch empty(std::size_t channels, std::size_t h, std::size_t w,
                            ValueRange r = ValueRange::Unit) {
        ImageBatch b;
        b.data = Tensor({0, channels, h, w});
        b.range = r;
        return b;
    }
};

ImageBatch to_symmetric(const ImageBatch& b);
ImageBatch to_unit(const ImageBatch& b);

/// Snap unit-range values to the 16-bit grid used by on-disk storage, so
/// that save/load round trips are exact.
void quantize_unit16(ImageBatch& b);

/// Ordered, unique class names; index <-> name is a bijection.
class LabelRegistry {
public:
    LabelRegistry() = default;
    explicit LabelRegistry(std::vector<std::string> names) : names_(std::move(names)) {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i].empty()) throw std::invalid_argument("LabelRegistry: empty class name");
            auto [it, fresh] = index_.emplace(names_[i], i);
            if (!fresh) throw std::invalid_argument("LabelRegistry: duplicate class name '" + names_[i] + "'");
        }
    }

    std::size_t count() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    const std::vector<std::string>& names() const { return names_; }

    std::optional<std::size_t> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<std::string> names_;
    std::map<std::string, std::size_t> index_;
};

/// Labeled image collection with exact per-class IPC accounting.
struct DistilledDataset {
    ImageBatch images;
    std::vector<std::size_t> labels;       // indices into registry
    std::vector<Provenance> provenance;    // per image
    std::size_t ipc = 0;
    LabelRegistry registry;

    std::size_t count() const { return images.count(); }

    void validate() const {
        images.validate();
        if (labels.size() != count()) throw std::invalid_argument("DistilledDataset: label count mismatch");
        if (provenance.size() != count())
            throw std::invalid_argument("DistilledDataset: provenance count mismatch");
        std::vector<std::size_t> hist(registry.count(), 0);
        for (auto l : labels) {
            if (l >= registry.count()) throw std::invalid_argument("DistilledDataset: label out of range");
            hist[l]++;
        }
        for (std::size_t c = 0; c < hist.size(); ++c) {
            if (hist[c] != ipc)
                throw std::invalid_argument("DistilledDataset: class '" + registry.name(c) + "' has " +
                                            std::to_string(hist[c]) + " images, expected ipc=" +
                                            std::to_string(ipc));
        }
    }
};

/// Plain labeled store for real train/test splits (no IPC constraint).
struct LabeledStore {
    ImageBatch images;
    std::vector<std::size_t> labels;
    LabelRegistry registry;

    std::size_t count() const { return images.count(); }
};

struct BudgetSpec {
    double wall_clock_seconds = 600.0;
    std::size_t ipc = 1;
    std::size_t num_classes = 0;

    void validate() const {
        if (!(wall_clock_seconds > 0)) throw std::invalid_argument("BudgetSpec: wall clock must be > 0");
    }
};

struct DatasetSpec {
    std::string name;
    std::size_t resolution = 0;    // square, pixels
    std::size_t num_classes = 0;
    LabelRegistry registry;

    void validate() const {
        if (resolution == 0) throw std::invalid_argument("DatasetSpec: resolution must be positive");
        if (num_classes != registry.count())
            throw std::invalid_argument("DatasetSpec: num_classes disagrees with registry");
    }
};

} // namespace gendd
