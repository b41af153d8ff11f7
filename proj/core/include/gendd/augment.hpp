#pragma once

#include <nlohmann/json.hpp>

#include "gendd/rng.hpp"
#include "gendd/types.hpp"

namespace gendd {

/// Post-data-augmentation recipe. Steps fire independently with their
/// probabilities, strictly in this order:
/// random_crop(size) -> hflip -> vflip -> brightness_contrast -> rotate -> gamma.
struct AugmentationSpec {
    std::size_t crop_size = 0;
    double hflip_p = 0.8;
    double vflip_p = 0.8;
    double brightness_contrast_p = 0.5;
    double rotate_p = 0.8;
    double rotate_limit_deg = 60.0;
    double gamma_p = 0.5;

    // magnitude ranges (config-exposed; recorded in the manifest)
    double contrast_lo = 0.8, contrast_hi = 1.2;
    double brightness_limit = 0.2;
    double gamma_lo = 0.8, gamma_hi = 1.2;

    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
};

struct ExpansionPlan {
    std::size_t factor = 5; // copies per source image, original included

    void validate() const {
        if (factor < 1) throw std::invalid_argument("ExpansionPlan: factor must be >= 1");
    }
};

// --- step primitives (single image, [C, H, W]) ------------------------------

Tensor crop(const Tensor& img, std::size_t oy, std::size_t ox, std::size_t size);
Tensor hflip(const Tensor& img);
Tensor vflip(const Tensor& img);
Tensor brightness_contrast(const Tensor& img, double alpha, double beta);
/// Bilinear rotation about the image center with reflected border fill.
Tensor rotate(const Tensor& img, double angle_deg);
Tensor gamma_adjust(const Tensor& img, double gamma);

/// Applies the full pipeline to one unit-range image, consuming one rng
/// stream. Output is crop_size x crop_size, clipped to [0,1].
Tensor augment_one(const Tensor& img, const AugmentationSpec& spec, Rng& rng);

/// Deterministic center crop used for the kept originals.
Tensor center_crop(const Tensor& img, std::size_t size);

/// Expands each source image into itself (center-cropped through the same
/// geometry) plus factor-1 augmented variants. Sources are first conformed
/// to 1.25x the crop size so random crops have translation slack. Output
/// ipc = input ipc * factor; rng streams are derived per
/// (class, within-class index, copy) so images augment independently.
DistilledDataset expand_dataset(const DistilledDataset& ds, const AugmentationSpec& spec,
                                const ExpansionPlan& plan);

/// Crop-source size for a target resolution (1.25x, rounded).
std::size_t crop_source_size(std::size_t target);

} // namespace gendd
