#include "doctest.h"

#include "gendd/augment.hpp"
#include "gendd/synthetic.hpp"
#include "helpers.hpp"

using namespace gendd;

namespace {
Tensor ramp_image(std::size_t c, std::size_t h, std::size_t w) {
    Tensor img({c, h, w});
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = static_cast<double>(i) / static_cast<double>(img.size());
    return img;
}
} // namespace

TEST_SUITE_BEGIN("pda");

TEST_CASE("step primitives") {
    Tensor img = ramp_image(1, 4, 4);

    SUBCASE("crop extracts the expected submatrix") {
        Tensor c = crop(img, 1, 1, 2);
        CHECK(c.shape == std::vector<std::size_t>{1, 2, 2});
        CHECK(c.data[0] == img.data[1 * 4 + 1]);
        CHECK(c.data[1] == img.data[1 * 4 + 2]);
        CHECK(c.data[2] == img.data[2 * 4 + 1]);
        CHECK(c.data[3] == img.data[2 * 4 + 2]);
        CHECK_THROWS(crop(img, 3, 3, 2));
    }
    SUBCASE("hflip and vflip are involutions") {
        CHECK(hflip(hflip(img)).data == img.data);
        CHECK(vflip(vflip(img)).data == img.data);
        CHECK(hflip(img).data != img.data);
    }
    SUBCASE("brightness_contrast identity at alpha=1, beta=0") {
        CHECK(brightness_contrast(img, 1.0, 0.0).data == img.data);
        Tensor shifted = brightness_contrast(img, 1.0, 0.5);
        for (double v : shifted.data) CHECK(v <= 1.0);
    }
    SUBCASE("rotate by zero degrees is exact") {
        Tensor r = rotate(img, 0.0);
        for (std::size_t i = 0; i < img.size(); ++i) CHECK(r[i] == doctest::Approx(img[i]).epsilon(1e-12));
    }
    SUBCASE("gamma one is the identity on unit-range input") {
        CHECK(gamma_adjust(img, 1.0).data == img.data);
        Tensor g = gamma_adjust(img, 0.8);
        for (std::size_t i = 1; i < img.size(); ++i) CHECK(g[i] >= img[i]);
    }
}

TEST_CASE("augment_one respects shape, range and determinism") {
    AugmentationSpec spec;
    spec.crop_size = 6;
    spec.seed = 3;
    Tensor img = ramp_image(3, 8, 8);

    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng rng(s);
        Tensor out = augment_one(img, spec, rng);
        CHECK(out.shape == std::vector<std::size_t>{3, 6, 6});
        for (double v : out.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    Rng a(5), b(5);
    CHECK(augment_one(img, spec, a).data == augment_one(img, spec, b).data);

    SUBCASE("all-probability-zero full-size crop is the identity") {
        AugmentationSpec noop;
        noop.crop_size = 8;
        noop.hflip_p = noop.vflip_p = noop.brightness_contrast_p = 0.0;
        noop.rotate_p = noop.gamma_p = 0.0;
        Rng rng(1);
        CHECK(augment_one(img, noop, rng).data == img.data);
    }
    SUBCASE("image smaller than the crop is an error") {
        Rng rng(1);
        Tensor small = ramp_image(3, 4, 4);
        CHECK_THROWS(augment_one(small, spec, rng));
    }
    SUBCASE("invalid probabilities are rejected") {
        AugmentationSpec bad = spec;
        bad.hflip_p = 1.5;
        Rng rng(1);
        CHECK_THROWS(augment_one(img, bad, rng));
    }
}

TEST_CASE("expansion multiplies ipc exactly and keeps balance") {
    AugmentationSpec spec;
    spec.seed = 11;

    SUBCASE("ipc 10 times factor 5 gives 50; 20 gives 100") {
        for (std::size_t ipc : {std::size_t{10}, std::size_t{20}}) {
            auto ds = test::random_dataset(3, ipc, 3, 10, ipc);
            spec.crop_size = 8;
            auto out = expand_dataset(ds, spec, ExpansionPlan{5});
            CHECK(out.ipc == ipc * 5);
            CHECK(out.count() == ds.count() * 5);
            CHECK_NOTHROW(out.validate());
        }
    }
    SUBCASE("all factors 1..8 preserve balance on random datasets") {
        for (std::size_t factor = 1; factor <= 8; ++factor) {
            auto ds = test::random_dataset(2 + factor % 3, 2, 1, 10, factor);
            spec.crop_size = 8;
            auto out = expand_dataset(ds, spec, ExpansionPlan{factor});
            CHECK(out.ipc == ds.ipc * factor);
            std::vector<std::size_t> hist(out.registry.count(), 0);
            for (auto l : out.labels) hist[l]++;
            for (auto h : hist) CHECK(h == out.ipc);
        }
    }
    SUBCASE("factor 1 keeps only center-cropped originals") {
        auto ds = test::random_dataset(2, 3, 1, 10, 77);
        spec.crop_size = 8;
        auto out = expand_dataset(ds, spec, ExpansionPlan{1});
        CHECK(out.count() == ds.count());
        for (std::size_t i = 0; i < out.count(); ++i) CHECK(out.provenance[i] == ds.provenance[i]);
    }
    SUBCASE("factor 0 is an error") {
        auto ds = test::random_dataset(2, 1, 1, 10, 5);
        spec.crop_size = 8;
        CHECK_THROWS(expand_dataset(ds, spec, ExpansionPlan{0}));
    }
}

TEST_CASE("expansion provenance and label bookkeeping") {
    auto ds = test::random_dataset(3, 2, 3, 10, 123);
    AugmentationSpec spec;
    spec.crop_size = 8;
    spec.seed = 9;
    auto out = expand_dataset(ds, spec, ExpansionPlan{4});
    for (std::size_t i = 0; i < ds.count(); ++i) {
        // copy 0 carries the source forward; copies 1..3 are augmented
        CHECK(out.provenance[i * 4] == ds.provenance[i]);
        for (std::size_t k = 1; k < 4; ++k) {
            CHECK(out.provenance[i * 4 + k] == Provenance::Augmented);
            CHECK(out.labels[i * 4 + k] == ds.labels[i]);
        }
        CHECK(out.labels[i * 4] == ds.labels[i]);
    }
}

TEST_CASE("expansion is bit-deterministic and per-image independent") {
    auto ds = test::random_dataset(4, 3, 3, 10, 31);
    AugmentationSpec spec;
    spec.crop_size = 8;
    spec.seed = 42;
    ExpansionPlan plan{5};

    auto a = expand_dataset(ds, spec, plan);
    auto b = expand_dataset(ds, spec, plan);
    CHECK(a.images.data.data == b.images.data.data);

    SUBCASE("other classes are unaffected by a changed source image") {
        auto ds2 = ds;
        // scribble over the last image of class 3
        std::size_t per = 3 * 10 * 10;
        std::size_t victim = ds2.count() - 1;
        for (std::size_t e = 0; e < per; ++e)
            ds2.images.data.data[victim * per + e] = (e % 7) / 7.0;
        quantize_unit16(ds2.images);
        auto c = expand_dataset(ds2, spec, plan);
        std::size_t out_per = 3 * 8 * 8;
        // every expanded image not descending from the victim is unchanged
        for (std::size_t i = 0; i + 1 < ds.count(); ++i)
            for (std::size_t k = 0; k < 5; ++k)
                for (std::size_t e = 0; e < out_per; ++e)
                    CHECK(a.images.data.data[(i * 5 + k) * out_per + e] ==
                          c.images.data.data[(i * 5 + k) * out_per + e]);
    }
}

TEST_CASE("crop source size follows the 1.25x rule") {
    CHECK(crop_source_size(32) == 40);
    CHECK(crop_source_size(64) == 80);
    CHECK(crop_source_size(8) == 10);
}

TEST_SUITE_END();
