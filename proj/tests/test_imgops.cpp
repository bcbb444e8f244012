#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "derm/error.hpp"
#include "derm/imgops.hpp"
#include "derm/png_io.hpp"
#include "derm/rng.hpp"
#include "oracles.hpp"

using namespace derm;

namespace {

BinaryMask random_mask(int w, int h, Rng& rng, double p_one = 0.5) {
    BinaryMask m(w, h);
    for (auto& v : m.data) v = rng.uniform() < p_one ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("resize to identical dimensions is the identity") {
    RasterImage img(5, 4);
    Rng rng(1);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    for (auto mode : {ResizeMode::bilinear, ResizeMode::nearest}) {
        const RasterImage out = resize(img, 5, 4, mode);
        CHECK(out.data == img.data);
    }
}

TEST_CASE("resize of a constant image stays constant") {
    RasterImage img(2, 2, 0.37f);
    const RasterImage out = resize(img, 9, 7, ResizeMode::bilinear);
    for (float v : out.data) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));
}

TEST_CASE("bilinear 2x1 to 4x1 follows the half-pixel-center convention") {
    ProbMask m(2, 1);
    m.data = {0.f, 1.f};
    const ProbMask out = resize(m, 4, 1, ResizeMode::bilinear);
    REQUIRE(out.data.size() == 4);
    CHECK(out.data[0] == doctest::Approx(0.0));
    CHECK(out.data[1] == doctest::Approx(0.25));
    CHECK(out.data[2] == doctest::Approx(0.75));
    CHECK(out.data[3] == doctest::Approx(1.0));

    // cross-check against the brute-force interpolation oracle
    Rng rng(7);
    ProbMask src(6, 5);
    for (auto& v : src.data) v = static_cast<float>(rng.uniform());
    const ProbMask up = resize(src, 13, 9, ResizeMode::bilinear);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 13; ++x) {
            const double sx = (x + 0.5) * 6.0 / 13.0 - 0.5;
            const double sy = (y + 0.5) * 5.0 / 9.0 - 0.5;
            CHECK(up.at(y, x) ==
                  doctest::Approx(oracle::bilinear_at(src.data, 6, 5, sx, sy)).epsilon(1e-6));
        }
}

TEST_CASE("binary masks resize with nearest only and stay binary") {
    Rng rng(3);
    const BinaryMask m = random_mask(17, 11, rng);
    CHECK_THROWS_AS((void)resize(m, 8, 8, ResizeMode::bilinear), Error);
    const BinaryMask out = resize(m, 40, 23, ResizeMode::nearest);
    for (auto v : out.data) CHECK((v == 0 || v == 1));
}

TEST_CASE("normalize_channels") {
    Rng rng(11);
    RasterImage img(8, 6);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());

    SUBCASE("subtracting the image's own means zeroes each channel") {
        std::array<float, 3> mean{}, stddev{1.f, 1.f, 1.f};
        for (std::size_t i = 0; i < img.pixel_count(); ++i)
            for (int c = 0; c < 3; ++c) mean[c] += img.data[i * 3 + c];
        for (auto& m : mean) m /= static_cast<float>(img.pixel_count());
        const RasterImage out = normalize_channels(img, mean, stddev);
        for (int c = 0; c < 3; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < out.pixel_count(); ++i) s += out.data[i * 3 + c];
            CHECK(s / out.pixel_count() == doctest::Approx(0.0).epsilon(1e-6));
        }
    }
    SUBCASE("mean 0 std 1 is the identity") {
        const RasterImage out = normalize_channels(img, {0, 0, 0}, {1, 1, 1});
        CHECK(out.data == img.data);
    }
    SUBCASE("closed forms on a constant image") {
        RasterImage flat(4, 4, 0.5f);
        const RasterImage zeros = normalize_channels(flat, {0.5f, 0.5f, 0.5f},
                                                     {0.25f, 0.25f, 0.25f});
        for (float v : zeros.data) CHECK(v == doctest::Approx(0.0));
        const RasterImage ones = normalize_channels(flat, {0.25f, 0.25f, 0.25f},
                                                    {0.25f, 0.25f, 0.25f});
        for (float v : ones.data) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("zero std is an error") {
        CHECK_THROWS_AS((void)normalize_channels(img, {0, 0, 0}, {1, 0, 1}), Error);
    }
    SUBCASE("inverse affine transform recovers the input") {
        const std::array<float, 3> mean{0.3f, 0.5f, 0.1f}, stddev{0.2f, 0.7f, 1.3f};
        const RasterImage out = normalize_channels(img, mean, stddev);
        for (std::size_t i = 0; i < img.pixel_count(); ++i)
            for (int c = 0; c < 3; ++c)
                CHECK(out.data[i * 3 + c] * stddev[c] + mean[c] ==
                      doctest::Approx(img.data[i * 3 + c]).epsilon(1e-6));
    }
}

TEST_CASE("binarize") {
    ProbMask p(3, 2, 0.9f);
    BinaryMask out = binarize(p, 0.5f);
    for (auto v : out.data) CHECK(v == 1);

    // >= convention at the boundary
    ProbMask q(3, 2, 0.5f);
    out = binarize(q, 0.5f);
    for (auto v : out.data) CHECK(v == 1);

    ProbMask checker(4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) checker.at(y, x) = (x + y) % 2 ? 0.6f : 0.4f;
    out = binarize(checker, 0.5f);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(out.at(y, x) == ((x + y) % 2 ? 1 : 0));

    CHECK_THROWS_AS((void)binarize(p, 0.f), Error);
}

TEST_CASE("fill_holes closes a ring into a disk") {
    BinaryMask ring(7, 7);
    for (int y = 1; y <= 5; ++y)
        for (int x = 1; x <= 5; ++x)
            if (y == 1 || y == 5 || x == 1 || x == 5) ring.at(y, x) = 1;
    const BinaryMask filled = fill_holes(ring);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x) {
            const bool inside = y >= 1 && y <= 5 && x >= 1 && x <= 5;
            CHECK(filled.at(y, x) == (inside ? 1 : 0));
        }
}

TEST_CASE("fill_holes keeps an all-zero mask empty") {
    const BinaryMask m(9, 5);
    const BinaryMask out = fill_holes(m);
    for (auto v : out.data) CHECK(v == 0);
}

TEST_CASE("fill_holes matches the border flood-fill oracle on random masks") {
    Rng rng(42);
    for (int trial = 0; trial < 25; ++trial) {
        const BinaryMask m = random_mask(64, 64, rng, 0.45);
        const BinaryMask got = fill_holes(m);
        const BinaryMask want = oracle::fill_holes(m);
        REQUIRE(got.data == want.data);
        // output dominates input
        for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(got.data[i] >= m.data[i]);
    }
}

TEST_CASE("fill_holes is idempotent and monotone") {
    Rng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const BinaryMask m = random_mask(32, 32, rng, 0.4);
        const BinaryMask once = fill_holes(m);
        CHECK(fill_holes(once).data == once.data);

        BinaryMask bigger = m;
        for (auto& v : bigger.data)
            if (!v && rng.uniform() < 0.1) v = 1;
        const BinaryMask filled_bigger = fill_holes(bigger);
        for (std::size_t i = 0; i < m.data.size(); ++i)
            CHECK(once.data[i] <= filled_bigger.data[i]);
    }
}

TEST_CASE("PNG round-trips") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "derm_png_test";
    fs::create_directories(dir);
    Rng rng(5);

    SUBCASE("binary mask as 8-bit {0,255}") {
        const BinaryMask m = random_mask(31, 17, rng);
        write_mask_png((dir / "m.png").string(), m);
        CHECK(read_mask_png((dir / "m.png").string()).data == m.data);
    }
    SUBCASE("probability mask as 16-bit within 1.5e-5") {
        ProbMask p(23, 19);
        for (auto& v : p.data) v = static_cast<float>(rng.uniform());
        write_prob_png((dir / "p.png").string(), p);
        const ProbMask back = read_prob_png((dir / "p.png").string());
        for (std::size_t i = 0; i < p.data.size(); ++i)
            CHECK(std::fabs(back.data[i] - p.data[i]) < 1.5e-5);
    }
    SUBCASE("8-bit RGB image within one quantization step") {
        RasterImage img(14, 9);
        for (auto& v : img.data) v = static_cast<float>(rng.uniform());
        write_image_png((dir / "i.png").string(), img);
        const RasterImage back = read_image_png((dir / "i.png").string());
        for (std::size_t i = 0; i < img.data.size(); ++i)
            CHECK(std::fabs(back.data[i] - img.data[i]) <= 0.5f / 255.f + 1e-6f);
        int w = 0, h = 0;
        read_png_size((dir / "i.png").string(), w, h);
        CHECK(w == 14);
        CHECK(h == 9);
    }
    fs::remove_all(dir);
}
