#include <doctest.h>

#include <cmath>
#include <fstream>

#include "ccswap/image_io.hpp"
#include "support.hpp"

using namespace ccswap;
using namespace ccswap::testing;

namespace {

// Values already on the 8-bit lattice survive a round trip exactly.
Image byte_image(Shape3 s, std::uint64_t seed) {
    Image img = random_image(s, seed);
    for (auto& v : img.values()) v = std::round(v * 255.0) / 255.0;
    return img;
}

}  // namespace

TEST_CASE("lossless round trips") {
    TempDir dir("io");
    const Image gray = byte_image({1, 13, 7}, 1);
    const Image rgb  = byte_image({3, 5, 9}, 2);
    write_image(dir.path() / "g.png", gray);
    write_image(dir.path() / "g.pgm", gray);
    write_image(dir.path() / "c.png", rgb);
    write_image(dir.path() / "c.ppm", rgb);
    CHECK(max_abs_diff(read_image(dir.path() / "g.png"), gray) < 1e-12);
    CHECK(max_abs_diff(read_image(dir.path() / "g.pgm"), gray) < 1e-12);
    CHECK(max_abs_diff(read_image(dir.path() / "c.png"), rgb) < 1e-12);
    CHECK(max_abs_diff(read_image(dir.path() / "c.ppm"), rgb) < 1e-12);
}

TEST_CASE("writing quantizes and clamps") {
    TempDir dir("io");
    Image img({1, 1, 4});
    img[0] = -0.5;
    img[1] = 1.7;
    img[2] = 0.5;
    img[3] = 0.25;
    write_image(dir.path() / "q.png", img);
    const Image back = read_image(dir.path() / "q.png");
    CHECK(back[0] == 0.0);
    CHECK(back[1] == 1.0);
    CHECK(back[2] == doctest::Approx(128.0 / 255.0));
    CHECK(back[3] == doctest::Approx(64.0 / 255.0));
    const Image noisy = random_image({1, 6, 6}, 3);
    write_image(dir.path() / "n.pgm", noisy);
    CHECK(max_abs_diff(read_image(dir.path() / "n.pgm"), noisy) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("netpbm headers may carry comments") {
    TempDir dir("io");
    {
        std::ofstream out(dir.path() / "c.pgm", std::ios::binary);
        out << "P5\n# a comment\n2 1\n255\n";
        out.put(static_cast<char>(0));
        out.put(static_cast<char>(255));
    }
    const Image img = read_image(dir.path() / "c.pgm");
    CHECK(img.shape() == Shape3{1, 1, 2});
    CHECK(img[0] == 0.0);
    CHECK(img[1] == 1.0);
}

TEST_CASE("io errors") {
    TempDir dir("io");
    CHECK_THROWS_WITH_AS(read_image(dir.path() / "missing.png"), doctest::Contains("missing.png"), IoError);
    std::ofstream(dir.path() / "junk.png") << "not a png";
    CHECK_THROWS_AS(read_image(dir.path() / "junk.png"), IoError);
    std::ofstream(dir.path() / "short.pgm") << "P5\n4 4\n255\nab";
    CHECK_THROWS_AS(read_image(dir.path() / "short.pgm"), IoError);
    std::ofstream(dir.path() / "wide.pgm") << "P5\n1 1\n65535\nab";
    CHECK_THROWS_AS(read_image(dir.path() / "wide.pgm"), IoError);
    CHECK_THROWS_AS(write_image(dir.path() / "x.png", Image({2, 4, 4})), IoError);
    CHECK_THROWS_AS(write_image(dir.path() / "x.pgm", Image({3, 4, 4})), IoError);
    CHECK_THROWS_AS(write_image(dir.path() / "x.bmp", Image({1, 4, 4})), IoError);
    CHECK_THROWS_AS(write_image(dir.path() / "no_such_dir" / "x.pgm", Image({1, 4, 4})), IoError);
}

TEST_CASE("heatmaps are min-max scaled") {
    TempDir dir("io");
    Matrix m(2, 3);
    m << -1, 0, 1, 3, 3, 3;
    write_heatmap(dir.path() / "h.png", m);
    const Image img = read_image(dir.path() / "h.png");
    REQUIRE(img.shape() == Shape3{1, 2, 3});
    CHECK(img.at(0, 0, 0) == 0.0);
    CHECK(img.at(0, 1, 0) == 1.0);
    CHECK(img.at(0, 0, 1) == doctest::Approx(64.0 / 255.0));

    write_heatmap(dir.path() / "flat.png", Matrix::Constant(2, 2, 4.0));
    const Image flat = read_image(dir.path() / "flat.png");
    for (double v : flat.values()) CHECK(v == 0.0);
}
