#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "fcenet/image_io.hpp"
#include "test_util.hpp"

using namespace fcenet;
using test::random_tensor;

TEST_CASE("8 and 16 bit roundtrips") {
    const Tensor rgb = random_tensor({3, 9, 13}, 170, 0.0, 1.0);
    const Tensor back8 = decode_png(encode_png(rgb, 8));
    CHECK(back8.shape() == rgb.shape());
    CHECK(max_abs_diff(back8, rgb) <= 0.5 / 255.0 + 1e-12);
    const Tensor back16 = decode_png(encode_png(rgb, 16));
    CHECK(max_abs_diff(back16, rgb) <= 0.5 / 65535.0 + 1e-12);

    // Quantized values survive exactly.
    CHECK(max_abs_diff(decode_png(encode_png(back8, 8)), back8) == 0.0);

    const Tensor gray = random_tensor({1, 5, 7}, 171, 0.0, 1.0);
    CHECK(decode_png(encode_png(gray)).channels() == 1);
}

TEST_CASE("clamping and conversion") {
    Tensor t(1, 1, 2);
    t[0] = -0.3;
    t[1] = 1.7;
    const Tensor back = decode_png(encode_png(t));
    CHECK(back[0] == 0.0);
    CHECK(back[1] == 1.0);

    Tensor rgb(3, 1, 1);
    rgb.storage() = {0.0, 0.3, 0.9};
    CHECK(to_gray(rgb)[0] == doctest::Approx(0.4));
    CHECK(to_gray(Tensor(1, 2, 2, 0.25))[3] == 0.25);
}

TEST_CASE("files and errors") {
    const auto path = std::filesystem::temp_directory_path() / "fcenet_io.png";
    const Tensor img = random_tensor({3, 4, 4}, 172, 0.0, 1.0);
    write_png(path.string(), img);
    CHECK(max_abs_diff(read_png(path.string()), decode_png(encode_png(img))) == 0.0);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(read_png(path.string()), IoError);
    CHECK_THROWS_AS(decode_png("not a png at all"), IoError);
    const std::string bytes = encode_png(img);
    CHECK_THROWS_AS(decode_png(bytes.substr(0, bytes.size() / 2)), IoError);
    CHECK_THROWS_AS(encode_png(Tensor(2, 4, 4)), ShapeError);
    CHECK_THROWS(encode_png(img, 12));
}
