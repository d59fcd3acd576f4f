#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "asd/checkpoint.hpp"

using namespace asd;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("bit-exact round trip, including awkward values") {
    ParameterStore params;
    params.insert("a", Tensor({2, 3}, {0.1, -0.2, 1e-300, 1e300, 0.0, -0.0}));
    params.insert("z.nested.name", Tensor({1, 1}, {1.0 / 3.0}));
    MetaMap meta{{"frozen", "true"}, {"kind", "test"}};
    const std::string path = temp_path("ckpt_roundtrip.bin");
    save_checkpoint(path, params, meta);

    MetaMap meta2;
    ParameterStore loaded = load_checkpoint(path, &meta2);
    CHECK(loaded == params);
    CHECK(meta2.at("frozen") == "true");
    CHECK(meta2.at("kind") == "test");
    std::remove(path.c_str());
}

TEST_CASE("save twice produces identical bytes") {
    ParameterStore params;
    Rng rng(5);
    params.insert("w", Tensor::randn({4, 4}, rng));
    const std::string p1 = temp_path("ckpt_a.bin");
    const std::string p2 = temp_path("ckpt_b.bin");
    save_checkpoint(p1, params);
    save_checkpoint(p2, params);
    CHECK(read_file(p1) == read_file(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("corrupted blob fails the checksum, not the parse") {
    ParameterStore params;
    Rng rng(6);
    params.insert("w", Tensor::randn({3, 3}, rng));
    const std::string path = temp_path("ckpt_corrupt.bin");
    save_checkpoint(path, params);
    std::string bytes = read_file(path);
    bytes[bytes.size() - 5] ^= 0x40;
    write_file(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("truncated file is rejected") {
    ParameterStore params;
    Rng rng(7);
    params.insert("w", Tensor::randn({3, 3}, rng));
    const std::string path = temp_path("ckpt_trunc.bin");
    save_checkpoint(path, params);
    std::string bytes = read_file(path);
    write_file(path, bytes.substr(0, bytes.size() - 9));
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("bad magic is rejected") {
    const std::string path = temp_path("ckpt_magic.bin");
    write_file(path, "NOTACKPT 9\n");
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("hex double encoding is exact") {
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
        CHECK(hex_to_double(double_to_hex(v)) == v);
    }
    CHECK(double_to_hex(0.0).size() == 16);
}

}  // TEST_SUITE
