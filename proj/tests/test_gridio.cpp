#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nowcast/errors.hpp"
#include "nowcast/gridio.hpp"
#include "nowcast/rng.hpp"
#include "testutil.hpp"

using namespace nowcast;
using testutil::TempDir;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("frame round trip is bitwise") {
    TempDir dir("gridio");
    Rng rng(42);
    for (int i = 0; i < 5; ++i) {
        GridFrame f = make_frame(Variable::RainMmh, 1600000000 + i * 300, 12, 9);
        for (float& v : f.values) v = float(rng.uniform(0.0, 50.0));
        f.pixel_km = 0.5f;
        const std::string path = dir.file("frame.rfgd");
        write_frame(f, path);
        GridFrame g = read_frame(path);
        CHECK(g.variable == f.variable);
        CHECK(g.timestamp == f.timestamp);
        CHECK(g.rows == f.rows);
        CHECK(g.cols == f.cols);
        CHECK(g.pixel_km == f.pixel_km);
        CHECK(g.nodata == f.nodata);
        CHECK(g.values == f.values);

        // writing the read frame again reproduces the file byte for byte
        const std::string path2 = dir.file("frame2.rfgd");
        write_frame(g, path2);
        CHECK(slurp(path) == slurp(path2));
    }
}

TEST_CASE("2x3 rain frame file is 55 bytes") {
    TempDir dir("gridio");
    GridFrame f = make_frame(Variable::RainMmh, 0, 2, 3);
    f.values = {0, 1, 2, 3, 4, 5};
    const std::string path = dir.file("small.rfgd");
    write_frame(f, path);
    CHECK(std::filesystem::file_size(path) == 55);
}

TEST_CASE("frame with wrong value count is rejected before write") {
    TempDir dir("gridio");
    GridFrame f = make_frame(Variable::RainMmh, 0, 2, 3);
    f.values.pop_back();
    CHECK_THROWS_AS(write_frame(f, dir.file("bad.rfgd")), DataError);
    CHECK(!std::filesystem::exists(dir.file("bad.rfgd")));
}

TEST_CASE("bad magic is a format error") {
    TempDir dir("gridio");
    const std::string path = dir.file("junk.rfgd");
    std::ofstream(path, std::ios::binary) << "XXXXsome more bytes to pass length checks";
    CHECK_THROWS_AS(read_frame(path), FormatError);
}

TEST_CASE("truncated payload is a format error") {
    TempDir dir("gridio");
    GridFrame f = make_frame(Variable::RainMmh, 0, 4, 4, 1.0f);
    const std::string path = dir.file("trunc.rfgd");
    write_frame(f, path);
    std::string bytes = slurp(path);
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        << bytes.substr(0, bytes.size() - 7);
    CHECK_THROWS_AS(read_frame(path), FormatError);
}

TEST_CASE("ETH range violation reports the offending index") {
    TempDir dir("gridio");
    GridFrame f = make_frame(Variable::EthKm, 0, 2, 2, 3.0f);
    write_frame(f, dir.file("eth.rfgd"));

    f.values[3] = 17.5f;
    CHECK_THROWS_WITH_AS(write_frame(f, dir.file("eth_bad.rfgd")),
                         doctest::Contains("index 3"), DataError);
}

TEST_CASE("crop takes the centered window") {
    GridFrame f = make_frame(Variable::RainMmh, 123, 765, 700);
    f.at(214, 214) = 7.0f;  // lands at (0,0) of the crop
    GridFrame c = crop(f, 214, 214, 336, 272);
    CHECK(c.rows == 336);
    CHECK(c.cols == 272);
    CHECK(c.timestamp == 123);
    CHECK(c.at(0, 0) == 7.0f);
}

TEST_CASE("identity crop preserves the frame") {
    Rng rng(7);
    GridFrame f = testutil::random_rain_frame(20, 30, rng);
    GridFrame c = crop(f, 0, 0, 20, 30);
    CHECK(c.values == f.values);
    // idempotent when re-applied
    GridFrame c2 = crop(c, 0, 0, 20, 30);
    CHECK(c2.values == c.values);
}

TEST_CASE("out-of-bounds crop is an argument error") {
    GridFrame f = make_frame(Variable::RainMmh, 0, 765, 700);
    CHECK_THROWS_AS(crop(f, 500, 500, 336, 272), ArgumentError);
}

namespace {

SequenceRecord make_record(int64_t start, double weight, int fold) {
    SequenceRecord rec;
    rec.start_timestamp = start;
    rec.event_weight = weight;
    rec.fold = fold;
    for (int i = 0; i < kSequenceLen; ++i) {
        rec.rain_paths.push_back("frames/rain_" + std::to_string(start + i * 300) + ".rfgd");
        rec.eth_paths.push_back("frames/eth_" + std::to_string(start + i * 300) + ".rfgd");
    }
    return rec;
}

}  // namespace

TEST_CASE("empty manifest round trips") {
    TempDir dir("gridio");
    SequenceManifest m;
    const std::string path = dir.file("manifest.tsv");
    write_manifest(m, path);
    CHECK(std::filesystem::file_size(path) == 0);
    CHECK(read_manifest(path).records.empty());
}

TEST_CASE("manifest round trip preserves order and fields") {
    TempDir dir("gridio");
    SequenceManifest m;
    m.records.push_back(make_record(1600000000, 123.456, 0));
    m.records.push_back(make_record(1600003000, 9.5e6, kFoldTest));
    m.records.push_back(make_record(1600006000, 0.125, 7));
    const std::string path = dir.file("manifest.tsv");
    write_manifest(m, path);
    SequenceManifest r = read_manifest(path);
    REQUIRE(r.records.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(r.records[i].start_timestamp == m.records[i].start_timestamp);
        CHECK(r.records[i].fold == m.records[i].fold);
        CHECK(r.records[i].rain_paths == m.records[i].rain_paths);
        CHECK(r.records[i].eth_paths == m.records[i].eth_paths);
    }
    CHECK(r.records[0].event_weight == doctest::Approx(123.456));
    CHECK(r.records[1].event_weight == doctest::Approx(9.5e6));

    // second write is byte-identical (weights already at 6 significant digits)
    const std::string path2 = dir.file("manifest2.tsv");
    write_manifest(r, path2);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("manifest with 21 rain paths is a parse error") {
    TempDir dir("gridio");
    SequenceRecord rec = make_record(1600000000, 1.0, 0);
    rec.rain_paths.pop_back();
    std::string line = "1600000000\t1\t0\t";
    for (size_t i = 0; i < rec.rain_paths.size(); ++i) {
        if (i) line += ';';
        line += rec.rain_paths[i];
    }
    line += '\t';
    for (size_t i = 0; i < rec.eth_paths.size(); ++i) {
        if (i) line += ';';
        line += rec.eth_paths[i];
    }
    const std::string path = dir.file("short.tsv");
    std::ofstream(path) << line << "\n";
    CHECK_THROWS_WITH_AS(read_manifest(path), doctest::Contains("line 1"), DataError);
}

TEST_CASE("cadence check reads frame headers") {
    TempDir dir("gridio");
    std::filesystem::create_directories(dir.file("frames"));
    SequenceRecord rec = make_record(1000, 1.0, 0);
    for (int i = 0; i < kSequenceLen; ++i) {
        GridFrame rain = make_frame(Variable::RainMmh, 1000 + i * 300, 2, 2);
        GridFrame eth = make_frame(Variable::EthKm, 1000 + i * 300, 2, 2);
        write_frame(rain, dir.file(rec.rain_paths[size_t(i)]));
        write_frame(eth, dir.file(rec.eth_paths[size_t(i)]));
    }
    CHECK_NOTHROW(check_record_cadence(rec, dir.path()));

    // corrupt one timestamp
    GridFrame bad = make_frame(Variable::RainMmh, 1000 + 7 * 300 + 60, 2, 2);
    write_frame(bad, dir.file(rec.rain_paths[7]));
    CHECK_THROWS_AS(check_record_cadence(rec, dir.path()), DataError);
}
