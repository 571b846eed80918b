#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "rsdflow/errors.hpp"
#include "rsdflow/image_io.hpp"
#include "rsdflow/sequence.hpp"
#include "support.hpp"

using namespace rsdflow;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const char* name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path / "frames");
        std::filesystem::create_directories(path / "masks");
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

LabelImage labels_with(std::size_t h, std::size_t w, std::vector<int> values) {
    LabelImage l{h, w, std::vector<int>(h * w, 0)};
    for (std::size_t i = 0; i < values.size(); ++i) l.labels[i] = values[i];
    return l;
}

}  // namespace

TEST_SUITE("load_sequence") {
    TEST_CASE("three frames, one mask, numeric ordering") {
        TempDir dir("rsdflow_seq_ok");
        for (int n : {10, 2, 1}) {
            write_png(Grid(8, 8, 3, n / 20.0), dir.path / "frames" / ("f" + std::to_string(n) + ".png"));
        }
        write_label_png(labels_with(8, 8, {0, 1, 2}), dir.path / "masks" / "f1.png");
        const SequenceBundle b = load_sequence(dir.path);
        REQUIRE(b.frames.size() == 3);
        CHECK(b.frames[0].at(0, 0) == doctest::Approx(std::round(255 / 20.0) / 255.0));
        CHECK(b.frames[2].at(0, 0) == doctest::Approx(std::round(255 / 2.0) / 255.0));
        CHECK(b.object_count == 2);
        CHECK(b.has_labels(0));
        CHECK_FALSE(b.has_labels(1));
        CHECK(b.object_mask(2, 0).count() == 1);
        CHECK_THROWS_AS(b.object_mask(1, 1), ArgumentError);
    }

    TEST_CASE("mixed resolution names the offending file") {
        TempDir dir("rsdflow_seq_mixed");
        write_png(Grid(8, 8, 3), dir.path / "frames" / "00000.png");
        write_png(Grid(8, 16, 3), dir.path / "frames" / "00001.png");
        write_label_png(labels_with(8, 8, {1}), dir.path / "masks" / "00000.png");
        CHECK_THROWS_WITH_AS(load_sequence(dir.path), doctest::Contains("00001.png"), DimensionError);
    }

    TEST_CASE("missing first mask and empty directories are format errors") {
        TempDir dir("rsdflow_seq_nomask");
        CHECK_THROWS_AS(load_sequence(dir.path), FormatError);
        write_png(Grid(8, 8, 3), dir.path / "frames" / "00000.png");
        write_png(Grid(8, 8, 3), dir.path / "frames" / "00001.png");
        write_label_png(labels_with(8, 8, {1}), dir.path / "masks" / "00001.png");
        CHECK_THROWS_AS(load_sequence(dir.path), FormatError);
    }
}

TEST_SUITE("synthesize_sequence") {
    TEST_CASE("zero motion repeats the frame with zero flow") {
        SyntheticSpec s;
        s.motions = {{0.0, 0.0}, {0.0, 0.0}};
        const SyntheticSequence seq = synthesize_sequence(s);
        CHECK(seq.bundle.frames[1] == seq.bundle.frames[0]);
        CHECK(seq.bundle.labels[2] == seq.bundle.labels[0]);
        for (double v : seq.gt_flows[2].grid().data()) CHECK(v == 0.0);
    }

    TEST_CASE("integer motion: shifted content and negated ground truth flow") {
        SyntheticSpec s;
        s.motions = {{3.0, -2.0}};
        const SyntheticSequence seq = synthesize_sequence(s);
        const BinaryMask m1 = seq.bundle.object_mask(1, 1);
        const Grid& f0 = seq.bundle.frames[0];
        const Grid& f1 = seq.bundle.frames[1];
        std::size_t inside = 0;
        for (std::size_t y = 0; y < 64; ++y)
            for (std::size_t x = 0; x < 64; ++x) {
                if (!m1.at(y, x)) {
                    CHECK(seq.gt_flows[1].du(y, x) == 0.0);
                    continue;
                }
                ++inside;
                CHECK(seq.gt_flows[1].du(y, x) == -3.0);
                CHECK(seq.gt_flows[1].dv(y, x) == 2.0);
                for (std::size_t c = 0; c < 3; ++c) CHECK(f1.at(y, x, c) == f0.at(y + 2, x - 3, c));
            }
        CHECK(inside == 28 * 28);
    }

    TEST_CASE("half-pixel motion averages neighbouring texels") {
        SyntheticSpec s;
        s.start_x = 10.0;
        s.start_y = 10.0;
        s.motions = {{0.5, 0.0}};
        const SyntheticSequence seq = synthesize_sequence(s);
        const Grid& f0 = seq.bundle.frames[0];
        const Grid& f1 = seq.bundle.frames[1];
        for (std::size_t y = 10; y < 38; ++y)
            for (std::size_t x = 11; x < 38; ++x)
                for (std::size_t c = 0; c < 3; ++c)
                    CHECK(f1.at(y, x, c) == doctest::Approx(0.5 * (f0.at(y, x, c) + f0.at(y, x - 1, c))).epsilon(1e-12));
        CHECK(seq.positions[1].dx == 10.5);
    }

    TEST_CASE("patch leaving the frame is rejected") {
        SyntheticSpec s;
        s.motions = {{40.0, 0.0}};
        CHECK_THROWS_AS(synthesize_sequence(s), ArgumentError);
    }

    TEST_CASE("occluder hides the patch and its label") {
        SyntheticSpec s;
        s.motions = {{1.0, 0.0}};
        s.occluder = Occluder{0, 0, 64, 32};
        const SyntheticSequence seq = synthesize_sequence(s);
        const BinaryMask m = seq.bundle.object_mask(1, 1);
        for (std::size_t y = 0; y < 64; ++y)
            for (std::size_t x = 0; x < 32; ++x) CHECK_FALSE(m.at(y, x));
        CHECK(m.count() > 0);
    }

    TEST_CASE("deterministic in the seed") {
        SyntheticSpec s;
        s.motions = {{1.0, 1.0}};
        CHECK(synthesize_sequence(s).bundle.frames == synthesize_sequence(s).bundle.frames);
        SyntheticSpec other = s;
        other.seed = 2;
        CHECK(synthesize_sequence(other).bundle.frames[0] != synthesize_sequence(s).bundle.frames[0]);
    }
}
