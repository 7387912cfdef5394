#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dipa/config.hpp"
#include "dipa/harness.hpp"
#include "dipa/io.hpp"
#include "dipa/metrics.hpp"
#include "dipa/random.hpp"

using namespace dipa;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dipa_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

constexpr const char* kTinyConfig = R"({
  "experiment": "tiny",
  "seed": 3,
  "output_dir": "out",
  "image": {"height": 4, "width": 4},
  "student_operator": {"modality": "spc", "gamma": 0.25},
  "teacher_operator": {"modality": "spc", "gamma": 0.75},
  "student_solver": {"iterations": 4, "alpha": 0.5, "denoiser": {"kind": "dct_soft_threshold", "sigma": 0.02}},
  "teacher_solver": {"iterations": 4, "alpha": 0.5},
  "preconditioner": {"kind": "linear"},
  "optimizer": {"lr": 0.001},
  "training": {"epochs": 2, "batch_size": 2},
  "dataset": {"count": 6, "rectangles": 1, "bumps": 1},
  "benchmark": [{"kind": "identity"}, {"kind": "ridge_hessian", "eta": 0.1}, {"kind": "polynomial", "degree": 2}]
})";

}  // namespace

TEST(Metrics, PsnrAndSummary) {
  const Tensor a({4}, 0.5);
  Tensor b = a;
  b[0] += 0.1;
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / (0.01 / 4.0)), 1e-12);
  const PsnrResult exact = psnr_checked(a, a);
  EXPECT_TRUE(exact.capped);
  EXPECT_EQ(exact.db, kPsnrCap);
  MetricsRecord r;
  r.per_image_psnr = {10.0, 20.0};
  summarize(r);
  EXPECT_EQ(r.mean_psnr, 15.0);
  EXPECT_EQ(r.std_psnr, 5.0);
}

TEST(Synthetic, DeterministicAndInRange) {
  const auto a = synthetic_images(5, 8, 8, 2, 3, 11);
  const auto b = synthetic_images(5, 8, 8, 2, 3, 11);
  const auto c = synthetic_images(5, 8, 8, 2, 3, 12);
  ASSERT_EQ(a.size(), 5u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a[0], c[0]);
  for (const auto& img : a) {
    EXPECT_EQ(img.shape(), (Shape{8, 8}));
    for (double v : img.vector()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  // Image n does not depend on how many images are drawn.
  EXPECT_EQ(synthetic_images(2, 8, 8, 2, 3, 11)[1], a[1]);
}

TEST(Synthetic, HeldOutSplit) {
  EXPECT_EQ(held_out_indices(10, 0.2), (std::vector<std::size_t>{8, 9}));
  EXPECT_EQ(held_out_indices(3, 0.2), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Io, PgmRoundTripAndComments) {
  Tensor img({2, 3}, std::vector<double>{0, 0.5, 1, 0.25, 1.5, -1});
  const auto bytes = encode_pgm(img);
  const Tensor back = parse_pgm(bytes);
  EXPECT_EQ(back.shape(), (Shape{2, 3}));
  EXPECT_EQ(back[0], 0.0);
  EXPECT_NEAR(back[1], 128.0 / 255.0, 1e-15);
  EXPECT_EQ(back[4], 1.0);
  EXPECT_EQ(back[5], 0.0);
  const std::string commented = "P5\n# note\n1 1\n# more\n15\n\x0f";
  EXPECT_EQ(parse_pgm(std::vector<std::uint8_t>(commented.begin(), commented.end()))[0], 1.0);
  const std::string ascii = "P2\n1 1\n255\n0";
  EXPECT_THROW(parse_pgm(std::vector<std::uint8_t>(ascii.begin(), ascii.end())), FormatError);
  const std::string truncated = "P5\n2 2\n255\n\x01";
  EXPECT_THROW(parse_pgm(std::vector<std::uint8_t>(truncated.begin(), truncated.end())), FormatError);
}

TEST(Io, MatrixAndParameterContainers) {
  const Tensor m = Rng(1).normal_tensor({3, 2});
  auto bytes = encode_matrix(m);
  EXPECT_EQ(bytes.size(), 20u + 48u);
  EXPECT_EQ(parse_matrix(bytes), m);
  bytes.push_back(0);
  EXPECT_THROW(parse_matrix(bytes), FormatError);
  bytes.resize(30);
  try {
    parse_matrix(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_GE(e.offset(), 20u);
  }

  const std::vector<double> p{1.5, -2.0, 1e-300};
  auto pb = encode_parameters(p);
  EXPECT_EQ(pb.size(), 16u + 24u);
  EXPECT_EQ(parse_parameters(pb), p);
  pb[0] = 'X';
  EXPECT_THROW(parse_parameters(pb), FormatError);
}

TEST(Io, NumberFormattingAndCsv) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  CsvTable t({"a", "b"});
  t.add_row({"1", "x"});
  EXPECT_EQ(t.str(), "a,b\n1,x\n");
  EXPECT_THROW(t.add_row({"1"}), std::invalid_argument);
  EXPECT_THROW(t.add_row({"1", "a,b"}), std::invalid_argument);
}

TEST(Config, ParsesAndResolvesRelativePaths) {
  const ExperimentConfig c = parse_config(kTinyConfig, "/base");
  EXPECT_EQ(c.experiment, "tiny");
  EXPECT_EQ(c.output_dir, fs::path("/base/out"));
  EXPECT_EQ(c.height, 4u);
  EXPECT_EQ(c.student_operator.gamma, 0.25);
  EXPECT_FALSE(c.student_operator.scale.has_value());
  EXPECT_EQ(c.student_solver.iterations, 4);
  EXPECT_EQ(c.preconditioner.kind, "linear");
  EXPECT_EQ(c.benchmark.size(), 3u);
  EXPECT_EQ(c.dataset_seed(), 3u);
  const TrainingSettings s = c.training_settings();
  EXPECT_EQ(s.epochs, 2);
  EXPECT_EQ(s.optimizer.lr, 0.001);
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(R"({"bogus": 1})").find("bogus"), std::string::npos);
  EXPECT_NE(message(R"({"student_operator": {"modality": "spc"}, "teacher_operator": {"modality": "spc"},
                      "student_solver": {"alpha": "fast"}})").find("student_solver.alpha"), std::string::npos);
  EXPECT_NE(message(R"({"student_operator": {"modality": "spc", "acceleration": 4}})").find("acceleration"),
            std::string::npos);
  EXPECT_NE(message(R"({"student_operator": {"modality": "pet"}})").find("modality"), std::string::npos);
  EXPECT_NE(message("{").find("malformed"), std::string::npos);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Commands, TrainBenchmarkLinearizeAndReconstruct) {
  const fs::path dir = scratch_dir("commands");
  write_text(dir / "config.json", kTinyConfig);
  CommandOptions opts{dir / "config.json", std::nullopt, std::nullopt};
  std::ostringstream out, err;

  ASSERT_EQ(cmd_train(opts, out, err), 0) << err.str();
  EXPECT_TRUE(fs::exists(dir / "out" / "po.bin"));
  EXPECT_EQ(read_parameters(dir / "out" / "po.bin").size(), 256u);
  const std::string history = slurp(dir / "out" / "history.csv");
  EXPECT_EQ(history.substr(0, history.find('\n')), "epoch,alignment,imitation,supervised,convergence,validation_psnr");

  ASSERT_EQ(cmd_benchmark(opts, out, err), 0) << err.str();
  const std::string bench = slurp(dir / "out" / "benchmark.csv");
  EXPECT_NE(bench.find("ridge_hessian,"), std::string::npos);
  EXPECT_NE(bench.find("polynomial,"), std::string::npos);

  ASSERT_EQ(cmd_linearize(opts, out, err), 0) << err.str();
  EXPECT_EQ(read_matrix(dir / "out" / "linearized.dipamat").shape(), (Shape{16, 16}));

  ASSERT_EQ(cmd_reconstruct(opts, out, err), 0) << err.str();
  EXPECT_EQ(read_pgm(dir / "out" / "reconstruction.pgm").shape(), (Shape{4, 4}));

  const fs::path other = dir / "seeded";
  CommandOptions seeded{dir / "config.json", 99, other};
  ASSERT_EQ(cmd_gen_data(seeded, out, err), 0) << err.str();
  EXPECT_TRUE(fs::exists(other / "manifest.csv"));
  EXPECT_TRUE(fs::exists(other / "image_0005.pgm"));
}

TEST(Commands, ExitCodesDistinguishConfigAndRuntimeErrors) {
  const fs::path dir = scratch_dir("exit_codes");
  write_text(dir / "bad.json", R"({"unknown": true})");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_train({dir / "bad.json", std::nullopt, std::nullopt}, out, err), 1);
  EXPECT_NE(err.str().find("unknown"), std::string::npos);
  // Missing parameter file is a runtime failure.
  write_text(dir / "missing.json", R"({"image": {"height": 4, "width": 4},
    "student_operator": {"modality": "spc", "gamma": 0.5}, "teacher_operator": {"modality": "spc", "gamma": 1.0},
    "preconditioner": {"kind": "linear", "file": "nope.bin"}})");
  EXPECT_EQ(cmd_reconstruct({dir / "missing.json", std::nullopt, std::nullopt}, out, err), 2);
  // Cross-validation needs trained parameters.
  write_text(dir / "cv.json", R"({"image": {"height": 4, "width": 4},
    "student_operator": {"modality": "spc", "gamma": 0.5}, "teacher_operator": {"modality": "spc", "gamma": 1.0}, "preconditioner": {"kind": "linear"}})");
  EXPECT_EQ(cmd_crossval({dir / "cv.json", std::nullopt, std::nullopt}, out, err), 1);
}
