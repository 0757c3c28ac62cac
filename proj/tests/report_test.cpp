#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "ssht/report.hpp"
#include "test_support.hpp"

namespace ssht {
namespace {

namespace fs = std::filesystem;
using testing::small_config;
using testing::small_model;
using testing::small_task;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("ssht_report_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

const RunReport& cdl_report() {
  static const RunReport r = adapt(small_model(), small_task(), small_config(Method::kCdl)).report;
  return r;
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-300, -7.0, 0.0})
    EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(0.25), "0.25");
}

TEST(Report, WriteReadWriteIsIdempotent) {
  TempDir dir;
  const fs::path p = dir.path() / "run.json";
  write_report(cdl_report(), p);
  const std::string first = read_file(p);
  const RunReport back = read_report(p);
  write_report(back, dir.path() / "again.json");
  EXPECT_EQ(read_file(dir.path() / "again.json"), first);
  EXPECT_EQ(read_file(dir.path() / "again.csv"), read_file(dir.path() / "run.csv"));
  EXPECT_EQ(back.model_fingerprint, cdl_report().model_fingerprint);
  EXPECT_EQ(back.final_eval, cdl_report().final_eval);
}

TEST(Report, CsvHasOneRowPerEpoch) {
  const std::string csv = epoch_csv(cdl_report());
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,l_c,l_u,l_d,total,mask_rate,test_acc,diversity_ratio");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, cdl_report().epochs.size());
  EXPECT_EQ(rows, 3u);
}

TEST(Report, TotalsResumFromComponents) {
  for (Method m : {Method::kCdl, Method::kCdlNoDl, Method::kCdlNoCl, Method::kSPlusT, Method::kEnt}) {
    const AdaptConfig cfg = small_config(m);
    const RunReport r = adapt(small_model(), small_task(), cfg).report;
    ASSERT_TRUE(r.ok()) << r.status;
    for (const auto& e : r.epochs) {
      EXPECT_NEAR(e.total, e.l_c + cfg.lambda_u * e.l_u + cfg.lambda_d * e.l_d, 1e-9)
          << to_string(m) << " epoch " << e.epoch;
      if (!cfg.uses_diversity()) {
        EXPECT_EQ(e.l_d, 0.0);
      }
      if (!cfg.uses_unlabeled()) {
        EXPECT_EQ(e.l_u, 0.0);
      }
    }
  }
}

TEST(Report, RejectsUnknownVersion) {
  auto doc = nlohmann::json::parse(serialize_report(cdl_report()));
  doc["format"] = "ssht-report/2";
  EXPECT_THROW(deserialize_report(doc.dump()), ParseError);
  EXPECT_THROW(deserialize_report("{not json"), ParseError);
}

TEST(Report, ConfigRoundTripKeepsExplicitPolicy) {
  RunReport r = cdl_report();
  AugmentPolicy p = default_augment_policy(DomainShiftSpec{});
  p.strong_pool = {StrongOp::kCoordinateDropout};
  r.config.augment = p;
  const RunReport back = deserialize_report(serialize_report(r));
  ASSERT_TRUE(back.config.augment.has_value());
  EXPECT_EQ(back.config.augment->strong_pool, p.strong_pool);
  EXPECT_EQ(back.config.augment->scale_hi, p.scale_hi);
}

TEST(Report, SidecarPath) {
  EXPECT_EQ(csv_sidecar("out/run.json"), fs::path("out/run.csv"));
  EXPECT_EQ(csv_sidecar("run"), fs::path("run.csv"));
}

TEST(AblationCsv, EscapesStatus) {
  AblationTable t;
  AblationCell c;
  c.method = Method::kSPlusT;
  c.seed = 3;
  c.error = "bad, very\nbad";
  t.cells.push_back(c);
  const std::string csv = ablation_csv(t);
  EXPECT_NE(csv.find("s_plus_t,3,0,0,0,0,,bad; very;bad\n"), std::string::npos) << csv;
}

}  // namespace
}  // namespace ssht
