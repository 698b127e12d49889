#include "eigengp/dataio.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace eigengp {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("eigengp_dataio_" + std::string(::testing::UnitTest::GetInstance()
                                                ->current_test_info()
                                                ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string &name, const std::string &text) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  fs::path dir_;
};

TEST(Xsinx3, ClosedForms) {
  EXPECT_EQ(xsinx3(0.0), 0.0);
  EXPECT_NEAR(xsinx3(3.0), 3.0 * std::sin(27.0), 1e-15);
  EXPECT_NEAR(xsinx3(3.0), 2.8691, 1e-4);
}

TEST(Xsinx3, SizesRangeAndNoiselessTest) {
  const auto d = gen_xsinx3(200, 500, 0.5, 0.0, 3.0, 7);
  EXPECT_EQ(d.train.size(), 200);
  EXPECT_EQ(d.test.size(), 500);
  EXPECT_TRUE((d.train.X.array() >= 0.0).all() && (d.train.X.array() <= 3.0).all());
  for (Index i = 0; i < d.test.size(); ++i)
    EXPECT_EQ(d.test.y(i), xsinx3(d.test.X(i, 0)));
  EXPECT_EQ(d.train.provenance.at("seed"), 7);
  EXPECT_EQ(d.train.provenance.at("rng"), kRngName);
}

TEST(Xsinx3, NoiseLevelRecovered) {
  const auto d = gen_xsinx3(2000, 1, 0.5, 0.0, 3.0, 123);
  double ss = 0.0;
  for (Index i = 0; i < d.train.size(); ++i)
    ss += std::pow(d.train.y(i) - xsinx3(d.train.X(i, 0)), 2);
  const double sd = std::sqrt(ss / 2000.0);
  EXPECT_NEAR(sd, 0.5, 0.15 * 0.5);
}

TEST(Xsinx3, Deterministic) {
  const auto a = gen_xsinx3(50, 20, 0.5, 0.0, 3.0, 9);
  const auto b = gen_xsinx3(50, 20, 0.5, 0.0, 3.0, 9);
  const auto c = gen_xsinx3(50, 20, 0.5, 0.0, 3.0, 10);
  EXPECT_EQ(a.train.digest(), b.train.digest());
  EXPECT_EQ(a.test.digest(), b.test.digest());
  EXPECT_NE(a.train.digest(), c.train.digest());
}

TEST(Xsinx3, RejectsEmpty) { EXPECT_THROW(gen_xsinx3(0, 10), Error); }

TEST(SnelsonLike, DeterministicAndLabeledSynthetic) {
  const Dataset a = gen_snelson_like(200, 4);
  const Dataset b = gen_snelson_like(200, 4);
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(a.size(), 200);
  EXPECT_EQ(a.provenance.at("synthetic"), true);
  EXPECT_TRUE((a.X.array() >= 0.0).all() && (a.X.array() <= 6.0).all());
}

TEST_F(TempDir, LoadColumns) {
  const auto x = write("x.txt", "1\n2\n3\n");
  const auto y = write("y.txt", "4\r\n5\r\n6\r\n");
  const Dataset d = load_columns(x, y);
  ASSERT_EQ(d.size(), 3);
  ASSERT_EQ(d.dim(), 1);
  for (Index i = 0; i < 3; ++i) {
    EXPECT_EQ(d.X(i, 0), static_cast<double>(i + 1));
    EXPECT_EQ(d.y(i), static_cast<double>(i + 4));
  }
  EXPECT_EQ(d.provenance.at("inputs_sha256").get<std::string>().size(), 64u);
}

TEST_F(TempDir, LoadColumnsReportsLine) {
  const auto x = write("x.txt", "1\n2\nfoo\n");
  const auto y = write("y.txt", "4\n5\n6\n");
  try {
    load_columns(x, y);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::FileFormatError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST_F(TempDir, CsvTargetByName) {
  const auto p = write("d.csv", "a,b,t,c\n1,2,3,4\n5,6,7,8\n");
  const Dataset d = load_csv(p, {.target = "t"});
  EXPECT_EQ(d.X.rows(), 2);
  EXPECT_EQ(d.X.cols(), 3);
  EXPECT_EQ(d.y(1), 7.0);
  EXPECT_EQ(d.X(1, 2), 8.0);
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(d.provenance.at("sha256"), file_sha256(p));
}

TEST_F(TempDir, CsvNegativeIndexIsLastColumn) {
  const auto p = write("d.csv", "a,b,c\n1,2,3\n4,5,6\n");
  const Dataset d = load_csv(p, {.target = "-1"});
  EXPECT_EQ(d.y(0), 3.0);
  EXPECT_EQ(d.y(1), 6.0);
  EXPECT_EQ(d.X(1, 1), 5.0);
}

TEST_F(TempDir, CsvNonNumericCellCitesRow) {
  std::string text = "a,b\n";
  for (int r = 1; r <= 9; ++r)
    text += (r == 7 ? std::string("abc") : std::to_string(r)) + "," + std::to_string(r) + "\n";
  const auto p = write("d.csv", text);
  try {
    load_csv(p);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonNumericCell);
    EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos) << e.what();
  }
}

TEST_F(TempDir, CsvMissingTarget) {
  const auto p = write("d.csv", "a,b\n1,2\n");
  try {
    load_csv(p, {.target = "zz"});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingTarget);
  }
}

TEST_F(TempDir, CsvNoHeaderAndDelimiter) {
  const auto p = write("d.csv", "1;2\n3;4\n");
  const Dataset d = load_csv(p, {.target = "0", .delimiter = ';', .header = false});
  EXPECT_EQ(d.size(), 2);
  EXPECT_EQ(d.y(1), 3.0);
  EXPECT_EQ(d.X(1, 0), 4.0);
}

TEST(Csv, QuotedFields) {
  const auto r = parse_csv("\"a,1\",\"say \"\"hi\"\"\"\r\nx,y");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0][0], "a,1");
  EXPECT_EQ(r[0][1], "say \"hi\"");
  EXPECT_EQ(r[1][1], "y");
  EXPECT_THROW(parse_csv("\"open"), Error);
}

Dataset index_dataset(Index n) {
  Dataset d;
  d.X.resize(n, 1);
  d.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    d.X(i, 0) = static_cast<double>(i);
    d.y(i) = static_cast<double>(i);
  }
  return d;
}

TEST(Split, ExactCounts) {
  const auto s = split_counts(index_dataset(20640), 10000, 10640, 1);
  EXPECT_EQ(s.train.size(), 10000);
  EXPECT_EQ(s.test.size(), 10640);
  std::set<double> seen;
  for (Index i = 0; i < s.train.size(); ++i)
    seen.insert(s.train.y(i));
  for (Index i = 0; i < s.test.size(); ++i)
    seen.insert(s.test.y(i));
  EXPECT_EQ(seen.size(), 20640u);
  EXPECT_EQ(s.train.provenance.at("split").at("test_digest"), s.test.digest());
}

TEST(Split, CountsExceedN) {
  try {
    split_counts(index_dataset(10), 6, 5, 0);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::CountsExceedN);
  }
}

TEST(Split, FullFractionWarns) {
  const auto s = split_fraction(index_dataset(10), 1.0, 0);
  EXPECT_EQ(s.train.size(), 10);
  EXPECT_EQ(s.test.size(), 0);
  EXPECT_EQ(s.warnings.size(), 1u);
}

TEST(Split, SeedDeterminism) {
  const Dataset d = index_dataset(100);
  const auto a = split_fraction(d, 0.5, 3);
  const auto b = split_fraction(d, 0.5, 3);
  const auto c = split_fraction(d, 0.5, 4);
  EXPECT_TRUE(a.train.y == b.train.y);
  EXPECT_FALSE(a.train.y == c.train.y);
}

TEST(Standardizer, TrainTargetMoments) {
  const auto d = gen_xsinx3(200, 5, 0.5, 0.0, 3.0, 2).train;
  const Standardizer s = Standardizer::fit(d);
  const Vector z = s.apply_targets(d.y);
  EXPECT_NEAR(z.mean(), 0.0, 1e-10);
  EXPECT_NEAR(std::sqrt(z.squaredNorm() / 200.0), 1.0, 1e-10);
}

TEST(Standardizer, InvertRoundTrip) {
  const auto d = gen_xsinx3(50, 5, 0.5, 0.0, 3.0, 2).train;
  const Standardizer s = Standardizer::fit(d);
  PredictiveDistribution p;
  p.mean = d.y;
  p.variance = Vector::Constant(50, 0.3);
  PredictiveDistribution z;
  z.mean = s.apply_targets(p.mean);
  z.variance = p.variance / (s.target_scale() * s.target_scale());
  const auto back = s.invert(z);
  EXPECT_LE((back.mean - p.mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((back.variance - p.variance).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Standardizer, ConstantColumn) {
  Dataset d;
  d.X.resize(4, 2);
  d.X << 1, 5, 2, 5, 3, 5, 4, 5;
  d.y = Vector::LinSpaced(4, 0.0, 1.0);
  const Standardizer s = Standardizer::fit(d);
  EXPECT_EQ(s.feature_scale()(1), 1.0);
  EXPECT_TRUE(s.constant_features()[1]);
  EXPECT_FALSE(s.constant_features()[0]);
  EXPECT_TRUE(s.apply_inputs(d.X).allFinite());
}

TEST(Standardizer, NotFittedAndJson) {
  Standardizer empty;
  try {
    empty.apply_targets(Vector::Zero(2));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotFitted);
  }
  const auto d = gen_xsinx3(20, 5, 0.5, 0.0, 3.0, 1).train;
  const Standardizer s = Standardizer::fit(d);
  const Standardizer r = Standardizer::from_json(s.to_json());
  EXPECT_EQ(r.target_mean(), s.target_mean());
  EXPECT_EQ(r.target_scale(), s.target_scale());
  EXPECT_TRUE(r.feature_scale() == s.feature_scale());
  EXPECT_EQ(r.fitted_on(), d.digest());
}

} // namespace
} // namespace eigengp
