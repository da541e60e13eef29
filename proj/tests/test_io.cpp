#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <functional>
#include <fstream>
#include <random>

#include "support/fd.hpp"
#include "topoloc/error.hpp"
#include "topoloc/io.hpp"

using namespace topoloc;
using topoloc::testing::random_vec;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("topoloc_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
  }
  fs::path dir_;
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_F(IoTest, TdmRoundTripIsBitExact) {
  DepthImage d(7, 5);
  std::mt19937 rng(1);
  for (auto& v : d.data()) v = std::uniform_real_distribution<float>(0, 100)(rng);
  d.at(3, 2) = kNoDepth;
  io::write_tdm(dir_ / "a.tdm", d);
  EXPECT_EQ(io::read_tdm(dir_ / "a.tdm"), d);
  EXPECT_EQ(fs::file_size(dir_ / "a.tdm"), 12u + 7 * 5 * 4);
}

TEST_F(IoTest, TdmRejectsBadMagicAndTruncation) {
  write(dir_ / "bad.tdm", "XXXX\x01\0\0\0\x01\0\0\0abcd");
  EXPECT_EQ(code_of([&] { io::read_tdm(dir_ / "bad.tdm"); }), ErrorCode::FormatVersionMismatch);
  io::write_tdm(dir_ / "t.tdm", DepthImage(4, 4, 1.0f));
  fs::resize_file(dir_ / "t.tdm", 30);
  EXPECT_EQ(code_of([&] { io::read_tdm(dir_ / "t.tdm"); }), ErrorCode::ChecksumMismatch);
  EXPECT_EQ(code_of([&] { io::read_tdm(dir_ / "missing.tdm"); }), ErrorCode::IoError);
}

TEST_F(IoTest, PgmRoundTrip) {
  IntensityImage img(9, 4);
  for (size_t i = 0; i < img.data().size(); ++i) img.data()[i] = static_cast<std::uint8_t>(i * 7);
  io::write_pgm(dir_ / "a.pgm", img);
  EXPECT_EQ(io::read_pgm(dir_ / "a.pgm"), img);
}

TEST_F(IoTest, PgmAcceptsHeaderComments) {
  write(dir_ / "c.pgm", std::string("P5\n# made by hand\n2 1\n255\n") + "\x10\x20");
  const IntensityImage img = io::read_pgm(dir_ / "c.pgm");
  ASSERT_EQ(img.width(), 2);
  EXPECT_EQ(img.at(1, 0), 0x20);
  write(dir_ / "p2.pgm", "P2\n2 1\n255\n1 2\n");
  EXPECT_EQ(code_of([&] { io::read_pgm(dir_ / "p2.pgm"); }), ErrorCode::FormatVersionMismatch);
}

TEST_F(IoTest, TumRoundTripWithinPrintedPrecision) {
  std::mt19937_64 rng(2);
  std::vector<StampedPose> poses;
  for (int i = 0; i < 20; ++i) poses.push_back({0.05 * i + 1000.0, {so3_exp(random_vec(rng, 2)), random_vec(rng, 100)}});
  io::write_tum(dir_ / "a.tum", poses);
  const auto back = io::read_tum(dir_ / "a.tum");
  ASSERT_EQ(back.size(), poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    EXPECT_NEAR(back[i].timestamp, poses[i].timestamp, 1e-6);
    EXPECT_LT((back[i].pose.translation - poses[i].pose.translation).norm(), 1e-8);
    EXPECT_LT(so3_log(back[i].pose.rotation.inverse() * poses[i].pose.rotation).norm(), 1e-11);
  }
  // Writing what was read reproduces the file byte for byte.
  io::write_tum(dir_ / "b.tum", back);
  std::ifstream a(dir_ / "a.tum"), b(dir_ / "b.tum");
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST_F(IoTest, TumSkipsCommentsAndRejectsShortLines) {
  write(dir_ / "c.tum", "# header\n\n1.0 1 2 3 0 0 0 1\n");
  const auto p = io::read_tum(dir_ / "c.tum");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].pose.translation, Vec3(1, 2, 3));
  write(dir_ / "s.tum", "1.0 1 2 3 0 0\n");
  EXPECT_EQ(code_of([&] { io::read_tum(dir_ / "s.tum"); }), ErrorCode::ParseError);
}

TEST_F(IoTest, ImuAndSpeedCsvRoundTripExactly) {
  std::mt19937_64 rng(3);
  std::vector<ImuSample> imu;
  for (int i = 0; i < 50; ++i) imu.push_back({0.005 * i, random_vec(rng, 20), random_vec(rng, 3)});
  io::write_imu_csv(dir_ / "imu.csv", imu);
  const auto back = io::read_imu_csv(dir_ / "imu.csv");
  ASSERT_EQ(back.size(), imu.size());
  for (size_t i = 0; i < imu.size(); ++i) {
    EXPECT_EQ(back[i].acc, imu[i].acc);
    EXPECT_EQ(back[i].gyro, imu[i].gyro);
  }
  std::vector<SpeedSample> sp{{0.0, 10.0}, {0.1, -1.0 / 3.0}};
  io::write_speed_csv(dir_ / "speed.csv", sp);
  const auto sb = io::read_speed_csv(dir_ / "speed.csv");
  ASSERT_EQ(sb.size(), 2u);
  EXPECT_EQ(sb[1].vx, sp[1].vx);
}

TEST_F(IoTest, CsvReportsBadFieldsWithLocation) {
  write(dir_ / "bad.csv", "timestamp,vx\n0.0,1.0\n0.1,abc\n");
  try {
    io::read_speed_csv(dir_ / "bad.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos);
  }
  write(dir_ / "cols.csv", "0.0,1.0,2.0\n");
  EXPECT_EQ(code_of([&] { io::read_speed_csv(dir_ / "cols.csv"); }), ErrorCode::ParseError);
}

TEST_F(IoTest, CorrespondenceCsvKeepsNodeId) {
  io::RecordedMatches m;
  m.node_id = 17;
  m.pairs = {{{1.5, 2.25}, {3.0, 4.125}}, {{100.0 / 3, 0.1}, {5, 6}}};
  io::write_correspondence_csv(dir_ / "7.csv", m);
  const auto back = io::read_correspondence_csv(dir_ / "7.csv");
  EXPECT_EQ(back.node_id, 17);
  ASSERT_EQ(back.pairs.size(), 2u);
  EXPECT_EQ(back.pairs[1].current.u, 100.0 / 3);
  EXPECT_EQ(back.pairs[0].node.v, 4.125);

  io::write_correspondence_csv(dir_ / "none.csv", {});
  const auto empty = io::read_correspondence_csv(dir_ / "none.csv");
  EXPECT_EQ(empty.node_id, -1);
  EXPECT_TRUE(empty.pairs.empty());
}

TEST_F(IoTest, FramesCsvWithAndWithoutPoses) {
  const Pose p{so3_exp(Vec3(0.1, -0.2, 0.3)), Vec3(1, 2, 3)};
  io::write_frames_csv(dir_ / "frames.csv", {{0, 0.5, p}, {1, 0.6, std::nullopt}});
  const auto back = io::read_frames_csv(dir_ / "frames.csv");
  ASSERT_EQ(back.size(), 2u);
  ASSERT_TRUE(back[0].true_pose.has_value());
  EXPECT_EQ(back[0].true_pose->translation, p.translation);
  EXPECT_FALSE(back[1].true_pose.has_value());
  EXPECT_EQ(back[1].index, 1);
  write(dir_ / "odd.csv", "0,0.5,1,2\n");
  EXPECT_EQ(code_of([&] { io::read_frames_csv(dir_ / "odd.csv"); }), ErrorCode::ParseError);
}

TEST_F(IoTest, PlyBinaryRoundTrip) {
  PointCloud cloud;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) cloud.push_back({random_vec(rng, 50), static_cast<double>(i * 2)});
  io::write_ply(dir_ / "c.ply", cloud);
  const PointCloud back = io::read_ply(dir_ / "c.ply");
  ASSERT_EQ(back.size(), cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_EQ(back[i].position, cloud[i].position);
    EXPECT_EQ(back[i].intensity, cloud[i].intensity);
  }
}

TEST_F(IoTest, PlyAsciiAndFloatBinary) {
  write(dir_ / "a.ply",
        "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
        "property uchar intensity\nend_header\n1 2 3 10\n-1.5 0 4 200\n");
  const PointCloud a = io::read_ply(dir_ / "a.ply");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[1].position, Vec3(-1.5, 0, 4));
  EXPECT_EQ(a[1].intensity, 200);

  std::string bin =
      "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
      "property float z\nproperty float intensity\nend_header\n";
  const float vals[4] = {0.5f, -2.0f, 8.0f, 33.0f};
  bin.append(reinterpret_cast<const char*>(vals), sizeof vals);
  write(dir_ / "b.ply", bin);
  const PointCloud b = io::read_ply(dir_ / "b.ply");
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].position, Vec3(0.5, -2, 8));
  EXPECT_EQ(b[0].intensity, 33.0);
}

TEST_F(IoTest, PlyErrors) {
  write(dir_ / "n.ply", "not a ply\n");
  EXPECT_EQ(code_of([&] { io::read_ply(dir_ / "n.ply"); }), ErrorCode::ParseError);
  write(dir_ / "t.ply",
        "ply\nformat binary_little_endian 1.0\nelement vertex 5\nproperty double x\nproperty double y\n"
        "property double z\nend_header\nabc");
  EXPECT_EQ(code_of([&] { io::read_ply(dir_ / "t.ply"); }), ErrorCode::ParseError);
  write(dir_ / "nz.ply", "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n");
  EXPECT_EQ(code_of([&] { io::read_ply(dir_ / "nz.ply"); }), ErrorCode::ParseError);
}

TEST_F(IoTest, IntrinsicsJson) {
  const CameraIntrinsics intr{400, 410, 320.5, 240.25, 640, 480};
  io::write_intrinsics_json(dir_ / "i.json", intr);
  const CameraIntrinsics back = io::read_intrinsics_json(dir_ / "i.json");
  EXPECT_EQ(back.fy, 410);
  EXPECT_EQ(back.cx, 320.5);
  EXPECT_EQ(back.height, 480);
  write(dir_ / "bad.json", R"({"fx": 1})");
  EXPECT_EQ(code_of([&] { io::read_intrinsics_json(dir_ / "bad.json"); }), ErrorCode::ParseError);
}
