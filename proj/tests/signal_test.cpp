#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "sparse_diarize/signal.hpp"
#include "sparse_diarize/signal_io.hpp"

namespace sd = sparse_diarize;
namespace fs = std::filesystem;

namespace {

sd::EmbeddingSignal random_signal(std::mt19937_64& rng, Eigen::Index m, Eigen::Index t, double zero_share) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd x(m, t);
  for (Eigen::Index j = 0; j < t; ++j) {
    const bool silent = unit(rng) < zero_share;
    for (Eigen::Index i = 0; i < m; ++i) x(i, j) = silent ? 0.0 : gauss(rng);
  }
  return sd::normalize_columns(x, 0.5, 6.0);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sparse_diarize_signal_test";
  fs::create_directories(dir);
  return dir / name;
}

void put_u32(std::string& bytes, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
}

}  // namespace

TEST(ChunkGrid, OneSecondStepWhenLongEnough) {
  const auto g = sd::make_chunk_grid(3605.0, 6.0, 1.0, 3600);
  EXPECT_DOUBLE_EQ(g.step_seconds, 1.0);
  EXPECT_EQ(g.num_chunks, 3600u);
}

TEST(ChunkGrid, StepShrinksToReachMinimumChunks) {
  const auto g = sd::make_chunk_grid(1806.0, 6.0, 1.0, 3600);
  EXPECT_DOUBLE_EQ(g.step_seconds, 1800.0 / 3599.0);
  EXPECT_NEAR(g.step_seconds, 0.50014, 1e-5);
  EXPECT_EQ(g.num_chunks, 3600u);
}

TEST(ChunkGrid, BarelyLongerThanOneWindow) {
  const auto g = sd::make_chunk_grid(7.0, 6.0, 1.0, 3600);
  EXPECT_DOUBLE_EQ(g.step_seconds, 1.0 / 3599.0);
  EXPECT_EQ(g.num_chunks, 3600u);
}

TEST(ChunkGrid, RejectsAudioShorterThanWindow) {
  try {
    (void)sd::make_chunk_grid(6.0);
    FAIL() << "expected an exception";
  } catch (const sd::InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("audio shorter than one window"), std::string::npos);
  }
  EXPECT_THROW((void)sd::make_chunk_grid(3.0), sd::InvalidArgument);
}

TEST(ChunkGrid, RandomGridsRespectStepCapAndChunkFloor) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dur(6.5, 8000.0);
  std::uniform_real_distribution<double> win(0.5, 6.0);
  std::uniform_real_distribution<double> step(0.1, 2.0);
  std::uniform_int_distribution<std::size_t> chunks(1, 5000);
  for (int i = 0; i < 2000; ++i) {
    const double w = win(rng);
    const double d = w + dur(rng);
    const double s = step(rng);
    const std::size_t n = chunks(rng);
    const auto g = sd::make_chunk_grid(d, w, s, n);
    EXPECT_LE(g.step_seconds, s);
    EXPECT_GE(g.num_chunks, n) << "duration " << d << " window " << w << " step " << s;
    // The last full window fits inside the recording.
    EXPECT_LE(g.start(g.num_chunks - 1) + w, d + 1e-6 * d);
  }
}

TEST(NormalizeColumns, ThreeFourFive) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
  x(0, 0) = 3.0;
  x(1, 0) = 4.0;
  const auto s = sd::normalize_columns(x);
  EXPECT_EQ(s.data()(0, 0), 0.6f);
  EXPECT_EQ(s.data()(1, 0), 0.8f);
  EXPECT_EQ(s.data()(2, 0), 0.0f);
}

TEST(NormalizeColumns, ZeroColumnStaysZero) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
  x(0, 1) = 2.0;
  x(1, 0) = 1e-13;  // below the zero-norm threshold
  const auto s = sd::normalize_columns(x);
  EXPECT_TRUE((s.data().col(0).array() == 0.0f).all());
  EXPECT_FALSE(s.is_speech(0));
  EXPECT_TRUE(s.is_speech(1));
}

TEST(NormalizeColumns, ExactUnitColumnsUnchanged) {
  Eigen::MatrixXd x(4, 3);
  x << 1, 0, 0.5,
       0, -1, 0.5,
       0, 0, -0.5,
       0, 0, 0.5;
  const auto s = sd::normalize_columns(x);
  EXPECT_LE((s.as_double() - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NormalizeColumns, Idempotent) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto once = random_signal(rng, 16, 40, 0.2);
    const auto twice = sd::normalize_columns(once.data(), once.step_seconds(), once.window_seconds());
    EXPECT_LE((once.as_double() - twice.as_double()).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(NormalizeColumns, RejectsNonFinite) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(2, 2);
  x(1, 1) = std::nan("");
  EXPECT_THROW(sd::normalize_columns(x), sd::InvalidArgument);
}

TEST(EmbeddingSignal, EnforcesInvariants) {
  EXPECT_THROW(sd::EmbeddingSignal(sd::SignalMatrix(0, 3), 1.0), sd::InvalidArgument);
  EXPECT_THROW(sd::EmbeddingSignal(sd::SignalMatrix::Zero(2, 3), 0.0), sd::InvalidArgument);
  EXPECT_THROW(sd::EmbeddingSignal(sd::SignalMatrix::Zero(2, 3), 2.0, 1.0), sd::InvalidArgument);
  sd::SignalMatrix half = sd::SignalMatrix::Zero(2, 1);
  half(0, 0) = 0.5f;
  EXPECT_THROW(sd::EmbeddingSignal(half, 1.0), sd::InvalidArgument);
  EXPECT_NO_THROW(sd::EmbeddingSignal(sd::SignalMatrix::Zero(2, 3), 1.0));
}

TEST(SignalIo, BinaryRoundTripIsBitExact) {
  std::mt19937_64 rng(5);
  const auto s = random_signal(rng, 4, 10, 0.2);
  const auto path = scratch("roundtrip.embsig");
  sd::save_signal(s, path, sd::SignalFormat::kBinary);
  const auto back = sd::load_signal(path);
  ASSERT_EQ(back.dim(), 4);
  ASSERT_EQ(back.steps(), 10);
  EXPECT_EQ(std::memcmp(back.data().data(), s.data().data(), sizeof(float) * 40), 0);
  EXPECT_EQ(back.step_seconds(), s.step_seconds());
  EXPECT_EQ(back.window_seconds(), s.window_seconds());
}

TEST(SignalIo, BinaryLayoutIsLittleEndianColumnMajor) {
  sd::SignalMatrix m = sd::SignalMatrix::Zero(2, 2);
  m(0, 0) = 1.0f;  // column 0 = (1, 0)
  m(1, 1) = -1.0f;  // column 1 = (0, -1)
  const std::string bytes = sd::encode_signal_binary(sd::EmbeddingSignal(m, 0.25, 6.0));
  ASSERT_EQ(bytes.size(), 32u + 16u);
  EXPECT_EQ(bytes.substr(0, 8), "EMBSIG01");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2u);
  double step = 0.0;
  std::memcpy(&step, bytes.data() + 16, 8);
  EXPECT_EQ(step, 0.25);
  float second = 0.0f, fourth = 0.0f;
  std::memcpy(&second, bytes.data() + 32 + 4, 4);
  std::memcpy(&fourth, bytes.data() + 32 + 12, 4);
  EXPECT_EQ(second, 0.0f);
  EXPECT_EQ(fourth, -1.0f);
}

TEST(SignalIo, CsvRoundTripWithinTolerance) {
  std::mt19937_64 rng(6);
  const auto s = random_signal(rng, 7, 12, 0.3);
  const auto path = scratch("roundtrip.csv");
  sd::save_signal(s, path, sd::SignalFormat::kCsv);
  const auto back = sd::load_signal(path);
  EXPECT_LE((back.as_double() - s.as_double()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ(back.step_seconds(), s.step_seconds());
  const auto forced = sd::load_signal(path, sd::SignalFormat::kCsv);
  EXPECT_EQ(forced.steps(), 12);
}

TEST(SignalIo, BadMagic) {
  std::mt19937_64 rng(7);
  std::string bytes = sd::encode_signal_binary(random_signal(rng, 3, 4, 0.0));
  bytes[7] = '2';
  EXPECT_THROW(sd::decode_signal_binary(bytes), sd::BadMagicError);
}

TEST(SignalIo, TruncatedPayload) {
  std::mt19937_64 rng(8);
  // Header claims 512 x 100 but only 511 x 100 values follow.
  std::string bytes = sd::encode_signal_binary(random_signal(rng, 511, 100, 0.0));
  put_u32(bytes, 8, 512);
  EXPECT_THROW(sd::decode_signal_binary(bytes), sd::TruncatedFileError);
  EXPECT_THROW(sd::decode_signal_binary(bytes.substr(0, 20)), sd::TruncatedFileError);
}

TEST(SignalIo, PayloadLongerThanHeader) {
  std::mt19937_64 rng(9);
  std::string bytes = sd::encode_signal_binary(random_signal(rng, 4, 5, 0.0));
  put_u32(bytes, 12, 4);
  EXPECT_THROW(sd::decode_signal_binary(bytes), sd::DimensionMismatchError);
}

TEST(SignalIo, ErrorKindsAreDistinct) {
  std::mt19937_64 rng(10);
  std::string good = sd::encode_signal_binary(random_signal(rng, 2, 2, 0.0));
  std::string magic = good;
  magic[0] = 'X';
  auto kind = [](const std::string& bytes) -> std::string {
    try {
      (void)sd::decode_signal_binary(bytes);
    } catch (const sd::BadMagicError&) {
      return "magic";
    } catch (const sd::TruncatedFileError&) {
      return "truncated";
    } catch (const sd::DimensionMismatchError&) {
      return "dimension";
    }
    return "none";
  };
  EXPECT_EQ(kind(good), "none");
  EXPECT_EQ(kind(magic), "magic");
  EXPECT_EQ(kind(good.substr(0, good.size() - 1)), "truncated");
  EXPECT_EQ(kind(good + "abcd"), "dimension");
}

TEST(SignalIo, CsvErrorsCarryLineNumbers) {
  const std::string text = "M,T,step,window\n2,2,1,6\n1,0\n0,oops\n";
  try {
    (void)sd::decode_signal_csv(text);
    FAIL() << "expected a parse error";
  } catch (const sd::ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  EXPECT_THROW(sd::decode_signal_csv("M,T,step,window\n2,3,1,6\n1,0\n0,1\n"), sd::FormatError);
}

TEST(SignalIo, MissingFileIsIoError) {
  EXPECT_THROW(sd::load_signal(scratch("does-not-exist.embsig")), sd::IoError);
}

TEST(SignalIo, LoadedFileMustSatisfyInvariants) {
  sd::SignalMatrix m = sd::SignalMatrix::Zero(2, 1);
  m(0, 0) = 1.0f;
  std::string bytes = sd::encode_signal_binary(sd::EmbeddingSignal(m, 1.0));
  const float bad = 0.5f;
  std::memcpy(bytes.data() + 32, &bad, 4);
  EXPECT_THROW(sd::decode_signal_binary(bytes), sd::FormatError);
}
