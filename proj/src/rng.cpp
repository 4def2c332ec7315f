#include "lta/rng.hpp"

#include <cmath>
#include <limits>

#include "lta/error.hpp"

namespace lta {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyDataset: return "empty_dataset";
    case ErrorCode::kUnknownLabel: return "unknown_label";
    case ErrorCode::kNonContiguous: return "non_contiguous";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kFeatureShape: return "feature_shape";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kModelMismatch: return "model_mismatch";
    case ErrorCode::kCorruptCheckpoint: return "corrupt_checkpoint";
    case ErrorCode::kMissingFile: return "missing_file";
    case ErrorCode::kOutputExists: return "output_exists";
    case ErrorCode::kEmptyEvaluation: return "empty_evaluation";
  }
  return "unknown";
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(engine_());
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return lo + static_cast<std::int64_t>(x % span);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::int64_t Rng::geometric(double p) {
  if (p >= 1.0) return 1;
  double u = uniform();
  while (u <= 0.0) u = uniform();
  const double k = std::ceil(std::log(u) / std::log1p(-p));
  if (!(k < 4.0e18)) return std::numeric_limits<std::int64_t>::max() / 4;
  return k < 1.0 ? 1 : static_cast<std::int64_t>(k);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(root ^ splitmix64(h));
}

}  // namespace lta
