#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "spinaps/fts_trainer.hpp"
#include "spinaps/glm_model.hpp"
#include "spinaps/quant_pipeline.hpp"

namespace spinaps {

/// Malformed or inconsistent input data. `position` is a byte offset for
/// binary files and a 1-based row number for text files.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " (at " + std::to_string(position) + ")"), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { Train, Test };

struct Dataset {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> features;  // raw values, [n_samples][n_features]
  std::vector<std::size_t> labels;
  Split split = Split::Train;

  std::size_t size() const { return labels.size(); }
  /// Keep the first n samples.
  void truncate(std::size_t n);
};

/// Per-feature scaling of |x| to [0,1]; fitted on a training split only.
class Normalizer {
 public:
  enum class Kind { Fixed, MinMaxMagnitude };

  /// Divide every feature by `scale` (pixels: 255).
  static Normalizer fixed(std::size_t n_features, double scale);
  /// Min-max of |x| per feature. Throws if `train` is not a training split.
  static Normalizer fit(const Dataset& train);

  LabelledSet apply(const Dataset& data) const;

  Kind kind() const { return kind_; }
  const std::vector<double>& min() const { return min_; }
  const std::vector<double>& max() const { return max_; }

 private:
  Kind kind_ = Kind::Fixed;
  std::vector<double> min_;
  std::vector<double> max_;
};

/// IDX image/label pair (plain or gzip). 0x00000803 images, 0x00000801 labels.
Dataset load_digits(const std::filesystem::path& images, const std::filesystem::path& labels, Split split);

/// Whitespace- or comma-delimited feature rows plus one label per line (1..6).
Dataset load_har(const std::filesystem::path& features, const std::filesystem::path& labels, Split split);

struct Provenance {
  std::uint64_t seed = 0;
  std::uint32_t epochs = 0;
  std::uint32_t presentation_time = 0;
  std::uint32_t window = 0;
  std::uint32_t bits = 0;  // 0 for float payloads

  bool operator==(const Provenance&) const = default;
};

/// Versioned container with either a float or a quantized payload.
struct ModelArtifact {
  static constexpr std::uint32_t kVersion = 1;

  Provenance provenance;
  std::variant<GlmModel, QuantizedModel> payload;

  bool is_quantized() const { return std::holds_alternative<QuantizedModel>(payload); }
  const GlmModel& float_model() const;
  const QuantizedModel& quantized_model() const;
};

std::string serialize_model(const ModelArtifact& artifact);
ModelArtifact deserialize_model(const std::string& bytes);
void save_model(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);

}  // namespace spinaps
