#include "spinaps/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "binary_io.hpp"

namespace spinaps {

namespace {

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;
constexpr char kModelMagic[8] = {'S', 'P', 'N', 'M', 'O', 'D', 'E', 'L'};

// gzread passes uncompressed files through unchanged.
std::string read_maybe_gz(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw DataError("cannot open " + path.string(), 0);
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  int err = 0;
  const char* msg = gzerror(f, &err);
  const std::string message = msg ? msg : "";
  gzclose(f);
  if (n < 0 || (err != Z_OK && err != Z_STREAM_END)) {
    throw DataError("read error in " + path.string() + ": " + message, out.size());
  }
  return out;
}

std::uint32_t be32(const std::string& buf, std::size_t pos, const std::string& what) {
  if (pos + 4 > buf.size()) throw DataError(what + ": truncated header", buf.size());
  std::uint32_t v = 0;
  for (std::size_t k = 0; k < 4; ++k) v = (v << 8) | static_cast<std::uint8_t>(buf[pos + k]);
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t k = 0;
  auto sep = [](char c) { return c == ' ' || c == '\t' || c == ',' || c == '\r'; };
  while (k < line.size()) {
    while (k < line.size() && sep(line[k])) ++k;
    const std::size_t start = k;
    while (k < line.size() && !sep(line[k])) ++k;
    if (k > start) out.push_back(line.substr(start, k - start));
  }
  return out;
}

double parse_double(std::string_view s, std::size_t row) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw DataError("not a finite number: '" + std::string(s) + "'", row);
  }
  return v;
}

std::uint32_t crc32_of(const std::string& bytes, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(n)));
}

}  // namespace

void Dataset::truncate(std::size_t n) {
  if (n >= size()) return;
  labels.resize(n);
  features.resize(n * n_features);
}

Normalizer Normalizer::fixed(std::size_t n_features, double scale) {
  if (!(scale > 0)) throw std::invalid_argument("normalizer: scale must be positive");
  Normalizer n;
  n.kind_ = Kind::Fixed;
  n.min_.assign(n_features, 0.0);
  n.max_.assign(n_features, scale);
  return n;
}

Normalizer Normalizer::fit(const Dataset& train) {
  if (train.split != Split::Train) throw std::invalid_argument("normalizer: statistics come from the training split");
  if (train.size() == 0) throw std::invalid_argument("normalizer: empty training split");
  Normalizer n;
  n.kind_ = Kind::MinMaxMagnitude;
  n.min_.assign(train.n_features, std::numeric_limits<double>::infinity());
  n.max_.assign(train.n_features, 0.0);
  for (std::size_t s = 0; s < train.size(); ++s) {
    for (std::size_t f = 0; f < train.n_features; ++f) {
      const double a = std::abs(train.features[s * train.n_features + f]);
      n.min_[f] = std::min(n.min_[f], a);
      n.max_[f] = std::max(n.max_[f], a);
    }
  }
  return n;
}

LabelledSet Normalizer::apply(const Dataset& data) const {
  if (data.n_features != min_.size()) throw DimensionError("normalizer: feature count mismatch");
  LabelledSet out;
  out.n_features = data.n_features;
  out.n_classes = data.n_classes;
  out.labels = data.labels;
  out.features.resize(data.features.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    for (std::size_t f = 0; f < data.n_features; ++f) {
      const double x = data.features[s * data.n_features + f];
      const double range = max_[f] - min_[f];
      double mag = range > 0 ? (std::abs(x) - min_[f]) / range : 0.0;
      mag = std::clamp(mag, 0.0, 1.0);
      out.features[s * data.n_features + f] = x < 0 ? -mag : mag;
    }
  }
  return out;
}

Dataset load_digits(const std::filesystem::path& images, const std::filesystem::path& labels, Split split) {
  const std::string img = read_maybe_gz(images);
  const std::string lab = read_maybe_gz(labels);

  if (be32(img, 0, "images") != kIdxImages) throw DataError(images.string() + ": bad IDX image magic", 0);
  if (be32(lab, 0, "labels") != kIdxLabels) throw DataError(labels.string() + ": bad IDX label magic", 0);
  const std::size_t count = be32(img, 4, "images");
  const std::size_t rows = be32(img, 8, "images");
  const std::size_t cols = be32(img, 12, "images");
  const std::size_t label_count = be32(lab, 4, "labels");
  if (count != label_count) {
    throw DataError("image count " + std::to_string(count) + " != label count " + std::to_string(label_count), 4);
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) throw DataError(images.string() + ": truncated image data", img.size());
  if (lab.size() < 8 + count) throw DataError(labels.string() + ": truncated label data", lab.size());

  Dataset d;
  d.split = split;
  d.n_features = pixels;
  d.n_classes = 10;
  d.features.resize(count * pixels);
  d.labels.resize(count);
  for (std::size_t k = 0; k < count * pixels; ++k) d.features[k] = static_cast<std::uint8_t>(img[16 + k]);
  for (std::size_t s = 0; s < count; ++s) {
    const auto v = static_cast<std::uint8_t>(lab[8 + s]);
    if (v >= 10) throw DataError("label " + std::to_string(v) + " out of range", 8 + s);
    d.labels[s] = v;
  }
  return d;
}

Dataset load_har(const std::filesystem::path& features, const std::filesystem::path& labels, Split split) {
  std::ifstream fin(features);
  if (!fin) throw DataError("cannot open " + features.string(), 0);
  std::ifstream lin(labels);
  if (!lin) throw DataError("cannot open " + labels.string(), 0);

  Dataset d;
  d.split = split;
  d.n_classes = 6;
  std::string line;
  std::size_t row = 0;
  while (std::getline(fin, line)) {
    ++row;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (d.n_features == 0) d.n_features = fields.size();
    if (fields.size() != d.n_features) {
      throw DataError(features.string() + ": row has " + std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(d.n_features),
                      row);
    }
    for (auto f : fields) d.features.push_back(parse_double(f, row));
  }
  row = 0;
  while (std::getline(lin, line)) {
    ++row;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 1) throw DataError(labels.string() + ": expected one label per row", row);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), v);
    if (ec != std::errc() || ptr != fields[0].data() + fields[0].size() || v < 1 || v > 6) {
      throw DataError(labels.string() + ": unknown activity label '" + std::string(fields[0]) + "'", row);
    }
    d.labels.push_back(static_cast<std::size_t>(v - 1));
  }
  if (d.n_features == 0 || d.labels.size() * d.n_features != d.features.size()) {
    throw DataError("feature rows (" + std::to_string(d.n_features ? d.features.size() / d.n_features : 0) +
                        ") and labels (" + std::to_string(d.labels.size()) + ") disagree",
                    row);
  }
  return d;
}

const GlmModel& ModelArtifact::float_model() const {
  if (is_quantized()) throw ArtifactError("artifact holds a quantized model");
  return std::get<GlmModel>(payload);
}

const QuantizedModel& ModelArtifact::quantized_model() const {
  if (!is_quantized()) throw ArtifactError("artifact holds a float model");
  return std::get<QuantizedModel>(payload);
}

std::string serialize_model(const ModelArtifact& artifact) {
  std::string buf;
  detail::ByteWriter w(buf);
  w.bytes(kModelMagic, sizeof kModelMagic);
  w.u32(ModelArtifact::kVersion);
  w.u8(artifact.is_quantized() ? 1 : 0);
  const auto& p = artifact.provenance;
  w.u64(p.seed);
  w.u32(p.epochs);
  w.u32(p.presentation_time);
  w.u32(p.window);
  w.u32(p.bits);
  if (!artifact.is_quantized()) {
    const auto& m = artifact.float_model();
    m.validate();
    w.u32(static_cast<std::uint32_t>(m.n_inputs));
    w.u32(static_cast<std::uint32_t>(m.n_outputs));
    w.u32(static_cast<std::uint32_t>(m.presentation_time));
    w.u32(static_cast<std::uint32_t>(m.window));
    w.u32(static_cast<std::uint32_t>(m.n_basis()));
    for (std::size_t d = 0; d < m.basis.tau(); ++d) {
      for (std::size_t k = 0; k < m.n_basis(); ++k) w.u8(m.basis.at(d, k));
    }
    for (double v : m.weights) w.f64(v);
    for (double v : m.biases) w.f64(v);
  } else {
    const auto& q = artifact.quantized_model();
    q.validate();
    w.u32(static_cast<std::uint32_t>(q.bits));
    w.u32(static_cast<std::uint32_t>(q.n_inputs));
    w.u32(static_cast<std::uint32_t>(q.n_outputs));
    w.u32(static_cast<std::uint32_t>(q.presentation_time));
    w.u32(static_cast<std::uint32_t>(q.window));
    w.u8(q.degenerate ? 1 : 0);
    for (double v : {q.weight_step, q.bias_step, q.weight_min, q.weight_max, q.bias_min, q.bias_max}) w.f64(v);
    for (auto c : q.weight_codes) w.i32(c);
    for (auto c : q.bias_codes) w.i32(c);
  }
  w.u32(crc32_of(buf, buf.size()));
  return buf;
}

ModelArtifact deserialize_model(const std::string& bytes) {
  if (bytes.size() < sizeof kModelMagic + 8) throw ArtifactError("artifact: file too short");
  const std::size_t body = bytes.size() - 4;
  detail::ByteReader trailer(bytes, body);
  if (trailer.u32() != crc32_of(bytes, body)) throw ArtifactError("artifact: checksum mismatch");

  const std::string content = bytes.substr(0, body);
  detail::ByteReader r(content);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (!std::equal(magic, magic + 8, kModelMagic)) throw ArtifactError("artifact: bad magic");
  if (const auto v = r.u32(); v != ModelArtifact::kVersion) {
    throw ArtifactError("artifact: version " + std::to_string(v) + " not supported (expected " +
                        std::to_string(ModelArtifact::kVersion) + ")");
  }
  try {
    const bool quantized = r.u8() != 0;
    ModelArtifact a;
    a.provenance.seed = r.u64();
    a.provenance.epochs = r.u32();
    a.provenance.presentation_time = r.u32();
    a.provenance.window = r.u32();
    a.provenance.bits = r.u32();
    if (!quantized) {
      GlmModel m;
      m.n_inputs = r.u32();
      m.n_outputs = r.u32();
      m.presentation_time = r.u32();
      m.window = r.u32();
      const std::size_t n_basis = r.u32();
      if (m.window * n_basis > r.remaining()) throw ArtifactError("artifact: basis larger than file");
      std::vector<std::uint8_t> bits(m.window * n_basis);
      for (auto& b : bits) b = r.u8();
      m.basis = Basis(m.window, n_basis, std::move(bits));
      const std::size_t nw = m.n_inputs * m.n_outputs * n_basis;
      if (nw > r.remaining() / 8) throw ArtifactError("artifact: weight tensor larger than file");
      m.weights.resize(nw);
      for (auto& v : m.weights) v = r.f64();
      m.biases.resize(m.n_outputs);
      for (auto& v : m.biases) v = r.f64();
      m.validate();
      a.payload = std::move(m);
    } else {
      QuantizedModel q;
      q.bits = static_cast<int>(r.u32());
      q.n_inputs = r.u32();
      q.n_outputs = r.u32();
      q.presentation_time = r.u32();
      q.window = r.u32();
      q.degenerate = r.u8() != 0;
      q.weight_step = r.f64();
      q.bias_step = r.f64();
      q.weight_min = r.f64();
      q.weight_max = r.f64();
      q.bias_min = r.f64();
      q.bias_max = r.f64();
      const std::size_t nw = q.n_inputs * q.n_outputs * q.window;
      if (nw > r.remaining() / 4) throw ArtifactError("artifact: code tensor larger than file");
      q.weight_codes.resize(nw);
      for (auto& c : q.weight_codes) c = r.i32();
      q.bias_codes.resize(q.n_outputs);
      for (auto& c : q.bias_codes) c = r.i32();
      q.validate();
      a.payload = std::move(q);
    }
    if (r.remaining() != 0) throw ArtifactError("artifact: trailing bytes");
    return a;
  } catch (const ArtifactError&) {
    throw;
  } catch (const std::exception& e) {
    throw ArtifactError(std::string("artifact: ") + e.what());
  }
}

void save_model(const ModelArtifact& artifact, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(artifact);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArtifactError("write failed for " + path.string());
}

ModelArtifact load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path.string());
  return deserialize_model(detail::slurp(in));
}

}  // namespace spinaps
