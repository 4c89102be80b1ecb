#include "lipcert/network.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "lipcert/errors.hpp"
#include "lipcert/rng.hpp"
#include "lipcert/spectral.hpp"

namespace lipcert {

ActivationBounds::ActivationBounds(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ValueError("activation bounds must be finite");
  if (!(alpha < beta)) throw ValueError("activation bounds need alpha < beta");
}

namespace {
std::string layer_tag(std::size_t i) { return "layer " + std::to_string(i + 1) + ": "; }
}  // namespace

Network::Network(std::vector<LayerWeights> layers, ActivationBounds activation)
    : layers_(std::move(layers)), activation_(activation) {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& [W, b] = layers_[i];
    if (W.rows() == 0 || W.cols() == 0) throw ShapeError(layer_tag(i) + "empty weight matrix");
    if (b.size() != W.rows())
      throw ShapeError(layer_tag(i) + "bias length " + std::to_string(b.size()) + " does not match " +
                       std::to_string(W.rows()) + " rows");
    if (i > 0 && W.cols() != layers_[i - 1].W.rows())
      throw ShapeError(layer_tag(i) + "expects " + std::to_string(W.cols()) + " inputs but layer " +
                       std::to_string(i) + " has " + std::to_string(layers_[i - 1].W.rows()) + " outputs");
    if (!W.all_finite()) throw ValueError(layer_tag(i) + "non-finite weight");
    for (double v : b)
      if (!std::isfinite(v)) throw ValueError(layer_tag(i) + "non-finite bias");
    if (W.is_zero()) throw ValueError(layer_tag(i) + "weight matrix is all zero");
  }
}

std::vector<std::size_t> Network::dims() const {
  std::vector<std::size_t> d{input_dim()};
  for (const auto& layer : layers_) d.push_back(layer.W.rows());
  return d;
}

std::size_t Network::monolithic_dim() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) total += layer.W.cols();
  return total;
}

Network Network::slice(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > layers_.size()) throw ArgumentError("network slice out of range");
  return Network({layers_.begin() + first, layers_.begin() + first + count}, activation_);
}

NetFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".json" ? NetFormat::json : NetFormat::ecl_binary;
}

// JSON -----------------------------------------------------------------------

nlohmann::json network_to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < layer.W.rows(); ++i) {
      const auto r = layer.W.row(i);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    layers.push_back({{"W", rows}, {"b", layer.b}});
  }
  return {{"activation", {{"alpha", net.activation().alpha()}, {"beta", net.activation().beta()}}},
          {"layers", layers}};
}

Network network_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw ParseError("network JSON must be an object");
    ActivationBounds act = ActivationBounds::relu();
    if (j.contains("activation")) {
      const auto& a = j.at("activation");
      act = ActivationBounds(a.at("alpha").get<double>(), a.at("beta").get<double>());
    }
    const auto& jl = j.at("layers");
    if (!jl.is_array()) throw ParseError("\"layers\" must be an array");
    std::vector<LayerWeights> layers;
    for (std::size_t li = 0; li < jl.size(); ++li) {
      const auto& entry = jl[li];
      const auto& rows = entry.at("W");
      if (!rows.is_array() || rows.empty() || !rows[0].is_array())
        throw ShapeError(layer_tag(li) + "\"W\" must be a non-empty array of rows");
      const std::size_t ncols = rows[0].size();
      Matrix W(rows.size(), ncols);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].is_array() || rows[r].size() != ncols)
          throw ShapeError(layer_tag(li) + "ragged row " + std::to_string(r + 1) + " in W");
        for (std::size_t c = 0; c < ncols; ++c) W(r, c) = rows[r][c].get<double>();
      }
      Vector b = entry.contains("b") ? entry.at("b").get<Vector>() : Vector(W.rows(), 0.0);
      layers.push_back({std::move(W), std::move(b)});
    }
    return Network(std::move(layers), act);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network JSON: ") + e.what());
  }
}

// ecl-binary -----------------------------------------------------------------

namespace {

constexpr std::uint8_t kMagic[4] = {'E', 'C', 'L', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * k);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * k);
    return std::bit_cast<double>(v);
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParseError("ecl-binary: unexpected end of file");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> network_to_binary(const Network& net) {
  if (!net.activation().is_unit_slope())
    throw ValueError("ecl-binary stores no activation bounds; only (0, 1) networks can be written");
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(net.depth()));
  for (const auto& layer : net.layers()) {
    put_u32(out, static_cast<std::uint32_t>(layer.W.rows()));
    put_u32(out, static_cast<std::uint32_t>(layer.W.cols()));
    for (double v : layer.W.values()) put_f64(out, v);
    for (double v : layer.b) put_f64(out, v);
  }
  return out;
}

Network network_from_binary(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  const auto magic = in.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic)))
    throw ParseError("ecl-binary: bad magic (expected ECL1)");
  const std::uint32_t count = in.u32();
  std::vector<LayerWeights> layers;
  for (std::uint32_t li = 0; li < count; ++li) {
    const std::uint64_t rows = in.u32();
    const std::uint64_t cols = in.u32();
    // reject sizes the file cannot possibly hold before allocating
    if ((rows * cols + rows) * 8 > in.remaining())
      throw ParseError(layer_tag(li) + "ecl-binary: declared shape exceeds file size");
    Matrix W(rows, cols);
    for (std::size_t k = 0; k < W.size(); ++k) W.data()[k] = in.f64();
    Vector b(rows);
    for (double& v : b) v = in.f64();
    layers.push_back({std::move(W), std::move(b)});
  }
  if (in.remaining() != 0) throw ParseError("ecl-binary: trailing bytes after last layer");
  return Network(std::move(layers), ActivationBounds::relu());
}

Network load_network(const std::filesystem::path& path, NetFormat format) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  if (format == NetFormat::json) {
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    return network_from_json(j);
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return network_from_binary(bytes);
}

Network load_network(const std::filesystem::path& path) { return load_network(path, format_from_path(path)); }

void save_network(const Network& net, const std::filesystem::path& path, NetFormat format) {
  // Serialize fully before touching the file so a failed encode leaves no partial output.
  std::string payload;
  if (format == NetFormat::json) {
    payload = network_to_json(net).dump(1) + "\n";
  } else {
    const auto bytes = network_to_binary(net);
    payload.assign(bytes.begin(), bytes.end());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

void save_network(const Network& net, const std::filesystem::path& path) {
  save_network(net, path, format_from_path(path));
}

// generator ------------------------------------------------------------------

Network random_network(std::span<const std::size_t> dims, std::uint64_t seed, NormRange range) {
  if (dims.size() < 2) throw ArgumentError("random_network: need at least one layer");
  for (std::size_t d : dims)
    if (d == 0) throw ArgumentError("random_network: widths must be positive");
  if (!(range.lo > 0.0) || !(range.lo <= range.hi) || !std::isfinite(range.hi))
    throw ArgumentError("random_network: need 0 < lo <= hi");

  std::vector<LayerWeights> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    RandomStream entries(seed, 2 * i);
    Matrix W(dims[i + 1], dims[i]);
    for (std::size_t k = 0; k < W.size(); ++k) W.data()[k] = entries.normal();
    const double target = RandomStream(seed, 2 * i + 1).uniform(range.lo, range.hi);
    W *= target / spectral_norm(W);
    layers.push_back({std::move(W), Vector(dims[i + 1], 0.0)});
  }
  return Network(std::move(layers), ActivationBounds::relu());
}

std::vector<std::size_t> uniform_dims(std::size_t depth, std::size_t width) {
  return std::vector<std::size_t>(depth + 1, width);
}

std::vector<std::size_t> hidden_dims(std::size_t depth, std::size_t width, std::size_t in, std::size_t out) {
  std::vector<std::size_t> d(depth + 1, width);
  d.front() = in;
  d.back() = out;
  return d;
}

}  // namespace lipcert
