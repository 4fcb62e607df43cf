#include "kac/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "kac/error.hpp"
#include "kac/io_util.hpp"

namespace kac {
namespace {

constexpr int kVersion = 1;
constexpr char kHexDigits[] = "0123456789abcdef";

std::uint64_t swap_bytes(std::uint64_t x) {
  std::uint64_t r = 0;
  for (int b = 0; b < 8; ++b) r |= ((x >> (8 * b)) & 0xffu) << (8 * (7 - b));
  return r;
}

std::uint64_t to_le_bits(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  return bits;
}

double from_le_bits(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

nlohmann::json tensor_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_f64(m.flat())}};
}

Matrix tensor_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
           decode_f64(j.at("data").get<std::string>()));
  return m;
}

nlohmann::json ln_json(const LayerNorm& ln) {
  return {{"epsilon", ln.epsilon},
          {"affine", ln.affine},
          {"gain", encode_f64(ln.gain)},
          {"bias", encode_f64(ln.bias)}};
}

void ln_from_json(const nlohmann::json& j, LayerNorm& ln) {
  ln.epsilon = j.at("epsilon").get<double>();
  ln.affine = j.at("affine").get<bool>();
  ln.gain = decode_f64(j.at("gain").get<std::string>());
  ln.bias = decode_f64(j.at("bias").get<std::string>());
  if (ln.gain.size() != ln.bias.size()) throw ConfigError("checkpoint: gain/bias length mismatch");
}

std::vector<std::size_t> blocks_from_json(const nlohmann::json& j) {
  return j.at("task_blocks").get<std::vector<std::size_t>>();
}

void check_block_sum(const std::vector<std::size_t>& blocks, std::size_t rows) {
  std::size_t sum = 0;
  for (auto b : blocks) sum += b;
  if (sum != rows) throw ConfigError("checkpoint: task_blocks do not sum to the class count");
}

}  // namespace

std::string encode_f64(std::span<const double> values) {
  std::string out;
  out.reserve(values.size() * 16);
  for (double v : values) {
    const std::uint64_t bits = to_le_bits(v);
    for (int b = 0; b < 8; ++b) {
      const auto byte = static_cast<unsigned>((bits >> (8 * b)) & 0xffu);
      out.push_back(kHexDigits[byte >> 4]);
      out.push_back(kHexDigits[byte & 0xf]);
    }
  }
  return out;
}

std::vector<double> decode_f64(const std::string& hex) {
  if (hex.size() % 16 != 0) throw ConfigError("decode_f64: hex length not a multiple of 16");
  auto nibble = [](char c) -> std::uint64_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint64_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint64_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint64_t>(c - 'A' + 10);
    throw ConfigError("decode_f64: invalid hex digit");
  };
  std::vector<double> out(hex.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      const std::uint64_t hi = nibble(hex[i * 16 + 2 * b]);
      const std::uint64_t lo = nibble(hex[i * 16 + 2 * b + 1]);
      bits |= ((hi << 4) | lo) << (8 * b);
    }
    out[i] = from_le_bits(bits);
  }
  return out;
}

nlohmann::json checkpoint_to_json(const Head& head) {
  nlohmann::json doc{{"format", "kac-head"},
                     {"version", kVersion},
                     {"kind", head.kind()},
                     {"n", head.feature_dim()},
                     {"task_blocks", head.task_blocks()}};
  if (const auto* h = dynamic_cast<const KacHead*>(&head)) {
    doc["grid"] = {{"lo", h->grid.lo},
                   {"hi", h->grid.hi},
                   {"centers", encode_f64(h->grid.centers)},
                   {"sigmas", encode_f64(h->grid.sigmas)}};
    doc["ln"] = ln_json(h->ln);
    doc["params"] = {{"W", tensor_json(h->weights)}};
  } else if (const auto* h2 = dynamic_cast<const BsplineHead*>(&head)) {
    doc["kind"] = "bspline";
    doc["basis"] = {{"degree", h2->basis.degree},
                    {"lo", h2->basis.lo},
                    {"hi", h2->basis.hi},
                    {"knots", encode_f64(h2->basis.knots)}};
    doc["residual"] = h2->residual_enabled;
    doc["ln"] = ln_json(h2->ln);
    doc["params"] = {{"spline_W", tensor_json(h2->spline_weights)}};
    if (h2->residual_enabled) doc["params"]["residual_W"] = tensor_json(h2->residual_weights);
  } else if (const auto* h3 = dynamic_cast<const MlpHead*>(&head)) {
    doc["kind"] = "mlp";
    doc["frozen_first_layer"] = h3->frozen_first;
    doc["params"] = {{"W1", tensor_json(h3->w1)},
                     {"b1", {{"rows", 1}, {"cols", h3->b1.size()}, {"data", encode_f64(h3->b1)}}},
                     {"W2", tensor_json(h3->w2)},
                     {"b2", {{"rows", 1}, {"cols", h3->b2.size()}, {"data", encode_f64(h3->b2)}}}};
  } else if (const auto* h4 = dynamic_cast<const LinearHead*>(&head)) {
    doc["params"] = {
        {"W", tensor_json(h4->weights)},
        {"b", {{"rows", 1}, {"cols", h4->bias.size()}, {"data", encode_f64(h4->bias)}}}};
  } else {
    throw ConfigError("checkpoint_to_json: unsupported head kind " + head.kind());
  }
  return doc;
}

std::unique_ptr<Head> head_from_checkpoint(const nlohmann::json& doc) {
  if (doc.value("format", "") != "kac-head") throw ConfigError("checkpoint: not a head document");
  if (doc.value("version", 0) != kVersion) throw ConfigError("checkpoint: unsupported version");
  const std::string kind = doc.at("kind").get<std::string>();
  const std::size_t n = doc.at("n").get<std::size_t>();
  const auto blocks = blocks_from_json(doc);

  if (kind == "kac") {
    const auto& gj = doc.at("grid");
    RbfGrid grid;
    grid.lo = gj.at("lo").get<double>();
    grid.hi = gj.at("hi").get<double>();
    grid.centers = decode_f64(gj.at("centers").get<std::string>());
    grid.sigmas = decode_f64(gj.at("sigmas").get<std::string>());
    grid.validate();
    auto head = std::make_unique<KacHead>(n, grid);
    ln_from_json(doc.at("ln"), head->ln);
    head->weights = tensor_from_json(doc.at("params").at("W"));
    if (head->weights.cols() != grid.count() * n)
      throw ConfigError("checkpoint: W shape inconsistent with grid and n");
    head->blocks = blocks;
    check_block_sum(blocks, head->weights.rows());
    return head;
  }
  if (kind == "bspline") {
    const auto& bj = doc.at("basis");
    BsplineBasis basis(bj.at("degree").get<std::size_t>(),
                       decode_f64(bj.at("knots").get<std::string>()), bj.at("lo").get<double>(),
                       bj.at("hi").get<double>());
    const bool residual = doc.at("residual").get<bool>();
    auto head = std::make_unique<BsplineHead>(n, basis, residual);
    ln_from_json(doc.at("ln"), head->ln);
    head->spline_weights = tensor_from_json(doc.at("params").at("spline_W"));
    if (residual) head->residual_weights = tensor_from_json(doc.at("params").at("residual_W"));
    head->blocks = blocks;
    check_block_sum(blocks, head->spline_weights.rows());
    return head;
  }
  if (kind == "mlp") {
    const auto& pj = doc.at("params");
    Matrix w1 = tensor_from_json(pj.at("W1"));
    Rng unused(0);
    auto head =
        std::make_unique<MlpHead>(n, w1.rows(), doc.at("frozen_first_layer").get<bool>(), unused);
    head->w1 = std::move(w1);
    head->b1 = decode_f64(pj.at("b1").at("data").get<std::string>());
    head->w2 = tensor_from_json(pj.at("W2"));
    head->b2 = decode_f64(pj.at("b2").at("data").get<std::string>());
    head->blocks = blocks;
    check_block_sum(blocks, head->w2.rows());
    return head;
  }
  if (kind == "linear") {
    auto head = std::make_unique<LinearHead>(n);
    head->weights = tensor_from_json(doc.at("params").at("W"));
    head->bias = decode_f64(doc.at("params").at("b").at("data").get<std::string>());
    head->blocks = blocks;
    check_block_sum(blocks, head->weights.rows());
    return head;
  }
  throw ConfigError("checkpoint: unknown head kind '" + kind + "'");
}

void save_checkpoint(const Head& head, const std::string& path) {
  write_file_atomic(path, checkpoint_to_json(head).dump(2) + "\n");
}

std::unique_ptr<Head> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("load_checkpoint: " + path + ": " + e.what());
  }
  return head_from_checkpoint(doc);
}

}  // namespace kac
