#include <doctest.h>

#include <filesystem>

#include "kac/checkpoint.hpp"
#include "kac/error.hpp"
#include "kac/io_util.hpp"
#include "kac/rng.hpp"

using namespace kac;

namespace {

std::unique_ptr<Head> random_head(const std::string& kind, Rng& rng) {
  HeadConfig cfg;
  cfg.kind = kind == "bspline_residual" ? "bspline" : kind;
  cfg.residual = kind == "bspline_residual";
  auto head = make_head(cfg, 6, rng);
  head->expand(3, rng);
  head->expand(2, rng);
  for (auto& p : head->params())
    for (std::size_t j = 0; j < p.size; ++j) p.data[j] = rng.uniform(-1.0, 1.0);
  return head;
}

}  // namespace

TEST_CASE("f64 hex codec round-trips bit patterns") {
  Rng rng(404);
  std::vector<double> values;
  for (int i = 0; i < 100; ++i) values.push_back(rng.normal(0.0, 1e3));
  values.push_back(0.0);
  values.push_back(-0.0);
  values.push_back(1e-308);
  const auto decoded = decode_f64(encode_f64(values));
  CHECK(bits_equal(values, decoded));
  CHECK_THROWS_AS(decode_f64("abc"), ConfigError);
  CHECK_THROWS_AS(decode_f64("zz00000000000000"), ConfigError);
}

TEST_CASE("checkpoints round-trip every head kind bit-exactly") {
  Rng rng(2025);
  for (const char* kind : {"kac", "bspline", "bspline_residual", "mlp", "linear"}) {
    CAPTURE(kind);
    auto head = random_head(kind, rng);
    const nlohmann::json doc = checkpoint_to_json(*head);
    auto loaded = head_from_checkpoint(doc);
    CHECK(loaded->kind() == head->kind());
    CHECK(loaded->num_classes() == head->num_classes());
    CHECK(loaded->task_blocks() == head->task_blocks());
    // identical forward bits on a probe input
    std::vector<double> f(head->feature_dim());
    for (auto& v : f) v = rng.uniform(-2.0, 2.0);
    CHECK(bits_equal(std::span<const double>(head->forward(f)),
                     std::span<const double>(loaded->forward(f))));
    // identical parameter payloads
    auto p1 = head->params();
    auto p2 = loaded->params();
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i)
      CHECK(bits_equal(std::span<const double>(p1[i].data, p1[i].size),
                       std::span<const double>(p2[i].data, p2[i].size)));
    // re-serialization is byte-identical
    CHECK(checkpoint_to_json(*loaded).dump() == doc.dump());
  }
}

TEST_CASE("checkpoint files survive save/load") {
  Rng rng(7);
  auto head = random_head("kac", rng);
  const auto dir = std::filesystem::temp_directory_path() / "kac_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "head.json").string();
  save_checkpoint(*head, path);
  auto loaded = load_checkpoint(path);
  CHECK(loaded->kind() == "kac");
  save_checkpoint(*loaded, (dir / "head2.json").string());
  CHECK(read_file(path) == read_file((dir / "head2.json").string()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed checkpoints are rejected") {
  CHECK_THROWS_AS(head_from_checkpoint(nlohmann::json{{"format", "other"}}), ConfigError);
  Rng rng(7);
  auto head = random_head("linear", rng);
  nlohmann::json doc = checkpoint_to_json(*head);
  doc["task_blocks"] = {1, 1};  // does not sum to the class count
  CHECK_THROWS_AS(head_from_checkpoint(doc), ConfigError);
}
