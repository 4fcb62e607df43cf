#include "kac/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "kac/error.hpp"
#include "kac/io_util.hpp"
#include "kac/rng.hpp"

namespace kac {
namespace {

// Latent class means on a sphere of the given radius, redrawn as a set
// until every pair is at least min_sep apart.
Matrix draw_separated_means(std::size_t count, std::size_t d, double radius, double min_sep,
                            std::size_t max_resample, Rng& rng) {
  for (std::size_t attempt = 0; attempt < max_resample; ++attempt) {
    Matrix means(count, d);
    for (std::size_t k = 0; k < count; ++k) {
      double norm2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        means(k, j) = rng.normal();
        norm2 += means(k, j) * means(k, j);
      }
      const double scale = radius / std::sqrt(std::max(norm2, 1e-300));
      for (std::size_t j = 0; j < d; ++j) means(k, j) *= scale;
    }
    double min_dist2 = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < count; ++a)
      for (std::size_t b = a + 1; b < count; ++b) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = means(a, j) - means(b, j);
          d2 += diff * diff;
        }
        min_dist2 = std::min(min_dist2, d2);
      }
    if (count < 2 || min_dist2 >= min_sep * min_sep) return means;
  }
  throw GenerationError("datagen: could not separate class means after " +
                        std::to_string(max_resample) + " attempts");
}

// f = P z, applied row-wise.
Matrix project(const Matrix& latents, const Matrix& proj) {
  Matrix out(latents.rows(), proj.rows());
  for (std::size_t s = 0; s < latents.rows(); ++s)
    for (std::size_t i = 0; i < proj.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < proj.cols(); ++j) acc += proj(i, j) * latents(s, j);
      out(s, i) = acc;
    }
  return out;
}

Matrix make_projection(std::size_t n_feature, std::size_t d_latent, Rng& rng) {
  Matrix p = rand_normal(rng, n_feature, d_latent);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_latent));
  for (double& v : p.flat()) v *= scale;
  return p;
}

void check_split_disjoint(const Matrix& train, const Matrix& test) {
  std::unordered_set<std::string> seen;
  for (std::size_t s = 0; s < train.rows(); ++s)
    seen.emplace(reinterpret_cast<const char*>(train.row(s).data()),
                 train.cols() * sizeof(double));
  for (std::size_t s = 0; s < test.rows(); ++s) {
    std::string key(reinterpret_cast<const char*>(test.row(s).data()),
                    test.cols() * sizeof(double));
    if (seen.count(key))
      throw GenerationError("datagen: train/test splits share a sample");
  }
}

}  // namespace

nlohmann::json CilStreamConfig::to_json() const {
  return {{"num_tasks", num_tasks},
          {"classes_per_task", classes_per_task},
          {"d_latent", d_latent},
          {"n_feature", n_feature},
          {"train_per_class", train_per_class},
          {"test_per_class", test_per_class},
          {"cluster_sigma", cluster_sigma},
          {"mean_radius", mean_radius},
          {"separation_factor", separation_factor}};
}

TaskStream make_cil_stream(const CilStreamConfig& cfg, std::uint64_t seed) {
  if (cfg.num_tasks == 0 || cfg.classes_per_task == 0 || cfg.d_latent == 0 ||
      cfg.n_feature == 0 || cfg.train_per_class == 0 || cfg.test_per_class == 0)
    throw ParameterError("make_cil_stream: all counts must be >= 1");
  if (!(cfg.cluster_sigma > 0.0)) throw ParameterError("make_cil_stream: cluster_sigma > 0");

  const std::size_t num_classes = cfg.num_tasks * cfg.classes_per_task;
  Rng rng_means(Rng::mix(seed, 101));
  const Matrix means =
      draw_separated_means(num_classes, cfg.d_latent, cfg.mean_radius,
                           cfg.separation_factor * cfg.cluster_sigma, cfg.max_resample, rng_means);
  Rng rng_proj(Rng::mix(seed, 102));
  const Matrix proj = make_projection(cfg.n_feature, cfg.d_latent, rng_proj);

  TaskStream stream;
  stream.mode = StreamMode::Cil;
  stream.n_feature = cfg.n_feature;
  stream.seed = seed;
  stream.gen_config = cfg.to_json();
  stream.gen_config["seed"] = seed;

  for (std::size_t t = 0; t < cfg.num_tasks; ++t) {
    TaskData task;
    const std::size_t m_train = cfg.classes_per_task * cfg.train_per_class;
    const std::size_t m_test = cfg.classes_per_task * cfg.test_per_class;
    Matrix train_lat(m_train, cfg.d_latent), test_lat(m_test, cfg.d_latent);
    task.train_y.reserve(m_train);
    task.test_y.reserve(m_test);
    for (std::size_t c = 0; c < cfg.classes_per_task; ++c) {
      const std::size_t k = t * cfg.classes_per_task + c;
      task.class_ids.push_back(static_cast<int>(k));
      Rng rng_k(Rng::mix(seed, 1000 + k));
      for (std::size_t s = 0; s < cfg.train_per_class; ++s) {
        const std::size_t r = c * cfg.train_per_class + s;
        for (std::size_t j = 0; j < cfg.d_latent; ++j)
          train_lat(r, j) = means(k, j) + cfg.cluster_sigma * rng_k.normal();
        task.train_y.push_back(static_cast<int>(k));
      }
      for (std::size_t s = 0; s < cfg.test_per_class; ++s) {
        const std::size_t r = c * cfg.test_per_class + s;
        for (std::size_t j = 0; j < cfg.d_latent; ++j)
          test_lat(r, j) = means(k, j) + cfg.cluster_sigma * rng_k.normal();
        task.test_y.push_back(static_cast<int>(k));
      }
    }
    task.train_x = project(train_lat, proj);
    task.test_x = project(test_lat, proj);
    check_split_disjoint(task.train_x, task.test_x);
    stream.tasks.push_back(std::move(task));
  }
  stream.validate();
  return stream;
}

nlohmann::json DilStreamConfig::to_json() const {
  return {{"num_domains", num_domains},
          {"num_classes", num_classes},
          {"d_latent", d_latent},
          {"n_feature", n_feature},
          {"train_per_class", train_per_class},
          {"test_per_class", test_per_class},
          {"cluster_sigma", cluster_sigma},
          {"mean_radius", mean_radius},
          {"separation_factor", separation_factor},
          {"domain_shift", domain_shift}};
}

TaskStream make_dil_stream(const DilStreamConfig& cfg, std::uint64_t seed) {
  if (cfg.num_domains == 0 || cfg.num_classes == 0 || cfg.d_latent == 0 || cfg.n_feature == 0 ||
      cfg.train_per_class == 0 || cfg.test_per_class == 0)
    throw ParameterError("make_dil_stream: all counts must be >= 1");
  if (!(cfg.cluster_sigma > 0.0)) throw ParameterError("make_dil_stream: cluster_sigma > 0");
  if (cfg.domain_shift < 0.0) throw ParameterError("make_dil_stream: domain_shift >= 0");

  Rng rng_means(Rng::mix(seed, 101));
  const Matrix means =
      draw_separated_means(cfg.num_classes, cfg.d_latent, cfg.mean_radius,
                           cfg.separation_factor * cfg.cluster_sigma, cfg.max_resample, rng_means);
  Rng rng_proj(Rng::mix(seed, 102));
  const Matrix proj = make_projection(cfg.n_feature, cfg.d_latent, rng_proj);

  // One base draw per class and split, shared by every domain.
  const std::size_t m_train = cfg.num_classes * cfg.train_per_class;
  const std::size_t m_test = cfg.num_classes * cfg.test_per_class;
  Matrix base_train(m_train, cfg.d_latent), base_test(m_test, cfg.d_latent);
  std::vector<int> train_y(m_train), test_y(m_test);
  for (std::size_t k = 0; k < cfg.num_classes; ++k) {
    Rng rng_k(Rng::mix(seed, 1000 + k));
    for (std::size_t s = 0; s < cfg.train_per_class; ++s) {
      const std::size_t r = k * cfg.train_per_class + s;
      for (std::size_t j = 0; j < cfg.d_latent; ++j)
        base_train(r, j) = means(k, j) + cfg.cluster_sigma * rng_k.normal();
      train_y[r] = static_cast<int>(k);
    }
    for (std::size_t s = 0; s < cfg.test_per_class; ++s) {
      const std::size_t r = k * cfg.test_per_class + s;
      for (std::size_t j = 0; j < cfg.d_latent; ++j)
        base_test(r, j) = means(k, j) + cfg.cluster_sigma * rng_k.normal();
      test_y[r] = static_cast<int>(k);
    }
  }

  TaskStream stream;
  stream.mode = StreamMode::Dil;
  stream.n_feature = cfg.n_feature;
  stream.seed = seed;
  stream.gen_config = cfg.to_json();
  stream.gen_config["seed"] = seed;

  Rng rng_shift(Rng::mix(seed, 103));
  for (std::size_t d = 0; d < cfg.num_domains; ++d) {
    std::vector<double> shift(cfg.d_latent, 0.0);
    double norm2 = 0.0;
    for (auto& v : shift) {
      v = rng_shift.normal();
      norm2 += v * v;
    }
    const double scale =
        cfg.domain_shift == 0.0 ? 0.0 : cfg.domain_shift / std::sqrt(std::max(norm2, 1e-300));
    for (auto& v : shift) v *= scale;

    TaskData task;
    for (std::size_t k = 0; k < cfg.num_classes; ++k) task.class_ids.push_back(static_cast<int>(k));
    Matrix train_lat = base_train, test_lat = base_test;
    for (std::size_t s = 0; s < m_train; ++s)
      for (std::size_t j = 0; j < cfg.d_latent; ++j) train_lat(s, j) += shift[j];
    for (std::size_t s = 0; s < m_test; ++s)
      for (std::size_t j = 0; j < cfg.d_latent; ++j) test_lat(s, j) += shift[j];
    task.train_x = project(train_lat, proj);
    task.test_x = project(test_lat, proj);
    task.train_y = train_y;
    task.test_y = test_y;
    check_split_disjoint(task.train_x, task.test_x);
    stream.tasks.push_back(std::move(task));
  }
  stream.validate();
  return stream;
}

void export_stream(const TaskStream& stream, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest{{"format", "kac-stream"},
                          {"version", 1},
                          {"mode", stream_mode_name(stream.mode)},
                          {"n_feature", stream.n_feature},
                          {"seed", stream.seed},
                          {"generator", stream.gen_config},
                          {"num_tasks", stream.tasks.size()}};
  nlohmann::json tasks = nlohmann::json::array();
  for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
    const TaskData& task = stream.tasks[t];
    std::ostringstream tag;
    tag << "task" << std::setw(3) << std::setfill('0') << t;
    tasks.push_back({{"class_ids", task.class_ids},
                     {"train", tag.str() + "_train.csv"},
                     {"test", tag.str() + "_test.csv"},
                     {"train_rows", task.train_x.rows()},
                     {"test_rows", task.test_x.rows()}});
    auto dump_split = [&](const Matrix& x, const std::vector<int>& y, const std::string& name) {
      std::ostringstream os;
      for (std::size_t s = 0; s < x.rows(); ++s) {
        for (std::size_t j = 0; j < x.cols(); ++j) os << format_exact(x(s, j)) << ",";
        os << y[s] << "\n";
      }
      write_file_atomic((std::filesystem::path(dir) / name).string(), os.str());
    };
    dump_split(task.train_x, task.train_y, tag.str() + "_train.csv");
    dump_split(task.test_x, task.test_y, tag.str() + "_test.csv");
  }
  manifest["tasks"] = std::move(tasks);
  write_file_atomic((std::filesystem::path(dir) / "manifest.json").string(),
                    manifest.dump(2) + "\n");
}

TaskStream import_stream(const std::string& dir) {
  const auto manifest_path = std::filesystem::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("import_stream: cannot open " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("import_stream: " + manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "kac-stream")
    throw ConfigError("import_stream: not a stream manifest");

  TaskStream stream;
  stream.mode = manifest.at("mode").get<std::string>() == "dil" ? StreamMode::Dil : StreamMode::Cil;
  stream.n_feature = manifest.at("n_feature").get<std::size_t>();
  stream.seed = manifest.at("seed").get<std::uint64_t>();
  stream.gen_config = manifest.at("generator");

  auto load_split = [&](const std::string& name, std::size_t rows, Matrix& x,
                        std::vector<int>& y) {
    const std::string content = read_file((std::filesystem::path(dir) / name).string());
    x = Matrix(rows, stream.n_feature);
    y.resize(rows);
    std::istringstream is(content);
    std::string line;
    for (std::size_t s = 0; s < rows; ++s) {
      if (!std::getline(is, line))
        throw ConfigError("import_stream: " + name + " has fewer rows than the manifest");
      std::istringstream ls(line);
      std::string cell;
      for (std::size_t j = 0; j < stream.n_feature; ++j) {
        if (!std::getline(ls, cell, ','))
          throw ConfigError("import_stream: short row in " + name);
        x(s, j) = std::stod(cell);
      }
      if (!std::getline(ls, cell)) throw ConfigError("import_stream: missing label in " + name);
      y[s] = std::stoi(cell);
    }
  };

  for (const auto& tj : manifest.at("tasks")) {
    TaskData task;
    task.class_ids = tj.at("class_ids").get<std::vector<int>>();
    load_split(tj.at("train").get<std::string>(), tj.at("train_rows").get<std::size_t>(),
               task.train_x, task.train_y);
    load_split(tj.at("test").get<std::string>(), tj.at("test_rows").get<std::size_t>(),
               task.test_x, task.test_y);
    stream.tasks.push_back(std::move(task));
  }
  stream.validate();
  return stream;
}

}  // namespace kac
