#include "kac/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "kac/checkpoint.hpp"
#include "kac/error.hpp"
#include "kac/gradcheck.hpp"
#include "kac/io_util.hpp"

namespace kac {
namespace {

void check_keys(const nlohmann::json& obj, const char* where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end())
      throw ConfigError(std::string(where) + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
T field(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

void parse_stream_cil(const nlohmann::json& j, CilStreamConfig& c) {
  check_keys(j, "stream",
             {"num_tasks", "classes_per_task", "d_latent", "n_feature", "train_per_class",
              "test_per_class", "cluster_sigma", "mean_radius", "separation_factor",
              "num_domains", "num_classes", "domain_shift"});
  c.num_tasks = field(j, "num_tasks", c.num_tasks);
  c.classes_per_task = field(j, "classes_per_task", c.classes_per_task);
  c.d_latent = field(j, "d_latent", c.d_latent);
  c.n_feature = field(j, "n_feature", c.n_feature);
  c.train_per_class = field(j, "train_per_class", c.train_per_class);
  c.test_per_class = field(j, "test_per_class", c.test_per_class);
  c.cluster_sigma = field(j, "cluster_sigma", c.cluster_sigma);
  c.mean_radius = field(j, "mean_radius", c.mean_radius);
  c.separation_factor = field(j, "separation_factor", c.separation_factor);
}

void parse_stream_dil(const nlohmann::json& j, DilStreamConfig& c) {
  check_keys(j, "stream",
             {"num_tasks", "classes_per_task", "d_latent", "n_feature", "train_per_class",
              "test_per_class", "cluster_sigma", "mean_radius", "separation_factor",
              "num_domains", "num_classes", "domain_shift"});
  c.num_domains = field(j, "num_domains", c.num_domains);
  c.num_classes = field(j, "num_classes", c.num_classes);
  c.d_latent = field(j, "d_latent", c.d_latent);
  c.n_feature = field(j, "n_feature", c.n_feature);
  c.train_per_class = field(j, "train_per_class", c.train_per_class);
  c.test_per_class = field(j, "test_per_class", c.test_per_class);
  c.cluster_sigma = field(j, "cluster_sigma", c.cluster_sigma);
  c.mean_radius = field(j, "mean_radius", c.mean_radius);
  c.separation_factor = field(j, "separation_factor", c.separation_factor);
  c.domain_shift = field(j, "domain_shift", c.domain_shift);
}

void parse_peaks(const nlohmann::json& j, PeaksConfig& c) {
  check_keys(j, "peaks",
             {"num_peaks", "domain_lo", "domain_hi", "train_points", "unit_basis", "unit_sigma",
              "mlp_hidden", "optimizer", "lr", "steps_per_task"});
  c.num_peaks = field(j, "num_peaks", c.num_peaks);
  c.domain_lo = field(j, "domain_lo", c.domain_lo);
  c.domain_hi = field(j, "domain_hi", c.domain_hi);
  c.train_points = field(j, "train_points", c.train_points);
  c.unit_basis = field(j, "unit_basis", c.unit_basis);
  c.unit_sigma = field(j, "unit_sigma", c.unit_sigma);
  c.mlp_hidden = field(j, "mlp_hidden", c.mlp_hidden);
  if (j.contains("optimizer")) c.optim.kind = optim_kind_from_name(j.at("optimizer"));
  c.optim.lr = field(j, "lr", c.optim.lr);
  c.steps_per_task = field(j, "steps_per_task", c.steps_per_task);
}

void parse_train(const nlohmann::json& j, TrainConfig& c) {
  check_keys(j, "train",
             {"optimizer", "lr", "momentum", "beta1", "beta2", "epochs", "batch_size",
              "mask_to_current_task", "trainable_backbone", "backbone_lr"});
  if (j.contains("optimizer")) c.optim.kind = optim_kind_from_name(j.at("optimizer"));
  c.optim.lr = field(j, "lr", c.optim.lr);
  c.optim.momentum = field(j, "momentum", c.optim.momentum);
  c.optim.beta1 = field(j, "beta1", c.optim.beta1);
  c.optim.beta2 = field(j, "beta2", c.optim.beta2);
  c.epochs = field(j, "epochs", c.epochs);
  c.batch_size = field(j, "batch_size", c.batch_size);
  c.mask_to_current_task = field(j, "mask_to_current_task", c.mask_to_current_task);
  c.trainable_backbone = field(j, "trainable_backbone", c.trainable_backbone);
  c.backbone_lr = field(j, "backbone_lr", c.backbone_lr);
}

HeadConfig parse_head(const nlohmann::json& j) {
  check_keys(j, "head",
             {"kind", "label", "lo", "hi", "rbf_count", "sigma", "spline_basis_count", "degree",
              "residual", "hidden", "frozen_first_layer", "ln_epsilon"});
  HeadConfig h;
  h.kind = field<std::string>(j, "kind", h.kind);
  h.label = field<std::string>(j, "label", h.label);
  h.lo = field(j, "lo", h.lo);
  h.hi = field(j, "hi", h.hi);
  h.rbf_count = field(j, "rbf_count", h.rbf_count);
  h.sigma = field(j, "sigma", h.sigma);
  h.spline_basis_count = field(j, "spline_basis_count", h.spline_basis_count);
  h.degree = field(j, "degree", h.degree);
  h.residual = field(j, "residual", h.residual);
  h.hidden = field(j, "hidden", h.hidden);
  h.frozen_first_layer = field(j, "frozen_first_layer", h.frozen_first_layer);
  h.ln_epsilon = field(j, "ln_epsilon", h.ln_epsilon);
  if (h.kind != "kac" && h.kind != "linear" && h.kind != "bspline" && h.kind != "mlp" &&
      h.kind != "rbf-unit" && h.kind != "mlp-unit")
    throw ConfigError("head: unknown kind '" + h.kind + "'");
  return h;
}

nlohmann::json head_to_json(const HeadConfig& h) {
  return {{"kind", h.kind},
          {"label", h.resolved_label()},
          {"lo", h.lo},
          {"hi", h.hi},
          {"rbf_count", h.rbf_count},
          {"sigma", h.sigma},
          {"spline_basis_count", h.spline_basis_count},
          {"degree", h.degree},
          {"residual", h.residual},
          {"hidden", h.hidden},
          {"frozen_first_layer", h.frozen_first_layer},
          {"ln_epsilon", h.ln_epsilon}};
}

std::string unit_label(const HeadConfig& h) {
  return h.label.empty() ? h.kind : h.label;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(doc, "config", {"scenario", "seeds", "out_dir", "stream", "train", "peaks", "heads"});
  ExperimentConfig cfg;
  cfg.scenario = field<std::string>(doc, "scenario", cfg.scenario);
  if (cfg.scenario != "cil" && cfg.scenario != "dil" && cfg.scenario != "peaks")
    throw ConfigError("config: scenario must be cil, dil or peaks");
  cfg.seeds = field(doc, "seeds", cfg.seeds);
  if (cfg.seeds.empty()) throw ConfigError("config: seeds must be nonempty");
  cfg.out_dir = field<std::string>(doc, "out_dir", cfg.out_dir);
  if (doc.contains("stream")) {
    parse_stream_cil(doc.at("stream"), cfg.cil);
    parse_stream_dil(doc.at("stream"), cfg.dil);
  }
  if (doc.contains("peaks")) parse_peaks(doc.at("peaks"), cfg.peaks);
  if (doc.contains("train")) parse_train(doc.at("train"), cfg.train);
  if (doc.contains("heads")) {
    if (!doc.at("heads").is_array() || doc.at("heads").empty())
      throw ConfigError("config: heads must be a nonempty array");
    for (const auto& hj : doc.at("heads")) cfg.heads.push_back(parse_head(hj));
  } else {
    HeadConfig a, b;
    if (cfg.scenario == "peaks") {
      a.kind = "rbf-unit";
      b.kind = "mlp-unit";
    } else {
      a.kind = "kac";
      b.kind = "linear";
    }
    cfg.heads = {a, b};
  }
  for (const auto& h : cfg.heads) {
    const bool unit = h.kind == "rbf-unit" || h.kind == "mlp-unit";
    if (cfg.scenario == "peaks" && !unit)
      throw ConfigError("config: peaks scenario heads must be rbf-unit or mlp-unit");
    if (cfg.scenario != "peaks" && unit)
      throw ConfigError("config: head kind '" + h.kind + "' is peaks-only");
  }
  cfg.train.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    // nlohmann reports "at line L, column C" for stream input
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return from_json(doc);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json heads_json = nlohmann::json::array();
  for (const auto& h : heads) heads_json.push_back(head_to_json(h));
  nlohmann::json stream_json;
  if (scenario == "cil") stream_json = cil.to_json();
  if (scenario == "dil") stream_json = dil.to_json();
  return {{"scenario", scenario},
          {"seeds", seeds},
          {"out_dir", out_dir},
          {"stream", stream_json},
          {"peaks", peaks.to_json()},
          {"train",
           {{"optimizer", train.optim.kind_name()},
            {"lr", train.optim.lr},
            {"momentum", train.optim.momentum},
            {"beta1", train.optim.beta1},
            {"beta2", train.optim.beta2},
            {"epochs", train.epochs},
            {"batch_size", train.batch_size},
            {"mask_to_current_task", train.mask_to_current_task},
            {"trainable_backbone", train.trainable_backbone},
            {"backbone_lr", train.backbone_lr}}},
          {"heads", heads_json}};
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const nlohmann::json resolved = cfg.to_json();
  const std::string config_line = "# config: " + resolved.dump();

  // Streams are shared across heads for a given seed so that head
  // comparisons are paired.
  std::map<std::uint64_t, TaskStream> streams;
  if (cfg.scenario != "peaks") {
    for (std::uint64_t seed : cfg.seeds) {
      streams.emplace(seed, cfg.scenario == "cil" ? make_cil_stream(cfg.cil, seed)
                                                  : make_dil_stream(cfg.dil, seed));
    }
  }

  struct Cell {
    std::size_t head_idx;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t h = 0; h < cfg.heads.size(); ++h)
    for (std::uint64_t seed : cfg.seeds) cells.push_back({h, seed});

  std::vector<SummaryRow> rows(cells.size());
  std::vector<std::string> files(cells.size());
  std::vector<double> wall(cells.size(), 0.0);
  std::vector<std::string> errors(cells.size());

  const std::ptrdiff_t ncells = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ci = 0; ci < ncells; ++ci) {
    const Cell cell = cells[static_cast<std::size_t>(ci)];
    const HeadConfig& head_cfg = cfg.heads[cell.head_idx];
    try {
      SummaryRow row;
      row.scenario = cfg.scenario;
      row.seed = cell.seed;
      std::ostringstream tag;
      if (cfg.scenario == "peaks") {
        row.head = unit_label(head_cfg);
        tag << row.head << "_s" << cell.seed;
        PeaksReport report = run_peaks_experiment(head_cfg.kind, cfg.peaks, cell.seed);
        row.steps = report.rmse.size();
        // avg: median error over previously learned peaks after the final
        // task; last: error on the final peak itself.
        const auto& final_row = report.rmse.back();
        std::vector<double> previous(final_row.begin(), final_row.end() - 1);
        if (previous.empty()) {
          row.avg = final_row.back();
        } else {
          std::sort(previous.begin(), previous.end());
          row.avg = previous[previous.size() / 2];
        }
        row.last = final_row.back();
        nlohmann::json doc = report.to_json();
        doc["experiment_config"] = resolved;
        const std::string path =
            (fs::path(cfg.out_dir) / ("peaks_" + tag.str() + ".json")).string();
        write_file_atomic(path, doc.dump(2) + "\n");
        files[static_cast<std::size_t>(ci)] = path;
      } else {
        row.head = head_cfg.resolved_label();
        tag << row.head << "_s" << cell.seed;
        const TaskStream& stream = streams.at(cell.seed);
        TrainConfig train = cfg.train;
        train.seed = cell.seed;
        std::unique_ptr<Head> final_head;
        ContinualReport report = run_continual(stream, train, head_cfg, &final_head);
        row.steps = stream.tasks.size();
        row.avg = report.metrics.average_incremental;
        row.last = report.metrics.last;
        wall[static_cast<std::size_t>(ci)] = report.wall_clock_seconds;
        nlohmann::json doc = report.to_json();
        doc["experiment_config"] = resolved;
        const std::string path =
            (fs::path(cfg.out_dir) / ("report_" + tag.str() + ".json")).string();
        write_file_atomic(path, doc.dump(2) + "\n");
        files[static_cast<std::size_t>(ci)] = path;
        write_file_atomic((fs::path(cfg.out_dir) / ("accmatrix_" + tag.str() + ".csv")).string(),
                          report.accuracy_csv());
        save_checkpoint(*final_head,
                        (fs::path(cfg.out_dir) / ("ckpt_" + tag.str() + ".json")).string());
      }
      rows[static_cast<std::size_t>(ci)] = std::move(row);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(ci)] = e.what();
    }
  }

  for (std::size_t ci = 0; ci < cells.size(); ++ci)
    if (!errors[ci].empty())
      throw Error("sweep cell " + std::to_string(ci) + " failed: " + errors[ci]);

  std::ostringstream summary;
  summary << config_line << "\n";
  summary << "scenario,head,steps,seed,avg,last\n";
  for (const auto& row : rows) {
    summary << row.scenario << "," << row.head << "," << row.steps << "," << row.seed << ","
            << format_sig6(row.avg) << "," << format_sig6(row.last) << "\n";
  }
  write_file_atomic((fs::path(cfg.out_dir) / "summary.csv").string(), summary.str());

  // Wall-clock sidecar; deliberately separate so report files stay
  // byte-identical across reruns.
  std::ostringstream timings;
  timings << "# volatile timing sidecar; excluded from determinism guarantees\n";
  timings << "head,seed,seconds\n";
  for (std::size_t ci = 0; ci < cells.size(); ++ci)
    timings << rows[ci].head << "," << rows[ci].seed << "," << wall[ci] << "\n";
  write_file_atomic((fs::path(cfg.out_dir) / "timings.csv").string(), timings.str());

  RunResult result;
  result.rows = std::move(rows);
  result.report_files = std::move(files);
  return result;
}

int cmd_run(const std::string& config_path) {
  ExperimentConfig cfg;
  try {
    cfg = ExperimentConfig::from_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    RunResult result = run_experiment(cfg);
    std::cout << "wrote " << result.rows.size() << " report(s) to " << cfg.out_dir << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_gradcheck(std::uint64_t seed, std::size_t trials, bool corrupt) {
  try {
    const auto results = gradcheck_all(seed, trials, corrupt);
    bool all_ok = true;
    for (const auto& r : results) {
      std::cout << "head=" << r.head_kind << " max_rel_err=" << format_sig6(r.max_violation)
                << " coords=" << r.coords_checked << (r.passed() ? " PASS" : " FAIL") << "\n";
      if (!r.passed()) {
        all_ok = false;
        std::cout << "  offending coordinate: " << r.worst_param << "[" << r.worst_index << "]"
                  << "\n";
      }
    }
    return all_ok ? kExitOk : kExitRuntime;
  } catch (const ParameterError& e) {
    std::cerr << "gradcheck: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "gradcheck failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_export_activations(const std::string& checkpoint_path, const std::string& out_csv) {
  std::unique_ptr<Head> head;
  try {
    head = load_checkpoint(checkpoint_path);
  } catch (const std::exception& e) {
    std::cerr << "export-activations: " << e.what() << "\n";
    return kExitUsage;
  }
  const auto* kac_head = dynamic_cast<const KacHead*>(head.get());
  if (!kac_head) {
    std::cerr << "export-activations: checkpoint holds a '" << head->kind()
              << "' head; activation maps are defined for kind 'kac'\n";
    return kExitUsage;
  }
  try {
    const Matrix map = kac_head->activation_map();
    std::ostringstream os;
    os << "class,channel,score\n";
    for (std::size_t c = 0; c < map.rows(); ++c)
      for (std::size_t p = 0; p < map.cols(); ++p)
        os << c << "," << p << "," << format_sig6(map(c, p)) << "\n";
    write_file_atomic(out_csv, os.str());
    std::cout << "wrote " << map.rows() * map.cols() << " rows to " << out_csv << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "export-activations failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_params(std::size_t n, std::size_t rbf_count, std::size_t classes) {
  try {
    const ParamCountReport r = kac_param_count(n, rbf_count, classes);
    std::cout << "n=" << r.n << " N=" << r.rbf_count << " C=" << r.classes << "\n"
              << "weight_matrix=" << r.weight_matrix << "\n"
              << "layer_norm_affine=" << r.layer_norm << "\n"
              << "linear_head_weights=" << r.linear_weights << "\n"
              << "extra_over_linear=" << r.extra_over_linear << "\n"
              << "note: " << r.note << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "params failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace kac
