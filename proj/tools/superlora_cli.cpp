// Command-line surface: parameter-budget sweeps, adapter materialization,
// toy training and geometry analysis.
//
// Exit codes: 0 success, 2 invalid input, 3 infeasible config,
// 4 numerical failure.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "superlora/adapter.hpp"
#include "superlora/geometry.hpp"
#include "superlora/trainer.hpp"

namespace {

using namespace superlora;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumerical = 4;

std::uint64_t default_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SUPERLORA_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::invalid_argument("SUPERLORA_SEED is not an unsigned integer: " +
                                  std::string(env));
    }
  }
  return 0;
}

std::string format_double(double v) {
  // plain '.' decimal, no locale, shortest round-trip
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(17) << v;
  std::string s = out.str();
  return s;
}

// --- sweep -------------------------------------------------------------------

struct SweepGrid {
  std::vector<std::size_t> groups{1};
  std::vector<std::string> group_modes;  // empty = derive from G
  std::vector<std::size_t> orders{2};
  std::vector<std::size_t> splits{1};
  std::vector<std::size_t> ranks{8};
  std::vector<double> rhos{1.0};
  std::vector<std::string> cores{"identity"};
  std::vector<std::string> projections{"identity"};
  std::vector<bool> reshapes{true};
  std::vector<std::optional<std::size_t>> dense_split_dims{std::nullopt};
  double alpha = 1.0;
  std::optional<std::pair<std::size_t, std::size_t>> budget;
};

SweepGrid parse_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("grid: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("grid: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("grid: top level must be an object");
  static const char* known[] = {"G",    "group_mode", "M",       "K",
                                "r",    "rho",        "core",    "projection",
                                "reshape", "dense_split_dim", "alpha", "budget"};
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known))
      throw std::invalid_argument("grid: unknown key '" + key + "'");
  }

  SweepGrid grid;
  auto sizes = [](const nlohmann::json& a) {
    std::vector<std::size_t> out;
    for (const auto& v : a) out.push_back(v.get<std::size_t>());
    return out;
  };
  if (doc.contains("G")) grid.groups = sizes(doc.at("G"));
  if (doc.contains("M")) grid.orders = sizes(doc.at("M"));
  if (doc.contains("K")) grid.splits = sizes(doc.at("K"));
  if (doc.contains("r")) grid.ranks = sizes(doc.at("r"));
  if (doc.contains("group_mode"))
    for (const auto& v : doc.at("group_mode")) grid.group_modes.push_back(v.get<std::string>());
  if (doc.contains("rho")) {
    grid.rhos.clear();
    for (const auto& v : doc.at("rho")) grid.rhos.push_back(v.get<double>());
  }
  if (doc.contains("core")) {
    grid.cores.clear();
    for (const auto& v : doc.at("core")) grid.cores.push_back(v.get<std::string>());
  }
  if (doc.contains("projection")) {
    grid.projections.clear();
    for (const auto& v : doc.at("projection")) grid.projections.push_back(v.get<std::string>());
  }
  if (doc.contains("reshape")) {
    grid.reshapes.clear();
    for (const auto& v : doc.at("reshape")) grid.reshapes.push_back(v.get<bool>());
  }
  if (doc.contains("dense_split_dim")) {
    grid.dense_split_dims.clear();
    for (const auto& v : doc.at("dense_split_dim"))
      grid.dense_split_dims.push_back(v.get<std::size_t>());
  }
  if (doc.contains("alpha")) grid.alpha = doc.at("alpha").get<double>();
  if (doc.contains("budget")) {
    const auto& b = doc.at("budget");
    if (!b.is_array() || b.size() != 2)
      throw std::invalid_argument("grid: budget must be [min, max]");
    grid.budget = {b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>()};
  }
  if (grid.groups.empty() || grid.orders.empty() || grid.splits.empty() || grid.ranks.empty() ||
      grid.rhos.empty() || grid.cores.empty() || grid.projections.empty() ||
      grid.reshapes.empty())
    throw std::invalid_argument("grid: every axis needs at least one value");
  return grid;
}

std::string csv_row(const std::string& variant, const SuperLoraConfig& c, std::size_t params) {
  std::ostringstream out;
  out << variant << ',' << c.groups << ',' << to_string(c.group_mode) << ',' << c.order << ','
      << c.splits << ',' << c.ranks.front() << ',' << format_double(c.rho) << ','
      << to_string(c.core) << ',' << to_string(c.projection) << ','
      << (c.reshape ? "true" : "false") << ',' << params;
  return out.str();
}

std::string point_label(const SuperLoraConfig& c) {
  std::ostringstream out;
  out << "G=" << c.groups << " mode=" << to_string(c.group_mode) << " M=" << c.order
      << " K=" << c.splits << " r=" << c.ranks.front() << " rho=" << format_double(c.rho)
      << " core=" << to_string(c.core) << " projection=" << to_string(c.projection)
      << " reshape=" << (c.reshape ? "true" : "false");
  if (c.dense_split_dim) out << " dense_split_dim=" << *c.dense_split_dim;
  return out.str();
}

int run_sweep(const std::filesystem::path& manifest_path, const std::filesystem::path& grid_path,
              const std::filesystem::path& out_path, const std::string& budget_flag) {
  const WeightManifest manifest = read_manifest(manifest_path);
  SweepGrid grid = parse_grid(grid_path);

  if (!budget_flag.empty()) {
    const auto colon = budget_flag.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("--budget must look like MIN:MAX");
    grid.budget = {std::stoull(budget_flag.substr(0, colon)),
                   std::stoull(budget_flag.substr(colon + 1))};
  }

  std::vector<std::pair<std::size_t, std::string>> rows;
  std::vector<std::string> rejected;

  for (std::size_t g : grid.groups) {
    std::vector<GroupMode> modes;
    if (grid.group_modes.empty()) {
      modes.push_back(GroupMode::group_wise);
      if (g == manifest.entries.size()) modes.push_back(GroupMode::weight_wise);
    } else {
      for (const std::string& m : grid.group_modes) modes.push_back(group_mode_from_string(m));
    }
    for (GroupMode mode : modes)
      for (std::size_t m : grid.orders)
        for (std::size_t k : grid.splits)
          for (std::size_t r : grid.ranks)
            for (double rho : grid.rhos)
              for (const std::string& core : grid.cores)
                for (const std::string& projection : grid.projections)
                  for (bool reshape : grid.reshapes)
                    for (const std::optional<std::size_t>& dense : grid.dense_split_dims) {
                      SuperLoraConfig c;
                      c.groups = g;
                      c.group_mode = mode;
                      c.order = m;
                      c.splits = k;
                      c.ranks = {r};
                      c.rho = rho;
                      c.alpha = grid.alpha;
                      c.reshape = reshape;
                      c.dense_split_dim = dense;
                      try {
                        c.core = core_kind_from_string(core);
                        c.projection = projection_mode_from_string(projection);
                        c.validate();
                        const std::size_t params = count_params(c, manifest);
                        if (grid.budget &&
                            (params < grid.budget->first || params > grid.budget->second))
                          continue;
                        rows.emplace_back(params, csv_row(classify_variant(c), c, params));
                      } catch (const std::exception& e) {
                        rejected.push_back(point_label(c) + ": " + e.what());
                      }
                    }
  }

  if (rows.empty())
    throw InfeasibleConfigError("sweep: no feasible configuration in the grid" +
                                std::string(grid.budget ? " within the budget" : ""));

  std::sort(rows.begin(), rows.end());
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("sweep: cannot open " + out_path.string() + " for writing");
  out << "variant,G,group_mode,M,K,r,rho,core,projection,reshape,params\n";
  for (const auto& [params, row] : rows) out << row << "\n";

  const std::filesystem::path reject_path = out_path.string() + ".rejects";
  if (!rejected.empty()) {
    std::ofstream rej(reject_path);
    for (const std::string& line : rejected) rej << line << "\n";
  } else {
    std::filesystem::remove(reject_path);
  }

  std::cout << "wrote " << rows.size() << " rows to " << out_path.string() << " ("
            << rejected.size() << " rejected)" << std::endl;
  return kExitOk;
}

// --- materialize ----------------------------------------------------------------

int run_materialize(const std::filesystem::path& config_path,
                    const std::filesystem::path& manifest_path,
                    const std::optional<std::uint64_t>& seed_flag,
                    const std::filesystem::path& out_path) {
  const SuperLoraConfig config = read_config(config_path);
  const WeightManifest manifest = read_manifest(manifest_path);
  const std::uint64_t seed = default_seed(seed_flag);

  const AdapterState state = init_adapter(config, manifest, seed);
  save_adapter(state, out_path);

  nlohmann::json summary;
  summary["variant"] = classify_variant(config);
  summary["params"] = state.trainable_count();
  summary["groups"] = state.plan.groups.size();
  nlohmann::json dims = nlohmann::json::array();
  for (const GroupRange& g : state.plan.groups) dims.push_back(g.target_shape.dims);
  summary["per_group_dims"] = dims;
  std::cout << summary.dump() << std::endl;
  return kExitOk;
}

// --- train-toy -------------------------------------------------------------------

int run_train_toy(const std::filesystem::path& config_path,
                  const std::filesystem::path& train_path,
                  const std::optional<std::uint64_t>& seed_flag,
                  const std::filesystem::path& out_dir) {
  const SuperLoraConfig config = read_config(config_path);
  const ToyRunConfig run = read_toy_run_config(train_path);
  const std::uint64_t seed = default_seed(seed_flag);

  const ToyModel model = ToyModel::random(run.model, run.model_seed);
  const SyntheticTask task = SyntheticTask::generate(model, run.task);
  AdapterState state = init_adapter(config, model.adaptation_manifest(), seed);

  std::filesystem::create_directories(out_dir);
  const TrainResult result = train(state, model, task, run.train);

  {
    std::ofstream metrics(out_dir / "metrics.jsonl");
    if (!metrics)
      throw std::runtime_error("train-toy: cannot write metrics in " + out_dir.string());
    for (const StepMetrics& rec : result.history) {
      nlohmann::json line;
      line["step"] = rec.step;
      line["loss"] = rec.loss;
      line["eval_acc"] = rec.eval_acc;
      metrics << line.dump() << "\n";
    }
  }
  save_adapter(state, out_dir / "adapter.slad");

  const double ratio = result.final_loss / result.initial_loss;
  nlohmann::json summary;
  summary["variant"] = classify_variant(config);
  summary["params"] = state.trainable_count();
  summary["initial_loss"] = result.initial_loss;
  summary["final_loss"] = result.final_loss;
  summary["loss_ratio"] = ratio;
  summary["eval_acc"] = result.history.back().eval_acc;
  std::cout << summary.dump() << std::endl;

  if (!(ratio <= 1.0 + 1e-12)) {
    std::cerr << "train-toy: loss did not improve (ratio " << ratio << ")" << std::endl;
    return kExitNumerical;
  }
  return kExitOk;
}

// --- analyze ---------------------------------------------------------------------

int run_analyze(const std::filesystem::path& a_path, const std::filesystem::path& b_path,
                std::size_t k, const std::string& norm_flag) {
  const DenseTensor a = read_sltf(a_path);
  const DenseTensor b = read_sltf(b_path);
  NormKind norm = NormKind::frobenius;
  if (norm_flag == "spectral")
    norm = NormKind::spectral;
  else if (norm_flag != "frobenius")
    throw std::invalid_argument("--norm must be frobenius or spectral");
  const GeometryReport report = analyze_pair(a, b, k, norm);
  std::cout << report_to_json(report) << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SuperLoRA low-rank adapter toolkit"};
  app.require_subcommand(1);

  std::string manifest_path, grid_path, out_path, budget;
  auto* sweep = app.add_subcommand("sweep", "enumerate a hyperparameter grid into a CSV");
  sweep->add_option("--manifest", manifest_path, "weight manifest JSON")->required();
  sweep->add_option("--grid", grid_path, "grid JSON")->required();
  sweep->add_option("--out", out_path, "output CSV path")->required();
  sweep->add_option("--budget", budget, "parameter budget MIN:MAX");

  std::string config_path;
  std::optional<std::uint64_t> seed;
  auto* materialize = app.add_subcommand("materialize", "build and save an adapter");
  materialize->add_option("--config", config_path, "adapter config JSON")->required();
  materialize->add_option("--manifest", manifest_path, "weight manifest JSON")->required();
  materialize->add_option("--seed", seed, "init seed (default $SUPERLORA_SEED or 0)");
  materialize->add_option("--out", out_path, "adapter file path")->required();

  std::string train_path, out_dir;
  auto* train_toy = app.add_subcommand("train-toy", "train an adapter on the synthetic task");
  train_toy->add_option("--config", config_path, "adapter config JSON")->required();
  train_toy->add_option("--train", train_path, "toy run config JSON")->required();
  train_toy->add_option("--seed", seed, "init seed (default $SUPERLORA_SEED or 0)");
  train_toy->add_option("--out", out_dir, "output directory")->required();

  std::string a_path, b_path, norm = "frobenius";
  std::size_t k = 5;
  auto* analyze = app.add_subcommand("analyze", "singular-subspace similarity of two SLTF files");
  analyze->add_option("--a", a_path, "first SLTF tensor")->required();
  analyze->add_option("--b", b_path, "second SLTF tensor")->required();
  analyze->add_option("--k", k, "number of principal singular vectors (default 5)");
  analyze->add_option("--norm", norm, "frobenius (default) or spectral");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (sweep->parsed())
      return run_sweep(manifest_path, grid_path, out_path, budget);
    if (materialize->parsed())
      return run_materialize(config_path, manifest_path, seed, out_path);
    if (train_toy->parsed())
      return run_train_toy(config_path, train_path, seed, out_dir);
    if (analyze->parsed())
      return run_analyze(a_path, b_path, k, norm);
  } catch (const superlora::DivergenceError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitNumerical;
  } catch (const superlora::NumericalError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitNumerical;
  } catch (const superlora::InfeasibleConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitInvalid;
  }
  return kExitInvalid;
}
