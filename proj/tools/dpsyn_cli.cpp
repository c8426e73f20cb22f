//
// Copyright 2026 The dpsyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// dpsyn: command-line driver.
//
//   dpsyn gen-data --config cfg.json --out data.csv
//   dpsyn run      --config cfg.json --out results/ --threads 4
//   dpsyn evaluate --train a.csv --test b.csv --synth c.csv --out metrics.json
//   dpsyn attack   --synth c.csv --members a.csv --nonmembers b.csv
//   dpsyn report   --in results/report.json
//
// Exit codes: 0 success, 1 a cell or evaluation failed, 2 bad config or input.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "dpsyn/harness.h"
#include "json.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

absl::StatusOr<dpsyn::ExperimentConfig> ReadConfig(const std::string& path) {
  if (path.empty()) return dpsyn::ExperimentConfig{};
  std::ifstream in(path);
  if (!in) return absl::NotFoundError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(std::string("config is not valid JSON: ") + e.what());
  }
  return dpsyn::ConfigFromJson(j);
}

int Fail(const absl::Status& status, int code) {
  std::cerr << "dpsyn: " << status << "\n";
  return code;
}

int GenData(const std::string& config_path, const std::string& out, const std::string& oracle) {
  auto config = ReadConfig(config_path);
  if (!config.ok()) return Fail(config.status(), kExitConfig);
  auto planted = dpsyn::GeneratePlanted(config->planted, config->planted_seed);
  if (!planted.ok()) return Fail(planted.status(), kExitConfig);
  if (auto s = dpsyn::SaveCsv(planted->first, out, config->label_col); !s.ok()) {
    return Fail(s, kExitFailure);
  }
  if (!oracle.empty()) {
    nlohmann::json j;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : planted->second.de_pairs) {
      pairs.push_back({{"class_a", p.class_a}, {"class_b", p.class_b}, {"up", p.up},
                       {"down", p.down}});
    }
    j["de_pairs"] = pairs;
    j["modules"] = planted->second.modules;
    std::ofstream(oracle) << j.dump(2) << "\n";
  }
  std::cerr << "wrote " << planted->first.num_rows() << " rows to " << out << "\n";
  return 0;
}

int Run(const std::string& config_path, const std::string& out, int threads,
        const std::string& label_col) {
  auto config = ReadConfig(config_path);
  if (!config.ok()) return Fail(config.status(), kExitConfig);
  if (!out.empty()) config->output_dir = out;
  if (!label_col.empty()) config->label_col = label_col;
  auto report = dpsyn::RunGrid(*config, threads, /*log_progress=*/true);
  if (!report.ok()) return Fail(report.status(), kExitConfig);
  if (auto s = dpsyn::WriteReports(*report, config->output_dir, threads); !s.ok()) {
    return Fail(s, kExitFailure);
  }
  std::cerr << "wrote " << config->output_dir << "/report.{json,csv} ("
            << report->cells.size() << " cells, " << report->failed_cells() << " failed, "
            << std::fixed << std::setprecision(1) << report->wall_seconds << " s)\n";
  return report->failed_cells() > 0 ? kExitFailure : 0;
}

int Evaluate(const std::string& config_path, const std::string& train_path,
             const std::string& test_path, const std::string& synth_path,
             const std::string& label_col, const std::string& out) {
  auto config = ReadConfig(config_path);
  if (!config.ok()) return Fail(config.status(), kExitConfig);
  auto train = dpsyn::LoadCsv(train_path, label_col);
  auto test = dpsyn::LoadCsv(test_path, label_col);
  auto synth = dpsyn::LoadCsv(synth_path, label_col);
  for (const auto* t : {&train, &test, &synth}) {
    if (!t->ok()) return Fail(t->status(), kExitConfig);
  }
  dpsyn::Split split;
  split.train = *train;
  split.test = *test;
  auto ctx = dpsyn::ContextFromSplit(std::move(split), config->eval);
  if (!ctx.ok()) return Fail(ctx.status(), kExitConfig);
  if (synth->num_features() != train->num_features()) {
    return Fail(absl::InvalidArgumentError("ShapeMismatch: synthetic feature count"), kExitConfig);
  }
  dpsyn::CellResult cell;
  cell.model = "external";
  cell.metrics = dpsyn::Evaluate(*synth, **ctx, config->eval);
  const std::string text = dpsyn::CellJson(cell).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else if (auto s = dpsyn::WriteText(out, text); !s.ok()) {
    return Fail(s, kExitFailure);
  }
  return 0;
}

int Attack(const std::string& synth_path, const std::string& members_path,
           const std::string& nonmembers_path, const std::string& label_col) {
  auto synth = dpsyn::LoadCsv(synth_path, label_col);
  auto members = dpsyn::LoadCsv(members_path, label_col);
  auto nonmembers = dpsyn::LoadCsv(nonmembers_path, label_col);
  for (const auto* t : {&synth, &members, &nonmembers}) {
    if (!t->ok()) return Fail(t->status(), kExitConfig);
  }
  auto result = dpsyn::BlackboxAttack(*synth, *members, *nonmembers);
  if (!result.ok()) return Fail(result.status(), kExitConfig);
  std::cout << "mia_auc " << dpsyn::FormatDouble(result->auc) << "\n";
  return 0;
}

// Mean over split seeds of the per-split means, one line per (model, eps).
int Report(const std::string& in_path) {
  std::ifstream in(in_path);
  if (!in) return Fail(absl::NotFoundError("cannot open " + in_path), kExitConfig);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    return Fail(absl::InvalidArgumentError(e.what()), kExitConfig);
  }
  if (j.value("format", "") != "dpsyn-report") {
    return Fail(absl::InvalidArgumentError("not a dpsyn report"), kExitConfig);
  }
  const std::vector<std::string> columns = {"accuracy", "overlap_mean", "knn_test", "knn_train",
                                            "de_tpr",   "de_fpr",       "mia_auc"};
  // (model, eps) -> metric -> (sum, count)
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::pair<double, int>>>
      table;
  std::vector<std::pair<std::string, std::string>> order;
  auto add = [&](const std::string& model, const std::string& eps, const std::string& metric,
                 const nlohmann::json& v) {
    if (!v.is_number()) return;
    auto key = std::make_pair(model, eps);
    if (!table.count(key)) order.push_back(key);
    auto& cell = table[key][metric];
    cell.first += v.get<double>();
    ++cell.second;
  };
  for (const auto& r : j.at("references")) {
    for (const auto& [metric, v] : r.at("metrics").items()) add("reference", "-", metric, v);
  }
  for (const auto& a : j.at("aggregates")) {
    const std::string eps =
        a.at("epsilon").is_string() ? a.at("epsilon").get<std::string>()
                                    : dpsyn::FormatDouble(a.at("epsilon").get<double>());
    add(a.at("model").get<std::string>(), eps, a.at("metric").get<std::string>(), a.at("mean"));
  }
  std::cout << std::left << std::setw(10) << "model" << std::setw(6) << "eps";
  for (const auto& c : columns) std::cout << std::right << std::setw(13) << c;
  std::cout << "\n";
  for (const auto& key : order) {
    std::cout << std::left << std::setw(10) << key.first << std::setw(6) << key.second;
    for (const auto& c : columns) {
      auto it = table[key].find(c);
      std::cout << std::right << std::setw(13);
      if (it == table[key].end()) {
        std::cout << "-";
      } else {
        std::cout << std::fixed << std::setprecision(4) << it->second.first / it->second.second;
      }
    }
    std::cout << "\n";
  }
  std::cout << "failed cells: " << j.value("failed_cells", 0) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private synthetic data benchmark"};
  app.require_subcommand(1);
  std::string config_path, out, label_col = "label";
  int threads = 1;

  auto* gen = app.add_subcommand("gen-data", "Write the planted benchmark table as CSV");
  std::string oracle;
  gen->add_option("--config", config_path, "Experiment config (JSON)");
  gen->add_option("--out", out, "Output CSV")->required();
  gen->add_option("--oracle", oracle, "Also write planted DE pairs and modules (JSON)");

  auto* run = app.add_subcommand("run", "Run the experiment grid");
  run->add_option("--config", config_path, "Experiment config (JSON)");
  run->add_option("--out", out, "Output directory (overrides output_dir)");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  std::string run_label_col;
  run->add_option("--label-col", run_label_col, "Label column of a CSV data source");

  auto* eval = app.add_subcommand("evaluate", "Score a synthetic CSV against real train/test");
  std::string train_path, test_path, synth_path;
  eval->add_option("--config", config_path, "Config whose eval block is used");
  eval->add_option("--train", train_path, "Real training CSV")->required();
  eval->add_option("--test", test_path, "Real held-out CSV")->required();
  eval->add_option("--synth", synth_path, "Synthetic CSV")->required();
  eval->add_option("--label-col", label_col, "Label column name");
  eval->add_option("--out", out, "Metrics JSON (default stdout)");

  auto* attack = app.add_subcommand("attack", "Distance-based membership inference");
  std::string members_path, nonmembers_path;
  attack->add_option("--synth", synth_path, "Synthetic CSV")->required();
  attack->add_option("--members", members_path, "Training rows")->required();
  attack->add_option("--nonmembers", nonmembers_path, "Held-out rows")->required();
  attack->add_option("--label-col", label_col, "Label column name");

  auto* report = app.add_subcommand("report", "Summarize a report.json");
  std::string in_path;
  report->add_option("--in", in_path, "report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (*gen) return GenData(config_path, out, oracle);
  if (*run) return Run(config_path, out, threads, run_label_col);
  if (*eval) return Evaluate(config_path, train_path, test_path, synth_path, label_col, out);
  if (*attack) return Attack(synth_path, members_path, nonmembers_path, label_col);
  return Report(in_path);
}
