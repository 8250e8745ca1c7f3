// ltlab command-line driver: seeded dataset generation, experiment runs,
// hyper-parameter sweeps, data-pruning curves and diagnostics export.
//
// Commands: gen-data, run, sweep, prune, diagnose. All outputs are a pure
// function of the config and seed: rerunning a command produces identical
// bytes.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ltlab/config.hpp"
#include "ltlab/diagnostics.hpp"
#include "ltlab/framework.hpp"
#include "ltlab/prune.hpp"

namespace fs = std::filesystem;
using ltlab::ordered_json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> eval_mode;
  std::optional<std::string> prune_direction;
};

ltlab::RunConfig resolve_config(const CommonOpts& opts) {
  ltlab::RunConfig cfg;
  if (!opts.config_path.empty()) cfg = ltlab::load_config(opts.config_path);
  if (opts.seed) cfg.experiment.seed = *opts.seed;
  if (opts.threads) cfg.threads = *opts.threads;
  if (opts.eval_mode) {
    cfg.experiment.eval_modes = {ltlab::parse_eval_mode(*opts.eval_mode)};
  }
  if (opts.prune_direction) {
    if (*opts.prune_direction == "low") {
      cfg.prune.direction = ltlab::PruneDirection::drop_lowest;
    } else if (*opts.prune_direction == "high") {
      cfg.prune.direction = ltlab::PruneDirection::drop_highest;
    } else {
      throw std::runtime_error("--prune-direction must be low or high");
    }
  }
  return cfg;
}

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw std::runtime_error("--out directory is required");
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

ordered_json report_to_json(const ltlab::EvalReport& rep) {
  return ordered_json{{"tag", rep.tag},
                      {"mode", ltlab::eval_mode_name(rep.mode)},
                      {"calibrated", rep.calibrated},
                      {"overall", rep.overall},
                      {"head", rep.head},
                      {"mid", rep.mid},
                      {"tail", rep.tail},
                      {"per_class", rep.per_class}};
}

// Runs tasks[i] for every i on up to `threads` workers; results land in
// index order, so the merge is deterministic.
void run_parallel(const std::vector<std::function<void()>>& tasks,
                  std::size_t threads) {
  if (threads <= 1 || tasks.size() <= 1) {
    for (const auto& task : tasks) task();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(tasks.size());
  for (std::size_t t = 0; t < std::min(threads, tasks.size()); ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        try {
          tasks[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

void append_stat_row(std::string& csv, const std::string& prefix,
                     const std::vector<double>& values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= values.empty() ? 1.0 : static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  if (values.size() > 1) var /= static_cast<double>(values.size() - 1);
  csv += prefix + "," + ltlab::format_double(mean) + "," +
         ltlab::format_double(std::sqrt(var)) + "\n";
}

// --- gen-data ---

int cmd_gen_data(const CommonOpts& opts) {
  const ltlab::RunConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_out_dir(opts.out_dir);
  ltlab::SynthSpec spec = cfg.experiment.data;
  spec.seed = cfg.experiment.seed;
  const ltlab::Dataset ds = ltlab::synth_gaussian_lt(spec);
  ltlab::save_csv(ds, (dir / "dataset.csv").string());

  std::string manifest;
  manifest += "dim=" + std::to_string(spec.dim) + "\n";
  manifest += "classes=" + std::to_string(spec.classes) + "\n";
  manifest += "total=" + std::to_string(spec.lt.total) + "\n";
  manifest += "beta=" + ltlab::format_double(spec.lt.imbalance) + "\n";
  manifest += "mean_radius=" + ltlab::format_double(spec.mean_radius) + "\n";
  manifest += "noise_sigma=" + ltlab::format_double(spec.noise_sigma) + "\n";
  manifest += "seed=" + std::to_string(spec.seed) + "\n";
  manifest += "class_counts=";
  for (std::size_t c = 0; c < ds.class_counts.size(); ++c) {
    if (c) manifest += ",";
    manifest += std::to_string(ds.class_counts[c]);
  }
  manifest += "\n";
  write_text(dir / "manifest.txt", manifest);
  std::cout << "wrote " << ds.size() << " samples to " << (dir / "dataset.csv")
            << "\n";
  return 0;
}

// --- run ---

void write_result_bundle(const fs::path& dir, const ltlab::RunConfig& cfg,
                         const ltlab::ExperimentResult& res) {
  ordered_json j;
  j["config"] = ltlab::config_to_json(cfg);
  j["reports"] = ordered_json::array();
  for (const auto& rep : res.reports) j["reports"].push_back(report_to_json(rep));
  j["smoothness"] = {{"linear", res.smoothness_linear},
                     {"angular", res.smoothness_angular}};
  if (res.calibration) {
    j["calibration"] = {{"s", res.calibration->strength},
                        {"form", res.calibration->form == ltlab::SmoothForm::linear
                                     ? "linear"
                                     : "sine"},
                        {"m", res.calibration->mean_conf},
                        {"F", res.calibration->bias},
                        {"gamma", res.calibration->gamma}};
  }
  j["profiles"] = ordered_json::object();
  for (const auto& [name, profile] : res.profiles) {
    j["profiles"][name] = profile.values;
  }
  write_json(dir / "results.json", j);

  std::string csv = "tag,mode,calibrated,overall,head,mid,tail\n";
  for (const auto& rep : res.reports) {
    csv += rep.tag;
    csv += std::string(",") + ltlab::eval_mode_name(rep.mode);
    csv += rep.calibrated ? ",1" : ",0";
    csv += "," + ltlab::format_double(rep.overall);
    csv += "," + ltlab::format_double(rep.head);
    csv += "," + ltlab::format_double(rep.mid);
    csv += "," + ltlab::format_double(rep.tail);
    csv += "\n";
  }
  write_text(dir / "metrics.csv", csv);

  fs::create_directories(dir / "profiles");
  for (const auto& [name, profile] : res.profiles) {
    ltlab::save_profile_csv(profile, (dir / "profiles" / (name + ".csv")).string());
  }
  if (res.calibration) {
    ltlab::save_profile(*res.calibration, (dir / "calibration.txt").string());
  }
  ltlab::checkpoint_save(res.stage1_model, (dir / "stage1.ckpt").string());
  if (res.stage2_model) {
    ltlab::checkpoint_save(*res.stage2_model, (dir / "stage2.ckpt").string());
  }
}

int cmd_run(const CommonOpts& opts) {
  const ltlab::RunConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_out_dir(opts.out_dir);
  const ltlab::ExperimentResult res = ltlab::run_experiment(cfg.experiment);
  write_result_bundle(dir, cfg, res);
  for (const auto& rep : res.reports) {
    std::cout << rep.tag << " overall=" << rep.overall << " head=" << rep.head
              << " mid=" << rep.mid << " tail=" << rep.tail << "\n";
  }
  return 0;
}

// --- sweep ---

int cmd_sweep(const CommonOpts& opts) {
  const ltlab::RunConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_out_dir(opts.out_dir);
  const bool sweep_tau = cfg.sweep.parameter == "tau";

  struct Cell {
    double overall = 0, head = 0, mid = 0, tail = 0;
  };
  const std::size_t rows = cfg.sweep.grid.size();
  const std::size_t cols = cfg.seeds.size();
  std::vector<Cell> cells(rows * cols);

  std::vector<std::function<void()>> tasks;
  for (std::size_t gi = 0; gi < rows; ++gi) {
    for (std::size_t si = 0; si < cols; ++si) {
      tasks.push_back([&, gi, si] {
        ltlab::ExperimentConfig ex = cfg.experiment;
        ex.seed = cfg.seeds[si];
        if (sweep_tau) {
          ex.stage2 = ltlab::Stage2::alas;
          ex.tau = cfg.sweep.grid[gi];
        } else {
          ex.posthoc = ltlab::Posthoc::abs;
          ex.abs_s = cfg.sweep.grid[gi];
        }
        const ltlab::ExperimentResult res = ltlab::run_experiment(ex);
        const char* want = sweep_tau ? "s2_angular" : "abs";
        for (const auto& rep : res.reports) {
          if (rep.tag == want) {
            cells[gi * cols + si] = Cell{rep.overall, rep.head, rep.mid, rep.tail};
          }
        }
      });
    }
  }
  run_parallel(tasks, cfg.threads);

  std::string csv =
      "parameter,value,mean_overall,sd_overall,mean_head,sd_head,"
      "mean_mid,sd_mid,mean_tail,sd_tail\n";
  ordered_json jrows = ordered_json::array();
  for (std::size_t gi = 0; gi < rows; ++gi) {
    std::vector<double> ov, hd, md, tl;
    for (std::size_t si = 0; si < cols; ++si) {
      const Cell& c = cells[gi * cols + si];
      ov.push_back(c.overall);
      hd.push_back(c.head);
      md.push_back(c.mid);
      tl.push_back(c.tail);
    }
    auto stat = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      if (v.size() > 1) var /= static_cast<double>(v.size() - 1);
      return std::pair<double, double>{mean, std::sqrt(var)};
    };
    const auto [mo, so] = stat(ov);
    const auto [mh, sh] = stat(hd);
    const auto [mm, sm] = stat(md);
    const auto [mt, st] = stat(tl);
    csv += cfg.sweep.parameter + "," + ltlab::format_double(cfg.sweep.grid[gi]);
    for (double v : {mo, so, mh, sh, mm, sm, mt, st}) {
      csv += "," + ltlab::format_double(v);
    }
    csv += "\n";
    jrows.push_back({{"value", cfg.sweep.grid[gi]},
                     {"mean_overall", mo},
                     {"sd_overall", so},
                     {"mean_head", mh},
                     {"mean_mid", mm},
                     {"mean_tail", mt}});
  }
  write_text(dir / "sweep.csv", csv);
  ordered_json j;
  j["config"] = ltlab::config_to_json(cfg);
  j["parameter"] = cfg.sweep.parameter;
  j["rows"] = jrows;
  write_json(dir / "results.json", j);
  std::cout << csv;
  return 0;
}

// --- prune ---

int cmd_prune(const CommonOpts& opts) {
  const ltlab::RunConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_out_dir(opts.out_dir);
  const std::size_t n_metrics = cfg.prune.metrics.size();
  const std::size_t n_fracs = cfg.prune.fractions.size();
  const std::size_t n_seeds = cfg.seeds.size();

  std::vector<double> acc(n_metrics * n_fracs * n_seeds, 0.0);
  std::vector<std::function<void()>> tasks;
  std::mutex scores_mutex;
  std::optional<ltlab::PruneScoreTable> first_avh_table;
  std::vector<std::size_t> first_labels;

  for (std::size_t si = 0; si < n_seeds; ++si) {
    tasks.push_back([&, si] {
      const std::uint64_t seed = cfg.seeds[si];
      ltlab::ExperimentConfig ex = cfg.experiment;
      ex.seed = seed;
      ltlab::SynthSpec data = ex.data;
      data.seed = seed;
      const ltlab::Dataset train = ltlab::synth_gaussian_lt(data);
      const ltlab::Dataset test =
          ltlab::synth_balanced_test(data, ex.test_per_class);
      const ltlab::GroupSpec groups = ltlab::effective_groups(ex);

      // One score table per ensemble metric; member seeds derive from the
      // run seed so distinct runs get distinct ensembles.
      std::map<int, ltlab::PruneScoreTable> tables;
      std::vector<std::uint64_t> member_seeds(cfg.prune.ensemble_size);
      for (std::size_t k = 0; k < member_seeds.size(); ++k) {
        member_seeds[k] = ltlab::mix64(seed ^ ltlab::mix64(900 + k));
      }
      for (std::size_t mi = 0; mi < n_metrics; ++mi) {
        const ltlab::PruneMetric metric = cfg.prune.metrics[mi];
        if (metric == ltlab::PruneMetric::el2n || metric == ltlab::PruneMetric::avh) {
          tables.emplace(static_cast<int>(mi),
                         ltlab::ensemble_protocol(train, ex.model, metric,
                                                  cfg.prune.ensemble_epochs,
                                                  member_seeds, ex.batch_size, ex.opt));
        }
      }
      if (si == 0) {
        for (std::size_t mi = 0; mi < n_metrics; ++mi) {
          if (cfg.prune.metrics[mi] == ltlab::PruneMetric::avh && tables.count(mi)) {
            std::lock_guard<std::mutex> lock(scores_mutex);
            first_avh_table = tables.at(static_cast<int>(mi));
            first_labels = train.labels;
          }
        }
      }

      for (std::size_t mi = 0; mi < n_metrics; ++mi) {
        const ltlab::PruneMetric metric = cfg.prune.metrics[mi];
        for (std::size_t fi = 0; fi < n_fracs; ++fi) {
          const double fraction = cfg.prune.fractions[fi];
          ltlab::PrunePlan plan;
          if (metric == ltlab::PruneMetric::random) {
            plan = ltlab::random_prune(train.size(), fraction, seed);
          } else if (metric == ltlab::PruneMetric::class_random) {
            plan = ltlab::classwise_random_prune(train.labels, fraction, seed);
          } else {
            plan = ltlab::prune_by_score(tables.at(static_cast<int>(mi)).scores,
                                         fraction, cfg.prune.direction);
          }
          const ltlab::Dataset pruned = ltlab::apply_plan(train, plan);
          const ltlab::ModelParams model = ltlab::train_stage_one(
              pruned, ex.model, ltlab::Stage1Loss::ce, ex.stage1_epochs,
              ex.batch_size, ex.opt, seed);
          const ltlab::EvalReport rep =
              ltlab::evaluate(model, test, ltlab::EvalMode::linear, groups);
          acc[(mi * n_fracs + fi) * n_seeds + si] = rep.overall;
        }
      }
    });
  }
  run_parallel(tasks, cfg.threads);

  std::string csv = "metric,fraction,mean_accuracy,sd_accuracy\n";
  ordered_json jrows = ordered_json::array();
  for (std::size_t mi = 0; mi < n_metrics; ++mi) {
    for (std::size_t fi = 0; fi < n_fracs; ++fi) {
      std::vector<double> values;
      for (std::size_t si = 0; si < n_seeds; ++si) {
        values.push_back(acc[(mi * n_fracs + fi) * n_seeds + si]);
      }
      const std::string prefix =
          std::string(ltlab::metric_name(cfg.prune.metrics[mi])) + "," +
          ltlab::format_double(cfg.prune.fractions[fi]);
      append_stat_row(csv, prefix, values);
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      jrows.push_back({{"metric", ltlab::metric_name(cfg.prune.metrics[mi])},
                       {"fraction", cfg.prune.fractions[fi]},
                       {"mean_accuracy", mean},
                       {"per_seed", values}});
    }
  }
  write_text(dir / "prune.csv", csv);
  if (first_avh_table) {
    ltlab::save_scores_csv(*first_avh_table, first_labels,
                           (dir / "scores.csv").string());
  }
  ordered_json j;
  j["config"] = ltlab::config_to_json(cfg);
  j["rows"] = jrows;
  write_json(dir / "results.json", j);
  std::cout << csv;
  return 0;
}

// --- diagnose ---

int cmd_diagnose(const CommonOpts& opts) {
  const ltlab::RunConfig cfg = resolve_config(opts);
  const fs::path dir = prepare_out_dir(opts.out_dir);
  ltlab::ExperimentConfig ex = cfg.experiment;
  const ltlab::ExperimentResult res = ltlab::run_experiment(ex);

  fs::create_directories(dir / "profiles");
  for (const auto& [name, profile] : res.profiles) {
    ltlab::save_profile_csv(profile, (dir / "profiles" / (name + ".csv")).string());
  }

  // Hardness-accuracy correlation from an AVH ensemble on the training set.
  ltlab::SynthSpec data = ex.data;
  data.seed = ex.seed;
  const ltlab::Dataset train = ltlab::synth_gaussian_lt(data);
  const ltlab::Dataset test = ltlab::synth_balanced_test(data, ex.test_per_class);
  std::vector<std::uint64_t> member_seeds(cfg.prune.ensemble_size);
  for (std::size_t k = 0; k < member_seeds.size(); ++k) {
    member_seeds[k] = ltlab::mix64(ex.seed ^ ltlab::mix64(900 + k));
  }
  const ltlab::PruneScoreTable avh = ltlab::ensemble_protocol(
      train, ex.model, ltlab::PruneMetric::avh, cfg.prune.ensemble_epochs,
      member_seeds, ex.batch_size, ex.opt);
  std::vector<ltlab::Matrix> member_angles;
  for (const std::uint64_t mseed : member_seeds) {
    const ltlab::ModelParams member = ltlab::train_stage_one(
        train, ex.model, ltlab::Stage1Loss::ce, cfg.prune.ensemble_epochs,
        ex.batch_size, ex.opt, mseed);
    const ltlab::ForwardCache cache = ltlab::forward_extractor(member, train.features);
    const ltlab::AngularCache ang =
        ltlab::angular_forward(cache.features(), member.classifier, true);
    ltlab::Matrix a(ang.logits.rows, ang.logits.cols);
    for (std::size_t k = 0; k < a.data.size(); ++k) {
      a.data[k] = std::numbers::pi - ang.logits.data[k];
    }
    member_angles.push_back(std::move(a));
  }
  const ltlab::EvalReport train_rep = ltlab::evaluate(
      res.stage1_model, train, ltlab::EvalMode::angular, ltlab::effective_groups(ex));
  const ltlab::HardnessRecord hardness =
      ltlab::hardness_accuracy(avh, member_angles, train.labels, train_rep.per_class);

  std::string csv = "class_index,mean_avh,accuracy\n";
  for (std::size_t c = 0; c < hardness.class_mean_avh.size(); ++c) {
    csv += std::to_string(c) + "," + ltlab::format_double(hardness.class_mean_avh[c]) +
           "," + ltlab::format_double(hardness.class_accuracy[c]) + "\n";
  }
  write_text(dir / "hardness.csv", csv);

  ordered_json j;
  j["config"] = ltlab::config_to_json(cfg);
  j["smoothness"] = {{"linear", res.smoothness_linear},
                     {"angular", res.smoothness_angular}};
  j["hardness"] = {
      {"pearson", hardness.pearson_r ? ordered_json(*hardness.pearson_r)
                                     : ordered_json(nullptr)},
      {"spearman", hardness.spearman_r ? ordered_json(*hardness.spearman_r)
                                       : ordered_json(nullptr)},
      {"correct_samples", hardness.correct_samples},
      {"avh_bound_violations", hardness.avh_bound_violations}};
  write_json(dir / "results.json", j);
  std::cout << "smoothness linear=" << res.smoothness_linear
            << " angular=" << res.smoothness_angular << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ltlab: long-tailed classification laboratory"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto add_common = [&opts](CLI::App* cmd) {
    cmd->add_option("--config", opts.config_path, "config file (key=value or JSON)");
    cmd->add_option("--out", opts.out_dir, "output directory")->required();
    cmd->add_option("--seed", opts.seed, "root seed override");
    cmd->add_option("--threads", opts.threads, "worker threads for fan-out");
    cmd->add_option("--eval-mode", opts.eval_mode, "linear|angular|lws");
    cmd->add_option("--prune-direction", opts.prune_direction, "low|high");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a long-tailed dataset");
  auto* run = app.add_subcommand("run", "run a configured experiment");
  auto* sweep = app.add_subcommand("sweep", "grid sweep over tau or s");
  auto* prune = app.add_subcommand("prune", "pruning curve across metrics");
  auto* diagnose = app.add_subcommand("diagnose", "export diagnostic profiles");
  for (CLI::App* cmd : {gen, run, sweep, prune, diagnose}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(opts);
    if (run->parsed()) return cmd_run(opts);
    if (sweep->parsed()) return cmd_sweep(opts);
    if (prune->parsed()) return cmd_prune(opts);
    if (diagnose->parsed()) return cmd_diagnose(opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
