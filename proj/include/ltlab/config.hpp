#pragma once
// Run configuration: a flat, sectioned key=value text format, with JSON
// accepted as an alternative input. Unknown keys are rejected with their
// full path; every field has a default, and the resolved config is echoed
// into the output bundle.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ltlab/framework.hpp"
#include "ltlab/prune.hpp"

namespace ltlab {

using ordered_json = nlohmann::ordered_json;

struct SweepConfig {
  std::string parameter = "s";  // "tau" or "s"
  std::vector<double> grid{0.0, 0.04, 0.08, 0.12, 0.16, 0.20, 0.24, 0.28, 0.32};
};

struct PruneConfig {
  std::vector<PruneMetric> metrics{PruneMetric::el2n, PruneMetric::avh,
                                   PruneMetric::random, PruneMetric::class_random};
  std::vector<double> fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::size_t ensemble_size = 5;
  std::size_t ensemble_epochs = 5;
  PruneDirection direction = PruneDirection::drop_lowest;
};

struct RunConfig {
  ExperimentConfig experiment = default_benchmark_config();
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};  // for sweep/prune fan-out
  std::size_t threads = 1;
  SweepConfig sweep;
  PruneConfig prune;
  // Raw [groups] ranges, resolved by finalize_config once all three are seen.
  std::map<std::string, std::pair<std::size_t, std::size_t>> group_ranges;
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] inline void bad_key(const std::string& path, const std::string& why) {
  throw std::runtime_error("config error at '" + path + "': " + why);
}

inline double to_double(const std::string& path, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    bad_key(path, "expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& path, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    bad_key(path, "expected an unsigned integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& path, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  bad_key(path, "expected a boolean (0/1/true/false), got '" + v + "'");
}

inline SmoothForm to_form(const std::string& path, const std::string& v) {
  if (v == "linear") return SmoothForm::linear;
  if (v == "concave" || v == "sine") return SmoothForm::concave;
  bad_key(path, "expected linear|concave|sine, got '" + v + "'");
}

}  // namespace cfgdetail

inline Stage1Loss parse_stage1(const std::string& v) {
  if (v == "ce") return Stage1Loss::ce;
  if (v == "ce_mixup") return Stage1Loss::ce_mixup;
  if (v == "aem") return Stage1Loss::aem;
  throw std::runtime_error("config error: stage1 must be ce|ce_mixup|aem, got '" + v + "'");
}

inline Stage2 parse_stage2(const std::string& v) {
  if (v == "none") return Stage2::none;
  if (v == "las_lws") return Stage2::las_lws;
  if (v == "alas") return Stage2::alas;
  throw std::runtime_error("config error: stage2 must be none|las_lws|alas, got '" + v + "'");
}

inline EvalMode parse_eval_mode(const std::string& v) {
  if (v == "linear") return EvalMode::linear;
  if (v == "angular") return EvalMode::angular;
  if (v == "lws") return EvalMode::lws;
  throw std::runtime_error("config error: eval mode must be linear|angular|lws, got '" + v + "'");
}

inline PruneMetric parse_metric(const std::string& v) {
  if (v == "el2n") return PruneMetric::el2n;
  if (v == "avh") return PruneMetric::avh;
  if (v == "random") return PruneMetric::random;
  if (v == "class_random") return PruneMetric::class_random;
  throw std::runtime_error("config error: unknown prune metric '" + v + "'");
}

// Applies a single "section.key" = value assignment; throws on unknown keys.
inline void apply_config_entry(RunConfig& cfg, const std::string& section,
                               const std::string& key, const std::string& value) {
  using namespace cfgdetail;
  const std::string path = section + "." + key;
  ExperimentConfig& ex = cfg.experiment;
  if (section == "data") {
    if (key == "dim") ex.data.dim = to_u64(path, value);
    else if (key == "classes") {
      ex.data.classes = to_u64(path, value);
      ex.data.lt.classes = ex.data.classes;
    } else if (key == "total") ex.data.lt.total = to_u64(path, value);
    else if (key == "beta") ex.data.lt.imbalance = to_double(path, value);
    else if (key == "mean_radius") ex.data.mean_radius = to_double(path, value);
    else if (key == "noise_sigma") ex.data.noise_sigma = to_double(path, value);
    else if (key == "test_per_class") ex.test_per_class = to_u64(path, value);
    else bad_key(path, "unknown key");
  } else if (section == "model") {
    if (key == "hidden") {
      ex.model.hidden.clear();
      for (const auto& h : split(value, ',')) {
        ex.model.hidden.push_back(to_u64(path, h));
      }
    } else if (key == "feat_dim") ex.model.feat_dim = to_u64(path, value);
    else if (key == "classifier_bias") ex.model.classifier_bias = to_bool(path, value);
    else if (key == "feature_relu") ex.model.feature_relu = to_bool(path, value);
    else bad_key(path, "unknown key");
  } else if (section == "train") {
    if (key == "stage1") ex.stage1 = parse_stage1(value);
    else if (key == "stage2") ex.stage2 = parse_stage2(value);
    else if (key == "posthoc") {
      if (value == "none") ex.posthoc = Posthoc::none;
      else if (value == "abs") ex.posthoc = Posthoc::abs;
      else bad_key(path, "expected none|abs");
    } else if (key == "eval_modes") {
      ex.eval_modes.clear();
      for (const auto& mstr : split(value, ',')) {
        ex.eval_modes.push_back(parse_eval_mode(mstr));
      }
    } else if (key == "stage1_epochs") ex.stage1_epochs = to_u64(path, value);
    else if (key == "stage2_epochs") ex.stage2_epochs = to_u64(path, value);
    else if (key == "batch_size") ex.batch_size = to_u64(path, value);
    else if (key == "lr") ex.opt.lr = to_double(path, value);
    else if (key == "momentum") ex.opt.momentum = to_double(path, value);
    else if (key == "weight_decay") ex.opt.weight_decay = to_double(path, value);
    else if (key == "grad_clip") ex.opt.grad_clip = to_double(path, value);
    else if (key == "aem_phase_lr_scale") ex.opt.aem_phase_lr_scale = to_double(path, value);
    else if (key == "mixup_alpha") ex.mixup_alpha = to_double(path, value);
    else if (key == "tau") ex.tau = to_double(path, value);
    else if (key == "alas_form") ex.alas_form = to_form(path, value);
    else if (key == "las_form") ex.las_form = to_form(path, value);
    else if (key == "alas_per_epoch") ex.alas_per_epoch = to_bool(path, value);
    else if (key == "aem_through_angular") ex.aem_through_angular = to_bool(path, value);
    else if (key == "abs_s") ex.abs_s = to_double(path, value);
    else if (key == "abs_form") ex.abs_form = to_form(path, value);
    else bad_key(path, "unknown key");
  } else if (section == "groups") {
    auto parse_range = [&](const std::string& v) {
      const auto parts = split(v, ':');
      if (parts.size() != 2) bad_key(path, "expected begin:end");
      return std::pair<std::size_t, std::size_t>{to_u64(path, parts[0]),
                                                 to_u64(path, parts[1])};
    };
    if (key == "head" || key == "mid" || key == "tail") {
      cfg.group_ranges[key] = parse_range(value);
    } else {
      bad_key(path, "unknown key");
    }
  } else if (section == "run") {
    if (key == "seed") ex.seed = to_u64(path, value);
    else if (key == "seeds") {
      cfg.seeds.clear();
      for (const auto& s : split(value, ',')) cfg.seeds.push_back(to_u64(path, s));
    } else if (key == "threads") cfg.threads = to_u64(path, value);
    else bad_key(path, "unknown key");
  } else if (section == "sweep") {
    if (key == "parameter") {
      if (value != "tau" && value != "s") bad_key(path, "expected tau|s");
      cfg.sweep.parameter = value;
    } else if (key == "grid") {
      cfg.sweep.grid.clear();
      for (const auto& g : split(value, ',')) {
        cfg.sweep.grid.push_back(to_double(path, g));
      }
    } else bad_key(path, "unknown key");
  } else if (section == "prune") {
    if (key == "metrics") {
      cfg.prune.metrics.clear();
      for (const auto& mstr : split(value, ',')) {
        cfg.prune.metrics.push_back(parse_metric(mstr));
      }
    } else if (key == "fractions") {
      cfg.prune.fractions.clear();
      for (const auto& f : split(value, ',')) {
        cfg.prune.fractions.push_back(to_double(path, f));
      }
    } else if (key == "k") cfg.prune.ensemble_size = to_u64(path, value);
    else if (key == "e") cfg.prune.ensemble_epochs = to_u64(path, value);
    else if (key == "direction") {
      if (value == "low") cfg.prune.direction = PruneDirection::drop_lowest;
      else if (value == "high") cfg.prune.direction = PruneDirection::drop_highest;
      else bad_key(path, "expected low|high");
    } else bad_key(path, "unknown key");
  } else {
    bad_key(section, "unknown section");
  }
}

// Resolves cross-key state after all entries are applied.
inline void finalize_config(RunConfig& cfg) {
  if (!cfg.group_ranges.empty()) {
    if (cfg.group_ranges.size() != 3) {
      throw std::runtime_error(
          "config error at 'groups': head, mid and tail must all be given");
    }
    cfg.experiment.groups =
        group_split(cfg.group_ranges["tail"].second, cfg.group_ranges["head"],
                    cfg.group_ranges["mid"], cfg.group_ranges["tail"]);
  }
}

inline RunConfig parse_config_text(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = cfgdetail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config error at line " + std::to_string(lineno) +
                               ": expected key=value");
    }
    if (section.empty()) {
      throw std::runtime_error("config error at line " + std::to_string(lineno) +
                               ": key outside of a [section]");
    }
    apply_config_entry(cfg, section, cfgdetail::trim(t.substr(0, eq)),
                       cfgdetail::trim(t.substr(eq + 1)));
  }
  finalize_config(cfg);
  return cfg;
}

inline RunConfig parse_config_json(const ordered_json& j) {
  RunConfig cfg;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) {
      throw std::runtime_error("config error at '" + section + "': expected an object");
    }
    for (const auto& [key, value] : body.items()) {
      std::string v;
      if (value.is_string()) v = value.get<std::string>();
      else if (value.is_boolean()) v = value.get<bool>() ? "1" : "0";
      else if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) {
          if (i) v += ",";
          v += value[i].is_string() ? value[i].get<std::string>() : value[i].dump();
        }
      } else v = value.dump();
      apply_config_entry(cfg, section, key, v);
    }
  }
  finalize_config(cfg);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  // Peek: a leading '{' means JSON.
  char first = 0;
  in >> std::ws;
  in.get(first);
  in.unget();
  if (first == '{') {
    ordered_json j;
    in >> j;
    return parse_config_json(j);
  }
  in.clear();
  in.seekg(0);
  return parse_config_text(in);
}

// Resolved-config echo for the output bundle.
inline ordered_json config_to_json(const RunConfig& cfg) {
  const ExperimentConfig& ex = cfg.experiment;
  ordered_json j;
  j["data"] = {{"dim", ex.data.dim},
               {"classes", ex.data.classes},
               {"total", ex.data.lt.total},
               {"beta", ex.data.lt.imbalance},
               {"mean_radius", ex.data.mean_radius},
               {"noise_sigma", ex.data.noise_sigma},
               {"test_per_class", ex.test_per_class}};
  j["model"] = {{"hidden", ex.model.hidden},
                {"feat_dim", ex.model.feat_dim},
                {"classifier_bias", ex.model.classifier_bias},
                {"feature_relu", ex.model.feature_relu}};
  std::vector<std::string> modes;
  for (EvalMode m : ex.eval_modes) modes.emplace_back(eval_mode_name(m));
  const char* s1 = ex.stage1 == Stage1Loss::ce ? "ce"
                   : ex.stage1 == Stage1Loss::ce_mixup ? "ce_mixup" : "aem";
  const char* s2 = ex.stage2 == Stage2::none ? "none"
                   : ex.stage2 == Stage2::las_lws ? "las_lws" : "alas";
  j["train"] = {{"stage1", s1},
                {"stage2", s2},
                {"posthoc", ex.posthoc == Posthoc::abs ? "abs" : "none"},
                {"eval_modes", modes},
                {"stage1_epochs", ex.stage1_epochs},
                {"stage2_epochs", ex.stage2_epochs},
                {"batch_size", ex.batch_size},
                {"lr", ex.opt.lr},
                {"momentum", ex.opt.momentum},
                {"weight_decay", ex.opt.weight_decay},
                {"grad_clip", ex.opt.grad_clip},
                {"aem_phase_lr_scale", ex.opt.aem_phase_lr_scale},
                {"mixup_alpha", ex.mixup_alpha},
                {"tau", ex.tau},
                {"alas_form", ex.alas_form == SmoothForm::linear ? "linear" : "concave"},
                {"las_form", ex.las_form == SmoothForm::linear ? "linear" : "concave"},
                {"alas_per_epoch", ex.alas_per_epoch},
                {"aem_through_angular", ex.aem_through_angular},
                {"abs_s", ex.abs_s},
                {"abs_form", ex.abs_form == SmoothForm::linear ? "linear" : "sine"}};
  const GroupSpec g = effective_groups(ex);
  j["groups"] = {{"head", {0, g.head_end}},
                 {"mid", {g.head_end, g.mid_end}},
                 {"tail", {g.mid_end, g.classes}}};
  j["run"] = {{"seed", ex.seed}, {"seeds", cfg.seeds}, {"threads", cfg.threads}};
  j["sweep"] = {{"parameter", cfg.sweep.parameter}, {"grid", cfg.sweep.grid}};
  std::vector<std::string> metrics;
  for (PruneMetric m : cfg.prune.metrics) metrics.emplace_back(metric_name(m));
  j["prune"] = {{"metrics", metrics},
                {"fractions", cfg.prune.fractions},
                {"k", cfg.prune.ensemble_size},
                {"e", cfg.prune.ensemble_epochs},
                {"direction",
                 cfg.prune.direction == PruneDirection::drop_lowest ? "low" : "high"}};
  return j;
}

}  // namespace ltlab
