#include "nsamc/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "nsamc/csv.hpp"

namespace nsamc {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidConfig, "bad value '" + text + "' for " + key);
  }
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_value<T>(key, trim(item)));
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "empty list for " + key);
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += csv::format(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

}  // namespace

void ExperimentConfig::sync() {
  backbone.dropout_rate = run.dropout_rate;
  backbone.dropout_config = run.dropout_config;
  loss.alpha = run.alpha;
}

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "seed") c.run.seed = parse_value<std::uint64_t>(key, value);
  else if (key == "neighbor_count") c.run.neighbor_count = parse_value<int>(key, value);
  else if (key == "dropout_rate") c.run.dropout_rate = parse_value<double>(key, value);
  else if (key == "alpha") c.run.alpha = parse_value<double>(key, value);
  else if (key == "learning_rate") c.run.learning_rate = parse_value<double>(key, value);
  else if (key == "batch_size") c.run.batch_size = parse_value<int>(key, value);
  else if (key == "epochs") c.run.epochs = parse_value<int>(key, value);
  else if (key == "dropout_config") c.run.dropout_config = parse_dropout_config(value);
  else if (key == "encoder") c.backbone.encoder = parse_list<std::size_t>(key, value);
  else if (key == "decoder") c.backbone.decoder = parse_list<std::size_t>(key, value);
  else if (key == "loss") c.loss.kind = parse_loss_kind(value);
  else if (key == "acquisition") c.loss.acquisition = parse_acquisition(value);
  else if (key == "warmup_epochs") c.loss.warmup_epochs = parse_value<int>(key, value);
  else if (key == "scene_seed") c.scene.seed = parse_value<std::uint64_t>(key, value);
  else if (key == "scene_points") c.scene.points = parse_value<std::size_t>(key, value);
  else if (key == "scene_extent") {
    const auto e = parse_list<double>(key, value);
    if (e.size() != 3) throw Error(ErrorCode::InvalidConfig, "scene_extent needs three values");
    c.scene.extent = {e[0], e[1], e[2]};
  } else if (key == "noise") c.scene.boundary_noise_rate = parse_value<double>(key, value);
  else if (key == "boundary_band") c.scene.boundary_band = parse_value<double>(key, value);
  else if (key == "clutter_boxes") c.scene.clutter_boxes = parse_value<std::size_t>(key, value);
  else if (key == "block_edge") c.blocks.edge = parse_value<double>(key, value);
  else if (key == "block_samples") c.blocks.samples = parse_value<std::size_t>(key, value);
  else if (key == "train_scenes") c.train_scenes = parse_value<std::size_t>(key, value);
  else if (key == "eval_scenes") c.eval_scenes = parse_value<std::size_t>(key, value);
  else throw Error(ErrorCode::InvalidConfig, "unknown setting '" + key + "'");
  c.sync();
}

void apply_config_file(ExperimentConfig& config, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ParseError, "expected key=value on line " + std::to_string(line_no), line_no);
    }
    try {
      apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, std::string(e.what()) + " on line " + std::to_string(line_no), line_no);
    }
  }
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  apply_config_file(config, in);
}

std::map<std::string, std::string> to_settings(const ExperimentConfig& c) {
  return {
      {"seed", std::to_string(c.run.seed)},
      {"neighbor_count", std::to_string(c.run.neighbor_count)},
      {"dropout_rate", csv::format(c.run.dropout_rate)},
      {"alpha", csv::format(c.run.alpha)},
      {"learning_rate", csv::format(c.run.learning_rate)},
      {"batch_size", std::to_string(c.run.batch_size)},
      {"epochs", std::to_string(c.run.epochs)},
      {"dropout_config", std::string(to_string(c.run.dropout_config))},
      {"encoder", join(c.backbone.encoder)},
      {"decoder", join(c.backbone.decoder)},
      {"loss", std::string(to_string(c.loss.kind))},
      {"acquisition", std::string(to_string(c.loss.acquisition))},
      {"warmup_epochs", std::to_string(c.loss.warmup_epochs)},
      {"scene_seed", std::to_string(c.scene.seed)},
      {"scene_points", std::to_string(c.scene.points)},
      {"scene_extent", join(std::vector<double>(c.scene.extent.begin(), c.scene.extent.end()))},
      {"noise", csv::format(c.scene.boundary_noise_rate)},
      {"boundary_band", csv::format(c.scene.boundary_band)},
      {"clutter_boxes", std::to_string(c.scene.clutter_boxes)},
      {"block_edge", csv::format(c.blocks.edge)},
      {"block_samples", std::to_string(c.blocks.samples)},
      {"train_scenes", std::to_string(c.train_scenes)},
      {"eval_scenes", std::to_string(c.eval_scenes)},
  };
}

void write_sidecar(const ExperimentConfig& config, const std::string& path) {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : to_settings(config)) j[k] = v;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

ExperimentConfig read_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("sidecar ") + path + ": " + e.what());
  }
  ExperimentConfig config;
  for (const auto& [k, v] : j.items()) {
    apply_setting(config, k, v.is_string() ? v.get<std::string>() : v.dump());
  }
  return config;
}

}  // namespace nsamc
