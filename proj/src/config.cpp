#include "coalmpc/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace coalmpc {

using nlohmann::json;

SimulationOptions RunConfig::simulation_options() const {
  SimulationOptions o;
  o.controller = controller;
  o.supervisor.link_cost = controller.link_cost;
  o.supervisor.decision_interval = decision_interval;
  o.supervisor.parallel = parallel;
  o.plant = plant;
  o.seed = seed;
  o.use_cache = use_cache;
  o.parallel = parallel;
  return o;
}

void RunConfig::validate() const {
  if (reaches.empty()) throw std::invalid_argument("canal.reaches: at least one reach required");
  if (reaches.size() > 64) throw std::invalid_argument("canal.reaches: at most 64 reaches");
  for (std::size_t i = 0; i < reaches.size(); ++i) {
    const std::string f = "canal.reaches[" + std::to_string(i) + "]";
    if (reaches[i].delay_steps < 1) throw std::invalid_argument(f + ".delay: must be >= 1");
    if (!(reaches[i].backwater_surface > 0)) {
      throw std::invalid_argument(f + ".backwater_surface: must be > 0");
    }
  }
  controller.validate();
  scenario.validate(static_cast<int>(reaches.size()));
  plant.apply(reaches);
  if (plant.level_noise_std < 0) throw std::invalid_argument("plant.level_noise_std: must be >= 0");
  if (decision_interval < 1) throw std::invalid_argument("supervisor.decision_interval: must be >= 1");
  for (double c : sweep) {
    if (!(c >= 0)) throw std::invalid_argument("sweep: link costs must be >= 0");
  }
}

Scenario scenario_by_name(const std::string& name) {
  if (name == "scenario1") return Scenario::scenario1();
  if (name == "scenario2") return Scenario::scenario2();
  if (name == "steady") return Scenario::steady();
  throw std::invalid_argument("scenario: unknown preset '" + name + "'");
}

RunConfig default_config() {
  RunConfig c;
  c.reaches = dez_reaches();
  c.scenario = Scenario::scenario1();
  return c;
}

namespace {

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::invalid_argument(path + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument((path.empty() ? "" : path + ".") + key + ": unknown field");
    }
  }
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument((path.empty() ? "" : path + ".") + key + ": wrong type");
  }
}

Vector read_vector(const json& j, const std::string& field) {
  std::vector<double> v;
  try {
    v = j.get<std::vector<double>>();
  } catch (const json::exception&) {
    throw std::invalid_argument(field + ": expected an array of numbers");
  }
  return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

int line_of(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(source + ":" + std::to_string(line_of(text, e.byte)) +
                             ": parse error: " + e.what());
  }
  RunConfig c = default_config();
  check_keys(doc, "", {"canal", "controller", "supervisor", "scenario", "plant", "sweep",
                       "output_dir", "seed", "cache", "parallel"});

  if (doc.contains("canal")) {
    const json& canal = doc["canal"];
    check_keys(canal, "canal", {"reaches"});
    if (canal.contains("reaches")) {
      if (!canal["reaches"].is_array()) throw std::invalid_argument("canal.reaches: expected an array");
      c.reaches.clear();
      int i = 0;
      for (const json& r : canal["reaches"]) {
        const std::string f = "canal.reaches[" + std::to_string(i) + "]";
        check_keys(r, f, {"backwater_surface", "delay", "length", "bottom_width"});
        if (!r.contains("backwater_surface")) throw std::invalid_argument(f + ".backwater_surface: required");
        if (!r.contains("delay")) throw std::invalid_argument(f + ".delay: required");
        ReachParams p;
        p.index = ++i;
        read(r, f, "backwater_surface", p.backwater_surface);
        read(r, f, "delay", p.delay_steps);
        read(r, f, "length", p.length);
        read(r, f, "bottom_width", p.bottom_width);
        if (p.delay_steps < 1) throw std::invalid_argument(f + ".delay: must be >= 1");
        c.reaches.push_back(p);
      }
    }
  }

  if (doc.contains("controller")) {
    const json& j = doc["controller"];
    const std::string f = "controller";
    check_keys(j, f, {"prediction_horizon", "control_horizon", "level_weight", "input_weight",
                      "slack_weight", "setpoint_slack_weight", "link_cost", "sample_time",
                      "max_flow_increment", "flow_floor", "history_length", "kalman"});
    ControllerConfig& k = c.controller;
    read(j, f, "prediction_horizon", k.prediction_horizon);
    read(j, f, "control_horizon", k.control_horizon);
    read(j, f, "level_weight", k.level_weight);
    read(j, f, "input_weight", k.input_weight);
    read(j, f, "slack_weight", k.slack_weight);
    read(j, f, "setpoint_slack_weight", k.setpoint_slack_weight);
    read(j, f, "link_cost", k.link_cost);
    read(j, f, "sample_time", k.sample_time);
    read(j, f, "max_flow_increment", k.max_flow_increment);
    read(j, f, "flow_floor", k.flow_floor);
    read(j, f, "history_length", k.history_length);
    if (j.contains("kalman")) {
      const json& kj = j["kalman"];
      const std::string kf = "controller.kalman";
      check_keys(kj, kf, {"flow_process_noise", "level_process_noise", "disturbance_process_noise",
                          "measurement_noise", "prior_flow_variance", "prior_level_variance",
                          "prior_disturbance_variance"});
      KalmanSettings& s = k.kalman;
      read(kj, kf, "flow_process_noise", s.flow_process_noise);
      read(kj, kf, "level_process_noise", s.level_process_noise);
      read(kj, kf, "disturbance_process_noise", s.disturbance_process_noise);
      read(kj, kf, "measurement_noise", s.measurement_noise);
      read(kj, kf, "prior_flow_variance", s.prior_flow_variance);
      read(kj, kf, "prior_level_variance", s.prior_level_variance);
      read(kj, kf, "prior_disturbance_variance", s.prior_disturbance_variance);
    }
  }

  if (doc.contains("supervisor")) {
    check_keys(doc["supervisor"], "supervisor", {"decision_interval"});
    read(doc["supervisor"], "supervisor", "decision_interval", c.decision_interval);
  }

  if (doc.contains("scenario")) {
    const json& j = doc["scenario"];
    const std::string f = "scenario";
    check_keys(j, f, {"preset", "name", "horizon", "initial_offtakes", "schedule", "head_capacity"});
    if (j.contains("preset")) {
      std::string preset;
      read(j, f, "preset", preset);
      c.scenario = scenario_by_name(preset);
    }
    read(j, f, "name", c.scenario.name);
    read(j, f, "horizon", c.scenario.horizon);
    read(j, f, "head_capacity", c.scenario.head_capacity);
    if (j.contains("initial_offtakes")) {
      c.scenario.initial_offtakes = read_vector(j["initial_offtakes"], "scenario.initial_offtakes");
    }
    if (j.contains("schedule")) {
      if (!j["schedule"].is_array()) throw std::invalid_argument("scenario.schedule: expected an array");
      c.scenario.schedule.clear();
      int i = 0;
      for (const json& e : j["schedule"]) {
        const std::string ef = "scenario.schedule[" + std::to_string(i++) + "]";
        check_keys(e, ef, {"step", "reach", "value"});
        OfftakeChange ch;
        read(e, ef, "step", ch.step);
        read(e, ef, "reach", ch.reach);
        read(e, ef, "value", ch.value);
        c.scenario.schedule.push_back(ch);
      }
    }
  }

  if (doc.contains("plant")) {
    const json& j = doc["plant"];
    check_keys(j, "plant", {"mismatch", "area_factors", "delay_offsets", "level_noise_std"});
    if (j.contains("mismatch")) {
      double f = 0;
      read(j, "plant", "mismatch", f);
      c.plant.area_factors = PlantConfig::mismatch(static_cast<int>(c.reaches.size()), f).area_factors;
    }
    read(j, "plant", "area_factors", c.plant.area_factors);
    read(j, "plant", "delay_offsets", c.plant.delay_offsets);
    read(j, "plant", "level_noise_std", c.plant.level_noise_std);
  }

  read(doc, "", "sweep", c.sweep);
  read(doc, "", "output_dir", c.output_dir);
  read(doc, "", "seed", c.seed);
  read(doc, "", "cache", c.use_cache);
  read(doc, "", "parallel", c.parallel);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string dump_config(const RunConfig& c) {
  json doc;
  for (const auto& r : c.reaches) {
    doc["canal"]["reaches"].push_back({{"backwater_surface", r.backwater_surface},
                                       {"delay", r.delay_steps},
                                       {"length", r.length},
                                       {"bottom_width", r.bottom_width}});
  }
  const ControllerConfig& k = c.controller;
  doc["controller"] = {{"prediction_horizon", k.prediction_horizon},
                       {"control_horizon", k.control_horizon},
                       {"level_weight", k.level_weight},
                       {"input_weight", k.input_weight},
                       {"slack_weight", k.slack_weight},
                       {"setpoint_slack_weight", k.setpoint_slack_weight},
                       {"link_cost", k.link_cost},
                       {"sample_time", k.sample_time},
                       {"max_flow_increment", k.max_flow_increment},
                       {"flow_floor", k.flow_floor},
                       {"history_length", k.history_length}};
  doc["controller"]["kalman"] = {{"flow_process_noise", k.kalman.flow_process_noise},
                                 {"level_process_noise", k.kalman.level_process_noise},
                                 {"disturbance_process_noise", k.kalman.disturbance_process_noise},
                                 {"measurement_noise", k.kalman.measurement_noise},
                                 {"prior_flow_variance", k.kalman.prior_flow_variance},
                                 {"prior_level_variance", k.kalman.prior_level_variance},
                                 {"prior_disturbance_variance", k.kalman.prior_disturbance_variance}};
  doc["supervisor"] = {{"decision_interval", c.decision_interval}};
  const Scenario& s = c.scenario;
  doc["scenario"] = {{"name", s.name},
                     {"horizon", s.horizon},
                     {"head_capacity", s.head_capacity},
                     {"initial_offtakes", std::vector<double>(s.initial_offtakes.data(),
                                                              s.initial_offtakes.data() + s.initial_offtakes.size())},
                     {"schedule", json::array()}};
  for (const auto& e : s.schedule) {
    doc["scenario"]["schedule"].push_back({{"step", e.step}, {"reach", e.reach}, {"value", e.value}});
  }
  doc["plant"] = {{"area_factors", c.plant.area_factors},
                  {"delay_offsets", c.plant.delay_offsets},
                  {"level_noise_std", c.plant.level_noise_std}};
  doc["sweep"] = c.sweep;
  doc["output_dir"] = c.output_dir;
  doc["seed"] = c.seed;
  doc["cache"] = c.use_cache;
  doc["parallel"] = c.parallel;
  return doc.dump(2);
}

std::string config_hash(const RunConfig& config) {
  // Output location and execution switches do not change results.
  RunConfig canonical = config;
  canonical.output_dir.clear();
  canonical.parallel = true;
  canonical.use_cache = true;
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : dump_config(canonical)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace coalmpc
