#include "coalmpc/trace_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "coalmpc/config.hpp"

namespace coalmpc {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_real(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw TraceFormatError(where + ": not a number: '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw TraceFormatError(where + ": not an integer: '" + s + "'");
  return static_cast<int>(v);
}

const char* kTailColumns[] = {"topology", "performance_cost", "links", "coalitions",
                              "input_decision_vars", "slack_decision_vars"};

std::string header_row(int n) {
  std::string h = "step";
  for (int i = 1; i <= n; ++i) {
    const std::string s = std::to_string(i);
    h += ",e_" + s + ",q_" + s + ",dq_" + s + ",offtake_" + s;
  }
  for (const char* c : kTailColumns) h += std::string(",") + c;
  return h;
}

}  // namespace

int trace_columns(int num_reaches) { return 1 + 4 * num_reaches + 6; }

void write_trace(const SimTrace& trace, const std::string& path, const std::string& config_hash) {
  auto out = open_out(path);
  const int n = trace.num_reaches;
  out << "# coalmpc trace\n";
  out << "# version=" << kSoftwareVersion << "\n";
  out << "# config_hash=" << config_hash << "\n";
  out << "# reaches=" << n << "\n";
  out << header_row(n) << "\n";
  for (const auto& s : trace.steps) {
    out << s.step;
    for (int i = 0; i < n; ++i) {
      out << ',' << fmt(s.levels(i)) << ',' << fmt(s.flows(i)) << ',' << fmt(s.inputs(i)) << ','
          << fmt(s.offtakes(i));
    }
    out << ',' << s.topology << ',' << fmt(s.performance_cost) << ',' << s.links << ','
        << s.coalitions << ',' << s.input_decision_vars << ',' << s.slack_decision_vars << "\n";
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

TraceFile read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open trace");
  TraceFile tf;
  int n = -1;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "version") tf.version = value;
      if (key == "config_hash") tf.config_hash = value;
      if (key == "reaches") n = parse_int(value, where);
      continue;
    }
    if (n < 0) throw TraceFormatError(where + ": missing reaches header");
    if (!header_seen) {
      if (line != header_row(n)) throw TraceFormatError(where + ": unexpected column header");
      header_seen = true;
      continue;
    }
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) != trace_columns(n)) {
      throw TraceFormatError(where + ": expected " + std::to_string(trace_columns(n)) +
                             " columns, found " + std::to_string(cells.size()));
    }
    StepRecord s;
    s.step = parse_int(cells[0], where);
    s.levels.resize(n);
    s.flows.resize(n);
    s.inputs.resize(n);
    s.offtakes.resize(n);
    for (int i = 0; i < n; ++i) {
      const auto b = static_cast<std::size_t>(1 + 4 * i);
      s.levels(i) = parse_real(cells[b], where);
      s.flows(i) = parse_real(cells[b + 1], where);
      s.inputs(i) = parse_real(cells[b + 2], where);
      s.offtakes(i) = parse_real(cells[b + 3], where);
    }
    const auto t = static_cast<std::size_t>(1 + 4 * n);
    s.topology = cells[t];
    s.performance_cost = parse_real(cells[t + 1], where);
    s.links = parse_int(cells[t + 2], where);
    s.coalitions = parse_int(cells[t + 3], where);
    s.input_decision_vars = parse_int(cells[t + 4], where);
    s.slack_decision_vars = parse_int(cells[t + 5], where);
    tf.trace.steps.push_back(std::move(s));
  }
  if (!header_seen) throw TraceFormatError(path + ": no column header");
  tf.trace.num_reaches = n;
  return tf;
}

void write_controller_log(const SimTrace& trace, const std::string& path) {
  auto out = open_out(path);
  out << "step,members,setpoint_status,qp_status,qp_iterations,fallback,input_decision_vars,"
         "slack_decision_vars,setpoint_state,setpoint_input,sigma,omega_hat\n";
  auto join = [](const Vector& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v(i));
    return s;
  };
  for (std::size_t k = 0; k < trace.coalitions.size(); ++k) {
    for (const auto& c : trace.coalitions[k]) {
      std::string members;
      for (std::size_t i = 0; i < c.members.size(); ++i) {
        members += (i ? " " : "") + std::to_string(c.members[i] + 1);
      }
      out << trace.steps[k].step << ',' << members << ',' << c.setpoint_status << ','
          << c.qp_status << ',' << c.qp_iterations << ',' << (c.fallback ? 1 : 0) << ',' << c.input_decision_vars << ','
          << c.slack_decision_vars << ',' << join(c.setpoint_state) << ','
          << join(c.setpoint_input) << ',' << join(c.setpoint_slack) << ','
          << join(c.disturbance) << "\n";
    }
  }
}

void write_selection_log(const SimTrace& trace, const std::string& path) {
  auto out = open_out(path);
  out << "step,incumbent,chosen,candidate,links,performance,network,value\n";
  for (const auto& e : trace.selections) {
    for (const auto& c : e.candidates) {
      out << e.step << ',' << e.incumbent << ',' << e.chosen << ',' << c.topology.bit_string()
          << ',' << c.topology.link_count() << ',' << fmt(c.performance) << ',' << fmt(c.network)
          << ',' << fmt(c.value()) << "\n";
    }
  }
}

void emit_plot_data(const SimTrace& trace, double link_cost, const std::string& directory) {
  std::filesystem::create_directories(directory);
  const int n = trace.num_reaches;
  const std::filesystem::path dir(directory);

  auto series = [&](const char* name, const char* prefix, auto value) {
    auto out = open_out((dir / name).string());
    out << "step";
    for (int i = 1; i <= n; ++i) out << ',' << prefix << i;
    out << "\n";
    for (const auto& s : trace.steps) {
      out << s.step;
      for (int i = 0; i < n; ++i) out << ',' << fmt(value(s, i));
      out << "\n";
    }
  };
  series("level_errors.csv", "e_", [](const StepRecord& s, int i) { return s.levels(i); });
  series("inflows.csv", "q_", [](const StepRecord& s, int i) { return s.flows(i); });

  {
    auto out = open_out((dir / "link_raster.csv").string());
    out << "step";
    for (int l = 1; l < n; ++l) out << ",link_" << l << "_" << l + 1;
    out << "\n";
    for (const auto& s : trace.steps) {
      out << s.step;
      for (char b : s.topology) out << ',' << b;
      out << "\n";
    }
  }
  {
    auto out = open_out((dir / "accumulated_costs.csv").string());
    out << "step,performance,network,combined\n";
    double perf = 0, net = 0;
    for (const auto& s : trace.steps) {
      perf += s.performance_cost;
      net += link_cost * s.links;
      out << s.step << ',' << fmt(perf) << ',' << fmt(net) << ',' << fmt(perf + net) << "\n";
    }
  }
}

}  // namespace coalmpc
