#include "declab/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace declab {
namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  std::ostringstream os;
  os << "config error at line " << line << ": " << msg;
  throw std::invalid_argument(os.str());
}

double parse_real(const std::string& v, int line) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) fail(line, "trailing characters in number '" + v + "'");
    return x;
  } catch (const std::invalid_argument&) {
    fail(line, "expected a number, got '" + v + "'");
  } catch (const std::out_of_range&) {
    fail(line, "number out of range: '" + v + "'");
  }
}

int64_t parse_int(const std::string& v, int line) {
  int64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(line, "expected an integer, got '" + v + "'");
  return x;
}

uint64_t parse_u64(const std::string& v, int line) {
  uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(line, "expected an unsigned integer, got '" + v + "'");
  return x;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

std::string fmt_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
  ExperimentConfig cfg;
  using Setter = std::function<void(ExperimentConfig&, const std::string&, int)>;
  const std::map<std::string, Setter> setters = {
      {"problem.kind", [](auto& c, const std::string& v, int) { c.loss = loss_kind_from_string(v); }},
      {"problem.source",
       [](auto& c, const std::string& v, int line) {
         if (v != "synthetic" && v != "csv") fail(line, "source must be synthetic or csv");
         c.source = v;
       }},
      {"problem.csv", [](auto& c, const std::string& v, int) { c.csv_path = v; }},
      {"problem.dim", [](auto& c, const std::string& v, int l) { c.dim = int(parse_int(v, l)); }},
      {"problem.samples",
       [](auto& c, const std::string& v, int l) { c.samples = int(parse_int(v, l)); }},
      {"problem.data_seed",
       [](auto& c, const std::string& v, int l) { c.data_seed = parse_u64(v, l); }},
      {"problem.proportions",
       [](auto& c, const std::string& v, int l) {
         c.proportions.clear();
         for (const auto& item : split_list(v)) c.proportions.push_back(parse_real(item, l));
       }},
      {"problem.target_low",
       [](auto& c, const std::string& v, int l) { c.target_low = parse_real(v, l); }},
      {"problem.target_high",
       [](auto& c, const std::string& v, int l) { c.target_high = parse_real(v, l); }},
      {"problem.blob_separation",
       [](auto& c, const std::string& v, int l) { c.blob_separation = parse_real(v, l); }},
      {"problem.blob_scale",
       [](auto& c, const std::string& v, int l) { c.blob_scale = parse_real(v, l); }},
      {"topology.kind",
       [](auto& c, const std::string& v, int l) {
         if (v == "file") {
           c.graph = GraphKind::explicit_edges;
           return;
         }
         try {
           c.graph = graph_kind_from_string(v);
         } catch (const std::exception& e) {
           fail(l, e.what());
         }
       }},
      {"topology.n", [](auto& c, const std::string& v, int l) { c.n = int(parse_int(v, l)); }},
      {"topology.k",
       [](auto& c, const std::string& v, int l) { c.k_regular = int(parse_int(v, l)); }},
      {"topology.graph_seed",
       [](auto& c, const std::string& v, int l) { c.graph_seed = parse_u64(v, l); }},
      {"topology.file", [](auto& c, const std::string& v, int) { c.topology_file = v; }},
      {"mixing.kind",
       [](auto& c, const std::string& v, int line) {
         if (v != "metropolis" && v != "file" && v != "optimal3")
           fail(line, "mixing kind must be metropolis, file, or optimal3");
         c.mixing = v;
       }},
      {"mixing.file", [](auto& c, const std::string& v, int) { c.mixing_file = v; }},
      {"algorithm.kind",
       [](auto& c, const std::string& v, int l) {
         try {
           c.algorithm = algorithm_kind_from_string(v);
         } catch (const std::exception& e) {
           fail(l, e.what());
         }
       }},
      {"algorithm.batch",
       [](auto& c, const std::string& v, int l) { c.batch = int(parse_int(v, l)); }},
      {"algorithm.batch_mode",
       [](auto& c, const std::string& v, int line) {
         if (v != "proportional" && v != "equal")
           fail(line, "batch_mode must be proportional or equal");
         c.batch_mode = v;
       }},
      {"algorithm.equal_batch",
       [](auto& c, const std::string& v, int l) { c.equal_batch = int(parse_int(v, l)); }},
      {"schedule.kind",
       [](auto& c, const std::string& v, int line) {
         if (v != "constant" && v != "diminishing")
           fail(line, "schedule kind must be constant or diminishing");
         c.schedule = v;
       }},
      {"schedule.gamma0",
       [](auto& c, const std::string& v, int l) { c.gamma0 = parse_real(v, l); }},
      {"schedule.a", [](auto& c, const std::string& v, int l) { c.dim_a = parse_real(v, l); }},
      {"schedule.p", [](auto& c, const std::string& v, int l) { c.dim_p = parse_real(v, l); }},
      {"run.eta", [](auto& c, const std::string& v, int l) { c.eta = parse_real(v, l); }},
      {"run.iterations",
       [](auto& c, const std::string& v, int l) { c.iterations = parse_int(v, l); }},
      {"run.seeds",
       [](auto& c, const std::string& v, int l) {
         c.seeds.clear();
         for (const auto& item : split_list(v)) c.seeds.push_back(parse_u64(item, l));
         if (c.seeds.empty()) fail(l, "seeds list must not be empty");
       }},
      {"run.output", [](auto& c, const std::string& v, int) { c.output = v; }},
      {"run.stride", [](auto& c, const std::string& v, int l) { c.stride = parse_int(v, l); }},
      {"run.divergence_threshold",
       [](auto& c, const std::string& v, int l) { c.divergence_threshold = parse_real(v, l); }},
      {"run.x0_mode",
       [](auto& c, const std::string& v, int line) {
         if (v != "constant" && v != "gaussian") fail(line, "x0_mode must be constant or gaussian");
         c.x0_mode = v;
       }},
      {"run.x0_value",
       [](auto& c, const std::string& v, int l) { c.x0_value = parse_real(v, l); }},
      {"run.x0_scale",
       [](auto& c, const std::string& v, int l) { c.x0_scale = parse_real(v, l); }},
      {"run.epsilon", [](auto& c, const std::string& v, int l) { c.epsilon = parse_real(v, l); }},
      {"run.threads",
       [](auto& c, const std::string& v, int l) { c.threads = int(parse_int(v, l)); }},
  };

  std::istringstream in(text);
  std::string line;
  std::string section;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "problem" && section != "topology" && section != "mixing" &&
          section != "algorithm" && section != "schedule" && section != "run")
        fail(line_no, "unknown section [" + section + "]");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) fail(line_no, "key '" + key + "' appears before any [section]");
    const auto it = setters.find(section + "." + key);
    if (it == setters.end())
      fail(line_no, "unknown key '" + key + "' in section [" + section + "]");
    it->second(cfg, value, line_no);
    seen.insert(section + "." + key);
  }
  for (const char* required : {"problem.kind", "topology.kind", "algorithm.kind",
                               "run.iterations", "run.seeds"})
    if (!seen.count(required))
      throw std::invalid_argument(std::string("config error: missing required key '") +
                                  required + "'");
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "[problem]\n";
  os << "kind = " << to_string(loss) << "\n";
  os << "source = " << source << "\n";
  if (!csv_path.empty()) os << "csv = " << csv_path << "\n";
  os << "dim = " << dim << "\n";
  os << "samples = " << samples << "\n";
  os << "data_seed = " << data_seed << "\n";
  if (!proportions.empty()) {
    os << "proportions = ";
    for (size_t i = 0; i < proportions.size(); ++i)
      os << (i ? "," : "") << fmt_real(proportions[i]);
    os << "\n";
  }
  os << "target_low = " << fmt_real(target_low) << "\n";
  os << "target_high = " << fmt_real(target_high) << "\n";
  os << "blob_separation = " << fmt_real(blob_separation) << "\n";
  os << "blob_scale = " << fmt_real(blob_scale) << "\n";
  os << "\n[topology]\n";
  os << "kind = " << to_string(graph) << "\n";
  os << "n = " << n << "\n";
  os << "k = " << k_regular << "\n";
  os << "graph_seed = " << graph_seed << "\n";
  if (!topology_file.empty()) os << "file = " << topology_file << "\n";
  os << "\n[mixing]\n";
  os << "kind = " << mixing << "\n";
  if (!mixing_file.empty()) os << "file = " << mixing_file << "\n";
  os << "\n[algorithm]\n";
  os << "kind = " << to_string(algorithm) << "\n";
  os << "batch = " << batch << "\n";
  os << "batch_mode = " << batch_mode << "\n";
  os << "equal_batch = " << equal_batch << "\n";
  os << "\n[schedule]\n";
  os << "kind = " << schedule << "\n";
  os << "gamma0 = " << fmt_real(gamma0) << "\n";
  os << "a = " << fmt_real(dim_a) << "\n";
  os << "p = " << fmt_real(dim_p) << "\n";
  os << "\n[run]\n";
  os << "eta = " << fmt_real(eta) << "\n";
  os << "iterations = " << iterations << "\n";
  os << "seeds = ";
  for (size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  os << "\n";
  os << "output = " << output << "\n";
  os << "stride = " << stride << "\n";
  os << "divergence_threshold = " << fmt_real(divergence_threshold) << "\n";
  os << "x0_mode = " << x0_mode << "\n";
  os << "x0_value = " << fmt_real(x0_value) << "\n";
  os << "x0_scale = " << fmt_real(x0_scale) << "\n";
  os << "epsilon = " << fmt_real(epsilon) << "\n";
  os << "threads = " << threads << "\n";
  return os.str();
}

void ExperimentConfig::validate() const {
  if (n < 1) throw std::invalid_argument("config: topology n must be >= 1");
  if (source == "csv" && csv_path.empty())
    throw std::invalid_argument("config: source = csv requires problem.csv");
  if (source == "synthetic" && (samples < 1 || dim < 1))
    throw std::invalid_argument("config: synthetic problems need samples >= 1 and dim >= 1");
  if (graph == GraphKind::explicit_edges && topology_file.empty())
    throw std::invalid_argument("config: explicit topology requires topology.file");
  if (mixing == "file" && mixing_file.empty())
    throw std::invalid_argument("config: mixing kind file requires mixing.file");
  if (mixing == "optimal3" && n != 3)
    throw std::invalid_argument("config: the optimal3 mixing fixture requires n = 3");
  if (!proportions.empty() && int(proportions.size()) != n)
    throw std::invalid_argument("config: proportions length must equal topology n");
  if (algorithm == AlgorithmKind::centralized_sgd && batch < 1)
    throw std::invalid_argument("config: centralized_sgd requires algorithm.batch >= 1");
  if (batch_mode == "equal" && equal_batch < 1)
    throw std::invalid_argument("config: equal batch mode requires equal_batch >= 1");
  if (!(eta > 0.0) || eta > 1.0) throw std::invalid_argument("config: eta must lie in (0, 1]");
  if (iterations < 0) throw std::invalid_argument("config: iterations must be >= 0");
  if (stride < 1) throw std::invalid_argument("config: stride must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("config: seeds must not be empty");
  if (!(divergence_threshold > 0.0))
    throw std::invalid_argument("config: divergence_threshold must be positive");
  if (epsilon < 0.0) throw std::invalid_argument("config: epsilon must be >= 0");
  if (threads < 0) throw std::invalid_argument("config: threads must be >= 0");
  make_schedule();  // validates schedule parameters
  if (algorithm != AlgorithmKind::centralized_sgd) make_batch_policy();
  if ((algorithm == AlgorithmKind::dsgt_eliminated || algorithm == AlgorithmKind::d2) &&
      schedule != "constant")
    throw std::invalid_argument(
        "config: the two-term recursions (dsgt_eliminated, d2) require a constant schedule");
}

StepSchedule ExperimentConfig::make_schedule() const {
  if (schedule == "constant") return StepSchedule::constant(gamma0);
  return StepSchedule::diminishing(dim_a, dim_p);
}

BatchPolicy ExperimentConfig::make_batch_policy() const {
  if (batch_mode == "proportional") return BatchPolicy::proportional(eta);
  return BatchPolicy::equal(equal_batch);
}

}  // namespace declab
