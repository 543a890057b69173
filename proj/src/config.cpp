#include "hympi/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <string>

#include "hympi/errors.hpp"

namespace hympi::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int parse_int(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

void apply_cost_key(CostModel& c, std::string_view key, double v) {
  if (key == "alpha") c.alpha = v;
  else if (key == "beta") c.beta = v;
  else if (key == "gamma") c.gamma = v;
  else if (key == "barrier_base") c.barrier_base = v;
  else if (key == "barrier_per_rank") c.barrier_per_rank = v;
  else throw ConfigError("unknown cost parameter '" + std::string(key) + "'");
}

bool is_cost_key(std::string_view key) {
  return key == "alpha" || key == "beta" || key == "gamma" || key == "barrier_base" ||
         key == "barrier_per_rank";
}

}  // namespace

std::vector<int> parse_int_list(std::string_view text) {
  if (trim(text).empty()) throw ConfigError("empty integer list");
  std::vector<int> out;
  for (auto item : split(text, ',')) out.push_back(parse_int(item));
  return out;
}

CostModel parse_cost_overrides(std::string_view text, CostModel base) {
  if (trim(text).empty()) return base;
  for (auto item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ConfigError("cost override '" + std::string(item) + "' lacks '='");
    apply_cost_key(base, trim(item.substr(0, eq)), parse_double(trim(item.substr(eq + 1))));
  }
  base.validate();
  return base;
}

RunConfig parse_run_config(std::istream& in) {
  std::map<std::string, std::string, std::less<>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    kv[std::string(trim(view.substr(0, eq)))] = std::string(trim(view.substr(eq + 1)));
  }

  RunConfig rc;
  int nodes = 0;
  if (auto it = kv.find("nodes"); it != kv.end()) nodes = parse_int(it->second);
  std::vector<int> ppn{1};
  if (auto it = kv.find("ranks_per_node"); it != kv.end()) ppn = parse_int_list(it->second);
  if (nodes == 0) nodes = static_cast<int>(ppn.size());
  if (ppn.size() == 1) ppn.assign(static_cast<std::size_t>(nodes), ppn.front());

  std::string placement = "smp";
  if (auto it = kv.find("placement"); it != kv.end()) placement = it->second;
  if (placement == "smp") {
    rc.cluster = ClusterSpec::irregular(ppn);
  } else if (placement == "explicit") {
    auto it = kv.find("node_assignment");
    if (it == kv.end()) throw ConfigError("explicit placement needs node_assignment");
    rc.cluster = ClusterSpec::explicit_map(ppn, parse_int_list(it->second));
  } else {
    throw ConfigError("unknown placement '" + placement + "'");
  }
  rc.cluster.node_count = nodes;

  for (const auto& [key, value] : kv) {
    if (is_cost_key(key)) {
      apply_cost_key(rc.cost, key, parse_double(value));
    } else if (key != "nodes" && key != "ranks_per_node" && key != "placement" &&
               key != "node_assignment") {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  rc.cluster.validate();
  rc.cost.validate();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_run_config(in);
}

}  // namespace hympi::config
