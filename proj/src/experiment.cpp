#include "qcs/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "qcs/bounds.hpp"
#include "qcs/errors.hpp"
#include "qcs/logging.hpp"
#include "qcs/sync_engine.hpp"

namespace qcs {

using nlohmann::json;

namespace {

constexpr std::int64_t kDefaultMaxSteps = 100000;
constexpr std::int64_t kMaxStepsCap = 1000000;

enum SeedTag : std::uint64_t { graph_tag = 1, values_tag = 2, protocol_tag = 3 };

// ---------------------------------------------------------------------------
// JSON reading

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

template <typename T>
T as(const json& v, const std::string& field) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(field, "expected a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned()) return v.get<T>();
      if (v.get<std::int64_t>() < 0) throw ConfigError(field, "expected a non-negative integer");
    }
    return v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    return v.get<T>();
  } else {
    static_assert(std::is_same_v<T, std::string>);
    if (!v.is_string()) throw ConfigError(field, "expected a string");
    return v.get<std::string>();
  }
}

template <typename T>
std::vector<T> as_list(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as<T>(v[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Range as_range(const json& v, const std::string& field) {
  const auto pair = as_list<std::int64_t>(v, field);
  if (pair.size() != 2) throw ConfigError(field, "expected [lo, hi]");
  if (pair[0] > pair[1]) throw ConfigError(field, "range lower end exceeds upper end");
  return {pair[0], pair[1]};
}

/// An object whose keys are consumed one by one; leftovers are errors.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  const json& need(const std::string& key) {
    const json* v = find(key);
    if (!v) throw ConfigError(field(key), "missing required key");
    return *v;
  }

  template <typename T>
  std::optional<T> opt(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return as<T>(*v, field(key));
  }

  template <typename T>
  T req(const std::string& key) {
    return as<T>(need(key), field(key));
  }

  std::string field(const std::string& key) const { return join(path_, key); }

  /// The single key of a one-of object such as {"random": {...}}.
  std::string only_key() const {
    if (obj_.size() != 1) throw ConfigError(path_, "expected exactly one variant key");
    return obj_.begin().key();
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

GraphSpec parse_graph(const json& v) {
  Fields top(v, "graph");
  const std::string kind = top.only_key();
  GraphSpec spec;
  if (kind == "random") {
    Fields f(top.need("random"), "graph.random");
    spec.kind = GraphSpec::Kind::random;
    spec.n = f.req<NodeId>("n");
    spec.edge_prob = f.req<double>("edge_prob");
    spec.seed = f.opt<std::uint64_t>("seed");
    f.finish();
    if (spec.n < 2) throw ConfigError("graph.random.n", "needs at least 2 nodes");
    if (!(spec.edge_prob > 0.0 && spec.edge_prob <= 1.0)) {
      throw ConfigError("graph.random.edge_prob", "must lie in (0, 1]");
    }
  } else if (kind == "file") {
    spec.kind = GraphSpec::Kind::file;
    spec.path = as<std::string>(top.need("file"), "graph.file");
  } else {
    throw ConfigError(top.field(kind), "unknown graph kind (random or file)");
  }
  top.finish();
  return spec;
}

InitSpec parse_init(const json& v) {
  Fields top(v, "init");
  const std::string kind = top.only_key();
  const std::string path = top.field(kind);
  const json& body = top.need(kind);
  InitSpec spec;
  if (kind == "explicit") {
    spec.kind = InitSpec::Kind::explicit_values;
    if (!body.is_array()) throw ConfigError(path, "expected a list of [y0, z0] pairs");
    for (std::size_t i = 0; i < body.size(); ++i) {
      const auto pair = as_list<std::int64_t>(body[i], path + "[" + std::to_string(i) + "]");
      if (pair.size() != 2) throw ConfigError(path + "[" + std::to_string(i) + "]", "expected [y0, z0]");
      spec.values.push_back({pair[0], pair[1]});
    }
    top.finish();
    return spec;
  }
  Fields f(body, path);
  if (kind == "generic") {
    spec.kind = InitSpec::Kind::generic;
    spec.generic.alpha = as_list<std::int64_t>(f.need("alpha"), f.field("alpha"));
    spec.generic.rho = as_list<std::int64_t>(f.need("rho"), f.field("rho"));
  } else if (kind == "scheduling") {
    spec.kind = InitSpec::Kind::scheduling;
    spec.scheduling.load = as_list<std::int64_t>(f.need("load"), f.field("load"));
    spec.scheduling.capacity = as_list<std::int64_t>(f.need("capacity"), f.field("capacity"));
    if (const json* u = f.find("occupied")) {
      spec.scheduling.occupied = as_list<std::int64_t>(*u, f.field("occupied"));
    } else {
      spec.scheduling.occupied.assign(spec.scheduling.capacity.size(), 0);
    }
  } else if (kind == "federated") {
    spec.kind = InitSpec::Kind::federated;
    spec.federated.dataset_size = as_list<std::int64_t>(f.need("dataset_size"), f.field("dataset_size"));
    spec.federated.local_param = as_list<std::int64_t>(f.need("local_param"), f.field("local_param"));
  } else if (kind == "uniform") {
    spec.kind = InitSpec::Kind::uniform;
    if (const json* r = f.find("y0")) spec.y0 = as_range(*r, f.field("y0"));
    if (const json* r = f.find("z0")) spec.z0 = as_range(*r, f.field("z0"));
    if (spec.y0.lo < 0) throw ConfigError(f.field("y0"), "y0 must be non-negative");
    if (spec.z0.lo < 1) throw ConfigError(f.field("z0"), "z0 must be at least 1");
    spec.seed = f.opt<std::uint64_t>("seed");
  } else if (kind == "scheduling_random") {
    spec.kind = InitSpec::Kind::scheduling_random;
    if (const json* r = f.find("load")) spec.load = as_range(*r, f.field("load"));
    if (const json* r = f.find("occupied")) spec.occupied = as_range(*r, f.field("occupied"));
    if (const json* c = f.find("capacity")) {
      const auto caps = as_list<std::int64_t>(*c, f.field("capacity"));
      if (caps.size() != 2) throw ConfigError(f.field("capacity"), "expected [even, odd]");
      spec.capacity_even = caps[0];
      spec.capacity_odd = caps[1];
    }
    if (spec.load.lo < 0 || spec.occupied.lo < 0) {
      throw ConfigError(path, "loads and occupancy must be non-negative");
    }
    if (spec.capacity_even < 1 || spec.capacity_odd < 1) {
      throw ConfigError(f.field("capacity"), "capacities must be positive");
    }
    spec.seed = f.opt<std::uint64_t>("seed");
  } else if (kind == "federated_random") {
    spec.kind = InitSpec::Kind::federated_random;
    if (const json* r = f.find("dataset_size")) spec.dataset_size = as_range(*r, f.field("dataset_size"));
    if (const json* r = f.find("local_param")) spec.local_param = as_range(*r, f.field("local_param"));
    if (spec.dataset_size.lo < 1) throw ConfigError(f.field("dataset_size"), "sizes must be at least 1");
    if (spec.local_param.lo < 0) throw ConfigError(f.field("local_param"), "parameters must be non-negative");
    spec.seed = f.opt<std::uint64_t>("seed");
  } else {
    throw ConfigError(path, "unknown init kind");
  }
  f.finish();
  top.finish();
  return spec;
}

DelaySpec parse_delay(const json& v) {
  Fields f(v, "delay");
  DelaySpec spec;
  spec.max_delay = f.req<int>("B");
  if (spec.max_delay < 1) throw ConfigError("delay.B", "must be at least 1");
  if (const json* pmf = f.find("pmf")) {
    if (!pmf->is_array() || pmf->empty()) throw ConfigError("delay.pmf", "expected a non-empty array");
    if ((*pmf)[0].is_array()) {
      for (std::size_t i = 0; i < pmf->size(); ++i) {
        spec.pmf.push_back(as_list<double>((*pmf)[i], "delay.pmf[" + std::to_string(i) + "]"));
      }
    } else {
      spec.pmf.push_back(as_list<double>(*pmf, "delay.pmf"));
    }
    try {
      (void)spec.model();
    } catch (const ContractViolation& e) {
      throw ConfigError("delay.pmf", e.what());
    }
  }
  f.finish();
  return spec;
}

SweepSpec parse_sweep(const json& v) {
  Fields f(v, "sweep");
  SweepSpec spec;
  if (const json* n = f.find("n")) spec.n = as_list<NodeId>(*n, "sweep.n");
  if (const json* b = f.find("B")) spec.max_delay = as_list<int>(*b, "sweep.B");
  f.finish();
  for (auto n : spec.n) {
    if (n < 2) throw ConfigError("sweep.n", "sizes must be at least 2");
  }
  for (auto b : spec.max_delay) {
    if (b < 1) throw ConfigError("sweep.B", "delay bounds must be at least 1");
  }
  return spec;
}

const char* mode_name(RunMode m) { return m == RunMode::sync ? "sync" : "async"; }
const char* error_mode_name(ErrorMode m) { return m == ErrorMode::reciprocal ? "reciprocal" : "direct"; }
const char* format_name(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json"; }

// ---------------------------------------------------------------------------
// Trial execution

std::shared_ptr<const Digraph> load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file '" + path + "'");
  return std::make_shared<const Digraph>(read_edge_list(in));
}

std::shared_ptr<const Digraph> fixed_graph(const ExperimentConfig& cfg) {
  if (cfg.graph.kind == GraphSpec::Kind::file) return load_graph_file(cfg.graph.path);
  if (cfg.graph.seed) {
    return std::make_shared<const Digraph>(
        generate_random_digraph(cfg.graph.n, cfg.graph.edge_prob, *cfg.graph.seed));
  }
  return nullptr;
}

struct TrialInputs {
  std::vector<InitialValue> initial;
  RecoveryRule recovery;
};

TrialInputs make_inputs(const ExperimentConfig& cfg, NodeId n, std::uint64_t trial_seed) {
  const InitSpec& spec = cfg.init;
  Rng rng = make_stream(spec.seed ? *spec.seed : derive_seed(trial_seed, values_tag), values_tag);
  TrialInputs in;
  switch (spec.kind) {
    case InitSpec::Kind::explicit_values:
      in.initial = spec.values;
      break;
    case InitSpec::Kind::generic:
      in.initial = generic_init(spec.generic, cfg.mapping);
      break;
    case InitSpec::Kind::scheduling:
      in.initial = scheduling_init(spec.scheduling).initial;
      in.recovery = scheduling_recovery(spec.scheduling);
      break;
    case InitSpec::Kind::federated:
      in.initial = federated_init(spec.federated, cfg.mapping);
      break;
    case InitSpec::Kind::uniform:
      for (NodeId j = 0; j < n; ++j) {
        const auto y = std::uniform_int_distribution<std::int64_t>(spec.y0.lo, spec.y0.hi)(rng);
        const auto z = std::uniform_int_distribution<std::int64_t>(spec.z0.lo, spec.z0.hi)(rng);
        in.initial.push_back({y, z});
      }
      break;
    case InitSpec::Kind::scheduling_random: {
      auto inst = random_scheduling_instance(n, spec.load.lo, spec.load.hi, spec.occupied.lo,
                                             spec.occupied.hi, spec.capacity_even,
                                             spec.capacity_odd, rng);
      in.initial = scheduling_init(inst).initial;
      in.recovery = scheduling_recovery(std::move(inst));
      break;
    }
    case InitSpec::Kind::federated_random: {
      const auto inst = random_federated_instance(n, spec.dataset_size.lo, spec.dataset_size.hi,
                                                  spec.local_param.lo, spec.local_param.hi, rng);
      in.initial = federated_init(inst, cfg.mapping);
      break;
    }
  }
  if (in.initial.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("init", "gives " + std::to_string(in.initial.size()) +
                                  " initial values for a graph of " + std::to_string(n) + " nodes");
  }
  return in;
}

std::optional<BoundsEntry> bounds_for(const ExperimentConfig& cfg, const TrialInputs& in,
                                      int d_used, int max_out_degree) {
  if (!cfg.epsilon) return std::nullopt;
  try {
    BoundsEntry b;
    std::vector<std::int64_t> y0;
    for (const auto& v : in.initial) y0.push_back(v.y0);
    b.y_init = y_init(y0, quotient_of(in.initial));
    const auto n = static_cast<std::int64_t>(in.initial.size());
    if (cfg.mode == RunMode::sync) {
      b.tau = tau_sync(*cfg.epsilon, d_used, max_out_degree);
      b.step_bound = theorem1_step_bound(b.y_init, n, b.tau, d_used);
    } else {
      const DelayModel model = cfg.delay->model();
      b.tau = tau_async(*cfg.epsilon, d_used, max_out_degree, model.min_full_delay_probability());
      b.step_bound = theorem2_step_bound(b.y_init, n, b.tau, d_used, model.max_delay());
    }
    b.confidence = step_bound_confidence(*cfg.epsilon, b.y_init, n);
    return b;
  } catch (const Error& e) {
    spdlog::warn("step bound not computable: {}", e.what());
    return std::nullopt;
  }
}

TrialRecord run_trial_impl(const ExperimentConfig& cfg, std::int64_t index,
                           std::shared_ptr<const Digraph> graph) {
  TrialRecord rec;
  rec.trial = index;
  rec.seed = cfg.seed + static_cast<std::uint64_t>(index);
  if (!graph) {
    graph = std::make_shared<const Digraph>(generate_random_digraph(
        cfg.graph.n, cfg.graph.edge_prob, derive_seed(rec.seed, graph_tag)));
  }
  const NodeId n = graph->size();
  rec.diameter = n == 1 ? 1 : diameter(*graph);
  rec.max_out_degree = graph->max_out_degree();
  if (cfg.d_override && *cfg.d_override < rec.diameter) {
    throw ConfigError("d_override", "D'=" + std::to_string(*cfg.d_override) +
                                        " is below the sampled diameter D=" +
                                        std::to_string(rec.diameter));
  }
  const int d_used = cfg.d_override.value_or(rec.diameter);

  TrialInputs in = make_inputs(cfg, n, rec.seed);
  rec.quotient = to_double(quotient_of(in.initial));
  rec.bounds = bounds_for(cfg, in, d_used, std::max(rec.max_out_degree, 1));

  const int multiplier = cfg.mode == RunMode::async ? cfg.delay->max_delay : 1;
  if (cfg.max_steps) {
    rec.max_steps = *cfg.max_steps;
  } else if (rec.bounds && rec.bounds->step_bound <= kMaxStepsCap / 100) {
    rec.max_steps = 100 * rec.bounds->step_bound;
  } else {
    rec.max_steps = rec.bounds ? kMaxStepsCap : kDefaultMaxSteps;
  }
  rec.max_steps = std::max<std::int64_t>(rec.max_steps, static_cast<std::int64_t>(d_used) * multiplier);

  SyncRunConfig base;
  base.graph = graph;
  base.initial = in.initial;
  base.window = d_used;
  base.seed = derive_seed(rec.seed, protocol_tag);
  base.max_steps = rec.max_steps;
  base.record_trajectory = cfg.records_trajectory();
  base.check_invariants = cfg.check_invariants || debug_checks_enabled();
  base.recovery = in.recovery;

  if (cfg.mode == RunMode::sync) {
    rec.outcome = run_sync(base);
  } else {
    rec.outcome = run_async(AsyncRunConfig{std::move(base), cfg.delay->model()});
  }
  if (!rec.outcome.converged) {
    spdlog::warn("trial {} did not terminate within {} steps", index, rec.max_steps);
  }
  if (rec.bounds) {
    rec.bounds->within = rec.outcome.converged && rec.outcome.termination_step <= rec.bounds->step_bound;
  }
  if (!rec.outcome.trajectory.empty()) {
    const ErrorMode mode = cfg.resolved_error_mode();
    const double q = rec.quotient;
    if (mode == ErrorMode::reciprocal && q == 0.0) {
      throw DegenerateInstance("reciprocal error mode needs a non-zero quotient");
    }
    rec.error = normalized_error(rec.outcome.trajectory, mode == ErrorMode::reciprocal ? 1.0 / q : q, mode);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Output

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json stats_json(const TrialStats& s) {
  json j;
  j["trials"] = s.trials;
  j["converged"] = s.converged;
  j["censored"] = s.trials - s.converged;
  j["mean"] = s.mean;
  j["std"] = s.stddev;
  j["min"] = s.min;
  j["max"] = s.max;
  if (s.fraction_within_bound) j["fraction_within_bound"] = *s.fraction_within_bound;
  return j;
}

json bounds_json(const ExperimentConfig& cfg, const ExperimentResult& r) {
  json block;
  block["epsilon"] = *cfg.epsilon;
  block["theorem"] = cfg.mode == RunMode::sync ? "sync" : "async";
  json rows = json::array();
  for (const auto& t : r.trials) {
    json row;
    row["trial"] = t.trial;
    if (t.bounds) {
      row["tau"] = t.bounds->tau;
      row["y_init"] = t.bounds->y_init;
      row["step_bound"] = t.bounds->step_bound;
      row["within"] = t.bounds->within;
      row["confidence"] = t.bounds->confidence;
    } else {
      row["step_bound"] = nullptr;
    }
    rows.push_back(row);
  }
  block["per_trial"] = rows;
  if (r.fraction_within_bound) block["fraction_within_bound"] = *r.fraction_within_bound;
  if (r.min_confidence) block["min_confidence"] = *r.min_confidence;
  return block;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir.string() + "': " + ec.message());
}

std::int64_t head_q_s(const TrialRecord& t) {
  return t.outcome.final_q_s.empty() ? 0 : t.outcome.final_q_s.front();
}

}  // namespace

// ---------------------------------------------------------------------------

DelayModel DelaySpec::model() const {
  if (pmf.empty()) return DelayModel::uniform(max_delay);
  return DelayModel(max_delay, pmf);
}

NodeId ExperimentConfig::node_count() const {
  switch (init.kind) {
    case InitSpec::Kind::explicit_values:
      return static_cast<NodeId>(init.values.size());
    case InitSpec::Kind::generic:
      return static_cast<NodeId>(init.generic.alpha.size());
    case InitSpec::Kind::scheduling:
      return static_cast<NodeId>(init.scheduling.size());
    case InitSpec::Kind::federated:
      return static_cast<NodeId>(init.federated.size());
    default:
      return graph.n;
  }
}

bool ExperimentConfig::records_trajectory() const { return record_trajectory.value_or(trials == 1); }

ErrorMode ExperimentConfig::resolved_error_mode() const {
  if (error_mode) return *error_mode;
  const bool scheduling =
      init.kind == InitSpec::Kind::scheduling || init.kind == InitSpec::Kind::scheduling_random;
  return scheduling ? ErrorMode::reciprocal : ErrorMode::direct;
}

ExperimentConfig parse_config(const json& doc) {
  Fields f(doc, "");
  ExperimentConfig cfg;
  const std::string mode = f.req<std::string>("mode");
  if (mode == "sync") {
    cfg.mode = RunMode::sync;
  } else if (mode == "async") {
    cfg.mode = RunMode::async;
  } else {
    throw ConfigError("mode", "expected sync or async, got '" + mode + "'");
  }
  cfg.graph = parse_graph(f.need("graph"));
  cfg.d_override = f.opt<int>("d_override");
  cfg.init = parse_init(f.need("init"));
  if (auto m = f.opt<std::string>("mapping")) {
    if (*m == "closed_form") {
      cfg.mapping = InitMapping::closed_form;
    } else if (*m == "literal") {
      cfg.mapping = InitMapping::literal;
    } else {
      throw ConfigError("mapping", "expected closed_form or literal");
    }
  }
  if (const json* d = f.find("delay")) cfg.delay = parse_delay(*d);
  cfg.trials = f.opt<std::int64_t>("trials").value_or(1);
  cfg.seed = f.opt<std::uint64_t>("seed").value_or(0);
  cfg.max_steps = f.opt<std::int64_t>("max_steps");
  cfg.epsilon = f.opt<double>("epsilon");
  cfg.record_trajectory = f.opt<bool>("record_trajectory");
  if (auto m = f.opt<std::string>("error_mode")) {
    if (*m == "reciprocal") {
      cfg.error_mode = ErrorMode::reciprocal;
    } else if (*m == "direct") {
      cfg.error_mode = ErrorMode::direct;
    } else {
      throw ConfigError("error_mode", "expected reciprocal or direct");
    }
  }
  if (const json* out = f.find("output")) {
    Fields o(*out, "output");
    cfg.out_dir = o.opt<std::string>("dir").value_or("");
    if (auto fmt = o.opt<std::string>("format")) {
      if (*fmt == "csv") {
        cfg.format = OutputFormat::csv;
      } else if (*fmt == "json") {
        cfg.format = OutputFormat::json;
      } else {
        throw ConfigError("output.format", "expected csv or json");
      }
    }
    o.finish();
  }
  cfg.workers = f.opt<unsigned>("workers").value_or(0);
  if (const json* s = f.find("sweep")) cfg.sweep = parse_sweep(*s);
  cfg.check_invariants = f.opt<bool>("check_invariants").value_or(false);
  f.finish();
  validate_config(cfg);
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "malformed JSON in '" + path.string() + "': " + e.what());
  }
  return parse_config(doc);
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.mode == RunMode::async && !cfg.delay) {
    throw ConfigError("delay", "async mode requires a delay specification");
  }
  if (cfg.trials < 1) throw ConfigError("trials", "must be at least 1");
  if (cfg.max_steps && *cfg.max_steps < 1) throw ConfigError("max_steps", "must be positive");
  if (cfg.epsilon && !(*cfg.epsilon > 0.0 && *cfg.epsilon < 1.0)) {
    throw ConfigError("epsilon", "must lie in (0, 1)");
  }
  if (cfg.d_override && *cfg.d_override < 1) throw ConfigError("d_override", "must be positive");
  if (cfg.sweep) {
    if (cfg.graph.kind != GraphSpec::Kind::random) {
      throw ConfigError("sweep", "size sweeps need a random graph");
    }
    if (!cfg.sweep->max_delay.empty() && cfg.mode != RunMode::async) {
      throw ConfigError("sweep.B", "delay sweeps need async mode");
    }
    if (!cfg.sweep->max_delay.empty() && cfg.delay && !cfg.delay->pmf.empty()) {
      throw ConfigError("sweep.B", "cannot sweep B with a fixed pmf");
    }
  }
  const bool fixed_size = cfg.init.kind == InitSpec::Kind::explicit_values ||
                          cfg.init.kind == InitSpec::Kind::generic ||
                          cfg.init.kind == InitSpec::Kind::scheduling ||
                          cfg.init.kind == InitSpec::Kind::federated;
  if (cfg.graph.kind == GraphSpec::Kind::random) {
    if (fixed_size && cfg.graph.n != cfg.node_count()) {
      throw ConfigError("init", "gives " + std::to_string(cfg.node_count()) +
                                    " initial values but graph.random.n=" +
                                    std::to_string(cfg.graph.n));
    }
    if (fixed_size && cfg.sweep && !cfg.sweep->n.empty()) {
      throw ConfigError("sweep.n", "size sweeps need randomly generated initial values");
    }
  } else {
    const auto graph = load_graph_file(cfg.graph.path);
    if (fixed_size && graph->size() != cfg.node_count()) {
      throw ConfigError("init", "gives " + std::to_string(cfg.node_count()) +
                                    " initial values but the graph file has " +
                                    std::to_string(graph->size()) + " nodes");
    }
    if (cfg.d_override) {
      const int d = graph->size() == 1 ? 1 : diameter(*graph);
      if (*cfg.d_override < d) {
        throw ConfigError("d_override", "D'=" + std::to_string(*cfg.d_override) +
                                            " is below the graph diameter D=" + std::to_string(d));
      }
    }
  }
  if (cfg.delay && !cfg.delay->pmf.empty()) {
    try {
      cfg.delay->model().validate(cfg.node_count());
    } catch (const ContractViolation& e) {
      throw ConfigError("delay.pmf", e.what());
    }
  }
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = mode_name(cfg.mode);
  if (cfg.graph.kind == GraphSpec::Kind::random) {
    json r{{"n", cfg.graph.n}, {"edge_prob", cfg.graph.edge_prob}};
    if (cfg.graph.seed) r["seed"] = *cfg.graph.seed;
    j["graph"] = {{"random", r}};
  } else {
    j["graph"] = {{"file", cfg.graph.path}};
  }
  if (cfg.d_override) j["d_override"] = *cfg.d_override;
  const InitSpec& s = cfg.init;
  json init;
  auto range = [](const Range& r) { return json::array({r.lo, r.hi}); };
  switch (s.kind) {
    case InitSpec::Kind::explicit_values: {
      json list = json::array();
      for (const auto& v : s.values) list.push_back({v.y0, v.z0});
      init["explicit"] = list;
      break;
    }
    case InitSpec::Kind::generic:
      init["generic"] = {{"alpha", s.generic.alpha}, {"rho", s.generic.rho}};
      break;
    case InitSpec::Kind::scheduling:
      init["scheduling"] = {{"load", s.scheduling.load},
                            {"occupied", s.scheduling.occupied},
                            {"capacity", s.scheduling.capacity}};
      break;
    case InitSpec::Kind::federated:
      init["federated"] = {{"dataset_size", s.federated.dataset_size},
                           {"local_param", s.federated.local_param}};
      break;
    case InitSpec::Kind::uniform:
      init["uniform"] = {{"y0", range(s.y0)}, {"z0", range(s.z0)}};
      break;
    case InitSpec::Kind::scheduling_random:
      init["scheduling_random"] = {{"load", range(s.load)},
                                   {"occupied", range(s.occupied)},
                                   {"capacity", {s.capacity_even, s.capacity_odd}}};
      break;
    case InitSpec::Kind::federated_random:
      init["federated_random"] = {{"dataset_size", range(s.dataset_size)},
                                  {"local_param", range(s.local_param)}};
      break;
  }
  if (s.seed) init.begin().value()["seed"] = *s.seed;
  j["init"] = init;
  j["mapping"] = cfg.mapping == InitMapping::closed_form ? "closed_form" : "literal";
  if (cfg.delay) {
    json d{{"B", cfg.delay->max_delay}};
    if (cfg.delay->pmf.size() == 1) {
      d["pmf"] = cfg.delay->pmf.front();
    } else if (!cfg.delay->pmf.empty()) {
      d["pmf"] = cfg.delay->pmf;
    }
    j["delay"] = d;
  }
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  if (cfg.max_steps) j["max_steps"] = *cfg.max_steps;
  if (cfg.epsilon) j["epsilon"] = *cfg.epsilon;
  j["record_trajectory"] = cfg.records_trajectory();
  j["error_mode"] = error_mode_name(cfg.resolved_error_mode());
  j["output"] = {{"dir", cfg.out_dir}, {"format", format_name(cfg.format)}};
  if (cfg.sweep) j["sweep"] = {{"n", cfg.sweep->n}, {"B", cfg.sweep->max_delay}};
  if (cfg.check_invariants) j["check_invariants"] = true;
  return j;
}

std::int64_t TrialRecord::steps() const noexcept {
  return outcome.converged ? outcome.termination_step : outcome.steps_run;
}

std::int64_t TrialRecord::spread() const {
  if (outcome.final_q_s.empty()) return 0;
  const auto [lo, hi] = std::minmax_element(outcome.final_q_s.begin(), outcome.final_q_s.end());
  return *hi - *lo;
}

TrialRecord run_trial(const ExperimentConfig& cfg, std::int64_t trial_index) {
  return run_trial_impl(cfg, trial_index, fixed_graph(cfg));
}

ExperimentResult execute(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const auto graph = fixed_graph(cfg);
  const auto total = static_cast<std::size_t>(cfg.trials);
  std::vector<std::optional<TrialRecord>> slots(total);
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      try {
        slots[i] = run_trial_impl(cfg, static_cast<std::int64_t>(i), graph);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, total));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  std::vector<RunOutcome> outcomes;
  std::size_t with_bound = 0;
  std::size_t within = 0;
  for (auto& slot : slots) {
    result.trials.push_back(std::move(*slot));
    const auto& t = result.trials.back();
    if (t.bounds) {
      ++with_bound;
      if (t.bounds->within) ++within;
      result.min_confidence =
          std::min(result.min_confidence.value_or(1.0), t.bounds->confidence);
    }
  }
  std::vector<std::int64_t> steps;
  std::unique_ptr<bool[]> censored(new bool[total]);
  for (std::size_t i = 0; i < total; ++i) {
    steps.push_back(result.trials[i].steps());
    censored[i] = result.trials[i].censored();
  }
  result.stats = trial_stats(steps, std::span<const bool>(censored.get(), total));
  if (cfg.epsilon && with_bound > 0) {
    result.fraction_within_bound = static_cast<double>(within) / static_cast<double>(total);
    result.stats.fraction_within_bound = result.fraction_within_bound;
  }
  return result;
}

void write_artifacts(const ExperimentConfig& cfg, const ExperimentResult& result,
                     const std::filesystem::path& dir) {
  ensure_dir(dir);
  const bool any_series = std::any_of(result.trials.begin(), result.trials.end(),
                                      [](const TrialRecord& t) { return t.error.has_value(); });
  if (cfg.format == OutputFormat::csv) {
    std::ostringstream out;
    out << "trial,converged,steps,q_s,spread,censored\n";
    for (const auto& t : result.trials) {
      out << t.trial << ',' << (t.outcome.converged ? 1 : 0) << ',' << t.steps() << ','
          << head_q_s(t) << ',' << t.spread() << ',' << (t.censored() ? 1 : 0) << '\n';
    }
    write_file(dir / "outcomes.csv", out.str());
    if (any_series) {
      std::ostringstream es;
      es << "trial,k,e_k\n";
      for (const auto& t : result.trials) {
        if (!t.error) continue;
        for (std::size_t i = 0; i < t.error->e.size(); ++i) {
          es << t.trial << ',' << t.error->steps[i] << ',' << fmt_double(t.error->e[i]) << '\n';
        }
      }
      write_file(dir / "error_series.csv", es.str());
    }
  } else {
    json rows = json::array();
    for (const auto& t : result.trials) {
      rows.push_back({{"trial", t.trial},
                      {"converged", t.outcome.converged},
                      {"steps", t.steps()},
                      {"q_s", head_q_s(t)},
                      {"spread", t.spread()},
                      {"censored", t.censored()}});
    }
    write_file(dir / "outcomes.json", rows.dump(2) + "\n");
    if (any_series) {
      json series = json::array();
      for (const auto& t : result.trials) {
        if (!t.error) continue;
        series.push_back({{"trial", t.trial},
                          {"k", t.error->steps},
                          {"e_k", t.error->e},
                          {"degenerate", t.error->degenerate}});
      }
      write_file(dir / "error_series.json", series.dump(2) + "\n");
    }
  }

  json summary;
  summary["config"] = config_to_json(cfg);
  summary["stats"] = stats_json(result.stats);
  if (cfg.epsilon) summary["bounds"] = bounds_json(cfg, result);
  summary["metadata"] = {{"generated_at", timestamp()}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result = execute(cfg);
  if (!cfg.out_dir.empty()) write_artifacts(cfg, result, cfg.out_dir);
  return result;
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("sweep", "config has no sweep grid");
  const std::vector<NodeId> sizes = cfg.sweep->n.empty() ? std::vector<NodeId>{cfg.graph.n} : cfg.sweep->n;
  std::vector<int> delays = cfg.sweep->max_delay;
  if (delays.empty()) delays.push_back(cfg.delay ? cfg.delay->max_delay : 1);

  std::vector<SweepCell> cells;
  for (NodeId n : sizes) {
    for (int b : delays) {
      ExperimentConfig cell = cfg;
      cell.sweep.reset();
      cell.out_dir.clear();
      cell.graph.n = n;
      if (cell.mode == RunMode::async) cell.delay = DelaySpec{b, cfg.delay ? cfg.delay->pmf : std::vector<std::vector<double>>{}};
      spdlog::info("sweep cell n={} B={}", n, b);
      cells.push_back({n, b, execute(cell)});
    }
  }

  if (!cfg.out_dir.empty()) {
    const std::filesystem::path dir(cfg.out_dir);
    ensure_dir(dir);
    std::ostringstream out;
    out << "n,B,trials,converged,mean,std,min,max,fraction_within_bound\n";
    json rows = json::array();
    for (const auto& c : cells) {
      const auto& s = c.result.stats;
      out << c.n << ',' << c.max_delay << ',' << s.trials << ',' << s.converged << ','
          << fmt_double(s.mean) << ',' << fmt_double(s.stddev) << ',' << s.min << ',' << s.max << ','
          << (s.fraction_within_bound ? fmt_double(*s.fraction_within_bound) : "") << '\n';
      json row = stats_json(s);
      row["n"] = c.n;
      row["B"] = c.max_delay;
      rows.push_back(row);
    }
    if (cfg.format == OutputFormat::csv) {
      write_file(dir / "sweep.csv", out.str());
    } else {
      write_file(dir / "sweep.json", rows.dump(2) + "\n");
    }
    json summary;
    summary["config"] = config_to_json(cfg);
    summary["cells"] = rows;
    summary["metadata"] = {{"generated_at", timestamp()}};
    write_file(dir / "summary.json", summary.dump(2) + "\n");
  }
  return cells;
}

ExperimentConfig preset_fig1(std::uint64_t seed, std::int64_t trials) {
  ExperimentConfig cfg;
  cfg.mode = RunMode::sync;
  cfg.graph.kind = GraphSpec::Kind::random;
  cfg.graph.n = 20;
  cfg.graph.edge_prob = 0.5;
  cfg.init.kind = InitSpec::Kind::scheduling_random;
  cfg.init.load = {1, 100};
  cfg.init.occupied = {0, 0};
  cfg.init.capacity_even = 100;
  cfg.init.capacity_odd = 300;
  cfg.trials = trials;
  cfg.seed = seed;
  cfg.epsilon = 0.05;
  return cfg;
}

ExperimentConfig preset_fig3(RunMode mode, int max_delay, std::uint64_t seed, std::int64_t trials) {
  ExperimentConfig cfg;
  cfg.mode = mode;
  cfg.graph.kind = GraphSpec::Kind::random;
  cfg.graph.n = 20;
  cfg.graph.edge_prob = 0.5;
  cfg.init.kind = InitSpec::Kind::federated_random;
  cfg.init.dataset_size = {10, 100};
  cfg.init.local_param = {1000, 100000};
  if (mode == RunMode::async) cfg.delay = DelaySpec{max_delay, {}};
  cfg.trials = trials;
  cfg.seed = seed;
  cfg.epsilon = 0.05;
  return cfg;
}

ExperimentConfig preset_fig2_desk(bool full_scale, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.mode = RunMode::async;
  cfg.graph.kind = GraphSpec::Kind::random;
  cfg.graph.n = 50;
  cfg.graph.edge_prob = 0.5;
  cfg.init.kind = InitSpec::Kind::scheduling_random;
  cfg.delay = DelaySpec{5, {}};
  cfg.seed = seed;
  cfg.sweep = SweepSpec{};
  if (full_scale) {
    spdlog::warn("full-scale grid: sizes up to 3000 nodes with 3000 trials each; expect a very long run");
    cfg.sweep->n = {50, 100, 200, 500, 1000, 2000, 3000};
    cfg.sweep->max_delay = {5, 10, 15, 20, 25, 30};
    cfg.trials = 3000;
  } else {
    cfg.sweep->n = {50, 100, 200, 300};
    cfg.sweep->max_delay = {5, 10, 15};
    cfg.trials = 50;
  }
  return cfg;
}

}  // namespace qcs
