#include "metroflow/model/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "metroflow/error.hpp"
#include "metroflow/util/csv.hpp"

namespace metroflow::model {
namespace {

enum Component : std::uint64_t {
  kStack = 1,
  kLearner = 2,
  kTemporal = 3,
  kHyper = 4,
  kHead = 5,
  kSampling = 6,
};

constexpr std::array<std::pair<Variant, std::string_view>, 7> kVariantNames = {{
    {Variant::main_body, "main_body"},
    {Variant::kt, "kt"},
    {Variant::kh, "kh"},
    {Variant::kth, "kth"},
    {Variant::gcn_baseline, "gcn_baseline"},
    {Variant::sage_baseline, "sage_baseline"},
    {Variant::gcn_learned_weights, "gcn_learned_weights"},
}};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

long long config_int(const std::string& key, const std::string& value, long long min) {
  long long v = 0;
  try {
    v = csv::parse_int(value, key);
  } catch (const Error& e) {
    fail(ErrorCategory::config, e.what());
  }
  if (v < min) fail(ErrorCategory::config, key + " must be at least " + std::to_string(min));
  return v;
}

double config_double(const std::string& key, const std::string& value) {
  try {
    return csv::parse_double(value, key);
  } catch (const Error& e) {
    fail(ErrorCategory::config, e.what());
  }
}

bool config_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(ErrorCategory::config, key + ": expected true or false, got '" + value + "'");
}

}  // namespace

std::string_view to_string(Variant variant) {
  for (const auto& [v, name] : kVariantNames) {
    if (v == variant) return name;
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [v, n] : kVariantNames) {
    if (n == name) return v;
  }
  fail(ErrorCategory::config, "unknown variant '" + std::string(name) + "'");
}

std::string_view to_string(Loss loss) { return loss == Loss::mse ? "mse" : "mae"; }

Loss parse_loss(std::string_view name) {
  if (name == "mse") return Loss::mse;
  if (name == "mae") return Loss::mae;
  fail(ErrorCategory::config, "unknown loss '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (k < 1) fail(ErrorCategory::config, "k must be at least 1");
  if (uses_hypergraph() != sampling_rate.has_value()) {
    fail(ErrorCategory::config, uses_hypergraph()
                                    ? std::string(to_string(variant)) + " needs a sampling_rate"
                                    : "sampling_rate applies to kh and kth only");
  }
  if (sampling_rate && !(*sampling_rate >= 0.0 && *sampling_rate <= 1.0)) {
    fail(ErrorCategory::config, "sampling_rate must lie in [0, 1]");
  }
  if (num_layers < 1) fail(ErrorCategory::config, "layers must be at least 1");
  if (hidden_width < 1 || temporal_hidden < 1 || temporal_width < 1 || fusion_width < 1 ||
      edge_hidden < 1) {
    fail(ErrorCategory::config, "widths must be positive");
  }
  if (head_layers != 1 && head_layers != 2) fail(ErrorCategory::config, "head_layers must be 1 or 2");
}

RunConfig parse_run_config(std::string_view text, RunConfig config) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCategory::config, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto& m = config.model;
    if (key == "variant") {
      m.variant = parse_variant(value);
    } else if (key == "k") {
      m.k = static_cast<int>(config_int(key, value, 1));
    } else if (key == "sampling_rate") {
      if (value.empty() || value == "none") {
        m.sampling_rate.reset();
      } else {
        m.sampling_rate = config_double(key, value);
      }
    } else if (key == "seed") {
      m.seed = static_cast<std::uint64_t>(config_int(key, value, 0));
    } else if (key == "layers") {
      m.num_layers = static_cast<std::size_t>(config_int(key, value, 1));
    } else if (key == "hidden_width") {
      m.hidden_width = static_cast<std::size_t>(config_int(key, value, 1));
    } else if (key == "temporal_hidden") {
      m.temporal_hidden = static_cast<std::size_t>(config_int(key, value, 1));
    } else if (key == "temporal_width") {
      m.temporal_width = static_cast<std::size_t>(config_int(key, value, 1));
    } else if (key == "fusion_width") {
      m.fusion_width = static_cast<std::size_t>(config_int(key, value, 1));
    } else if (key == "edge_hidden") {
      m.edge_hidden = static_cast<std::size_t>(config_int(key, value, 1));
    } else if (key == "aggregator") {
      if (value == "max_pool") {
        m.aggregator = nn::Aggregator::max_pool;
      } else if (value == "mean") {
        m.aggregator = nn::Aggregator::mean;
      } else {
        fail(ErrorCategory::config, "unknown aggregator '" + value + "'");
      }
    } else if (key == "head_layers") {
      m.head_layers = static_cast<int>(config_int(key, value, 1));
    } else if (key == "closed_neighborhoods") {
      m.closed_neighborhoods = config_bool(key, value);
    } else if (key == "task") {
      try {
        config.task = Task::parse(value);
      } catch (const Error& e) {
        fail(ErrorCategory::config, e.what());
      }
    } else if (key == "epochs") {
      config.epochs = static_cast<int>(config_int(key, value, 0));
    } else if (key == "loss") {
      config.loss = parse_loss(value);
    } else {
      fail(ErrorCategory::config, "unknown config key '" + key + "'");
    }
  }
  config.model.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig defaults) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::io, "cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_run_config(buffer.str(), std::move(defaults));
  } catch (const Error& e) {
    fail(e.category(), path.string() + ": " + e.what());
  }
}

std::string serialize(const RunConfig& config) {
  const auto& m = config.model;
  std::ostringstream out;
  out << "variant = " << to_string(m.variant) << "\n"
      << "k = " << m.k << "\n"
      << "sampling_rate = " << (m.sampling_rate ? csv::format_double(*m.sampling_rate) : "none")
      << "\n"
      << "seed = " << m.seed << "\n"
      << "layers = " << m.num_layers << "\n"
      << "hidden_width = " << m.hidden_width << "\n"
      << "temporal_hidden = " << m.temporal_hidden << "\n"
      << "temporal_width = " << m.temporal_width << "\n"
      << "fusion_width = " << m.fusion_width << "\n"
      << "edge_hidden = " << m.edge_hidden << "\n"
      << "aggregator = " << (m.aggregator == nn::Aggregator::mean ? "mean" : "max_pool") << "\n"
      << "head_layers = " << m.head_layers << "\n"
      << "closed_neighborhoods = " << (m.closed_neighborhoods ? "true" : "false") << "\n"
      << "task = " << config.task.name() << "\n"
      << "epochs = " << config.epochs << "\n"
      << "loss = " << to_string(config.loss) << "\n";
  return out.str();
}

Standardizer Standardizer::fit(const Tensor& x) {
  Standardizer s{std::vector<double>(x.cols(), 0.0), std::vector<double>(x.cols(), 1.0)};
  if (x.rows() == 0) return s;
  const double n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(var / n);
    s.mean[c] = mean;
    s.scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t cols) {
  return {std::vector<double>(cols, 0.0), std::vector<double>(cols, 1.0)};
}

Tensor Standardizer::apply(const Tensor& x) const {
  if (x.cols() != mean.size()) {
    fail(ErrorCategory::shape, "standardizer expects " + std::to_string(mean.size()) +
                                   " columns, got " + x.shape_string());
  }
  Tensor z(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) z(r, c) = (x(r, c) - mean[c]) / scale[c];
  }
  return z;
}

Tensor Standardizer::invert(const Tensor& z) const {
  if (z.cols() != mean.size()) {
    fail(ErrorCategory::shape, "standardizer expects " + std::to_string(mean.size()) +
                                   " columns, got " + z.shape_string());
  }
  Tensor x(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t c = 0; c < z.cols(); ++c) x(r, c) = z(r, c) * scale[c] + mean[c];
  }
  return x;
}

std::mt19937_64 component_rng(std::uint64_t seed, std::uint64_t component) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(component)};
  return std::mt19937_64(seq);
}

Model assemble(const ModelConfig& config, const StationDataset& dataset) {
  config.validate();
  Model m;
  m.config_ = config;
  const std::size_t n = dataset.num_stations();
  auto& topo = m.topology_;
  topo.num_stations = n;

  const KHopGraph khop = build_khop(dataset.base_graph(), config.k);
  const bool closed = config.closed_neighborhoods && !config.uses_gcn();
  topo.khop = nn::make_segment_index(neighbor_sets(khop), closed);
  if (config.uses_gcn()) topo.gcn = nn::GcnNeighborhood::from_open(topo.khop);

  const auto scaler = SocialScaler::fit(dataset.social());
  topo.edge_diffs = Tensor(topo.khop.num_entries(), nn::EdgeWeightLearner::kInputs);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::uint32_t e = topo.khop.offsets[v]; e < topo.khop.offsets[v + 1]; ++e) {
      const auto d = scaler.diff(dataset.social()[topo.khop.sources[e]], dataset.social()[v]);
      for (std::size_t j = 0; j < d.size(); ++j) topo.edge_diffs(e, j) = d[j];
    }
  }

  if (config.uses_hypergraph()) {
    if (dataset.lines().empty()) {
      fail(ErrorCategory::config, std::string(to_string(config.variant)) +
                                      " needs line memberships for the hypergraph branch");
    }
    const WeightedGraph expanded = clique_expand(dataset.hypergraph());
    auto sampling = component_rng(config.seed, kSampling);
    const WeightedGraph sparse = sample_adjacency(expanded, *config.sampling_rate, sampling());
    topo.hyper = nn::make_segment_index(neighbor_sets(sparse));
  }

  const std::size_t h = config.hidden_width;
  {
    auto rng = component_rng(config.seed, kStack);
    for (std::size_t i = 0; i < config.num_layers; ++i) {
      const std::size_t d_in = i == 0 ? kNumFeatures : h;
      const std::string name = "khop." + std::to_string(i);
      if (config.uses_gcn()) {
        m.gcn_.emplace_back(d_in, h, rng, name);
      } else {
        m.sage_.emplace_back(d_in, h, config.aggregator, rng, name);
      }
    }
  }
  if (config.uses_learner()) {
    auto rng = component_rng(config.seed, kLearner);
    m.learner_ = nn::EdgeWeightLearner(config.edge_hidden, rng);
  }
  if (config.uses_temporal()) {
    auto rng = component_rng(config.seed, kTemporal);
    m.temporal_ = nn::Mlp({kNumFeatures, config.temporal_hidden, config.temporal_width}, rng,
                          nn::Activation::relu, nn::Activation::relu, "temporal");
  }
  if (config.uses_hypergraph()) {
    auto rng = component_rng(config.seed, kHyper);
    for (std::size_t i = 0; i < config.num_layers; ++i) {
      m.hyper_.emplace_back(i == 0 ? kNumFeatures : h, h, config.aggregator, rng,
                            "hyper." + std::to_string(i));
    }
  }
  {
    auto rng = component_rng(config.seed, kHead);
    const std::size_t in = m.fusion_width();
    if (config.head_layers == 2) {
      m.head_ = nn::Mlp({in, config.fusion_width, 1}, rng, nn::Activation::relu,
                        nn::Activation::identity, "head");
    } else {
      m.head_ = nn::Mlp({in, 1}, rng, nn::Activation::relu, nn::Activation::identity, "head");
    }
  }
  return m;
}

std::size_t Model::fusion_width() const {
  std::size_t w = config_.hidden_width;
  if (config_.uses_temporal()) w += config_.temporal_width;
  if (config_.uses_hypergraph()) w += config_.hidden_width;
  return w;
}

Var Model::forward(Tape& tape, Var features) {
  const std::size_t n = topology_.num_stations;
  if (features.cols() != kNumFeatures || n == 0 || features.rows() % n != 0) {
    fail(ErrorCategory::shape, "model expects stacked blocks of " + std::to_string(n) + "x8, got " +
                                   features.value().shape_string());
  }
  std::optional<Var> weights;
  if (config_.uses_learner()) {
    weights = learner_.weights(tape, tape.constant(topology_.edge_diffs));
  }
  Var h = features;
  if (config_.uses_gcn()) {
    for (auto& layer : gcn_) h = layer.forward(tape, h, topology_.gcn, weights);
  } else {
    for (auto& layer : sage_) h = layer.forward(tape, h, topology_.khop, weights);
  }
  Var fused = h;
  if (config_.uses_temporal()) {
    fused = ad::concat_cols(fused, nn::temporal_forward(tape, temporal_, features));
  }
  if (config_.uses_hypergraph()) {
    Var g = features;
    for (auto& layer : hyper_) g = layer.forward(tape, g, topology_.hyper, std::nullopt);
    fused = ad::concat_cols(fused, g);
  }
  return head_.forward(tape, fused);
}

nn::SageParts Model::first_layer_parts(Tape& tape, Var features) {
  if (sage_.empty()) fail(ErrorCategory::contract, "decomposition needs a SAGE model");
  if (features.rows() != topology_.num_stations || features.cols() != kNumFeatures) {
    fail(ErrorCategory::shape, "decomposition expects one " + std::to_string(topology_.num_stations) +
                                   "x8 block, got " + features.value().shape_string());
  }
  std::optional<Var> weights;
  if (config_.uses_learner()) {
    weights = learner_.weights(tape, tape.constant(topology_.edge_diffs));
  }
  return sage_.front().forward_decomposed(tape, features, topology_.khop, weights);
}

std::vector<double> Model::edge_weights() {
  if (!config_.uses_learner()) return std::vector<double>(topology_.khop.num_entries(), 1.0);
  Tape tape(false);
  const Var w = learner_.weights(tape, tape.constant(topology_.edge_diffs));
  const auto values = w.value().values();
  return {values.begin(), values.end()};
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  auto append = [&out](std::vector<Parameter*> more) { out.insert(out.end(), more.begin(), more.end()); };
  if (config_.uses_learner()) append(learner_.parameters());
  for (auto& layer : sage_) append(layer.parameters());
  for (auto& layer : gcn_) append(layer.parameters());
  if (config_.uses_temporal()) append(temporal_.parameters());
  for (auto& layer : hyper_) append(layer.parameters());
  append(head_.parameters());
  return out;
}

std::size_t Model::parameter_count() {
  std::size_t total = 0;
  for (const Parameter* p : parameters()) total += p->value.size();
  return total;
}

std::vector<double> predict_task(Model& model, const StationDataset& dataset, int year, Task task) {
  const auto trained = model.trained_task();
  if (trained && !(*trained == task)) {
    fail(ErrorCategory::contract, "model was trained for " + trained->name() + ", not " + task.name());
  }
  const TaskMatrix m = build_task(dataset, year, task);
  Tape tape(false);
  const Var out = model.forward(tape, tape.constant(model.feature_scaler().apply(m.features)));
  const Tensor flows = model.target_scaler().invert(out.value());
  return {flows.values().begin(), flows.values().end()};
}

namespace {

constexpr char kMagic[4] = {'M', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof value);
    check();
    return value;
  }
  std::string get_string() {
    const auto size = get<std::uint64_t>();
    if (size > (1u << 24)) corrupt("string length");
    std::string s(size, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(size));
    check();
    return s;
  }
  std::vector<double> get_doubles() {
    const auto size = get<std::uint64_t>();
    if (size > (1u << 28)) corrupt("array length");
    std::vector<double> v(size);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(size * 8));
    check();
    return v;
  }
  [[noreturn]] void corrupt(const std::string& what) {
    fail(ErrorCategory::data, path_ + ": corrupt checkpoint (" + what + ")");
  }

 private:
  void check() {
    if (!in_) corrupt("truncated");
  }
  std::istream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(Model& model, const RunConfig& run, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put(out, kVersion);
  put_string(out, serialize(run));
  const auto task = model.trained_task();
  put<std::uint8_t>(out, task ? 1 : 0);
  put_string(out, task ? task->name() : std::string());
  for (const Standardizer* s : {&model.feature_scaler(), &model.target_scaler()}) {
    put_doubles(out, s->mean);
    put_doubles(out, s->scale);
  }
  const auto params = model.parameters();
  put<std::uint64_t>(out, params.size());
  for (const Parameter* p : params) {
    put_string(out, p->name);
    put<std::uint64_t>(out, p->value.rows());
    put<std::uint64_t>(out, p->value.cols());
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * 8));
  }
  if (!out) fail(ErrorCategory::io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const StationDataset& dataset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::io, "cannot read checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != std::string_view(kMagic, 4)) r.corrupt("bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    fail(ErrorCategory::data, path.string() + ": unsupported checkpoint version " +
                                  std::to_string(version));
  }
  Checkpoint ck{parse_run_config(r.get_string()), Model()};
  ck.model = assemble(ck.run.model, dataset);
  const bool has_task = r.get<std::uint8_t>() != 0;
  const std::string task_name = r.get_string();
  if (has_task) ck.model.set_trained_task(Task::parse(task_name));
  for (Standardizer* s : {&ck.model.feature_scaler(), &ck.model.target_scaler()}) {
    const std::size_t width = s->mean.size();
    s->mean = r.get_doubles();
    s->scale = r.get_doubles();
    if (s->mean.size() != width || s->scale.size() != width) r.corrupt("scaler width");
  }
  const auto params = ck.model.parameters();
  if (r.get<std::uint64_t>() != params.size()) r.corrupt("parameter count");
  for (Parameter* p : params) {
    const std::string name = r.get_string();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols()) {
      fail(ErrorCategory::data, path.string() + ": parameter " + name + " " +
                                    shape_string(rows, cols) + " does not match " + p->name + " " +
                                    p->value.shape_string());
    }
    in.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(rows * cols * 8));
    if (!in) r.corrupt("truncated");
  }
  return ck;
}

}  // namespace metroflow::model
