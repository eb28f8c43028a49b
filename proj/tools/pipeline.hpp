#pragma once

// Orchestration behind the csigait command line: configuration, dataset
// layout on disk, and the synth / preprocess / train / evaluate / spectrogram
// commands.
//
// Layout under the dataset root:
//   index.csv                          path,subject,split
//   scenarios.csv                      path,a_m,b_m,v_mps,lambda_m (synthetic only)
//   logs/<subject>/<sample>.csil       raw captures
//   clean/<split>/<subject>/<sample>.ten   time-domain tensors (rows x cols)
//   spec/<split>/<subject>/<sample>.ten    frequency-domain tensors (k x bins x frames)
//   scaler.txt / spec_scaler.txt       train-only statistics

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "csigait/csi_log.hpp"
#include "csigait/error.hpp"
#include "csigait/io.hpp"
#include "csigait/metrics.hpp"
#include "csigait/nn/checkpoint.hpp"
#include "csigait/nn/train.hpp"
#include "csigait/preprocess.hpp"
#include "csigait/seed.hpp"
#include "csigait/spectral.hpp"
#include "csigait/synth.hpp"

namespace csigait::cli {

namespace fs = std::filesystem;

enum class Domain { time, freq };

struct PipelineConfig {
  std::string out = "out";
  std::string dataset;     // empty: <out>/data
  std::string checkpoint;  // empty: <out>/model.csim
  std::uint64_t seed = 1;
  Domain mode = Domain::time;
  std::string preset = "desk";
  bool audit = false;

  std::size_t subjects = 5;
  std::size_t samples = 40;
  std::size_t rate_hz = 2000;
  std::size_t duration_s = 4;
  double noise_std = 0.05;
  double p_drop = 0.0;
  double quant_scale = 50.0;
  SubjectRanges ranges;

  PreprocessOptions prep;

  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> learning_rate, decay;
  nn::DecayMode decay_mode = nn::DecayMode::learning_rate;
  double test_fraction = 0.15;

  std::size_t components = 5;
  std::size_t stft_window = kDefaultStftWindow;
  std::size_t stft_hop = kDefaultStftHop;
  std::string sample;
  std::optional<double> scen_a, scen_b, scen_v, scen_lambda;
  std::string partition = "test";

  fs::path out_dir() const { return out; }
  fs::path data_dir() const { return dataset.empty() ? fs::path(out) / "data" : fs::path(dataset); }
  fs::path checkpoint_path() const { return checkpoint.empty() ? fs::path(out) / "model.csim" : fs::path(checkpoint); }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw UsageError(key + ": cannot parse '" + v + "'");
  return out;
}

}  // namespace detail

inline Domain parse_domain(const std::string& v) {
  if (v == "time") return Domain::time;
  if (v == "freq") return Domain::freq;
  throw UsageError("mode must be time or freq, got '" + v + "'");
}

inline void set_preset(PipelineConfig& c, const std::string& v) {
  if (v != "full" && v != "desk") throw UsageError("preset must be full or desk, got '" + v + "'");
  c.preset = v;
}

// Applies one `key = value` setting.
inline void set_key(PipelineConfig& c, const std::string& key, const std::string& v) {
  using detail::parse_number;
  auto sz = [&](std::size_t& f) { f = parse_number<std::size_t>(key, v); };
  auto dbl = [&](double& f) { f = parse_number<double>(key, v); };
  auto opt_sz = [&](std::optional<std::size_t>& f) { f = parse_number<std::size_t>(key, v); };
  auto opt_dbl = [&](std::optional<double>& f) { f = parse_number<double>(key, v); };

  if (key == "paths.out") c.out = v;
  else if (key == "paths.dataset") c.dataset = v;
  else if (key == "paths.checkpoint") c.checkpoint = v;
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "mode") c.mode = parse_domain(v);
  else if (key == "preset") set_preset(c, v);
  else if (key == "synth.subjects") sz(c.subjects);
  else if (key == "synth.samples") sz(c.samples);
  else if (key == "synth.rate_hz") sz(c.rate_hz);
  else if (key == "synth.duration_s") sz(c.duration_s);
  else if (key == "synth.noise_std") dbl(c.noise_std);
  else if (key == "synth.p_drop") dbl(c.p_drop);
  else if (key == "synth.quant_scale") dbl(c.quant_scale);
  else if (key == "synth.v_min") dbl(c.ranges.v_lo);
  else if (key == "synth.v_max") dbl(c.ranges.v_hi);
  else if (key == "synth.a_min") dbl(c.ranges.a_lo);
  else if (key == "synth.a_max") dbl(c.ranges.a_hi);
  else if (key == "synth.subject_spread") dbl(c.ranges.subject_spread);
  else if (key == "synth.sample_jitter") dbl(c.ranges.sample_jitter);
  else if (key == "preprocess.window") sz(c.prep.window);
  else if (key == "preprocess.decimation") sz(c.prep.decimation);
  else if (key == "model.epochs") opt_sz(c.epochs);
  else if (key == "model.batch_size") opt_sz(c.batch_size);
  else if (key == "model.learning_rate") opt_dbl(c.learning_rate);
  else if (key == "model.decay") opt_dbl(c.decay);
  else if (key == "model.test_fraction") dbl(c.test_fraction);
  else if (key == "model.decay_mode") {
    if (v == "learning_rate") c.decay_mode = nn::DecayMode::learning_rate;
    else if (v == "weight") c.decay_mode = nn::DecayMode::weight;
    else throw UsageError("model.decay_mode must be learning_rate or weight");
  } else if (key == "spectral.components") sz(c.components);
  else if (key == "spectral.window") sz(c.stft_window);
  else if (key == "spectral.hop") sz(c.stft_hop);
  else if (key == "spectral.sample") c.sample = v;
  else if (key == "scenario.a") opt_dbl(c.scen_a);
  else if (key == "scenario.b") opt_dbl(c.scen_b);
  else if (key == "scenario.v") opt_dbl(c.scen_v);
  else if (key == "scenario.lambda") opt_dbl(c.scen_lambda);
  else if (key == "evaluate.partition") c.partition = v;
  else throw UsageError("unknown config key '" + key + "'");
}

// `key = value` lines, `#` starts a comment, dotted keys name sections.
inline PipelineConfig parse_config(const std::string& text, PipelineConfig c = {}) {
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(n) + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError("config line " + std::to_string(n) + ": empty key");
    try {
      set_key(c, key, value);
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(n) + ": " + e.what());
    }
  }
  return c;
}

inline PipelineConfig load_config(const fs::path& p, PipelineConfig c = {}) {
  if (!fs::exists(p)) throw UsageError("config file not found: " + p.string());
  return parse_config(io::read_text(p), std::move(c));
}

inline nn::ModelConfig model_config(const PipelineConfig& c) {
  auto m = c.preset == "full" ? nn::ModelConfig::full() : nn::ModelConfig::desk();
  if (c.epochs) m.epochs = *c.epochs;
  if (c.batch_size) m.batch_size = *c.batch_size;
  if (c.learning_rate) m.learning_rate = *c.learning_rate;
  if (c.decay) m.decay = *c.decay;
  m.decay_mode = c.decay_mode;
  m.test_fraction = c.test_fraction;
  m.seed = c.seed;
  return m;
}

// Short form for log messages; files keep full precision.
inline std::string brief(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// Diagnostics sink. With auditing on, every data file a command opens is
// logged with its partition and the stage that read it.
class Log {
public:
  explicit Log(std::ostream& err, bool audit = false) : err_(err), audit_(audit) {}

  void info(const std::string& msg) { err_ << msg << '\n'; }

  void open(const std::string& stage, const std::string& partition, const fs::path& p) {
    if (!audit_) return;
    records_.push_back({stage, partition, p.string()});
    err_ << "audit: stage=" << stage << " partition=" << partition << " path=" << p.string() << '\n';
  }

  struct Record {
    std::string stage, partition, path;
  };
  const std::vector<Record>& records() const { return records_; }

private:
  std::ostream& err_;
  bool audit_;
  std::vector<Record> records_;
};

struct IndexRow {
  std::string path;  // relative to the dataset root
  std::string subject;
  std::string split;

  std::string stem() const { return fs::path(path).stem().string(); }
};

struct Index {
  std::vector<IndexRow> rows;
  std::vector<std::string> subjects;  // label order

  int label(const IndexRow& r) const {
    for (std::size_t i = 0; i < subjects.size(); ++i)
      if (subjects[i] == r.subject) return static_cast<int>(i);
    throw DataError("subject " + r.subject + " is not in the index");
  }
};

inline Index read_index(const fs::path& root) {
  const auto p = root / "index.csv";
  if (!fs::exists(p)) throw DataError("dataset index not found: " + p.string());
  const auto rows = io::parse_csv(io::read_text(p));
  if (rows.empty() || rows[0] != std::vector<std::string>{"path", "subject", "split"})
    throw FormatError(p.string() + ": header must be path,subject,split");
  Index idx;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw FormatError(p.string() + ": row " + std::to_string(i) + " needs 3 fields");
    IndexRow r{rows[i][0], rows[i][1], rows[i][2]};
    if (r.split != "train" && r.split != "test")
      throw FormatError(p.string() + ": row " + std::to_string(i) + " has split '" + r.split + "'");
    if (std::find(idx.subjects.begin(), idx.subjects.end(), r.subject) == idx.subjects.end())
      idx.subjects.push_back(r.subject);
    idx.rows.push_back(std::move(r));
  }
  if (idx.rows.empty()) throw DataError(p.string() + ": no samples listed");
  return idx;
}

inline fs::path tensor_path(const fs::path& root, Domain d, const IndexRow& r) {
  return root / (d == Domain::time ? "clean" : "spec") / r.split / r.subject / (r.stem() + ".ten");
}

inline std::string zero_pad(std::size_t v, std::size_t width) {
  auto s = std::to_string(v);
  return s.size() >= width ? s : std::string(width - s.size(), '0') + s;
}

inline std::size_t digits(std::size_t n) { return n < 10 ? 1 : 1 + digits(n / 10); }

inline RawCsiSample read_capture(const fs::path& p, const PipelineConfig& c) {
  try {
    const auto packets = parse_log(io::read_bytes(p));
    return packets_to_sample(packets, c.rate_hz, c.duration_s);
  } catch (const DataError& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- synth

inline void cmd_synth(const PipelineConfig& c, Log& log) {
  if (!(c.p_drop >= 0 && c.p_drop < 1)) throw ParameterError("synth.p_drop must be in [0, 1)");
  if (!(c.quant_scale > 0)) throw ParameterError("synth.quant_scale must be positive");
  const fs::path root = c.data_dir();
  auto scene = default_scene();
  scene.noise_std = c.noise_std;
  const auto plan = plan_dataset(c.subjects, c.samples, scene, c.seed, c.ranges);

  const std::size_t sw = std::max<std::size_t>(2, digits(c.subjects - 1));
  const std::size_t nw = std::max<std::size_t>(3, digits(c.samples > 0 ? c.samples - 1 : 0));
  std::vector<std::string> paths, subjects;
  std::vector<int> labels;
  for (const auto& spec : plan) {
    subjects.push_back("s" + zero_pad(static_cast<std::size_t>(spec.label), sw));
    paths.push_back("logs/" + subjects.back() + "/" + zero_pad(spec.index_in_subject, nw) + ".csil");
    labels.push_back(spec.label);
  }
  // With a single sample per subject there is nothing to hold out: everything
  // goes to train and cmd_train reports the split error.
  std::vector<std::string> part(plan.size(), "train");
  if (c.samples >= 2) {
    for (auto i : nn::stratified_split(labels, paths, c.seed, c.test_fraction).test) part[i] = "test";
  } else {
    log.info("synth: warning: one sample per subject, no test partition");
  }

  std::string index = "path,subject,split\n";
  std::string scen = "path,a_m,b_m,v_mps,lambda_m\n";
  for (std::size_t i = 0; i < plan.size(); ++i) {
    auto raw = synth_csi(plan[i].scene, c.rate_hz, c.duration_s, plan[i].seed);
    if (c.p_drop > 0) raw = inject_missing(std::move(raw), c.p_drop, derive_seed(plan[i].seed, 0xD809));
    const auto packets = sample_to_packets(raw, c.quant_scale);
    io::write_bytes(root / paths[i], write_log(packets));
    index += paths[i] + "," + subjects[i] + "," + part[i] + "\n";
    const auto& w = plan[i].scene.dynamics.front().scenario;
    scen += paths[i] + "," + io::fmt(w.a_m) + "," + io::fmt(w.b_m) + "," + io::fmt(w.v_mps) + "," +
            io::fmt(w.lambda_m) + "\n";
  }
  io::write_text(root / "index.csv", index);
  io::write_text(root / "scenarios.csv", scen);
  log.info("synth: wrote " + std::to_string(plan.size()) + " captures to " + root.string());
}

// ----------------------------------------------------------- preprocess

inline io::TensorFile frequency_features(const RawCsiSample& raw, const PipelineConfig& c) {
  const Matrix filled = mean_impute(magnitude(raw));
  const auto st = spectrogram_tensor(filled, c.components, static_cast<double>(c.rate_hz), c.stft_window, c.stft_hop);
  const auto& l0 = st.layers.front();
  io::TensorFile t;
  t.dims = {static_cast<std::uint32_t>(st.depth()), static_cast<std::uint32_t>(l0.bins()),
            static_cast<std::uint32_t>(l0.frames())};
  for (const auto& layer : st.layers)
    for (double p : layer.power.data) t.data.push_back(std::log10(p + 1e-12));
  return t;
}

// Two passes: features for every capture, with statistics accumulated over the
// train partition only; then each stored tensor is rescaled in place.
inline void cmd_preprocess(const PipelineConfig& c, Log& log) {
  const fs::path root = c.data_dir();
  const auto idx = read_index(root);
  ScalerStats stats;
  for (const auto& r : idx.rows) {
    log.open("preprocess", r.split, root / r.path);
    const auto raw = read_capture(root / r.path, c);
    io::TensorFile t;
    if (c.mode == Domain::time) {
      const auto clean = preprocess_pipeline(raw, std::nullopt, c.prep);
      t.dims = {static_cast<std::uint32_t>(clean.data.rows), static_cast<std::uint32_t>(clean.data.cols)};
      t.data = clean.data.data;
    } else {
      t = frequency_features(raw, c);
    }
    if (r.split == "train") {
      log.open("fit_scaler", r.split, tensor_path(root, c.mode, r));
      stats = stats.merged(ScalerStats::of(t.data));
    }
    io::write_tensor(tensor_path(root, c.mode, r), t);
  }
  if (stats.count == 0) throw DataError("no train samples in the index; cannot fit scaler");
  if (!(stats.max > stats.min)) throw DataError("degenerate training data: max equals min");
  const double inv = 1.0 / (stats.max - stats.min);
  for (const auto& r : idx.rows) {
    const auto p = tensor_path(root, c.mode, r);
    auto t = io::read_tensor(p);
    for (auto& v : t.data) v = (v - stats.mean) * inv;
    io::write_tensor(p, t);
  }
  write_scaler((root / (c.mode == Domain::time ? "scaler.txt" : "spec_scaler.txt")).string(), stats);
  log.info("preprocess: " + std::to_string(idx.rows.size()) + " tensors, scaler mean " + brief(stats.mean));
}

// ---------------------------------------------------------------- train

// Loads one partition as network examples shaped for `mc`; time-domain
// matrices larger than the model input are cropped (top rows, centred
// columns).
inline std::vector<nn::Example> load_partition(const PipelineConfig& c, const Index& idx, const std::string& split,
                                               const nn::ModelConfig& mc, const std::string& stage, Log& log) {
  const fs::path root = c.data_dir();
  std::vector<nn::Example> out;
  for (const auto& r : idx.rows) {
    if (r.split != split) continue;
    const auto p = tensor_path(root, c.mode, r);
    log.open(stage, r.split, p);
    if (!fs::exists(p)) throw DataError("missing tensor " + p.string() + " (run preprocess first)");
    auto t = io::read_tensor(p);
    nn::Example e;
    e.label = idx.label(r);
    if (c.mode == Domain::time) {
      if (t.dims.size() != 2) throw ShapeError(p.string() + ": expected a rank-2 tensor");
      Matrix m(t.dims[0], t.dims[1]);
      m.data = std::move(t.data);
      if (mc.in_channels != 1) throw ShapeError("time-domain input needs a single-channel model");
      if (m.rows != mc.in_h || m.cols != mc.in_w) m = crop(m, mc.in_h, mc.in_w);
      e.x = std::move(m.data);
    } else {
      if (t.dims.size() != 3 || t.dims[0] != mc.in_channels || t.dims[1] != mc.in_h || t.dims[2] != mc.in_w)
        throw ShapeError(p.string() + ": tensor does not match the model input");
      e.x = std::move(t.data);
    }
    out.push_back(std::move(e));
  }
  return out;
}

// Model input geometry implied by the stored tensors and the preset.
inline nn::ModelConfig model_for_dataset(const PipelineConfig& c, const Index& idx) {
  auto mc = model_config(c);
  mc.classes = idx.subjects.size();
  const auto first = tensor_path(c.data_dir(), c.mode, idx.rows.front());
  if (!fs::exists(first)) throw DataError("missing tensor " + first.string() + " (run preprocess first)");
  const auto t = io::read_tensor(first);
  if (c.mode == Domain::freq) {
    if (t.dims.size() != 3) throw ShapeError(first.string() + ": expected a rank-3 tensor");
    mc.in_channels = t.dims[0];
    mc.in_h = t.dims[1];
    mc.in_w = t.dims[2];
  } else if (c.preset == "full") {
    if (t.dims.size() != 2) throw ShapeError(first.string() + ": expected a rank-2 tensor");
    mc.in_h = t.dims[0];
    mc.in_w = t.dims[1];
  }
  return mc;
}

struct TrainOutcome {
  std::vector<nn::EpochStats> history;
  double test_accuracy = 0.0;
};

inline TrainOutcome cmd_train(const PipelineConfig& c, Log& log) {
  const auto idx = read_index(c.data_dir());
  for (const auto& subj : idx.subjects) {
    const auto n = std::count_if(idx.rows.begin(), idx.rows.end(), [&](const IndexRow& r) { return r.subject == subj; });
    if (n < 2) throw DataError("split: subject " + subj + " has fewer than two samples");
  }
  const auto mc = model_for_dataset(c, idx);
  const auto train = load_partition(c, idx, "train", mc, "train", log);
  // Test tensors are only scored in inference mode after each epoch; they
  // never reach the scaler, the optimizer or batch-norm statistics.
  const auto test = load_partition(c, idx, "test", mc, "evaluate", log);
  auto model = nn::build_resnet18(mc, derive_seed(c.seed, 0x40DE1));
  TrainOutcome res;
  res.history = nn::fit(model, train, test, mc);

  std::string csv = "epoch,train_loss,train_acc,test_acc\n";
  for (const auto& h : res.history)
    csv += std::to_string(h.epoch) + "," + io::fmt(h.train_loss) + "," + io::fmt(h.train_acc) + "," +
           io::fmt(h.test_acc) + "\n";
  io::write_text(c.out_dir() / "history.csv", csv);
  nn::save_checkpoint(c.checkpoint_path(), model);

  if (!test.empty()) res.test_accuracy = res.history.back().test_acc;
  io::write_text(c.out_dir() / "train_summary.txt",
                 "epochs = " + std::to_string(res.history.size()) + "\ntrain_samples = " +
                     std::to_string(train.size()) + "\ntest_samples = " + std::to_string(test.size()) +
                     "\ntest_accuracy = " + io::fmt(res.test_accuracy) + "\n");
  log.info("train: " + std::to_string(res.history.size()) + " epochs, test accuracy " + brief(res.test_accuracy));
  return res;
}

// ------------------------------------------------------------- evaluate

struct EvalOutcome {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  ClassReport report;
};

inline EvalOutcome cmd_evaluate(const PipelineConfig& c, Log& log) {
  if (c.partition != "train" && c.partition != "test")
    throw UsageError("partition must be train or test, got '" + c.partition + "'");
  const auto ck = c.checkpoint_path();
  if (!fs::exists(ck)) throw DataError("missing checkpoint " + ck.string());
  const auto idx = read_index(c.data_dir());
  auto model = nn::load_checkpoint(ck, model_config(c));
  const auto& mc = model.config();
  if (mc.classes != idx.subjects.size())
    throw ShapeError("checkpoint has " + std::to_string(mc.classes) + " classes, dataset has " +
                     std::to_string(idx.subjects.size()));
  const auto data = load_partition(c, idx, c.partition, mc, "evaluate", log);
  if (data.empty()) throw DataError("partition " + c.partition + " is empty");
  const auto ev = nn::evaluate(model, data);

  EvalOutcome r;
  r.confusion = confusion(ev.truth, ev.predicted, mc.classes);
  r.confusion.class_names = idx.subjects;
  r.report = classification_report(r.confusion);
  r.accuracy = accuracy(ev.truth, ev.predicted);

  const fs::path dir = c.out_dir() / "eval" / c.partition;
  io::write_text(dir / "metrics.txt", "partition = " + c.partition + "\nsamples = " + std::to_string(data.size()) +
                                          "\naccuracy = " + io::fmt(r.accuracy) + "\n");
  io::write_text(dir / "confusion.csv", io::confusion_csv(r.confusion));
  io::write_bytes(dir / "confusion.pgm", io::encode_pgm(io::confusion_image(r.confusion)));
  io::write_text(dir / "report.csv", io::report_csv(r.report, r.confusion));
  log.info("evaluate: " + c.partition + " accuracy " + brief(r.accuracy) + " over " + std::to_string(data.size()));
  return r;
}

// ---------------------------------------------------------- spectrogram

inline const IndexRow& find_sample(const Index& idx, const std::string& id) {
  for (const auto& r : idx.rows) {
    const auto short_id = r.subject + "/" + r.stem();
    if (r.path == id || short_id == id) return r;
  }
  throw DataError("unknown sample id '" + id + "'");
}

// Scenario behind a sample: explicit config values win over the synthetic
// sidecar.
inline WalkScenario sample_scenario(const PipelineConfig& c, const IndexRow& row) {
  std::optional<WalkScenario> s;
  const auto side = c.data_dir() / "scenarios.csv";
  if (fs::exists(side)) {
    for (const auto& f : io::parse_csv(io::read_text(side))) {
      if (f.size() == 5 && f[0] == row.path) {
        s = WalkScenario{std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
        break;
      }
    }
  }
  const bool any = c.scen_a || c.scen_b || c.scen_v || c.scen_lambda;
  if (!s && !(c.scen_a && c.scen_b && c.scen_v && c.scen_lambda))
    throw DataError("no walk scenario for " + row.path + "; set scenario.a, scenario.b, scenario.v, scenario.lambda");
  if (any) {
    if (!s) s = WalkScenario{};
    if (c.scen_a) s->a_m = *c.scen_a;
    if (c.scen_b) s->b_m = *c.scen_b;
    if (c.scen_v) s->v_mps = *c.scen_v;
    if (c.scen_lambda) s->lambda_m = *c.scen_lambda;
  }
  s->validate();
  return *s;
}

struct SpectrogramOutcome {
  SpectrogramTensor tensor;
  std::vector<double> overlay, ridge;
  double within_two_bins = 0.0;  // fraction of frames outside the zero-crossing window
  fs::path dir;
};

// Fraction of frames, ignoring the `guard_s` around the Doppler zero crossing,
// whose ridge lies within `bins` bins of the overlay.
inline double ridge_agreement(const Spectrogram& s, std::span<const double> ridge, std::span<const double> overlay,
                              const WalkScenario& w, double bins = 2.0, double guard_s = 0.5) {
  const double t0 = w.a_m / w.v_mps;
  std::size_t used = 0, ok = 0;
  for (std::size_t f = 0; f < s.frames(); ++f) {
    if (std::abs(s.times_s[f] - t0) <= guard_s / 2) continue;
    ++used;
    ok += std::abs(ridge[f] - overlay[f]) < bins * s.bin_width();
  }
  return used ? static_cast<double>(ok) / static_cast<double>(used) : 0.0;
}

inline SpectrogramOutcome cmd_spectrogram(const PipelineConfig& c, Log& log) {
  if (c.sample.empty()) throw UsageError("spectrogram needs a sample id (--sample or spectral.sample)");
  const fs::path root = c.data_dir();
  const auto idx = read_index(root);
  const auto& row = find_sample(idx, c.sample);
  const auto scen = sample_scenario(c, row);
  log.open("spectrogram", row.split, root / row.path);
  const auto raw = read_capture(root / row.path, c);

  SpectrogramOutcome r;
  r.tensor = spectrogram_tensor(mean_impute(magnitude(raw)), c.components, static_cast<double>(c.rate_hz),
                                c.stft_window, c.stft_hop);
  const auto& s = r.tensor.layers.front();
  r.overlay = doppler_overlay(scen, s.times_s);
  r.ridge = ridge_frequencies(s);
  r.within_two_bins = ridge_agreement(s, r.ridge, r.overlay, scen);

  r.dir = c.out_dir() / "spectrogram" / (row.subject + "_" + row.stem());
  io::write_text(r.dir / "spectrogram.csv", io::spectrogram_csv(s));
  io::write_bytes(r.dir / "spectrogram.pgm", io::encode_pgm(spectrogram_image(s)));
  std::string ov = "time_s,doppler_hz,ridge_hz,deviation_bins\n";
  for (std::size_t f = 0; f < s.frames(); ++f)
    ov += io::fmt(s.times_s[f]) + "," + io::fmt(r.overlay[f]) + "," + io::fmt(r.ridge[f]) + "," +
          io::fmt(std::abs(r.ridge[f] - r.overlay[f]) / s.bin_width()) + "\n";
  io::write_text(r.dir / "overlay.csv", ov);
  io::TensorFile t;
  t.dims = {static_cast<std::uint32_t>(r.tensor.depth()), static_cast<std::uint32_t>(s.bins()),
            static_cast<std::uint32_t>(s.frames())};
  for (const auto& layer : r.tensor.layers) t.data.insert(t.data.end(), layer.power.data.begin(), layer.power.data.end());
  io::write_tensor(r.dir / "tensor.ten", t);
  log.info("spectrogram: ridge within 2 bins of the Doppler overlay for " + brief(100.0 * r.within_two_bins) +
           "% of frames outside the zero crossing");
  return r;
}

}  // namespace csigait::cli
