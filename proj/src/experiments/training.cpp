#include "jcas/experiments/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "jcas/nn/checkpoint.hpp"
#include "jcas/preprocess/dataset.hpp"

namespace jcas::experiments {

nn::Shape TensorSet::sample_shape() const {
  if (x.empty()) throw EmptyDataset("empty tensor set");
  return x.front().shape();
}

void TensorSet::add(Tensor t, int label, int domain_id) {
  if (!x.empty() && t.shape() != x.front().shape())
    throw nn::ShapeError("sample shape " + t.shape().str() + " differs from " + x.front().shape().str());
  if (label < 0 || std::size_t(label) >= classes) throw std::invalid_argument(fmt::format("label {} out of range", label));
  x.push_back(std::move(t));
  y.push_back(label);
  domain.push_back(domain_id);
}

TensorSet to_tensor_set(const std::vector<preprocess::DfsFrame>& frames, std::size_t classes,
                        const std::vector<int>& domains) {
  if (!domains.empty() && domains.size() != frames.size()) throw std::invalid_argument("one domain id per frame needed");
  TensorSet s;
  s.classes = classes;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    // DFS layout (b, t, a) is NHWC for one sample.
    Tensor t(nn::Shape{1, f.B, f.T, f.A});
    for (std::size_t j = 0; j < f.values.size(); ++j) t[j] = f.values[j];
    s.add(std::move(t), f.class_id, domains.empty() ? 0 : domains[i]);
  }
  return s;
}

DataView DataView::all(const TensorSet& s) {
  std::vector<std::size_t> idx(s.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return DataView(s, std::move(idx));
}

std::vector<const Tensor*> DataView::samples() const {
  std::vector<const Tensor*> out;
  out.reserve(index.size());
  for (std::size_t i : index) out.push_back(&set->x.at(i));
  return out;
}

std::vector<int> DataView::labels() const {
  std::vector<int> out;
  out.reserve(index.size());
  for (std::size_t i : index) out.push_back(set->y.at(i));
  return out;
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (batch == 0 || max_epochs == 0) throw std::invalid_argument("batch size and max epochs must be positive");
  if (patience == 0) throw std::invalid_argument("patience must be at least 1");
  if (min_delta < 0) throw std::invalid_argument("min_delta must be non-negative");
}

void EarlyStopper::seed(double best, std::size_t best_epoch) {
  best_ = best;
  best_epoch_ = best_epoch;
  stale_ = 0;
}

bool EarlyStopper::update(double loss, std::size_t epoch) {
  improved_ = loss < best_ - min_delta_;
  if (improved_) {
    best_ = loss;
    best_epoch_ = epoch;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

Metrics evaluate_metrics(const Model& model, const DataView& data, std::size_t batch) {
  const std::vector<int> labels = data.labels();
  const models::Evaluation ev = models::evaluate(model, data.samples(), labels, batch);
  return make_metrics(ev.loss, model.config().classes, labels, ev.predictions);
}

TrainingSession::TrainingSession(const models::ModelConfig& cfg, std::uint64_t model_seed, const TrainConfig& tc)
    : tc_(tc), model_seed_(model_seed), rng_(preprocess::splitmix64(tc.seed ^ (model_seed * 0x9E3779B97F4A7C15ull))) {
  tc_.validate();
  model_ = std::make_unique<Model>(cfg, model_seed);
  nn::AdamConfig adam;
  adam.lr = tc_.lr;
  trainer_ = std::make_unique<models::Trainer<float>>(*model_, adam);
}

void TrainingSession::epoch(const DataView& train, const DataView* target, EpochRecord& rec) {
  std::vector<std::size_t> order = train.index;
  std::shuffle(order.begin(), order.end(), rng_);
  const bool adapt = model_->has_decoder();
  double cls = 0, recon = 0;
  for (std::size_t i = 0; i < order.size(); i += tc_.batch) {
    const std::size_t m = std::min(tc_.batch, order.size() - i);
    std::vector<const Tensor*> xs;
    std::vector<int> ys;
    for (std::size_t j = i; j < i + m; ++j) {
      xs.push_back(&train.set->x[order[j]]);
      ys.push_back(train.set->y[order[j]]);
    }
    const Tensor x = models::stack_batch(xs);
    if (adapt) {
      std::uniform_int_distribution<std::size_t> pick(0, target->size() - 1);
      std::vector<const Tensor*> ts;
      for (std::size_t j = 0; j < m; ++j) ts.push_back(&target->set->x[target->index[pick(rng_)]]);
      const auto [lc, lr] = trainer_->step_adaptation(x, ys, models::stack_batch(ts));
      cls += lc * double(m);
      recon += lr * double(m);
    } else {
      cls += trainer_->step_standard(x, ys) * double(m);
    }
  }
  rec.loss = cls / double(order.size());
  rec.rec_loss = recon / double(order.size());
}

const TrialResult& TrainingSession::run(std::size_t epochs, const DataView& train, const DataView& val,
                                        const DataView* target) {
  if (train.size() == 0 || val.size() == 0) throw EmptyDataset("training and validation sets must be non-empty");
  if (result_.failed) return result_;
  if (model_->has_decoder() && (target == nullptr || target->size() == 0)) target = &train;
  const auto params = model_->all_params();
  EarlyStopper stop(tc_.patience, tc_.min_delta);
  if (epochs_done_ > 0) stop.seed(result_.best_val_loss, result_.best_epoch);
  result_.early_stopped = false;
  try {
    for (std::size_t e = 0; e < epochs; ++e) {
      EpochRecord rec;
      rec.epoch = epochs_done_ + 1;
      epoch(train, target, rec);
      const Metrics m = evaluate_metrics(*model_, val);
      if (!std::isfinite(m.loss) || !std::isfinite(rec.loss))
        throw nn::NumericalError(fmt::format("non-finite loss at epoch {}", rec.epoch));
      rec.val_loss = m.loss;
      rec.accuracy = m.accuracy;
      rec.kappa = m.kappa;
      result_.history.push_back(rec);
      ++epochs_done_;
      ++result_.epochs_run;
      const bool halt = stop.update(m.loss, rec.epoch);
      if (stop.improved()) {
        result_.best_val_loss = stop.best();
        result_.best_epoch = stop.best_epoch();
        result_.val = m;
        if (tc_.restore_best) best_ = nn::snapshot(params);
      }
      if (halt) {
        result_.early_stopped = true;
        break;
      }
    }
  } catch (const nn::NumericalError& e) {
    result_.failed = true;
    result_.message = e.what();
    return result_;
  }
  if (tc_.restore_best && !best_.empty()) nn::restore(params, best_);
  if (!tc_.restore_best) result_.val = evaluate_metrics(*model_, val);
  return result_;
}

namespace {

std::string hex(double v) { return fmt::format("{:a}", v); }

}  // namespace

void TrainingSession::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  models::write_config((dir / "config.txt").string(), model_->config());
  trainer_->save(dir / "checkpoint.jcnn");
  std::ofstream os(dir / "session.txt");
  os << "model_seed = " << model_seed_ << "\n";
  os << "epochs_done = " << epochs_done_ << "\n";
  os << "epochs_run = " << result_.epochs_run << "\n";
  os << "best_epoch = " << result_.best_epoch << "\n";
  os << "best_val_loss = " << hex(result_.best_val_loss) << "\n";
  os << "failed = " << (result_.failed ? 1 : 0) << "\n";
  os << "message = " << result_.message << "\n";
  os << "val = " << hex(result_.val.loss) << " " << hex(result_.val.accuracy) << " " << hex(result_.val.kappa) << "\n";
  os << "confusion =";
  for (long c : result_.val.confusion.cells) os << " " << c;
  os << "\n";
  std::ostringstream rs;
  rs << rng_;
  os << "rng = " << rs.str() << "\n";
  for (const auto& h : result_.history)
    os << "epoch = " << h.epoch << " " << hex(h.loss) << " " << hex(h.rec_loss) << " " << hex(h.val_loss) << " "
       << hex(h.accuracy) << " " << hex(h.kappa) << "\n";
  if (!os) throw std::runtime_error("cannot write " + (dir / "session.txt").string());
}

std::unique_ptr<TrainingSession> TrainingSession::load(const std::filesystem::path& dir, const TrainConfig& tc) {
  const models::ModelConfig cfg = models::read_config((dir / "config.txt").string());
  std::ifstream is(dir / "session.txt");
  if (!is) throw std::runtime_error("cannot read " + (dir / "session.txt").string());
  std::string line, rng_text;
  std::uint64_t seed = 0;
  TrialResult r;
  std::size_t done = 0;
  std::vector<long> cells;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    const std::string key = line.substr(0, line.find(' '));
    std::string value = eq == std::string::npos ? "" : line.substr(eq + 3);
    std::istringstream vs(value);
    auto num = [&] {
      std::string tok;
      vs >> tok;
      return std::strtod(tok.c_str(), nullptr);
    };
    if (key == "model_seed") vs >> seed;
    else if (key == "epochs_done") vs >> done;
    else if (key == "epochs_run") vs >> r.epochs_run;
    else if (key == "best_epoch") vs >> r.best_epoch;
    else if (key == "best_val_loss") r.best_val_loss = num();
    else if (key == "failed") r.failed = value == "1";
    else if (key == "message") r.message = value;
    else if (key == "val") {
      r.val.loss = num();
      r.val.accuracy = num();
      r.val.kappa = num();
    } else if (key == "confusion") {
      std::istringstream cs(line.substr(line.find('=') + 1));
      long c;
      while (cs >> c) cells.push_back(c);
    } else if (key == "rng") rng_text = value;
    else if (key == "epoch") {
      EpochRecord h;
      vs >> h.epoch;
      h.loss = num();
      h.rec_loss = num();
      h.val_loss = num();
      h.accuracy = num();
      h.kappa = num();
      r.history.push_back(h);
    }
  }
  auto s = std::make_unique<TrainingSession>(cfg, seed, tc);
  s->trainer_->load(dir / "checkpoint.jcnn");
  std::istringstream rs(rng_text);
  rs >> s->rng_;
  r.val.confusion = Confusion(cfg.classes);
  if (cells.size() == r.val.confusion.cells.size()) r.val.confusion.cells = cells;
  s->result_ = std::move(r);
  s->epochs_done_ = done;
  if (tc.restore_best) s->best_ = nn::snapshot(s->model_->all_params());
  return s;
}

TrialResult train_with_early_stopping(const models::ModelConfig& cfg, const DataView& train, const DataView& val,
                                      const TrainConfig& tc, const DataView* target,
                                      std::unique_ptr<TrainingSession>* session) {
  auto s = std::make_unique<TrainingSession>(cfg, tc.seed, tc);
  TrialResult r = s->run(tc.max_epochs, train, val, target);
  if (session) *session = std::move(s);
  return r;
}

std::string metrics_csv_header() { return "arm,seed,fold,epoch,loss,val_loss,accuracy,kappa"; }

std::string metrics_csv_line(const MetricsRow& row) {
  return fmt::format("{},{},{},{},{:.9g},{:.9g},{:.9g},{:.9g}", row.arm, row.seed, row.fold, row.rec.epoch,
                     row.rec.loss, row.rec.val_loss, row.rec.accuracy, row.rec.kappa);
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  os << metrics_csv_header() << "\n";
  for (const auto& r : rows) os << metrics_csv_line(r) << "\n";
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != metrics_csv_header()) throw std::runtime_error("unexpected metrics header in " + path.string());
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 8) throw std::runtime_error("malformed metrics line: " + line);
    MetricsRow r;
    r.arm = f[0];
    r.seed = std::stoull(f[1]);
    r.fold = std::stoi(f[2]);
    r.rec.epoch = std::stoul(f[3]);
    r.rec.loss = std::stod(f[4]);
    r.rec.val_loss = std::stod(f[5]);
    r.rec.accuracy = std::stod(f[6]);
    r.rec.kappa = std::stod(f[7]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace jcas::experiments
