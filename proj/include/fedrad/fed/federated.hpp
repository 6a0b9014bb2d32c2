#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "fedrad/core/csv.hpp"
#include "fedrad/core/log.hpp"
#include "fedrad/core/parallel.hpp"
#include "fedrad/fed/models.hpp"

namespace fedrad::fed {

struct FederationConfig {
  std::size_t local_epochs = 1;       // E
  std::size_t rounds = 300;           // T
  std::size_t finetune_rounds = 50;   // T_c
  std::size_t local_finetune_epochs = 20;
  double lr = 0.05;                   // federated rounds
  double lr_local = 0.02;             // centralized, local and pooled SGD
  double weight_decay = 1e-5;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const {
    require(local_epochs >= 1, ErrorCode::Config, "local_epochs (E) must be >= 1");
    require(lr > 0.0 && lr_local > 0.0, ErrorCode::Config, "learning rates must be > 0");
    require(weight_decay >= 0.0, ErrorCode::Config, "weight_decay must be >= 0");
    require(batch_size >= 1, ErrorCode::Config, "batch_size must be >= 1");
  }
};

// One participant: training and validation samples owned by the caller.
template <class S>
struct Client {
  std::string id;
  std::vector<const S*> train;
  std::vector<const S*> val;
};

struct LocalUpdate {
  ModelParams delta;
  double train_loss = 0.0;  // mean batch loss over the last epoch
  std::size_t steps = 0;
};

// E epochs of minibatch SGD from w_start: w <- w - lr (g + wd w). Epoch e shuffles with
// derive_seed(seed, e). Returns w_end - w_start.
template <TrainableModel M>
LocalUpdate local_train(const M& model, const ModelParams& w_start, std::span<const typename M::Sample* const> data,
                        std::size_t epochs, double lr, double weight_decay, std::size_t batch_size,
                        std::uint64_t seed) {
  require(!data.empty(), ErrorCode::InvalidArgument, "local_train needs at least one sample");
  require(w_start.size() == model.n_params(), ErrorCode::DimensionMismatch, "parameter length mismatch");
  ModelParams w = w_start;
  LocalUpdate out;
  std::vector<std::size_t> order(data.size());
  std::vector<const typename M::Sample*> batch;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, e));
    shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) batch.push_back(data[order[i]]);
      const auto lg = model.loss_and_gradient(w, batch);
      if (!std::isfinite(lg.loss) || !all_finite(lg.grad)) {
        std::string ids;
        for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i)
          ids += (ids.empty() ? "" : ",") + std::to_string(order[i]);
        fail(ErrorCode::NonFiniteLoss, "non-finite loss/gradient at epoch " + std::to_string(e) + ", step " +
                                           std::to_string(out.steps) + ", batch samples [" + ids +
                                           "], loss=" + std::to_string(lg.loss) + ", lr=" + std::to_string(lr));
      }
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * (lg.grad[i] + weight_decay * w[i]);
      loss_sum += lg.loss;
      ++batches;
      ++out.steps;
    }
    out.train_loss = loss_sum / static_cast<double>(batches);
  }
  out.delta.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out.delta[i] = w[i] - w_start[i];
  return out;
}

struct ClientUpdate {
  std::string id;
  ModelParams delta;
  std::size_t n = 0;
};

struct Aggregate {
  ModelParams params;
  double weight_sum = 0.0;
};

// w + sum_k (n_k / N) dw_k, summed in ascending client id order.
inline Aggregate fedavg_aggregate(const ModelParams& w, std::vector<ClientUpdate> updates) {
  require(!updates.empty(), ErrorCode::InvalidArgument, "no client updates to aggregate");
  std::sort(updates.begin(), updates.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::size_t total = 0;
  for (const auto& u : updates) {
    require(u.delta.size() == w.size(), ErrorCode::DimensionMismatch,
            "update from '" + u.id + "' has " + std::to_string(u.delta.size()) + " values, model has " +
                std::to_string(w.size()));
    require(u.n > 0, ErrorCode::InvalidArgument, "client '" + u.id + "' reported zero samples");
    total += u.n;
  }
  Aggregate out;
  out.params = w;
  for (const auto& u : updates) {
    const double weight = static_cast<double>(u.n) / static_cast<double>(total);
    out.weight_sum += weight;
    for (std::size_t i = 0; i < w.size(); ++i) out.params[i] += weight * u.delta[i];
  }
  return out;
}

// ---- round logs --------------------------------------------------------------

struct RoundLog {
  std::size_t round = 0;  // 1-based; round t holds w_t after aggregation
  std::map<std::string, double> train_loss;
  double val_metric = std::numeric_limits<double>::quiet_NaN();
  double weight_sum = 0.0;
  bool selected = false;
};

inline void write_round_logs_csv(const std::filesystem::path& path, const std::vector<RoundLog>& logs) {
  auto os = csv::open(path);
  csv::write_row(os, {"round", "institution_id", "train_loss", "val_metric", "selected"});
  for (const auto& r : logs)
    for (const auto& [id, loss] : r.train_loss)
      csv::write_row(os, {std::to_string(r.round), id, csv::format_double(loss), csv::format_double(r.val_metric),
                          r.selected ? "1" : "0"});
}

// Higher is better. NaN means "no validation signal" and never wins a comparison.
using EvalFn = std::function<double(const ModelParams&)>;

struct FedResult {
  ModelParams best;
  std::size_t best_round = 0;  // 0 only when no round ran
  ModelParams final_params;
  std::vector<RoundLog> logs;
};

inline std::uint64_t round_seed(std::uint64_t seed, std::size_t round, const std::string& client) {
  return derive_seed(seed, round, hash_id(client));
}

namespace detail {

// Keeps the post-round checkpoint with the highest metric; the earliest wins ties.
// Without any finite metric the last round is kept.
inline void select_best(FedResult& r) {
  if (r.logs.empty()) return;
  std::size_t best = r.logs.size() - 1;
  double best_v = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < r.logs.size(); ++i) {
    const double v = r.logs[i].val_metric;
    if (std::isnan(v)) continue;
    if (!any || v > best_v) {
      best_v = v;
      best = i;
      any = true;
    }
  }
  r.logs[best].selected = true;
  r.best_round = r.logs[best].round;
}

}  // namespace detail

// T rounds of {broadcast, local_train on every client with training data, aggregate}.
// Round t (0-based) seeds client k's local run with round_seed(cfg.seed, t, id_k).
template <TrainableModel M>
FedResult run_fedavg(const M& model, const FederationConfig& cfg, const std::vector<Client<typename M::Sample>>& clients,
                     const ModelParams& w0, std::size_t rounds, double lr, const EvalFn& eval) {
  cfg.validate();
  require(!clients.empty(), ErrorCode::InvalidArgument, "federation has no institutions");
  require(w0.size() == model.n_params(), ErrorCode::DimensionMismatch, "initial parameter length mismatch");
  std::vector<const Client<typename M::Sample>*> active;
  for (const auto& c : clients) {
    if (c.train.empty()) {
      log::warn("institution '{}' has no training samples; excluded from aggregation", c.id);
      continue;
    }
    active.push_back(&c);
  }
  require(!active.empty(), ErrorCode::InvalidArgument, "no institution has training samples");

  FedResult res;
  ModelParams w = w0;
  std::vector<ModelParams> checkpoints;
  for (std::size_t t = 0; t < rounds; ++t) {
    std::vector<LocalUpdate> local(active.size());
    parallel_for(active.size(), cfg.jobs, [&](std::size_t i) {
      const auto& c = *active[i];
      local[i] = local_train(model, w, std::span<const typename M::Sample* const>(c.train), cfg.local_epochs, lr,
                             cfg.weight_decay, cfg.batch_size, round_seed(cfg.seed, t, c.id));
    });
    std::vector<ClientUpdate> updates;
    RoundLog log_entry;
    log_entry.round = t + 1;
    for (std::size_t i = 0; i < active.size(); ++i) {
      updates.push_back({active[i]->id, std::move(local[i].delta), active[i]->train.size()});
      log_entry.train_loss[active[i]->id] = local[i].train_loss;
    }
    auto agg = fedavg_aggregate(w, std::move(updates));
    require(all_finite(agg.params), ErrorCode::NonFiniteLoss,
            "non-finite parameters after round " + std::to_string(t + 1));
    w = std::move(agg.params);
    log_entry.weight_sum = agg.weight_sum;
    log_entry.val_metric = eval ? eval(w) : std::numeric_limits<double>::quiet_NaN();
    log::debug("round {}: weight sum {:.17g}, val {}", t + 1, agg.weight_sum, log_entry.val_metric);
    res.logs.push_back(std::move(log_entry));
    checkpoints.push_back(w);
  }
  res.final_params = w;
  detail::select_best(res);
  res.best = res.best_round == 0 ? w0 : checkpoints[res.best_round - 1];
  return res;
}

// Plain SGD on one dataset: `epochs` epochs in blocks of `epochs_per_checkpoint`, each
// block applied as w += dw and evaluated. With one client this is exactly what
// run_fedavg does, so K = 1 FedAvg reproduces it bit for bit.
template <TrainableModel M>
FedResult run_sgd(const M& model, const FederationConfig& cfg, const Client<typename M::Sample>& data,
                  const ModelParams& w0, std::size_t epochs, std::size_t epochs_per_checkpoint, double lr,
                  const EvalFn& eval) {
  require(epochs_per_checkpoint >= 1, ErrorCode::Config, "epochs_per_checkpoint must be >= 1");
  require(!data.train.empty(), ErrorCode::InvalidArgument, "'" + data.id + "' has no training samples");
  FedResult res;
  ModelParams w = w0;
  std::vector<ModelParams> checkpoints;
  const std::size_t blocks = (epochs + epochs_per_checkpoint - 1) / epochs_per_checkpoint;
  for (std::size_t t = 0; t < blocks; ++t) {
    const std::size_t e = std::min(epochs_per_checkpoint, epochs - t * epochs_per_checkpoint);
    auto up = local_train(model, w, std::span<const typename M::Sample* const>(data.train), e, lr, cfg.weight_decay,
                          cfg.batch_size, round_seed(cfg.seed, t, data.id));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += up.delta[i];
    require(all_finite(w), ErrorCode::NonFiniteLoss, "non-finite parameters after epoch block " + std::to_string(t + 1));
    RoundLog entry;
    entry.round = t + 1;
    entry.train_loss[data.id] = up.train_loss;
    entry.weight_sum = 1.0;
    entry.val_metric = eval ? eval(w) : std::numeric_limits<double>::quiet_NaN();
    res.logs.push_back(std::move(entry));
    checkpoints.push_back(w);
  }
  res.final_params = w;
  detail::select_best(res);
  res.best = res.best_round == 0 ? w0 : checkpoints[res.best_round - 1];
  return res;
}

// ---- personalization ---------------------------------------------------------

template <class S>
struct ClusterFederation {
  int cluster = 0;                 // 1-based
  std::vector<Client<S>> clients;  // only institutions with samples in the cluster

  std::size_t train_size() const {
    std::size_t n = 0;
    for (const auto& c : clients) n += c.train.size();
    return n;
  }
};

using ClusterEvalFn = std::function<double(int cluster, const ModelParams&)>;

struct ClusteredResult {
  std::map<int, ModelParams> models;
  std::map<int, FedResult> runs;  // nonempty clusters only
  std::vector<int> empty_clusters;
};

// For each cluster with training data: FedAvg for T_c rounds from w_init over its
// institutions, weights n_{c,k}/N_c. Empty clusters keep w_init.
template <TrainableModel M>
ClusteredResult run_clustered_finetune(const M& model, const FederationConfig& cfg,
                                       const std::vector<ClusterFederation<typename M::Sample>>& clusters,
                                       const ModelParams& w_init, const ClusterEvalFn& eval) {
  ClusteredResult out;
  bool any = false;
  for (const auto& cf : clusters) {
    if (cf.train_size() == 0) {
      out.empty_clusters.push_back(cf.cluster);
      out.models[cf.cluster] = w_init;
      log::info("cluster {} has no training samples; using w_init", cf.cluster);
      continue;
    }
    any = true;
    std::vector<Client<typename M::Sample>> members;
    for (const auto& c : cf.clients)
      if (!c.train.empty()) members.push_back(c);
    const int id = cf.cluster;
    EvalFn fn = eval ? EvalFn([&eval, id](const ModelParams& w) { return eval(id, w); }) : EvalFn{};
    auto r = run_fedavg(model, cfg, members, w_init, cfg.finetune_rounds, cfg.lr, fn);
    out.models[id] = r.best;
    out.runs.emplace(id, std::move(r));
  }
  require(any, ErrorCode::InvalidArgument, "every cluster is empty");
  return out;
}

using ClientEvalFn = std::function<double(const std::string& id, const ModelParams&)>;

// Plain SGD per institution from w_init, one checkpoint per epoch.
template <TrainableModel M>
std::map<std::string, FedResult> local_finetune_baseline(const M& model, const FederationConfig& cfg,
                                                         const std::vector<Client<typename M::Sample>>& clients,
                                                         const ModelParams& w_init, const ClientEvalFn& eval) {
  std::map<std::string, FedResult> out;
  for (const auto& c : clients) {
    if (c.train.empty()) {
      log::warn("institution '{}' has no training samples; keeping w_init", c.id);
      FedResult r;
      r.best = r.final_params = w_init;
      out.emplace(c.id, std::move(r));
      continue;
    }
    const std::string id = c.id;
    EvalFn fn = eval ? EvalFn([&eval, id](const ModelParams& w) { return eval(id, w); }) : EvalFn{};
    out.emplace(c.id, run_sgd(model, cfg, c, w_init, cfg.local_finetune_epochs, 1, cfg.lr_local, fn));
  }
  return out;
}

// Pools a cluster's institutions into one dataset in ascending institution order. The
// pooled id joins institution ids with '+', so a one-institution cluster reuses that
// institution's seed stream.
template <class S>
Client<S> pool_clients(std::vector<Client<S>> clients) {
  std::sort(clients.begin(), clients.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  Client<S> out;
  for (const auto& c : clients) {
    if (c.train.empty() && c.val.empty()) continue;
    out.id += (out.id.empty() ? "" : "+") + c.id;
    out.train.insert(out.train.end(), c.train.begin(), c.train.end());
    out.val.insert(out.val.end(), c.val.begin(), c.val.end());
  }
  return out;
}

// Centralized SGD per cluster on the pooled cluster data (the "ideal" upper reference).
template <TrainableModel M>
ClusteredResult pooled_finetune_ideal(const M& model, const FederationConfig& cfg,
                                      const std::vector<ClusterFederation<typename M::Sample>>& clusters,
                                      const ModelParams& w_init, const ClusterEvalFn& eval) {
  ClusteredResult out;
  for (const auto& cf : clusters) {
    const auto pooled = pool_clients(cf.clients);
    if (pooled.train.empty()) {
      out.empty_clusters.push_back(cf.cluster);
      out.models[cf.cluster] = w_init;
      continue;
    }
    const int id = cf.cluster;
    EvalFn fn = eval ? EvalFn([&eval, id](const ModelParams& w) { return eval(id, w); }) : EvalFn{};
    auto r = run_sgd(model, cfg, pooled, w_init, cfg.local_finetune_epochs, 1, cfg.lr_local, fn);
    out.models[id] = r.best;
    out.runs.emplace(id, std::move(r));
  }
  return out;
}

}  // namespace fedrad::fed
