#pragma once

#include <map>
#include <string>
#include <vector>

#include "data/features.hpp"
#include "data/generator.hpp"
#include "model/model.hpp"
#include "train/loss.hpp"

namespace axf {

struct TrainConfig {
    double lr = 3e-4;
    double lr_min = 0.0;
    int64_t batch_size = 8;
    int64_t total_steps = 1200;
    int64_t anneal_horizon = 0;  // 0 = total_steps
    double validation_fraction = 0.1;
    uint64_t seed = 1;
    std::map<std::string, double> loss_weights;  // per action, default 1
    double clip_norm = 1.0;                      // 0 disables clipping
    int64_t eval_interval = 100;
    int64_t eval_matches = 48;  // validation forward cap per evaluation

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
    static TrainConfig from_json_file(const std::string& path);
};

// matches padded to the batch maxima, with per-match validity masks; padded
// cells contribute exactly zero loss and zero gradients
struct PaddedBatch {
    std::vector<MatchInputs> inputs;
    std::vector<TargetBundle> targets;
    std::vector<MatchValidity> validity;
    int64_t p_max = 0;
    int64_t t_max = 0;

    static PaddedBatch build(const std::vector<const AssembledMatch*>& matches);
};

struct TrainMetricsRow {
    int64_t step = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::vector<std::pair<std::string, double>> per_target;  // from the last train batch
};

struct TrainResult {
    Model model;  // best-validation parameters
    std::vector<TrainMetricsRow> history;
    double best_val_loss = 0.0;
    int64_t best_step = -1;
    double first_train_loss = 0.0;
    double last_train_loss = 0.0;
    std::vector<int64_t> train_ids, val_ids;
};

// deterministic split by match-id hash
bool is_validation_match(int64_t match_id, double validation_fraction);

// Full loop: assembles features (strength from prior matches only), batches
// with padding, Adam + cosine annealing, periodic validation, best-model
// checkpointing. Deterministic for a fixed seed.
TrainResult train(const std::vector<MatchRecord>& dataset, const ModelConfig& model_cfg, const TrainConfig& train_cfg);

void write_metrics_csv(const std::string& path, const std::vector<TrainMetricsRow>& history);

// per-action mean-rate Poisson baseline fit on the train split; returns
// per-action mean NLL on the validation split (player and team predictions
// pooled), using the same remaining-count targets the model sees.
struct BaselineComparison {
    std::vector<std::string> actions;
    std::vector<double> baseline_nll;  // mean per prediction
    std::vector<double> model_nll;
    int wins = 0;  // actions where the model beats the baseline
};
BaselineComparison compare_with_constant_rate_baseline(const Model& model, const std::vector<MatchRecord>& dataset,
                                                       double validation_fraction);

// feature assembly used by both the trainer and the inference paths
std::vector<AssembledMatch> assemble_dataset(const std::vector<MatchRecord>& dataset);

}  // namespace axf
