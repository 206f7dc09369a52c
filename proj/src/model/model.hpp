#pragma once

#include <functional>
#include <unordered_map>
#include <string>
#include <vector>

#include "core/tape.hpp"
#include "data/features.hpp"
#include "model/config.hpp"
#include "model/dist.hpp"

namespace axf {

struct EmbedParams {
    Tensor w;  // [d_in x D]
    Tensor b;  // [D]
};

struct HeadParams {
    Tensor w;  // [D x param_count]
    Tensor b;
};

struct LayerParams {
    Tensor wq, wk, wv;                    // shared across axes (row weights for stacked)
    Tensor wq_col, wk_col, wv_col;        // stacked variant only
    Tensor ln_attn_gain, ln_attn_bias;
    Tensor ln_mid_gain, ln_mid_bias;      // stacked variant only
    Tensor ln_ff_gain, ln_ff_bias;
    Tensor ff1_w, ff1_b, ff2_w, ff2_b;
};

// padding masks for batched training; sized to the unpadded match layout
// (game and team rows and the pre-game column are always valid)
struct MatchValidity {
    std::vector<uint8_t> players;  // length P
    std::vector<uint8_t> steps;    // length T
};

// parameter leaves shared across several forwards on one tape
struct BoundParams {
    std::vector<std::pair<std::string, VarId>> ids;
    std::unordered_map<std::string, VarId> by_name;
};

struct ModelForward {
    VarId grid = kNoVar;                 // E_L, H x W' x D
    std::vector<VarId> player_raw;       // per action, P x W' x k
    std::vector<VarId> team_raw;         // per action, 2 x W' x k
    VarId outcome_raw = kNoVar;          // W' x 3
    int64_t height = 0, width = 0;
    bool has_pregame = true;
    std::vector<std::pair<std::string, VarId>> param_ids;
};

struct ForecastOutput {
    struct ActionForecast {
        std::string action;
        DistSpec dist;
        Tensor player_params;  // P x W' x k, constrained parameters
        Tensor team_params;    // 2 x W' x k
    };
    std::vector<ActionForecast> actions;
    Tensor outcome_probs;  // W' x 3, rows on the simplex
    bool has_pregame = true;

    int64_t steps() const { return outcome_probs.dim(0); }
    int64_t players() const { return actions.empty() ? 0 : actions.front().player_params.dim(0); }
    // 12 actions x (players + 2 teams) + the game outcome
    int64_t predictions_per_step() const;
    Distribution player_dist(size_t action, int64_t p, int64_t t) const;
    Distribution team_dist(size_t action, int64_t row, int64_t t) const;
};

struct TotalsForecast {
    Tensor player;  // P x W' x A expected end-of-match totals
    Tensor team;
};

class Model {
  public:
    ModelConfig config;
    EmbedParams embed_player, embed_player_strength, embed_team, embed_team_strength, embed_game, embed_game_context;
    std::vector<LayerParams> layers;
    std::vector<HeadParams> player_heads, team_heads;  // parallel to config.action_heads
    HeadParams outcome_head;

    static Model init(const ModelConfig& cfg);

    void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each_param(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    std::vector<std::string> param_names() const;
    int64_t param_count() const;
    Tensor* param_by_name(const std::string& name);

    // Builds the tape graph: embeddings, L axial transformer layers under the
    // forecast masks, then one distribution head per (action, modality).
    // `bound` shares parameter leaves across several forwards on one tape.
    ModelForward forward(Tape& tape, const MatchInputs& x, const MatchValidity* validity = nullptr,
                         bool inputs_grad = false, const BoundParams* bound = nullptr) const;

    BoundParams bind(Tape& tape) const;

    // no-grad forward with constrained output parameters
    ForecastOutput predict(const MatchInputs& x) const;

    void save(const std::string& path) const;
    static Model load(const std::string& path);
};

// E0 block assembly (value level): pre-game column from context/strength
// embeddings, live columns from the per-step tensors.
Tensor embed_inputs(const MatchInputs& x, const EmbedParams& game_ctx, const EmbedParams& game,
                    const EmbedParams& team_str, const EmbedParams& team, const EmbedParams& player_str,
                    const EmbedParams& player);

// expected totals = running + distribution mean; never below running
TotalsForecast predict_totals(const ForecastOutput& out, const RunningCounts& running);

}  // namespace axf
