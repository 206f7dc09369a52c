#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "model/dist.hpp"

namespace axf {

enum class AttentionVariant { Additive, Stacked };

// Which structural pieces are live. The study variants:
//   full model:    temporal + agent attention, pre-game column
//   w/o agent:     temporal only
//   w/o temporal:  agent only; pre-game features concatenated onto each step
//   w/o pre-game:  strength/context inputs dropped entirely
//   stacked:       row then column attention with distinct weights
struct AblationFlags {
    bool temporal_attention = true;
    bool agent_attention = true;
    bool pregame = true;
    AttentionVariant variant = AttentionVariant::Additive;

    void validate() const;
    std::string mode_name() const;
};

struct HeadSpec {
    std::string action;
    DistSpec dist;
};

struct FeatureDims {
    int64_t player = 0;
    int64_t player_strength = 0;
    int64_t team = 0;
    int64_t team_strength = 0;
    int64_t game = 0;
    int64_t game_context = 0;
};

struct ModelConfig {
    int64_t latent_dim = 32;
    int64_t layers = 2;
    int heads = 1;
    int64_t ff_hidden = 64;
    std::vector<HeadSpec> action_heads;  // one per action target
    DistSpec outcome{DistFamily::Discrete, 3};
    FeatureDims dims;
    AblationFlags ablation;
    uint64_t init_seed = 1;

    // all twelve actions as Poisson heads plus the 3-way outcome
    static ModelConfig defaults(const FeatureDims& dims);

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
    static ModelConfig from_json_file(const std::string& path);
};

}  // namespace axf
