#include "model/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "data/events.hpp"

namespace axf {

using nlohmann::json;

void AblationFlags::validate() const {
    if (!temporal_attention && !agent_attention)
        throw ValidationError("at least one attention axis must be enabled");
    if (variant == AttentionVariant::Stacked && (!temporal_attention || !agent_attention))
        throw ValidationError("the stacked variant uses both axes");
    if (!temporal_attention && !pregame)
        throw ValidationError("w/o-temporal folds pre-game features into steps; they cannot also be dropped");
}

std::string AblationFlags::mode_name() const {
    if (variant == AttentionVariant::Stacked) return "stacked";
    if (!temporal_attention) return "wo_temporal";
    if (!agent_attention) return "wo_agent";
    if (!pregame) return "wo_pregame";
    return "ours";
}

ModelConfig ModelConfig::defaults(const FeatureDims& dims) {
    ModelConfig cfg;
    cfg.dims = dims;
    for (const auto& a : action_names()) cfg.action_heads.push_back({a, DistSpec{DistFamily::Poisson, 0}});
    return cfg;
}

void ModelConfig::validate() const {
    if (latent_dim < 1 || layers < 1 || ff_hidden < 1) throw ValidationError("model dims must be positive");
    if (heads < 1 || latent_dim % heads != 0) throw ValidationError("heads must divide latent_dim");
    if (action_heads.empty()) throw ValidationError("no action heads configured");
    std::set<std::string> seen;
    for (const auto& h : action_heads) {
        if (!seen.insert(h.action).second) throw ValidationError("duplicate head for action " + h.action);
        h.dist.validate();
    }
    outcome.validate();
    if (outcome.family != DistFamily::Discrete) throw ValidationError("outcome head must be discrete");
    ablation.validate();
    if (dims.player < 1 || dims.team < 1 || dims.game < 1) throw ValidationError("feature dims unset");
    if (ablation.pregame && (dims.player_strength < 1 || dims.team_strength < 1 || dims.game_context < 1))
        throw ValidationError("pre-game feature dims unset");
}

namespace {

json spec_to_json(const DistSpec& s) {
    json j{{"family", family_name(s.family)}};
    if (s.family == DistFamily::Discrete) j["categories"] = s.categories;
    return j;
}

DistSpec spec_from_json(const json& j) {
    DistSpec s;
    s.family = family_from_name(j.at("family").get<std::string>());
    s.categories = j.value("categories", 0);
    return s;
}

}  // namespace

std::string ModelConfig::to_json() const {
    json heads_j = json::array();
    for (const auto& h : action_heads) heads_j.push_back({{"action", h.action}, {"dist", spec_to_json(h.dist)}});
    json j{{"latent_dim", latent_dim},
           {"layers", layers},
           {"heads", heads},
           {"ff_hidden", ff_hidden},
           {"action_heads", heads_j},
           {"outcome", spec_to_json(outcome)},
           {"init_seed", init_seed},
           {"dims",
            {{"player", dims.player},
             {"player_strength", dims.player_strength},
             {"team", dims.team},
             {"team_strength", dims.team_strength},
             {"game", dims.game},
             {"game_context", dims.game_context}}},
           {"ablation",
            {{"temporal_attention", ablation.temporal_attention},
             {"agent_attention", ablation.agent_attention},
             {"pregame", ablation.pregame},
             {"variant", ablation.variant == AttentionVariant::Stacked ? "stacked" : "additive"}}}};
    return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    ModelConfig cfg;
    cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
    cfg.layers = j.value("layers", cfg.layers);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.ff_hidden = j.value("ff_hidden", cfg.ff_hidden);
    cfg.init_seed = j.value("init_seed", cfg.init_seed);
    if (j.contains("action_heads")) {
        for (const auto& h : j["action_heads"])
            cfg.action_heads.push_back({h.at("action").get<std::string>(), spec_from_json(h.at("dist"))});
    } else {
        for (const auto& a : action_names()) cfg.action_heads.push_back({a, DistSpec{DistFamily::Poisson, 0}});
    }
    if (j.contains("outcome")) cfg.outcome = spec_from_json(j["outcome"]);
    if (j.contains("dims")) {
        const json& d = j["dims"];
        cfg.dims.player = d.value("player", int64_t{0});
        cfg.dims.player_strength = d.value("player_strength", int64_t{0});
        cfg.dims.team = d.value("team", int64_t{0});
        cfg.dims.team_strength = d.value("team_strength", int64_t{0});
        cfg.dims.game = d.value("game", int64_t{0});
        cfg.dims.game_context = d.value("game_context", int64_t{0});
    }
    if (j.contains("ablation")) {
        const json& ab = j["ablation"];
        cfg.ablation.temporal_attention = ab.value("temporal_attention", true);
        cfg.ablation.agent_attention = ab.value("agent_attention", true);
        cfg.ablation.pregame = ab.value("pregame", true);
        cfg.ablation.variant =
            ab.value("variant", "additive") == std::string("stacked") ? AttentionVariant::Stacked : AttentionVariant::Additive;
    }
    return cfg;
}

ModelConfig ModelConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

}  // namespace axf
